#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace treebark {

/// 8-bit interleaved RGB raster, row-major (height x width x 3).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    static constexpr int kChannels = 3;

    bool empty() const { return width == 0 || height == 0; }

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }

    std::uint8_t* ptr(int y, int x) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * kChannels; }
    const std::uint8_t* ptr(int y, int x) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * kChannels;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

struct DecodeResult {
    Image image;
    /// Set when the source was not already 8-bit RGB (e.g. grayscale replicated to 3 channels).
    std::optional<std::string> warning;
};

/// Decodes any raster OpenCV understands into RGB. Returns nullopt when the
/// file cannot be decoded or is not 8 bits per channel.
std::optional<DecodeResult> try_decode_image(const std::filesystem::path& path);

/// Like try_decode_image but throws IoError naming the path.
Image load_image(const std::filesystem::path& path);

/// Writes a raster; the codec is chosen from the extension. Throws IoError.
void save_image(const Image& image, const std::filesystem::path& path);

/// SHA-256 of dimensions + pixel bytes, independent of any file encoding.
std::string content_hash(const Image& image);

}  // namespace treebark
