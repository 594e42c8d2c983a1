#include "treebark/image.hpp"

#include "treebark/error.hpp"
#include "treebark/hash.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstring>

namespace treebark {

namespace {

Image from_rgb_mat(const cv::Mat& rgb) {
    Image image(rgb.cols, rgb.rows);
    for (int y = 0; y < rgb.rows; ++y) {
        std::memcpy(image.ptr(y, 0), rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
    }
    return image;
}

}  // namespace

std::optional<DecodeResult> try_decode_image(const std::filesystem::path& path) {
    cv::Mat raw;
    try {
        raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception&) {
        return std::nullopt;
    }
    if (raw.empty() || raw.depth() != CV_8U || raw.cols <= 0 || raw.rows <= 0) {
        return std::nullopt;
    }
    DecodeResult result;
    cv::Mat rgb;
    switch (raw.channels()) {
        case 1:
            cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB);
            result.warning = "grayscale image replicated to 3 channels: " + path.string();
            break;
        case 3:
            cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
            break;
        case 4:
            cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB);
            result.warning = "alpha channel dropped: " + path.string();
            break;
        default:
            return std::nullopt;
    }
    result.image = from_rgb_mat(rgb);
    return result;
}

Image load_image(const std::filesystem::path& path) {
    auto decoded = try_decode_image(path);
    if (!decoded) {
        throw IoError("cannot decode image: " + path.string());
    }
    return std::move(decoded->image);
}

void save_image(const Image& image, const std::filesystem::path& path) {
    if (image.empty()) {
        throw ValidationError("refusing to write an empty image: " + path.string());
    }
    cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), bgr);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write image " + path.string() + ": " + e.what());
    }
    if (!ok) {
        throw IoError("cannot write image: " + path.string());
    }
}

std::string content_hash(const Image& image) {
    std::vector<std::byte> bytes(8 + image.pixels.size());
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(image.width), static_cast<std::uint32_t>(image.height)};
    std::memcpy(bytes.data(), dims, sizeof(dims));
    std::memcpy(bytes.data() + 8, image.pixels.data(), image.pixels.size());
    return sha256_hex(bytes);
}

}  // namespace treebark
