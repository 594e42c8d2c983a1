#include "treebark/preprocess.hpp"

#include "treebark/error.hpp"

#include <algorithm>
#include <cmath>

namespace treebark {

std::string to_string(Interpolation interpolation) {
    return interpolation == Interpolation::bilinear ? "bilinear" : "nearest";
}

Interpolation parse_interpolation(const std::string& name) {
    if (name == "bilinear") return Interpolation::bilinear;
    if (name == "nearest") return Interpolation::nearest;
    throw ValidationError("unknown interpolation: " + name);
}

void PreprocessConfig::validate() const {
    if (height <= 0 || width <= 0) {
        throw ValidationError("preprocess target size must be positive");
    }
}

nlohmann::json PreprocessConfig::to_json() const {
    return {{"height", height}, {"width", width}, {"channels", kChannels}, {"interpolation", to_string(interpolation)}};
}

PreprocessConfig PreprocessConfig::from_json(const nlohmann::json& doc) {
    PreprocessConfig config;
    try {
        config.height = doc.value("height", config.height);
        config.width = doc.value("width", config.width);
        if (doc.value("channels", kChannels) != kChannels) {
            throw ValidationError("only 3-channel RGB input is supported");
        }
        config.interpolation = parse_interpolation(doc.value("interpolation", std::string("bilinear")));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed preprocess config: ") + e.what());
    }
    config.validate();
    return config;
}

Image resize(const Image& image, int width, int height, Interpolation interpolation) {
    if (image.empty()) {
        throw ValidationError("cannot resize a zero-dimension image");
    }
    if (width <= 0 || height <= 0) {
        throw ValidationError("resize target must be positive");
    }
    if (width == image.width && height == image.height) {
        return image;
    }
    Image out(width, height);
    const double sx = static_cast<double>(image.width) / width;
    const double sy = static_cast<double>(image.height) / height;

    if (interpolation == Interpolation::nearest) {
        for (int y = 0; y < height; ++y) {
            const int src_y = std::min(static_cast<int>(std::floor(y * sy)), image.height - 1);
            for (int x = 0; x < width; ++x) {
                const int src_x = std::min(static_cast<int>(std::floor(x * sx)), image.width - 1);
                for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = image.at(src_y, src_x, c);
            }
        }
        return out;
    }

    struct Tap {
        int lo;
        int hi;
        double frac;
    };
    auto taps = [](int out_size, int in_size, double scale) {
        std::vector<Tap> result(static_cast<std::size_t>(out_size));
        for (int i = 0; i < out_size; ++i) {
            const double src = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in_size - 1));
            const int lo = static_cast<int>(std::floor(src));
            result[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, in_size - 1), src - lo};
        }
        return result;
    };
    const auto xs = taps(width, image.width, sx);
    const auto ys = taps(height, image.height, sy);
    for (int y = 0; y < height; ++y) {
        const auto& ty = ys[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
            const auto& tx = xs[static_cast<std::size_t>(x)];
            for (int c = 0; c < Image::kChannels; ++c) {
                const double top = image.at(ty.lo, tx.lo, c) * (1.0 - tx.frac) + image.at(ty.lo, tx.hi, c) * tx.frac;
                const double bottom = image.at(ty.hi, tx.lo, c) * (1.0 - tx.frac) + image.at(ty.hi, tx.hi, c) * tx.frac;
                const double v = top * (1.0 - ty.frac) + bottom * ty.frac;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

Image resize_image(const Image& image, const PreprocessConfig& config) {
    config.validate();
    return resize(image, config.width, config.height, config.interpolation);
}

std::vector<float> normalize(const Image& image) {
    std::vector<float> out(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), out.begin(),
                   [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
    return out;
}

Image denormalize(const std::vector<float>& values, int width, int height) {
    if (values.size() != static_cast<std::size_t>(width) * height * Image::kChannels) {
        throw ValidationError("denormalize: value count does not match dimensions");
    }
    Image out(width, height);
    std::transform(values.begin(), values.end(), out.pixels.begin(), [](float v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(static_cast<double>(v) * 255.0), 0L, 255L));
    });
    return out;
}

}  // namespace treebark
