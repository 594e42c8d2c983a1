#pragma once

#include "treebark/image.hpp"

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

enum class Interpolation { bilinear, nearest };

std::string to_string(Interpolation interpolation);
Interpolation parse_interpolation(const std::string& name);

struct PreprocessConfig {
    int height = 160;
    int width = 160;
    static constexpr int kChannels = 3;
    Interpolation interpolation = Interpolation::bilinear;

    void validate() const;

    nlohmann::json to_json() const;
    static PreprocessConfig from_json(const nlohmann::json& doc);

    friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

/// Direct (stretching) resize to width x height; aspect ratio is not kept.
/// Bilinear uses half-pixel centres; nearest maps output (i, j) to input
/// (floor(i * sy), floor(j * sx)). Same-size resizes are exact copies.
Image resize(const Image& image, int width, int height, Interpolation interpolation);

/// Throws ValidationError on a zero-dimension input.
Image resize_image(const Image& image, const PreprocessConfig& config);

/// v -> v / 255, interleaved HWC order.
std::vector<float> normalize(const Image& image);

/// v -> round(255 v), the inverse of normalize on 8-bit data.
Image denormalize(const std::vector<float>& values, int width, int height);

}  // namespace treebark
