#pragma once

#include "treebark/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

enum class AugmentOp { zoom, flip_top_bottom, random_distortion, random_brightness };

std::string to_string(AugmentOp op);
/// Throws ValidationError for unknown names.
AugmentOp parse_augment_op(const std::string& name);

/// One stochastic image operation and the probability that it fires.
///
/// Parameter meaning depends on the op:
///   zoom              - scale factor drawn from [min_factor, max_factor] (>= 1);
///                       the centre crop is resized back to the source size
///   random_brightness - multiplicative factor drawn from [min_factor, max_factor]
///   random_distortion - grid_width x grid_height cells; interior grid vertices
///                       move by up to `magnitude` pixels
///   flip_top_bottom   - no parameters
struct AugmentationSpec {
    AugmentOp op = AugmentOp::flip_top_bottom;
    double probability = 0.5;
    double min_factor = 1.0;
    double max_factor = 1.0;
    int grid_width = 4;
    int grid_height = 4;
    double magnitude = 8.0;

    static AugmentationSpec zoom(double probability = 0.5, double lo = 1.0, double hi = 1.3);
    static AugmentationSpec flip_top_bottom(double probability = 0.5);
    static AugmentationSpec random_distortion(double probability = 0.5, int grid_w = 4, int grid_h = 4, double magnitude = 8.0);
    static AugmentationSpec random_brightness(double probability = 0.5, double lo = 0.7, double hi = 1.3);

    /// Throws ValidationError on probability outside (0,1] or a degenerate range.
    void validate() const;

    nlohmann::json to_json() const;
    static AugmentationSpec from_json(const nlohmann::json& doc);
};

/// The four operations with their default parameters.
std::vector<AugmentationSpec> default_augmentations();

/// A fired operation with every sampled parameter, enough to replay it exactly.
struct AppliedOp {
    AugmentOp op = AugmentOp::flip_top_bottom;
    double factor = 1.0;                 // zoom / brightness
    int grid_width = 0;                  // distortion
    int grid_height = 0;
    std::vector<int> displacements;      // distortion: (dx, dy) per grid vertex, row-major

    nlohmann::json to_json() const;
    static AppliedOp from_json(const nlohmann::json& doc);

    friend bool operator==(const AppliedOp&, const AppliedOp&) = default;
};

struct AugmentationResult {
    Image image;
    std::vector<AppliedOp> ops;
};

struct AugmentOptions {
    /// When no op fires by chance, one uniformly chosen op is applied anyway.
    bool force_at_least_one = true;
};

/// Runs each spec in order; each fires independently with its probability,
/// drawn from a generator seeded with `seed`. Output keeps the input size.
AugmentationResult apply_augmentation(const Image& image, const std::vector<AugmentationSpec>& specs,
                                      std::uint64_t seed, const AugmentOptions& options = {});

/// Re-applies a recorded op sequence; reproduces apply_augmentation bit-exactly.
Image replay_ops(const Image& image, const std::vector<AppliedOp>& ops);

Image apply_op(const Image& image, const AppliedOp& op);

}  // namespace treebark
