#include "treebark/augment.hpp"

#include "treebark/error.hpp"
#include "treebark/preprocess.hpp"
#include "treebark/random.hpp"

#include <algorithm>
#include <cmath>

namespace treebark {

std::string to_string(AugmentOp op) {
    switch (op) {
        case AugmentOp::zoom: return "zoom";
        case AugmentOp::flip_top_bottom: return "flip_top_bottom";
        case AugmentOp::random_distortion: return "random_distortion";
        case AugmentOp::random_brightness: return "random_brightness";
    }
    return "unknown";
}

AugmentOp parse_augment_op(const std::string& name) {
    if (name == "zoom") return AugmentOp::zoom;
    if (name == "flip_top_bottom") return AugmentOp::flip_top_bottom;
    if (name == "random_distortion") return AugmentOp::random_distortion;
    if (name == "random_brightness") return AugmentOp::random_brightness;
    throw ValidationError("unknown augmentation op: " + name);
}

AugmentationSpec AugmentationSpec::zoom(double probability, double lo, double hi) {
    return {.op = AugmentOp::zoom, .probability = probability, .min_factor = lo, .max_factor = hi};
}

AugmentationSpec AugmentationSpec::flip_top_bottom(double probability) {
    return {.op = AugmentOp::flip_top_bottom, .probability = probability};
}

AugmentationSpec AugmentationSpec::random_distortion(double probability, int grid_w, int grid_h, double magnitude) {
    return {.op = AugmentOp::random_distortion,
            .probability = probability,
            .grid_width = grid_w,
            .grid_height = grid_h,
            .magnitude = magnitude};
}

AugmentationSpec AugmentationSpec::random_brightness(double probability, double lo, double hi) {
    return {.op = AugmentOp::random_brightness, .probability = probability, .min_factor = lo, .max_factor = hi};
}

void AugmentationSpec::validate() const {
    const auto name = to_string(op);
    if (!(probability > 0.0 && probability <= 1.0)) {
        throw ValidationError(name + ": probability must lie in (0, 1]");
    }
    switch (op) {
        case AugmentOp::zoom:
            if (!std::isfinite(min_factor) || !std::isfinite(max_factor) || min_factor < 1.0 || min_factor > max_factor) {
                throw ValidationError("zoom: factor range must satisfy 1 <= min <= max");
            }
            break;
        case AugmentOp::random_brightness:
            if (!std::isfinite(min_factor) || !std::isfinite(max_factor) || min_factor <= 0.0 || min_factor > max_factor) {
                throw ValidationError("random_brightness: factor range must satisfy 0 < min <= max");
            }
            break;
        case AugmentOp::random_distortion:
            if (grid_width < 1 || grid_height < 1 || !std::isfinite(magnitude) || magnitude < 0.0) {
                throw ValidationError("random_distortion: grid must be >= 1x1 and magnitude finite and >= 0");
            }
            break;
        case AugmentOp::flip_top_bottom:
            break;
    }
}

nlohmann::json AugmentationSpec::to_json() const {
    nlohmann::json doc{{"op", to_string(op)}, {"probability", probability}};
    switch (op) {
        case AugmentOp::zoom:
        case AugmentOp::random_brightness:
            doc["min_factor"] = min_factor;
            doc["max_factor"] = max_factor;
            break;
        case AugmentOp::random_distortion:
            doc["grid_width"] = grid_width;
            doc["grid_height"] = grid_height;
            doc["magnitude"] = magnitude;
            break;
        case AugmentOp::flip_top_bottom:
            break;
    }
    return doc;
}

AugmentationSpec AugmentationSpec::from_json(const nlohmann::json& doc) {
    AugmentationSpec spec;
    try {
        spec.op = parse_augment_op(doc.at("op").get<std::string>());
        switch (spec.op) {
            case AugmentOp::zoom: spec = zoom(); break;
            case AugmentOp::flip_top_bottom: spec = flip_top_bottom(); break;
            case AugmentOp::random_distortion: spec = random_distortion(); break;
            case AugmentOp::random_brightness: spec = random_brightness(); break;
        }
        spec.probability = doc.value("probability", spec.probability);
        spec.min_factor = doc.value("min_factor", spec.min_factor);
        spec.max_factor = doc.value("max_factor", spec.max_factor);
        spec.grid_width = doc.value("grid_width", spec.grid_width);
        spec.grid_height = doc.value("grid_height", spec.grid_height);
        spec.magnitude = doc.value("magnitude", spec.magnitude);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed augmentation spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::vector<AugmentationSpec> default_augmentations() {
    return {AugmentationSpec::zoom(), AugmentationSpec::flip_top_bottom(), AugmentationSpec::random_distortion(),
            AugmentationSpec::random_brightness()};
}

nlohmann::json AppliedOp::to_json() const {
    nlohmann::json doc{{"op", to_string(op)}};
    switch (op) {
        case AugmentOp::zoom:
        case AugmentOp::random_brightness:
            doc["factor"] = factor;
            break;
        case AugmentOp::random_distortion:
            doc["grid_width"] = grid_width;
            doc["grid_height"] = grid_height;
            doc["displacements"] = displacements;
            break;
        case AugmentOp::flip_top_bottom:
            break;
    }
    return doc;
}

AppliedOp AppliedOp::from_json(const nlohmann::json& doc) {
    AppliedOp op;
    try {
        op.op = parse_augment_op(doc.at("op").get<std::string>());
        op.factor = doc.value("factor", 1.0);
        op.grid_width = doc.value("grid_width", 0);
        op.grid_height = doc.value("grid_height", 0);
        if (doc.contains("displacements")) op.displacements = doc.at("displacements").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed applied op: ") + e.what());
    }
    return op;
}

namespace {

std::uint8_t clamp_round(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Image flip_vertical(const Image& in) {
    Image out(in.width, in.height);
    const std::size_t row = static_cast<std::size_t>(in.width) * Image::kChannels;
    for (int y = 0; y < in.height; ++y) {
        std::copy_n(in.ptr(in.height - 1 - y, 0), row, out.ptr(y, 0));
    }
    return out;
}

Image zoom_in(const Image& in, double factor) {
    const int crop_w = std::max(1, static_cast<int>(std::lround(in.width / factor)));
    const int crop_h = std::max(1, static_cast<int>(std::lround(in.height / factor)));
    const int x0 = (in.width - crop_w) / 2;
    const int y0 = (in.height - crop_h) / 2;
    Image crop(crop_w, crop_h);
    for (int y = 0; y < crop_h; ++y) {
        std::copy_n(in.ptr(y0 + y, x0), static_cast<std::size_t>(crop_w) * Image::kChannels, crop.ptr(y, 0));
    }
    return resize(crop, in.width, in.height, Interpolation::bilinear);
}

Image scale_brightness(const Image& in, double factor) {
    Image out(in.width, in.height);
    std::transform(in.pixels.begin(), in.pixels.end(), out.pixels.begin(),
                   [factor](std::uint8_t v) { return clamp_round(v * factor); });
    return out;
}

double sample_bilinear(const Image& in, double sx, double sy, int c) {
    sx = std::clamp(sx, 0.0, static_cast<double>(in.width - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(in.height - 1));
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const int x1 = std::min(x0 + 1, in.width - 1);
    const int y1 = std::min(y0 + 1, in.height - 1);
    const double fx = sx - x0;
    const double fy = sy - y0;
    const double top = in.at(y0, x0, c) * (1.0 - fx) + in.at(y0, x1, c) * fx;
    const double bottom = in.at(y1, x0, c) * (1.0 - fx) + in.at(y1, x1, c) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

// Piecewise-bilinear grid warp: vertex displacements are interpolated across
// each cell and the source is sampled at the displaced location. Border
// vertices never move, so the frame of the image stays put.
Image grid_distort(const Image& in, int grid_w, int grid_h, const std::vector<int>& disp) {
    const int vx = grid_w + 1;
    if (disp.size() != static_cast<std::size_t>(vx * (grid_h + 1) * 2)) {
        throw ValidationError("random_distortion: displacement table has the wrong size");
    }
    const double cell_w = static_cast<double>(in.width) / grid_w;
    const double cell_h = static_cast<double>(in.height) / grid_h;
    Image out(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
        const double gy = std::min((y + 0.5) / cell_h, grid_h - 1e-9);
        const int cy = std::min(static_cast<int>(gy), grid_h - 1);
        const double ty = gy - cy;
        for (int x = 0; x < in.width; ++x) {
            const double gx = std::min((x + 0.5) / cell_w, grid_w - 1e-9);
            const int cx = std::min(static_cast<int>(gx), grid_w - 1);
            const double tx = gx - cx;
            auto d = [&](int i, int j, int axis) {
                return static_cast<double>(disp[static_cast<std::size_t>((j * vx + i) * 2 + axis)]);
            };
            double offset[2];
            for (int axis = 0; axis < 2; ++axis) {
                const double top = d(cx, cy, axis) * (1 - tx) + d(cx + 1, cy, axis) * tx;
                const double bottom = d(cx, cy + 1, axis) * (1 - tx) + d(cx + 1, cy + 1, axis) * tx;
                offset[axis] = top * (1 - ty) + bottom * ty;
            }
            for (int c = 0; c < Image::kChannels; ++c) {
                out.at(y, x, c) = clamp_round(sample_bilinear(in, x + offset[0], y + offset[1], c));
            }
        }
    }
    return out;
}

AppliedOp sample_op(const AugmentationSpec& spec, Rng& rng) {
    AppliedOp op;
    op.op = spec.op;
    switch (spec.op) {
        case AugmentOp::zoom:
        case AugmentOp::random_brightness:
            op.factor = rng.uniform(spec.min_factor, spec.max_factor);
            break;
        case AugmentOp::random_distortion: {
            op.grid_width = spec.grid_width;
            op.grid_height = spec.grid_height;
            const int vx = spec.grid_width + 1;
            const int vy = spec.grid_height + 1;
            const auto limit = static_cast<std::int64_t>(std::floor(spec.magnitude));
            op.displacements.assign(static_cast<std::size_t>(vx * vy * 2), 0);
            for (int j = 1; j < vy - 1; ++j) {
                for (int i = 1; i < vx - 1; ++i) {
                    for (int axis = 0; axis < 2; ++axis) {
                        op.displacements[static_cast<std::size_t>((j * vx + i) * 2 + axis)] =
                            static_cast<int>(rng.between(-limit, limit));
                    }
                }
            }
            break;
        }
        case AugmentOp::flip_top_bottom:
            break;
    }
    return op;
}

}  // namespace

Image apply_op(const Image& image, const AppliedOp& op) {
    switch (op.op) {
        case AugmentOp::zoom: return zoom_in(image, op.factor);
        case AugmentOp::flip_top_bottom: return flip_vertical(image);
        case AugmentOp::random_distortion: return grid_distort(image, op.grid_width, op.grid_height, op.displacements);
        case AugmentOp::random_brightness: return scale_brightness(image, op.factor);
    }
    throw ValidationError("unknown augmentation op");
}

Image replay_ops(const Image& image, const std::vector<AppliedOp>& ops) {
    Image current = image;
    for (const auto& op : ops) current = apply_op(current, op);
    return current;
}

AugmentationResult apply_augmentation(const Image& image, const std::vector<AugmentationSpec>& specs, std::uint64_t seed,
                                      const AugmentOptions& options) {
    if (image.empty()) {
        throw ValidationError("cannot augment an empty image");
    }
    if (specs.empty()) {
        throw ValidationError("augmentation needs at least one op");
    }
    for (const auto& spec : specs) spec.validate();

    Rng rng(seed);
    AugmentationResult result;
    for (const auto& spec : specs) {
        if (rng.bernoulli(spec.probability)) {
            result.ops.push_back(sample_op(spec, rng));
        }
    }
    if (result.ops.empty() && options.force_at_least_one) {
        const auto& forced = specs[rng.below(specs.size())];
        result.ops.push_back(sample_op(forced, rng));
    }
    result.image = replay_ops(image, result.ops);
    return result;
}

}  // namespace treebark
