#pragma once

#include "treebark/layers.hpp"

#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace treebark {

enum class BackboneKind { resnet101_v2, resnet101, resnet50, vgg19, inception_v3, mobilenet };

std::string to_string(BackboneKind kind);
/// Accepts the canonical names above. Throws ValidationError otherwise.
BackboneKind parse_backbone(const std::string& name);

/// Convolutional feature extractor without its classification top.
///
/// Sub-layers are registered under the layer names of the corresponding
/// Keras application, so a converted weight file maps onto them by name.
class Backbone : public torch::nn::Module {
public:
    explicit Backbone(BackboneKind kind) : kind_(kind) {}

    BackboneKind kind() const { return kind_; }

    /// Name the backbone reports in a model summary (e.g. "resnet101v2").
    virtual std::string summary_name(std::int64_t input_size) const = 0;

    /// NCHW input already in the backbone's native range -> NCHW feature map.
    virtual torch::Tensor forward(const torch::Tensor& x) = 0;

    /// Maps NCHW RGB values in [0, 1] to the range the backbone was published with.
    torch::Tensor native_scaling(const torch::Tensor& x) const;

    /// Names of the direct sub-layers in construction order.
    const std::vector<std::string>& layer_names() const { return layer_names_; }

protected:
    std::shared_ptr<layers::Conv2d> conv(const std::string& name, const layers::ConvOptions& options, at::Generator& gen);
    std::shared_ptr<layers::BatchNorm> batch_norm(const std::string& name, const layers::BatchNormOptions& options);

private:
    BackboneKind kind_;
    std::vector<std::string> layer_names_;
};

std::shared_ptr<Backbone> make_backbone(BackboneKind kind, at::Generator& generator);

}  // namespace treebark
