#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>

namespace treebark::layers {

/// "same" follows the TensorFlow convention: when the total padding is odd
/// the extra row/column goes to the bottom/right.
enum class Padding { valid, same };

struct ConvOptions {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t kernel_h = 1;
    std::int64_t kernel_w = 1;
    std::int64_t stride = 1;
    Padding padding = Padding::valid;
    bool use_bias = true;
    /// in_channels for depthwise convolutions (one filter per input channel).
    std::int64_t groups = 1;
};

/// 2-D convolution on NCHW tensors. Parameters are `kernel`
/// (out, in / groups, kh, kw) and optionally `bias` (out).
class Conv2d : public torch::nn::Module {
public:
    Conv2d(const ConvOptions& options, at::Generator& generator);

    torch::Tensor forward(const torch::Tensor& x);

    const ConvOptions& options() const { return options_; }

private:
    ConvOptions options_;
    torch::Tensor kernel_;
    torch::Tensor bias_;
};

struct BatchNormOptions {
    std::int64_t channels = 0;
    double epsilon = 1e-3;
    /// Fraction of the old moving statistic kept on each training update.
    double momentum = 0.99;
    bool scale = true;   // learnable gamma
    bool center = true;  // learnable beta
};

/// Batch normalisation over the channel axis of NCHW tensors. Parameters
/// `gamma`/`beta`; running statistics live in the non-trainable buffers
/// `moving_mean`/`moving_variance`. Uses batch statistics only in training mode.
class BatchNorm : public torch::nn::Module {
public:
    explicit BatchNorm(const BatchNormOptions& options);

    torch::Tensor forward(const torch::Tensor& x);

private:
    BatchNormOptions options_;
    torch::Tensor gamma_;
    torch::Tensor beta_;
    torch::Tensor moving_mean_;
    torch::Tensor moving_variance_;
};

/// Fully connected layer with a row-major `kernel` of shape (in, out).
class Dense : public torch::nn::Module {
public:
    Dense(std::int64_t in_features, std::int64_t out_features, at::Generator& generator);

    torch::Tensor forward(const torch::Tensor& x);

    std::int64_t in_features() const { return in_; }
    std::int64_t out_features() const { return out_; }

private:
    std::int64_t in_;
    std::int64_t out_;
    torch::Tensor kernel_;
    torch::Tensor bias_;
};

/// Explicit zero padding (top, bottom, left, right) on NCHW tensors.
torch::Tensor zero_pad(const torch::Tensor& x, std::int64_t top, std::int64_t bottom, std::int64_t left, std::int64_t right);

torch::Tensor max_pool(const torch::Tensor& x, std::int64_t kernel, std::int64_t stride);

/// 3x3 stride-1 "same" average pooling that ignores padded cells in the mean.
torch::Tensor avg_pool_same3(const torch::Tensor& x);

/// Glorot/Xavier uniform initialisation: U(-l, l), l = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform_(torch::Tensor& t, std::int64_t fan_in, std::int64_t fan_out, at::Generator& generator);

}  // namespace treebark::layers
