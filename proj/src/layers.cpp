#include "treebark/layers.hpp"

#include "treebark/error.hpp"

#include <cmath>

namespace treebark::layers {

void glorot_uniform_(torch::Tensor& t, std::int64_t fan_in, std::int64_t fan_out, at::Generator& generator) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    torch::NoGradGuard no_grad;
    t.uniform_(-limit, limit, generator);
}

Conv2d::Conv2d(const ConvOptions& options, at::Generator& generator) : options_(options) {
    if (options.in_channels % options.groups != 0) {
        throw ValidationError("conv: in_channels must be divisible by groups");
    }
    auto kernel = torch::empty({options.out_channels, options.in_channels / options.groups, options.kernel_h, options.kernel_w});
    const auto receptive = options.kernel_h * options.kernel_w;
    if (options.groups == 1) {
        glorot_uniform_(kernel, receptive * options.in_channels, receptive * options.out_channels, generator);
    } else {
        const auto multiplier = options.out_channels / options.groups;
        glorot_uniform_(kernel, receptive * options.in_channels, receptive * multiplier, generator);
    }
    kernel_ = register_parameter("kernel", kernel);
    if (options.use_bias) {
        bias_ = register_parameter("bias", torch::zeros({options.out_channels}));
    }
}

namespace {

std::pair<std::int64_t, std::int64_t> same_padding(std::int64_t in, std::int64_t kernel, std::int64_t stride) {
    const auto out = (in + stride - 1) / stride;
    const auto total = std::max<std::int64_t>((out - 1) * stride + kernel - in, 0);
    return {total / 2, total - total / 2};
}

}  // namespace

torch::Tensor Conv2d::forward(const torch::Tensor& x) {
    const auto& o = options_;
    const std::optional<torch::Tensor> bias = bias_.defined() ? std::optional<torch::Tensor>(bias_) : std::nullopt;
    if (o.padding == Padding::valid) {
        return torch::conv2d(x, kernel_, bias, torch::IntArrayRef{o.stride, o.stride}, torch::IntArrayRef{0, 0}, torch::IntArrayRef{1, 1}, o.groups);
    }
    const auto [top, bottom] = same_padding(x.size(2), o.kernel_h, o.stride);
    const auto [left, right] = same_padding(x.size(3), o.kernel_w, o.stride);
    if (top == bottom && left == right) {
        return torch::conv2d(x, kernel_, bias, torch::IntArrayRef{o.stride, o.stride}, torch::IntArrayRef{top, left}, torch::IntArrayRef{1, 1}, o.groups);
    }
    return torch::conv2d(zero_pad(x, top, bottom, left, right), kernel_, bias, torch::IntArrayRef{o.stride, o.stride},
                         torch::IntArrayRef{0, 0}, torch::IntArrayRef{1, 1}, o.groups);
}

BatchNorm::BatchNorm(const BatchNormOptions& options) : options_(options) {
    if (options.scale) gamma_ = register_parameter("gamma", torch::ones({options.channels}));
    if (options.center) beta_ = register_parameter("beta", torch::zeros({options.channels}));
    moving_mean_ = register_buffer("moving_mean", torch::zeros({options.channels}));
    moving_variance_ = register_buffer("moving_variance", torch::ones({options.channels}));
}

torch::Tensor BatchNorm::forward(const torch::Tensor& x) {
    const std::optional<torch::Tensor> weight = gamma_.defined() ? std::optional<torch::Tensor>(gamma_) : std::nullopt;
    const std::optional<torch::Tensor> bias = beta_.defined() ? std::optional<torch::Tensor>(beta_) : std::nullopt;
    // torch's momentum is the weight of the new batch statistic
    return torch::batch_norm(x, weight, bias, moving_mean_, moving_variance_, is_training(), 1.0 - options_.momentum,
                             options_.epsilon, false);
}

Dense::Dense(std::int64_t in_features, std::int64_t out_features, at::Generator& generator)
    : in_(in_features), out_(out_features) {
    auto kernel = torch::empty({in_features, out_features});
    glorot_uniform_(kernel, in_features, out_features, generator);
    kernel_ = register_parameter("kernel", kernel);
    bias_ = register_parameter("bias", torch::zeros({out_features}));
}

torch::Tensor Dense::forward(const torch::Tensor& x) { return torch::addmm(bias_, x, kernel_); }

torch::Tensor zero_pad(const torch::Tensor& x, std::int64_t top, std::int64_t bottom, std::int64_t left, std::int64_t right) {
    return torch::constant_pad_nd(x, {left, right, top, bottom}, 0.0);
}

torch::Tensor max_pool(const torch::Tensor& x, std::int64_t kernel, std::int64_t stride) {
    if (kernel == 1) {
        return x.index({torch::indexing::Slice(), torch::indexing::Slice(),
                        torch::indexing::Slice(torch::indexing::None, torch::indexing::None, stride),
                        torch::indexing::Slice(torch::indexing::None, torch::indexing::None, stride)});
    }
    return torch::max_pool2d(x, kernel, stride);
}

torch::Tensor avg_pool_same3(const torch::Tensor& x) {
    return torch::avg_pool2d(x, 3, 1, 1, false, /*count_include_pad=*/false);
}

}  // namespace treebark::layers
