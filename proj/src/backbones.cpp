#include "treebark/backbones.hpp"

#include "treebark/error.hpp"

namespace treebark {

using layers::BatchNorm;
using layers::BatchNormOptions;
using layers::Conv2d;
using layers::ConvOptions;
using layers::Padding;

std::string to_string(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::resnet101_v2: return "resnet101_v2";
        case BackboneKind::resnet101: return "resnet101";
        case BackboneKind::resnet50: return "resnet50";
        case BackboneKind::vgg19: return "vgg19";
        case BackboneKind::inception_v3: return "inception_v3";
        case BackboneKind::mobilenet: return "mobilenet";
    }
    return "unknown";
}

BackboneKind parse_backbone(const std::string& name) {
    for (auto kind : {BackboneKind::resnet101_v2, BackboneKind::resnet101, BackboneKind::resnet50, BackboneKind::vgg19,
                      BackboneKind::inception_v3, BackboneKind::mobilenet}) {
        if (to_string(kind) == name) return kind;
    }
    throw ValidationError("unsupported backbone: " + name);
}

std::shared_ptr<Conv2d> Backbone::conv(const std::string& name, const ConvOptions& options, at::Generator& gen) {
    layer_names_.push_back(name);
    return register_module(name, std::make_shared<Conv2d>(options, gen));
}

std::shared_ptr<BatchNorm> Backbone::batch_norm(const std::string& name, const BatchNormOptions& options) {
    layer_names_.push_back(name);
    return register_module(name, std::make_shared<BatchNorm>(options));
}

torch::Tensor Backbone::native_scaling(const torch::Tensor& x) const {
    switch (kind_) {
        case BackboneKind::resnet101_v2:
        case BackboneKind::inception_v3:
        case BackboneKind::mobilenet:
            return x * 2.0 - 1.0;
        case BackboneKind::resnet101:
        case BackboneKind::resnet50:
        case BackboneKind::vgg19: {
            // BGR order, 0..255, ImageNet channel means subtracted
            const auto mean = torch::tensor({103.939f, 116.779f, 123.68f}).view({1, 3, 1, 1});
            return x.flip(1) * 255.0 - mean;
        }
    }
    return x;
}

namespace {

constexpr double kResNetEpsilon = 1.001e-5;

// ---------------------------------------------------------------- ResNet V2

class ResNetV2 final : public Backbone {
public:
    ResNetV2(BackboneKind kind, std::vector<int> blocks_per_stack, at::Generator& gen) : Backbone(kind) {
        conv1_ = conv("conv1_conv", {.in_channels = 3, .out_channels = 64, .kernel_h = 7, .kernel_w = 7, .stride = 2}, gen);
        const std::int64_t filters[] = {64, 128, 256, 512};
        std::int64_t channels = 64;
        for (std::size_t s = 0; s < blocks_per_stack.size(); ++s) {
            const int blocks = blocks_per_stack[s];
            const std::int64_t last_stride = s + 1 == blocks_per_stack.size() ? 1 : 2;
            for (int b = 1; b <= blocks; ++b) {
                const auto name = "conv" + std::to_string(s + 2) + "_block" + std::to_string(b);
                const std::int64_t stride = b == blocks ? last_stride : 1;
                blocks_.push_back(make_block(name, channels, filters[s], stride, b == 1, gen));
                channels = 4 * filters[s];
            }
        }
        post_bn_ = batch_norm("post_bn", {.channels = channels, .epsilon = kResNetEpsilon});
    }

    std::string summary_name(std::int64_t) const override {
        return kind() == BackboneKind::resnet101_v2 ? "resnet101v2" : "resnetv2";
    }

    torch::Tensor forward(const torch::Tensor& input) override {
        auto x = conv1_->forward(layers::zero_pad(input, 3, 3, 3, 3));
        x = layers::max_pool(layers::zero_pad(x, 1, 1, 1, 1), 3, 2);
        for (auto& block : blocks_) {
            auto preact = torch::relu(block.preact_bn->forward(x));
            auto shortcut = block.shortcut ? block.shortcut->forward(preact)
                                           : (block.stride > 1 ? layers::max_pool(x, 1, block.stride) : x);
            auto y = torch::relu(block.bn1->forward(block.conv1->forward(preact)));
            y = block.conv2->forward(layers::zero_pad(y, 1, 1, 1, 1));
            y = torch::relu(block.bn2->forward(y));
            x = shortcut + block.conv3->forward(y);
        }
        return torch::relu(post_bn_->forward(x));
    }

private:
    struct Block {
        std::shared_ptr<BatchNorm> preact_bn;
        std::shared_ptr<Conv2d> shortcut;
        std::shared_ptr<Conv2d> conv1;
        std::shared_ptr<BatchNorm> bn1;
        std::shared_ptr<Conv2d> conv2;
        std::shared_ptr<BatchNorm> bn2;
        std::shared_ptr<Conv2d> conv3;
        std::int64_t stride = 1;
    };

    Block make_block(const std::string& name, std::int64_t in, std::int64_t filters, std::int64_t stride, bool conv_shortcut,
                     at::Generator& gen) {
        Block b;
        b.stride = stride;
        b.preact_bn = batch_norm(name + "_preact_bn", {.channels = in, .epsilon = kResNetEpsilon});
        if (conv_shortcut) {
            b.shortcut = conv(name + "_0_conv", {.in_channels = in, .out_channels = 4 * filters, .stride = stride}, gen);
        }
        b.conv1 = conv(name + "_1_conv", {.in_channels = in, .out_channels = filters, .use_bias = false}, gen);
        b.bn1 = batch_norm(name + "_1_bn", {.channels = filters, .epsilon = kResNetEpsilon});
        b.conv2 = conv(name + "_2_conv",
                       {.in_channels = filters, .out_channels = filters, .kernel_h = 3, .kernel_w = 3, .stride = stride, .use_bias = false},
                       gen);
        b.bn2 = batch_norm(name + "_2_bn", {.channels = filters, .epsilon = kResNetEpsilon});
        b.conv3 = conv(name + "_3_conv", {.in_channels = filters, .out_channels = 4 * filters}, gen);
        return b;
    }

    std::shared_ptr<Conv2d> conv1_;
    std::vector<Block> blocks_;
    std::shared_ptr<BatchNorm> post_bn_;
};

// ---------------------------------------------------------------- ResNet V1

class ResNetV1 final : public Backbone {
public:
    ResNetV1(BackboneKind kind, std::vector<int> blocks_per_stack, at::Generator& gen) : Backbone(kind) {
        conv1_ = conv("conv1_conv", {.in_channels = 3, .out_channels = 64, .kernel_h = 7, .kernel_w = 7, .stride = 2}, gen);
        bn1_ = batch_norm("conv1_bn", {.channels = 64, .epsilon = kResNetEpsilon});
        const std::int64_t filters[] = {64, 128, 256, 512};
        std::int64_t channels = 64;
        for (std::size_t s = 0; s < blocks_per_stack.size(); ++s) {
            for (int b = 1; b <= blocks_per_stack[s]; ++b) {
                const auto name = "conv" + std::to_string(s + 2) + "_block" + std::to_string(b);
                const std::int64_t stride = (b == 1 && s > 0) ? 2 : 1;
                blocks_.push_back(make_block(name, channels, filters[s], stride, b == 1, gen));
                channels = 4 * filters[s];
            }
        }
    }

    std::string summary_name(std::int64_t) const override {
        return kind() == BackboneKind::resnet50 ? "resnet50" : "resnet101";
    }

    torch::Tensor forward(const torch::Tensor& input) override {
        auto x = conv1_->forward(layers::zero_pad(input, 3, 3, 3, 3));
        x = torch::relu(bn1_->forward(x));
        x = layers::max_pool(layers::zero_pad(x, 1, 1, 1, 1), 3, 2);
        for (auto& block : blocks_) {
            auto shortcut = block.shortcut ? block.shortcut_bn->forward(block.shortcut->forward(x)) : x;
            auto y = torch::relu(block.bn1->forward(block.conv1->forward(x)));
            y = torch::relu(block.bn2->forward(block.conv2->forward(y)));
            y = block.bn3->forward(block.conv3->forward(y));
            x = torch::relu(shortcut + y);
        }
        return x;
    }

private:
    struct Block {
        std::shared_ptr<Conv2d> shortcut;
        std::shared_ptr<BatchNorm> shortcut_bn;
        std::shared_ptr<Conv2d> conv1;
        std::shared_ptr<BatchNorm> bn1;
        std::shared_ptr<Conv2d> conv2;
        std::shared_ptr<BatchNorm> bn2;
        std::shared_ptr<Conv2d> conv3;
        std::shared_ptr<BatchNorm> bn3;
    };

    Block make_block(const std::string& name, std::int64_t in, std::int64_t filters, std::int64_t stride, bool conv_shortcut,
                     at::Generator& gen) {
        Block b;
        if (conv_shortcut) {
            b.shortcut = conv(name + "_0_conv", {.in_channels = in, .out_channels = 4 * filters, .stride = stride}, gen);
            b.shortcut_bn = batch_norm(name + "_0_bn", {.channels = 4 * filters, .epsilon = kResNetEpsilon});
        }
        b.conv1 = conv(name + "_1_conv", {.in_channels = in, .out_channels = filters, .stride = stride}, gen);
        b.bn1 = batch_norm(name + "_1_bn", {.channels = filters, .epsilon = kResNetEpsilon});
        b.conv2 = conv(name + "_2_conv",
                       {.in_channels = filters, .out_channels = filters, .kernel_h = 3, .kernel_w = 3, .padding = Padding::same},
                       gen);
        b.bn2 = batch_norm(name + "_2_bn", {.channels = filters, .epsilon = kResNetEpsilon});
        b.conv3 = conv(name + "_3_conv", {.in_channels = filters, .out_channels = 4 * filters}, gen);
        b.bn3 = batch_norm(name + "_3_bn", {.channels = 4 * filters, .epsilon = kResNetEpsilon});
        return b;
    }

    std::shared_ptr<Conv2d> conv1_;
    std::shared_ptr<BatchNorm> bn1_;
    std::vector<Block> blocks_;
};

// ---------------------------------------------------------------- VGG19

class Vgg19 final : public Backbone {
public:
    explicit Vgg19(at::Generator& gen) : Backbone(BackboneKind::vgg19) {
        const std::vector<std::pair<int, std::int64_t>> stages = {{2, 64}, {2, 128}, {4, 256}, {4, 512}, {4, 512}};
        std::int64_t channels = 3;
        for (std::size_t s = 0; s < stages.size(); ++s) {
            std::vector<std::shared_ptr<Conv2d>> stage;
            for (int c = 1; c <= stages[s].first; ++c) {
                const auto name = "block" + std::to_string(s + 1) + "_conv" + std::to_string(c);
                stage.push_back(conv(name,
                                     {.in_channels = channels, .out_channels = stages[s].second, .kernel_h = 3, .kernel_w = 3,
                                      .padding = Padding::same},
                                     gen));
                channels = stages[s].second;
            }
            stages_.push_back(std::move(stage));
        }
    }

    std::string summary_name(std::int64_t) const override { return "vgg19"; }

    torch::Tensor forward(const torch::Tensor& input) override {
        auto x = input;
        for (auto& stage : stages_) {
            for (auto& c : stage) x = torch::relu(c->forward(x));
            x = layers::max_pool(x, 2, 2);
        }
        return x;
    }

private:
    std::vector<std::vector<std::shared_ptr<Conv2d>>> stages_;
};

// ---------------------------------------------------------------- MobileNet (v1, alpha 1)

class MobileNet final : public Backbone {
public:
    explicit MobileNet(at::Generator& gen) : Backbone(BackboneKind::mobilenet) {
        conv1_ = conv("conv1", {.in_channels = 3, .out_channels = 32, .kernel_h = 3, .kernel_w = 3, .stride = 2,
                                .padding = Padding::same, .use_bias = false},
                      gen);
        conv1_bn_ = batch_norm("conv1_bn", {.channels = 32});
        const std::vector<std::pair<std::int64_t, std::int64_t>> plan = {
            {64, 1}, {128, 2}, {128, 1}, {256, 2}, {256, 1}, {512, 2}, {512, 1},
            {512, 1}, {512, 1}, {512, 1}, {512, 1}, {1024, 2}, {1024, 1}};
        std::int64_t channels = 32;
        for (std::size_t i = 0; i < plan.size(); ++i) {
            const auto id = std::to_string(i + 1);
            const auto [filters, stride] = plan[i];
            Block b;
            b.stride = stride;
            b.dw = conv("conv_dw_" + id,
                        {.in_channels = channels, .out_channels = channels, .kernel_h = 3, .kernel_w = 3, .stride = stride,
                         .padding = stride == 1 ? Padding::same : Padding::valid, .use_bias = false, .groups = channels},
                        gen);
            b.dw_bn = batch_norm("conv_dw_" + id + "_bn", {.channels = channels});
            b.pw = conv("conv_pw_" + id, {.in_channels = channels, .out_channels = filters, .use_bias = false}, gen);
            b.pw_bn = batch_norm("conv_pw_" + id + "_bn", {.channels = filters});
            blocks_.push_back(b);
            channels = filters;
        }
    }

    std::string summary_name(std::int64_t input_size) const override {
        return "mobilenet_1.00_" + std::to_string(input_size);
    }

    torch::Tensor forward(const torch::Tensor& input) override {
        auto relu6 = [](const torch::Tensor& t) { return torch::clamp(t, 0.0, 6.0); };
        auto x = relu6(conv1_bn_->forward(conv1_->forward(input)));
        for (auto& b : blocks_) {
            if (b.stride > 1) x = layers::zero_pad(x, 0, 1, 0, 1);
            x = relu6(b.dw_bn->forward(b.dw->forward(x)));
            x = relu6(b.pw_bn->forward(b.pw->forward(x)));
        }
        return x;
    }

private:
    struct Block {
        std::shared_ptr<Conv2d> dw;
        std::shared_ptr<BatchNorm> dw_bn;
        std::shared_ptr<Conv2d> pw;
        std::shared_ptr<BatchNorm> pw_bn;
        std::int64_t stride = 1;
    };

    std::shared_ptr<Conv2d> conv1_;
    std::shared_ptr<BatchNorm> conv1_bn_;
    std::vector<Block> blocks_;
};

// ---------------------------------------------------------------- Inception V3

class InceptionV3 final : public Backbone {
public:
    explicit InceptionV3(at::Generator& gen) : Backbone(BackboneKind::inception_v3), gen_(&gen) {
        stem_.push_back(unit(3, 32, 3, 3, 2, Padding::valid));
        stem_.push_back(unit(32, 32, 3, 3, 1, Padding::valid));
        stem_.push_back(unit(32, 64, 3, 3));
        stem2_.push_back(unit(64, 80, 1, 1, 1, Padding::valid));
        stem2_.push_back(unit(80, 192, 3, 3, 1, Padding::valid));

        std::int64_t ch = 192;
        for (std::int64_t pool_filters : {32, 64, 64}) {
            Mixed m;
            m.kind = Mixed::Kind::a;
            m.branches = {{unit(ch, 64, 1, 1)},
                          {unit(ch, 48, 1, 1), unit(48, 64, 5, 5)},
                          {unit(ch, 64, 1, 1), unit(64, 96, 3, 3), unit(96, 96, 3, 3)}};
            m.pool_branch = {unit(ch, pool_filters, 1, 1)};
            mixed_.push_back(std::move(m));
            ch = 64 + 64 + 96 + pool_filters;
        }
        {
            Mixed m;
            m.kind = Mixed::Kind::reduce_a;
            m.branches = {{unit(ch, 384, 3, 3, 2, Padding::valid)},
                          {unit(ch, 64, 1, 1), unit(64, 96, 3, 3), unit(96, 96, 3, 3, 2, Padding::valid)}};
            mixed_.push_back(std::move(m));
            ch = 384 + 96 + ch;
        }
        for (std::int64_t f : {128, 160, 160, 192}) {
            Mixed m;
            m.kind = Mixed::Kind::b;
            m.branches = {{unit(ch, 192, 1, 1)},
                          {unit(ch, f, 1, 1), unit(f, f, 1, 7), unit(f, 192, 7, 1)},
                          {unit(ch, f, 1, 1), unit(f, f, 7, 1), unit(f, f, 1, 7), unit(f, f, 7, 1), unit(f, 192, 1, 7)}};
            m.pool_branch = {unit(ch, 192, 1, 1)};
            mixed_.push_back(std::move(m));
            ch = 768;
        }
        {
            Mixed m;
            m.kind = Mixed::Kind::reduce_b;
            m.branches = {{unit(ch, 192, 1, 1), unit(192, 320, 3, 3, 2, Padding::valid)},
                          {unit(ch, 192, 1, 1), unit(192, 192, 1, 7), unit(192, 192, 7, 1),
                           unit(192, 192, 3, 3, 2, Padding::valid)}};
            mixed_.push_back(std::move(m));
            ch = 320 + 192 + ch;
        }
        for (int i = 0; i < 2; ++i) {
            Mixed m;
            m.kind = Mixed::Kind::c;
            // branch order: 1x1 | 3x3 stem, 1x3, 3x1 | 3x3dbl stem (2), 1x3, 3x1
            m.branches = {{unit(ch, 320, 1, 1)},
                          {unit(ch, 384, 1, 1), unit(384, 384, 1, 3), unit(384, 384, 3, 1)},
                          {unit(ch, 448, 1, 1), unit(448, 384, 3, 3), unit(384, 384, 1, 3), unit(384, 384, 3, 1)}};
            m.pool_branch = {unit(ch, 192, 1, 1)};
            mixed_.push_back(std::move(m));
            ch = 2048;
        }
    }

    std::string summary_name(std::int64_t) const override { return "inception_v3"; }

    torch::Tensor forward(const torch::Tensor& input) override {
        auto x = input;
        for (auto& u : stem_) x = u.forward(x);
        x = layers::max_pool(x, 3, 2);
        for (auto& u : stem2_) x = u.forward(x);
        x = layers::max_pool(x, 3, 2);
        for (auto& m : mixed_) x = m.forward(x);
        return x;
    }

private:
    struct Unit {
        std::shared_ptr<Conv2d> conv;
        std::shared_ptr<BatchNorm> bn;
        torch::Tensor forward(const torch::Tensor& x) const { return torch::relu(bn->forward(conv->forward(x))); }
    };

    struct Mixed {
        enum class Kind { a, reduce_a, b, reduce_b, c } kind = Kind::a;
        std::vector<std::vector<Unit>> branches;
        std::vector<Unit> pool_branch;

        static torch::Tensor chain(const std::vector<Unit>& units, torch::Tensor x, std::size_t from, std::size_t to) {
            for (std::size_t i = from; i < to; ++i) x = units[i].forward(x);
            return x;
        }

        torch::Tensor forward(const torch::Tensor& x) const {
            std::vector<torch::Tensor> outs;
            if (kind == Kind::c) {
                outs.push_back(branches[0][0].forward(x));
                auto b3 = branches[1][0].forward(x);
                outs.push_back(torch::cat({branches[1][1].forward(b3), branches[1][2].forward(b3)}, 1));
                auto d = chain(branches[2], x, 0, 2);
                outs.push_back(torch::cat({branches[2][2].forward(d), branches[2][3].forward(d)}, 1));
            } else {
                for (const auto& branch : branches) outs.push_back(chain(branch, x, 0, branch.size()));
            }
            if (kind == Kind::reduce_a || kind == Kind::reduce_b) {
                outs.push_back(layers::max_pool(x, 3, 2));
            } else {
                outs.push_back(chain(pool_branch, layers::avg_pool_same3(x), 0, pool_branch.size()));
            }
            return torch::cat(outs, 1);
        }
    };

    // Keras auto-names these layers conv2d, conv2d_1, ... and
    // batch_normalization, batch_normalization_1, ... in creation order.
    Unit unit(std::int64_t in, std::int64_t out, std::int64_t kh, std::int64_t kw, std::int64_t stride = 1,
              Padding padding = Padding::same) {
        const auto suffix = counter_ == 0 ? std::string() : "_" + std::to_string(counter_);
        ++counter_;
        Unit u;
        u.conv = conv("conv2d" + suffix,
                      {.in_channels = in, .out_channels = out, .kernel_h = kh, .kernel_w = kw, .stride = stride,
                       .padding = padding, .use_bias = false},
                      *gen_);
        u.bn = batch_norm("batch_normalization" + suffix, {.channels = out, .epsilon = 1e-3, .scale = false});
        return u;
    }

    at::Generator* gen_;
    int counter_ = 0;
    std::vector<Unit> stem_;
    std::vector<Unit> stem2_;
    std::vector<Mixed> mixed_;
};

}  // namespace

std::shared_ptr<Backbone> make_backbone(BackboneKind kind, at::Generator& generator) {
    switch (kind) {
        case BackboneKind::resnet101_v2: return std::make_shared<ResNetV2>(kind, std::vector<int>{3, 4, 23, 3}, generator);
        case BackboneKind::resnet101: return std::make_shared<ResNetV1>(kind, std::vector<int>{3, 4, 23, 3}, generator);
        case BackboneKind::resnet50: return std::make_shared<ResNetV1>(kind, std::vector<int>{3, 4, 6, 3}, generator);
        case BackboneKind::vgg19: return std::make_shared<Vgg19>(generator);
        case BackboneKind::inception_v3: return std::make_shared<InceptionV3>(generator);
        case BackboneKind::mobilenet: return std::make_shared<MobileNet>(generator);
    }
    throw ValidationError("unsupported backbone");
}

}  // namespace treebark
