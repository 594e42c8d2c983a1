#pragma once

#include "treebark/backbones.hpp"
#include "treebark/error.hpp"
#include "treebark/layers.hpp"
#include "treebark/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace treebark {

enum class HeadLayerKind { flatten, dense, dropout };
enum class Activation { linear, relu, softmax };

struct HeadLayer {
    HeadLayerKind kind = HeadLayerKind::dense;
    std::int64_t units = 0;        // dense
    Activation activation = Activation::linear;
    double rate = 0.0;             // dropout

    nlohmann::json to_json() const;
    static HeadLayer from_json(const nlohmann::json& doc);

    friend bool operator==(const HeadLayer&, const HeadLayer&) = default;
};

/// flatten -> dense(512, relu) -> dropout -> dense(512, relu) -> dropout -> dense(256, relu) -> dense(C, softmax)
std::vector<HeadLayer> default_head(std::int64_t num_classes, double dropout_rate);

struct ModelSpec {
    BackboneKind backbone = BackboneKind::resnet101_v2;
    bool pretrained = true;
    std::int64_t input_height = 160;
    std::int64_t input_width = 160;
    std::int64_t num_classes = 50;
    double dropout_rate = 0.45;
    bool backbone_trainable = true;
    /// Feed the backbone its published input range instead of plain [0, 1].
    bool native_input_scaling = false;
    /// Empty means default_head(num_classes, dropout_rate).
    std::vector<HeadLayer> head;
    std::uint64_t init_seed = 0;
    /// Where converted ImageNet weights live; falls back to $TREEBARK_WEIGHTS_DIR,
    /// then ~/.cache/treebark/weights.
    std::optional<std::filesystem::path> weights_dir;

    /// Throws ValidationError when an invariant is broken.
    void validate() const;
    std::vector<HeadLayer> resolved_head() const;

    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& doc);
};

/// Backbone + fully connected head. Inputs are NHWC float tensors in [0, 1];
/// the softmax of the final layer is applied by predict(), not logits().
class Classifier : public torch::nn::Module {
public:
    /// Randomly initialised from spec.init_seed; backbone and head draw from separate streams.
    explicit Classifier(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    Backbone& backbone() { return *backbone_; }
    const Backbone& backbone() const { return *backbone_; }

    /// (height, width, channels) of the backbone feature map.
    const std::vector<std::int64_t>& feature_shape() const { return feature_shape_; }

    /// NHWC [0, 1] -> backbone feature map, NHWC.
    torch::Tensor features(const torch::Tensor& inputs);
    /// Backbone feature map (NHWC) -> pre-softmax scores.
    torch::Tensor head_logits(const torch::Tensor& features);
    torch::Tensor logits(const torch::Tensor& inputs) { return head_logits(features(inputs)); }

    /// Inference-mode probabilities, evaluated in chunks without autograd.
    torch::Tensor predict(const torch::Tensor& inputs, std::int64_t chunk = 16);

    /// Training mode toggles dropout (and batch statistics for a trainable backbone).
    /// A frozen backbone always stays in inference mode.
    void set_training(bool on);

    std::vector<torch::Tensor> trainable_parameters() const;

    struct HeadEntry {
        std::string name;
        HeadLayer layer;
        std::shared_ptr<layers::Dense> dense;  // null for flatten/dropout
    };
    const std::vector<HeadEntry>& head() const { return head_; }

private:
    ModelSpec spec_;
    std::shared_ptr<Backbone> backbone_;
    std::vector<std::int64_t> feature_shape_;
    std::vector<HeadEntry> head_;
};

/// Builds the classifier. With spec.pretrained the backbone weights are read
/// from the weights cache; a missing file raises WeightsUnavailable.
std::shared_ptr<Classifier> build_model(const ModelSpec& spec);

class WeightsUnavailable : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

std::filesystem::path pretrained_weights_path(const ModelSpec& spec);

struct ParamRow {
    std::string name;
    std::string type;
    std::vector<std::int64_t> output_shape;  // without the batch dimension
    std::int64_t params = 0;
};

struct ParamReport {
    std::vector<ParamRow> layers;           // top-level view: backbone, flatten, dense, ...
    std::vector<ParamRow> backbone_layers;  // per parameterised backbone layer
    std::int64_t total = 0;
    std::int64_t trainable = 0;
    std::int64_t non_trainable = 0;

    /// Fixed-width summary table.
    std::string render() const;
    nlohmann::json to_json() const;
};

ParamReport count_parameters(const Classifier& model);

/// Architecture fingerprint stored in checkpoints.
nlohmann::json architecture_fingerprint(const ModelSpec& spec, const std::vector<std::string>& classes);

struct CheckpointMeta {
    ModelSpec spec;
    std::vector<std::string> classes;
    PreprocessConfig preprocess;
};

/// Weight file: "TBWEIGHT" magic, u64 header length, JSON header
/// {fingerprint, preprocess, tensors[{name, shape, offset}], payload_bytes,
/// payload_sha256}, then little-endian float32 payload.
void save_weights(const Classifier& model, const std::filesystem::path& path, const std::vector<std::string>& classes,
                  const PreprocessConfig& preprocess);

/// Builds a fresh model from `spec` (no pretrained download) and fills it from
/// the checkpoint. Throws ValidationError naming the first divergent layer when
/// the architecture differs, IoError on a corrupt file.
std::shared_ptr<Classifier> load_weights(const ModelSpec& spec, const std::filesystem::path& path,
                                         const std::vector<std::string>& classes = {});

/// Reads only the header.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Rebuilds the model described by the checkpoint itself.
std::shared_ptr<Classifier> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

/// Raw named-tensor container shared by checkpoints and converted backbone weights.
struct TensorFile {
    nlohmann::json meta;
    std::vector<std::pair<std::string, torch::Tensor>> tensors;
};
void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path);
nlohmann::json read_tensor_file_meta(const std::filesystem::path& path);

}  // namespace treebark
