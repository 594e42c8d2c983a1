#include "treebark/model.hpp"

#include "treebark/binary_io.hpp"
#include "treebark/hash.hpp"
#include "treebark/log.hpp"
#include "treebark/random.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace treebark {

namespace fs = std::filesystem;

namespace {

std::string to_string(HeadLayerKind kind) {
    switch (kind) {
        case HeadLayerKind::flatten: return "flatten";
        case HeadLayerKind::dense: return "dense";
        case HeadLayerKind::dropout: return "dropout";
    }
    return "unknown";
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
    }
    return "unknown";
}

HeadLayerKind parse_head_kind(const std::string& s) {
    if (s == "flatten") return HeadLayerKind::flatten;
    if (s == "dense") return HeadLayerKind::dense;
    if (s == "dropout") return HeadLayerKind::dropout;
    throw ValidationError("unknown head layer type: " + s);
}

Activation parse_activation(const std::string& s) {
    if (s == "linear") return Activation::linear;
    if (s == "relu") return Activation::relu;
    if (s == "softmax") return Activation::softmax;
    throw ValidationError("unknown activation: " + s);
}

/// Keras-style automatic layer names: dense, dense_1, dropout, dropout_1, ...
std::vector<std::string> head_layer_names(const std::vector<HeadLayer>& head) {
    std::map<HeadLayerKind, int> seen;
    std::vector<std::string> names;
    for (const auto& layer : head) {
        const int n = seen[layer.kind]++;
        names.push_back(to_string(layer.kind) + (n == 0 ? "" : "_" + std::to_string(n)));
    }
    return names;
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
    std::string out = "(None";
    for (auto d : shape) out += ", " + std::to_string(d);
    return out + ")";
}

std::string with_commas(std::int64_t value) {
    auto digits = std::to_string(value);
    for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(static_cast<std::size_t>(i), ",");
    return digits;
}

}  // namespace

// ------------------------------------------------------------------ spec

nlohmann::json HeadLayer::to_json() const {
    nlohmann::json doc{{"type", to_string(kind)}};
    if (kind == HeadLayerKind::dense) {
        doc["units"] = units;
        doc["activation"] = to_string(activation);
    } else if (kind == HeadLayerKind::dropout) {
        doc["rate"] = rate;
    }
    return doc;
}

HeadLayer HeadLayer::from_json(const nlohmann::json& doc) {
    try {
        HeadLayer layer{.kind = parse_head_kind(doc.at("type").get<std::string>())};
        if (layer.kind == HeadLayerKind::dense) {
            layer.units = doc.at("units").get<std::int64_t>();
            layer.activation = parse_activation(doc.value("activation", std::string("linear")));
        } else if (layer.kind == HeadLayerKind::dropout) {
            layer.rate = doc.at("rate").get<double>();
        }
        return layer;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed head layer: ") + e.what());
    }
}

std::vector<HeadLayer> default_head(std::int64_t num_classes, double dropout_rate) {
    return {
        {.kind = HeadLayerKind::flatten},
        {.kind = HeadLayerKind::dense, .units = 512, .activation = Activation::relu},
        {.kind = HeadLayerKind::dropout, .rate = dropout_rate},
        {.kind = HeadLayerKind::dense, .units = 512, .activation = Activation::relu},
        {.kind = HeadLayerKind::dropout, .rate = dropout_rate},
        {.kind = HeadLayerKind::dense, .units = 256, .activation = Activation::relu},
        {.kind = HeadLayerKind::dense, .units = num_classes, .activation = Activation::softmax},
    };
}

std::vector<HeadLayer> ModelSpec::resolved_head() const {
    return head.empty() ? default_head(num_classes, dropout_rate) : head;
}

void ModelSpec::validate() const {
    if (num_classes < 2) throw ValidationError("num_classes must be at least 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout_rate must lie in [0, 1)");
    if (input_height <= 0 || input_width <= 0) throw ValidationError("input shape must be positive");
    const auto layers = resolved_head();
    if (layers.empty() || layers.front().kind != HeadLayerKind::flatten) {
        throw ValidationError("head must start with a flatten layer");
    }
    for (std::size_t i = 1; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.kind == HeadLayerKind::flatten) throw ValidationError("head may contain only one flatten layer");
        if (l.kind == HeadLayerKind::dense && l.units < 1) throw ValidationError("dense layers need at least one unit");
        if (l.kind == HeadLayerKind::dropout && !(l.rate >= 0.0 && l.rate < 1.0)) {
            throw ValidationError("dropout rate must lie in [0, 1)");
        }
        if (l.kind == HeadLayerKind::dense && l.activation == Activation::softmax && i + 1 != layers.size()) {
            throw ValidationError("softmax is only allowed on the final layer");
        }
    }
    const auto& last = layers.back();
    if (last.kind != HeadLayerKind::dense || last.activation != Activation::softmax || last.units != num_classes) {
        throw ValidationError("head must end with a softmax dense layer of width num_classes (" +
                              std::to_string(num_classes) + ")");
    }
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json doc{{"backbone", to_string(backbone)},
                       {"pretrained", pretrained},
                       {"input_shape", {input_height, input_width, 3}},
                       {"num_classes", num_classes},
                       {"dropout_rate", dropout_rate},
                       {"backbone_trainable", backbone_trainable},
                       {"native_input_scaling", native_input_scaling},
                       {"init_seed", init_seed}};
    if (!head.empty()) {
        doc["head"] = nlohmann::json::array();
        for (const auto& l : head) doc["head"].push_back(l.to_json());
    }
    if (weights_dir) doc["weights_dir"] = weights_dir->string();
    return doc;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& doc) {
    ModelSpec spec;
    try {
        if (doc.contains("backbone")) spec.backbone = parse_backbone(doc["backbone"].get<std::string>());
        spec.pretrained = doc.value("pretrained", spec.pretrained);
        if (doc.contains("input_shape")) {
            const auto shape = doc["input_shape"].get<std::vector<std::int64_t>>();
            if (shape.size() != 3 || shape[2] != 3) throw ValidationError("input_shape must be [height, width, 3]");
            spec.input_height = shape[0];
            spec.input_width = shape[1];
        }
        spec.num_classes = doc.value("num_classes", spec.num_classes);
        spec.dropout_rate = doc.value("dropout_rate", spec.dropout_rate);
        spec.backbone_trainable = doc.value("backbone_trainable", spec.backbone_trainable);
        spec.native_input_scaling = doc.value("native_input_scaling", spec.native_input_scaling);
        spec.init_seed = doc.value("init_seed", spec.init_seed);
        if (doc.contains("head")) {
            for (const auto& l : doc["head"]) spec.head.push_back(HeadLayer::from_json(l));
        }
        if (doc.contains("weights_dir")) spec.weights_dir = doc["weights_dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

// ------------------------------------------------------------------ classifier

Classifier::Classifier(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    auto backbone_gen = at::detail::createCPUGenerator(derive_seed(spec_.init_seed, "init/backbone"));
    auto head_gen = at::detail::createCPUGenerator(derive_seed(spec_.init_seed, "init/head"));

    backbone_ = register_module("backbone", make_backbone(spec_.backbone, backbone_gen));
    {
        torch::NoGradGuard no_grad;
        backbone_->eval();
        const auto probe = backbone_->forward(torch::zeros({1, 3, spec_.input_height, spec_.input_width}));
        feature_shape_ = {probe.size(2), probe.size(3), probe.size(1)};
    }

    const auto layers = spec_.resolved_head();
    const auto names = head_layer_names(layers);
    std::int64_t width = feature_shape_[0] * feature_shape_[1] * feature_shape_[2];
    for (std::size_t i = 0; i < layers.size(); ++i) {
        HeadEntry entry{.name = names[i], .layer = layers[i], .dense = nullptr};
        if (layers[i].kind == HeadLayerKind::dense) {
            entry.dense = register_module(names[i], std::make_shared<layers::Dense>(width, layers[i].units, head_gen));
            width = layers[i].units;
        }
        head_.push_back(std::move(entry));
    }

    if (!spec_.backbone_trainable) {
        for (auto& p : backbone_->parameters()) p.set_requires_grad(false);
    }
    set_training(false);
}

void Classifier::set_training(bool on) {
    train(on);
    if (!spec_.backbone_trainable) backbone_->eval();
}

torch::Tensor Classifier::features(const torch::Tensor& inputs) {
    if (inputs.dim() != 4 || inputs.size(3) != 3 || inputs.size(1) != spec_.input_height || inputs.size(2) != spec_.input_width) {
        throw ValidationError("model expects inputs of shape N x " + std::to_string(spec_.input_height) + " x " +
                              std::to_string(spec_.input_width) + " x 3");
    }
    auto x = inputs.permute({0, 3, 1, 2}).contiguous();
    if (spec_.native_input_scaling) x = backbone_->native_scaling(x);
    return backbone_->forward(x).permute({0, 2, 3, 1});
}

torch::Tensor Classifier::head_logits(const torch::Tensor& features) {
    auto x = features;
    for (const auto& entry : head_) {
        switch (entry.layer.kind) {
            case HeadLayerKind::flatten:
                x = x.reshape({x.size(0), -1});
                break;
            case HeadLayerKind::dense:
                x = entry.dense->forward(x);
                if (entry.layer.activation == Activation::relu) x = torch::relu(x);
                break;
            case HeadLayerKind::dropout:
                x = torch::dropout(x, entry.layer.rate, is_training());
                break;
        }
    }
    return x;
}

torch::Tensor Classifier::predict(const torch::Tensor& inputs, std::int64_t chunk) {
    torch::NoGradGuard no_grad;
    const bool was_training = is_training();
    set_training(false);
    std::vector<torch::Tensor> parts;
    for (std::int64_t begin = 0; begin < inputs.size(0); begin += chunk) {
        const auto end = std::min(inputs.size(0), begin + chunk);
        parts.push_back(torch::softmax(logits(inputs.slice(0, begin, end)), 1));
    }
    set_training(was_training);
    if (parts.empty()) return torch::empty({0, spec_.num_classes});
    return torch::cat(parts, 0);
}

std::vector<torch::Tensor> Classifier::trainable_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : parameters()) {
        if (p.requires_grad()) out.push_back(p);
    }
    return out;
}

// ------------------------------------------------------------------ construction

fs::path pretrained_weights_path(const ModelSpec& spec) {
    fs::path dir;
    if (spec.weights_dir) {
        dir = *spec.weights_dir;
    } else if (const char* env = std::getenv("TREEBARK_WEIGHTS_DIR"); env && *env) {
        dir = env;
    } else if (const char* home = std::getenv("HOME"); home && *home) {
        dir = fs::path(home) / ".cache" / "treebark" / "weights";
    } else {
        dir = ".treebark_weights";
    }
    return dir / (to_string(spec.backbone) + "_imagenet_notop.tbw");
}

namespace {

void copy_named(const std::vector<std::pair<std::string, torch::Tensor>>& targets,
                const std::vector<std::pair<std::string, torch::Tensor>>& sources, const std::string& origin) {
    std::map<std::string, const torch::Tensor*> by_name;
    for (const auto& [name, t] : sources) by_name.emplace(name, &t);
    torch::NoGradGuard no_grad;
    for (const auto& [name, target] : targets) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw IoError(origin + " has no tensor '" + name + "'");
        }
        if (it->second->sizes() != target.sizes()) {
            std::ostringstream msg;
            msg << origin << ": tensor '" << name << "' has shape " << it->second->sizes() << ", expected " << target.sizes();
            throw ValidationError(msg.str());
        }
        auto t = target;
        t.copy_(*it->second);
    }
    if (by_name.size() != targets.size()) {
        throw ValidationError(origin + " contains " + std::to_string(by_name.size()) + " tensors, model expects " +
                              std::to_string(targets.size()));
    }
}

std::vector<std::pair<std::string, torch::Tensor>> state_of(const torch::nn::Module& module) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& item : module.named_parameters()) out.emplace_back(item.key(), item.value());
    for (const auto& item : module.named_buffers()) out.emplace_back(item.key(), item.value());
    return out;
}

}  // namespace

std::shared_ptr<Classifier> build_model(const ModelSpec& spec) {
    auto model = std::make_shared<Classifier>(spec);
    if (spec.pretrained) {
        const auto path = pretrained_weights_path(spec);
        if (!fs::exists(path)) {
            throw WeightsUnavailable("pretrained ImageNet weights for " + to_string(spec.backbone) + " not found at " +
                                     path.string() +
                                     ". Convert them offline with tools/export_keras_weights.py and place the file in "
                                     "$TREEBARK_WEIGHTS_DIR (or ~/.cache/treebark/weights), or set model.pretrained=false.");
        }
        const auto file = read_tensor_file(path);
        if (file.meta.value("backbone", std::string()) != to_string(spec.backbone)) {
            throw ValidationError("weight file " + path.string() + " is not for backbone " + to_string(spec.backbone));
        }
        copy_named(state_of(model->backbone()), file.tensors, path.string());
        log::info("loaded pretrained " + to_string(spec.backbone) + " weights from " + path.string());
    }
    return model;
}

// ------------------------------------------------------------------ parameter accounting

ParamReport count_parameters(const Classifier& model) {
    ParamReport report;
    const auto& backbone = model.backbone();

    std::int64_t backbone_params = 0;
    for (const auto& p : backbone.parameters()) backbone_params += p.numel();
    for (const auto& b : backbone.buffers()) backbone_params += b.numel();
    report.layers.push_back({.name = backbone.summary_name(model.spec().input_height),
                             .type = "Functional",
                             .output_shape = model.feature_shape(),
                             .params = backbone_params});

    for (const auto& child : backbone.named_children()) {
        std::int64_t n = 0;
        for (const auto& p : child.value()->parameters()) n += p.numel();
        for (const auto& b : child.value()->buffers()) n += b.numel();
        const bool is_conv = dynamic_cast<const layers::Conv2d*>(child.value().get()) != nullptr;
        report.backbone_layers.push_back(
            {.name = child.key(), .type = is_conv ? "Conv2D" : "BatchNormalization", .output_shape = {}, .params = n});
    }

    const auto& fs = model.feature_shape();
    std::int64_t width = fs[0] * fs[1] * fs[2];
    for (const auto& entry : model.head()) {
        ParamRow row;
        row.name = entry.name;
        switch (entry.layer.kind) {
            case HeadLayerKind::flatten:
                row.type = "Flatten";
                row.output_shape = {width};
                break;
            case HeadLayerKind::dense:
                row.type = "Dense";
                row.params = width * entry.layer.units + entry.layer.units;
                width = entry.layer.units;
                row.output_shape = {width};
                break;
            case HeadLayerKind::dropout:
                row.type = "Dropout";
                row.output_shape = {width};
                break;
        }
        report.layers.push_back(row);
    }

    for (const auto& row : report.layers) report.total += row.params;
    for (const auto& p : model.parameters()) {
        if (p.requires_grad()) report.trainable += p.numel();
    }
    report.non_trainable = report.total - report.trainable;
    return report;
}

std::string ParamReport::render() const {
    std::ostringstream out;
    const std::string rule(86, '-');
    out << rule << '\n'
        << std::left << std::setw(40) << "Layer (type)" << std::setw(32) << "Output Shape" << "Param #\n"
        << rule << '\n';
    for (const auto& row : layers) {
        out << std::left << std::setw(40) << (row.name + " (" + row.type + ")") << std::setw(32)
            << shape_string(row.output_shape) << row.params << '\n';
    }
    out << rule << '\n'
        << "Total params: " << with_commas(total) << '\n'
        << "Trainable params: " << with_commas(trainable) << '\n'
        << "Non-trainable params: " << with_commas(non_trainable) << '\n'
        << rule << '\n';
    return out.str();
}

nlohmann::json ParamReport::to_json() const {
    auto rows = [](const std::vector<ParamRow>& src) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : src) {
            arr.push_back({{"name", r.name}, {"type", r.type}, {"output_shape", r.output_shape}, {"params", r.params}});
        }
        return arr;
    };
    return {{"layers", rows(layers)},
            {"backbone_layers", rows(backbone_layers)},
            {"total", total},
            {"trainable", trainable},
            {"non_trainable", non_trainable}};
}

// ------------------------------------------------------------------ checkpoints

nlohmann::json architecture_fingerprint(const ModelSpec& spec, const std::vector<std::string>& classes) {
    const auto head = spec.resolved_head();
    const auto names = head_layer_names(head);
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t i = 0; i < head.size(); ++i) {
        auto entry = head[i].to_json();
        entry["name"] = names[i];
        layers.push_back(entry);
    }
    return {{"backbone", to_string(spec.backbone)},
            {"input_shape", {spec.input_height, spec.input_width, 3}},
            {"native_input_scaling", spec.native_input_scaling},
            {"head", layers},
            {"dropout_rate", spec.dropout_rate},
            {"num_classes", spec.num_classes},
            {"classes", classes}};
}

namespace {

constexpr char kWeightMagic[8] = {'T', 'B', 'W', 'E', 'I', 'G', 'H', 'T'};

void check_fingerprint(const nlohmann::json& stored, const nlohmann::json& expected, bool compare_classes) {
    for (const char* key : {"backbone", "input_shape", "native_input_scaling"}) {
        if (stored.at(key) != expected.at(key)) {
            throw ValidationError(std::string("architecture mismatch at '") + key + "': checkpoint has " +
                                  stored.at(key).dump() + ", spec has " + expected.at(key).dump());
        }
    }
    const auto& a = stored.at("head");
    const auto& b = expected.at("head");
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
        if (i >= a.size() || i >= b.size() || a[i] != b[i]) {
            const auto name = i < a.size() ? a[i].at("name").get<std::string>() : b[i].at("name").get<std::string>();
            throw ValidationError("architecture mismatch at layer '" + name + "': checkpoint has " +
                                  (i < a.size() ? a[i].dump() : std::string("nothing")) + ", spec has " +
                                  (i < b.size() ? b[i].dump() : std::string("nothing")));
        }
    }
    if (compare_classes && stored.at("classes") != expected.at("classes")) {
        throw ValidationError("class list of the checkpoint differs from the requested one");
    }
}

}  // namespace

void write_tensor_file(const fs::path& path, const TensorFile& file) {
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    Sha256 hasher;
    std::vector<torch::Tensor> contiguous;
    for (const auto& [name, tensor] : file.tensors) {
        auto t = tensor.detach().to(torch::kFloat32).contiguous();
        index.push_back({{"name", name}, {"shape", t.sizes().vec()}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(t.numel()) * sizeof(float);
        hasher.update(t.data_ptr<float>(), static_cast<std::size_t>(t.numel()) * sizeof(float));
        contiguous.push_back(std::move(t));
    }
    nlohmann::json header{{"format_version", 1}, {"meta", file.meta}, {"tensors", index}, {"payload_bytes", offset},
                          {"payload_sha256", hasher.hex()}};
    const auto text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write weights: " + path.string());
    out.write(kWeightMagic, sizeof(kWeightMagic));
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : contiguous) write_floats_le(out, t.data_ptr<float>(), static_cast<std::size_t>(t.numel()));
    out.flush();
    if (!out) {
        out.close();
        fs::remove(path);
        throw IoError("failed writing weights: " + path.string());
    }
}

namespace {

nlohmann::json read_header(std::ifstream& in, const fs::path& path) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0) {
        throw IoError("not a treebark weight file: " + path.string());
    }
    std::uint64_t length = 0;
    try {
        length = read_le<std::uint64_t>(in);
    } catch (const IoError&) {
        throw IoError("truncated weight file: " + path.string());
    }
    if (length == 0 || length > (std::uint64_t{1} << 30)) throw IoError("corrupt weight file header: " + path.string());
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) throw IoError("truncated weight file: " + path.string());
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt weight file header " + path.string() + ": " + e.what());
    }
}

}  // namespace

nlohmann::json read_tensor_file_meta(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("weight file not found: " + path.string());
    return read_header(in, path).at("meta");
}

TensorFile read_tensor_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("weight file not found: " + path.string());
    const auto header = read_header(in, path);
    TensorFile file;
    try {
        file.meta = header.at("meta");
        Sha256 hasher;
        std::uint64_t consumed = 0;
        for (const auto& entry : header.at("tensors")) {
            const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
            if (entry.at("offset").get<std::uint64_t>() != consumed) throw IoError("weight file index is inconsistent");
            auto t = torch::empty(shape, torch::kFloat32);
            const auto bytes = static_cast<std::size_t>(t.numel()) * sizeof(float);
            read_floats_le(in, t.data_ptr<float>(), static_cast<std::size_t>(t.numel()));
            hasher.update(t.data_ptr<float>(), bytes);
            consumed += bytes;
            file.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
        }
        if (consumed != header.at("payload_bytes").get<std::uint64_t>() ||
            hasher.hex() != header.at("payload_sha256").get<std::string>()) {
            throw IoError("weight file checksum mismatch");
        }
    } catch (const IoError& e) {
        throw IoError("corrupt weight file " + path.string() + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt weight file header " + path.string() + ": " + e.what());
    }
    return file;
}

void save_weights(const Classifier& model, const fs::path& path, const std::vector<std::string>& classes,
                  const PreprocessConfig& preprocess) {
    if (!classes.empty() && static_cast<std::int64_t>(classes.size()) != model.spec().num_classes) {
        throw ValidationError("class list length does not match num_classes");
    }
    TensorFile file;
    file.meta = {{"kind", "checkpoint"},
                 {"fingerprint", architecture_fingerprint(model.spec(), classes)},
                 {"spec", model.spec().to_json()},
                 {"preprocess", preprocess.to_json()}};
    file.tensors = state_of(model);
    write_tensor_file(path, file);
}

namespace {

CheckpointMeta meta_from_json(const nlohmann::json& meta) {
    if (meta.value("kind", std::string()) != "checkpoint") {
        throw ValidationError("weight file is not a classifier checkpoint");
    }
    CheckpointMeta out;
    out.spec = ModelSpec::from_json(meta.at("spec"));
    out.classes = meta.at("fingerprint").at("classes").get<std::vector<std::string>>();
    out.preprocess = PreprocessConfig::from_json(meta.at("preprocess"));
    return out;
}

}  // namespace

std::shared_ptr<Classifier> load_weights(const ModelSpec& spec, const fs::path& path, const std::vector<std::string>& classes) {
    const auto file = read_tensor_file(path);
    const auto& meta = file.meta;
    if (meta.value("kind", std::string()) != "checkpoint") {
        throw ValidationError("weight file is not a classifier checkpoint: " + path.string());
    }
    check_fingerprint(meta.at("fingerprint"), architecture_fingerprint(spec, classes), !classes.empty());

    auto fresh_spec = spec;
    fresh_spec.pretrained = false;
    auto model = std::make_shared<Classifier>(fresh_spec);
    copy_named(state_of(*model), file.tensors, path.string());
    return model;
}

CheckpointMeta read_checkpoint_meta(const fs::path& path) { return meta_from_json(read_tensor_file_meta(path)); }

std::shared_ptr<Classifier> load_checkpoint(const fs::path& path, CheckpointMeta* meta) {
    auto parsed = read_checkpoint_meta(path);
    auto model = load_weights(parsed.spec, path, parsed.classes);
    if (meta) *meta = std::move(parsed);
    return model;
}

}  // namespace treebark
