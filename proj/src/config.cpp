#include "treebark/config.hpp"

#include "treebark/error.hpp"
#include "treebark/random.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace treebark {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const nlohmann::json& doc, const std::set<std::string>& allowed, const std::string& where) {
    if (!doc.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (!allowed.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

}  // namespace

void RunConfig::validate() const {
    if (dataset_root.empty()) throw ValidationError("dataset_root is required");
    if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
    if (threads < 0) throw ValidationError("threads must be non-negative");
    if (resample.target_per_class < 1) throw ValidationError("resample.target_per_class must be at least 1");
    if (resample.enabled) {
        if (resample.augmentations.empty()) throw ValidationError("resample.augmentations must not be empty");
        for (const auto& s : resample.augmentations) s.validate();
    }
    preprocess.validate();
    if (model.input_height != preprocess.height || model.input_width != preprocess.width) {
        throw ValidationError("model input_shape must match the preprocess size");
    }
    model.validate();
    training_config().validate();
    if (!(split.ratio > 0.0 && split.ratio <= 1.0)) throw ValidationError("split.ratio must lie in (0, 1]");
    if (resample.split_first && split.ratio >= 1.0) throw ValidationError("split_first needs a test side (split.ratio < 1)");
    if (cv.k < 2) throw ValidationError("cv.k must be at least 2, got " + std::to_string(cv.k));
    for (int e : sweep_epochs) {
        if (e < 1) throw ValidationError("sweep_epochs entries must be at least 1");
    }
}

std::uint64_t RunConfig::resample_seed() const { return derive_seed(seed, "resample"); }
std::uint64_t RunConfig::split_seed() const { return derive_seed(seed, "split"); }
std::uint64_t RunConfig::cv_seed() const { return derive_seed(seed, "cv"); }
std::uint64_t RunConfig::init_seed() const { return derive_seed(seed, "init"); }
std::uint64_t RunConfig::train_seed() const { return derive_seed(seed, "train"); }

ModelSpec RunConfig::model_for(std::size_t num_classes) const {
    const auto classes = static_cast<std::int64_t>(num_classes);
    if (num_classes_explicit && model.num_classes != classes) {
        throw ValidationError("config fixes num_classes=" + std::to_string(model.num_classes) + " but the dataset has " +
                              std::to_string(classes) + " classes");
    }
    ModelSpec spec = model;
    spec.num_classes = classes;
    if (!spec.head.empty() && spec.head.back().kind == HeadLayerKind::dense) spec.head.back().units = classes;
    spec.init_seed = init_seed();
    spec.validate();
    return spec;
}

TrainingConfig RunConfig::training_config() const {
    TrainingConfig t = training;
    t.seed = train_seed();
    t.strict = training.strict || strict;
    return t;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json augs = nlohmann::json::array();
    for (const auto& a : resample.augmentations) augs.push_back(a.to_json());
    auto model_doc = model.to_json();
    model_doc.erase("init_seed");
    if (!num_classes_explicit) model_doc.erase("num_classes");
    auto training_doc = training.to_json();
    training_doc.erase("seed");
    return {{"dataset_root", dataset_root.generic_string()},
            {"output_dir", output_dir.generic_string()},
            {"seed", seed},
            {"strict", strict},
            {"threads", threads},
            {"resample",
             {{"enabled", resample.enabled},
              {"target_per_class", resample.target_per_class},
              {"split_first", resample.split_first},
              {"augmentations", augs}}},
            {"preprocess", preprocess.to_json()},
            {"model", model_doc},
            {"training", training_doc},
            {"split", {{"ratio", split.ratio}, {"stratified", split.stratified}}},
            {"cv", {{"k", cv.k}, {"stratified", cv.stratified}}},
            {"sweep_epochs", sweep_epochs}};
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    reject_unknown(doc,
                   {"dataset_root", "output_dir", "seed", "strict", "threads", "resample", "preprocess", "model", "training",
                    "split", "cv", "sweep_epochs"},
                   "config");
    RunConfig c;
    try {
        c.dataset_root = doc.value("dataset_root", std::string());
        c.output_dir = doc.value("output_dir", c.output_dir.string());
        c.seed = doc.value("seed", c.seed);
        c.strict = doc.value("strict", c.strict);
        c.threads = doc.value("threads", c.threads);
        if (doc.contains("resample")) {
            const auto& r = doc.at("resample");
            reject_unknown(r, {"enabled", "target_per_class", "split_first", "augmentations"}, "resample");
            c.resample.enabled = r.value("enabled", c.resample.enabled);
            c.resample.target_per_class = r.value("target_per_class", c.resample.target_per_class);
            c.resample.split_first = r.value("split_first", c.resample.split_first);
            if (r.contains("augmentations")) {
                c.resample.augmentations.clear();
                for (const auto& a : r.at("augmentations")) c.resample.augmentations.push_back(AugmentationSpec::from_json(a));
            }
        }
        if (doc.contains("preprocess")) c.preprocess = PreprocessConfig::from_json(doc.at("preprocess"));
        if (doc.contains("model")) {
            const auto& m = doc.at("model");
            reject_unknown(m,
                           {"backbone", "pretrained", "input_shape", "num_classes", "dropout_rate", "backbone_trainable",
                            "native_input_scaling", "head", "weights_dir"},
                           "model");
            c.num_classes_explicit = m.contains("num_classes");
            auto patched = m;
            if (!c.num_classes_explicit && patched.contains("head") && !patched.at("head").empty()) {
                // Without an explicit class count the last head layer is resized later.
                patched["num_classes"] = patched.at("head").back().value("units", 2);
            }
            if (!patched.contains("input_shape")) {
                patched["input_shape"] = {c.preprocess.height, c.preprocess.width, 3};
            }
            c.model = ModelSpec::from_json(patched);
            if (!c.num_classes_explicit) c.model.num_classes = patched.value("num_classes", c.model.num_classes);
        } else {
            c.model.input_height = c.preprocess.height;
            c.model.input_width = c.preprocess.width;
        }
        if (doc.contains("training")) {
            const auto& t = doc.at("training");
            reject_unknown(t,
                           {"learning_rate", "epochs", "batch_size", "beta1", "beta2", "epsilon", "plateau_decay",
                            "record_timings", "strict"},
                           "training");
            c.training = TrainingConfig::from_json(t);
        }
        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            reject_unknown(s, {"ratio", "stratified"}, "split");
            c.split.ratio = s.value("ratio", c.split.ratio);
            c.split.stratified = s.value("stratified", c.split.stratified);
        }
        if (doc.contains("cv")) {
            const auto& v = doc.at("cv");
            reject_unknown(v, {"k", "stratified"}, "cv");
            c.cv.k = v.value("k", c.cv.k);
            c.cv.stratified = v.value("stratified", c.cv.stratified);
        }
        if (doc.contains("sweep_epochs")) c.sweep_epochs = doc.at("sweep_epochs").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config not found: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed config " + path.string() + ": " + e.what());
    }
    return from_json(doc);
}

void RunConfig::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config: " + path.string());
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("failed writing config: " + path.string());
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override must look like key.path=value: " + assignment);
    const auto key = assignment.substr(0, eq);
    const auto raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw;
    }
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ValidationError("empty path segment in override: " + assignment);
        if (!node->is_object()) throw ValidationError("override path crosses a non-object value: " + key);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

}  // namespace treebark
