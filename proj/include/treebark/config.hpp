#pragma once

#include "treebark/augment.hpp"
#include "treebark/model.hpp"
#include "treebark/preprocess.hpp"
#include "treebark/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

inline constexpr const char* kToolVersion = "0.1.0";

struct ResampleSettings {
    bool enabled = true;
    int target_per_class = 110;
    /// Split first and rebalance only the training side (no augmented siblings in the test set).
    bool split_first = false;
    std::vector<AugmentationSpec> augmentations = default_augmentations();
};

struct SplitSettings {
    double ratio = 0.8;
    bool stratified = false;
};

struct CrossValidationSettings {
    int k = 5;
    bool stratified = false;
};

/// Whole-run configuration, read from a JSON file. Every stage seed is derived
/// from `seed`, so the file alone reproduces a run.
struct RunConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path output_dir = "run";
    std::uint64_t seed = 42;
    /// Strict validation: empty classes and a zero learning rate become errors.
    bool strict = false;
    /// Intra-op threads; 0 keeps the library default. Bit-exact reruns need 1.
    int threads = 0;
    ResampleSettings resample;
    PreprocessConfig preprocess;
    ModelSpec model;
    /// False when the file leaves num_classes to be taken from the dataset.
    bool num_classes_explicit = false;
    TrainingConfig training;
    SplitSettings split;
    CrossValidationSettings cv;
    /// Epochs at which sweep-epochs records test metrics.
    std::vector<int> sweep_epochs = {20, 32, 40};

    /// Throws ValidationError when any nested invariant fails.
    void validate() const;

    /// Stage seeds.
    std::uint64_t resample_seed() const;
    std::uint64_t split_seed() const;
    std::uint64_t cv_seed() const;
    std::uint64_t init_seed() const;
    std::uint64_t train_seed() const;

    /// Model spec sized for `num_classes`, with the derived init seed.
    /// Throws ValidationError when the file fixed a different class count.
    ModelSpec model_for(std::size_t num_classes) const;
    /// Training config with the derived seed and the strict flag applied.
    TrainingConfig training_config() const;

    nlohmann::json to_json() const;
    /// Unknown keys are rejected so that typos do not silently fall back to defaults.
    static RunConfig from_json(const nlohmann::json& doc);
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Applies "a.b.c=value" overrides; the value is parsed as JSON, or taken as a
/// string when it is not valid JSON.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace treebark
