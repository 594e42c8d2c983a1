#pragma once

#include "treebark/batch.hpp"
#include "treebark/dataset.hpp"
#include "treebark/metrics.hpp"
#include "treebark/model.hpp"
#include "treebark/trainer.hpp"

#include <functional>

namespace treebark {

/// Argmax of each probability row (ties to the lowest index).
std::vector<int> predicted_classes(const torch::Tensor& probabilities);

/// Throws ValidationError when the batch and model disagree on the class count.
EvaluationReport evaluate(Classifier& model, const Batch& test_batch);

struct CrossValidationOptions {
    bool stratified = false;
    PreprocessConfig preprocess;
    /// Called with each finished fold, in fold order.
    std::function<void(const FoldResult&)> on_fold;
};

/// Trains a freshly initialised model per fold on the other k-1 folds and
/// evaluates it on the held-out fold. A failing fold stops the run; the report
/// keeps the completed folds and records the error.
CVReport cross_validate(const DatasetManifest& manifest, const ModelSpec& spec, const TrainingConfig& config, int k,
                        std::uint64_t seed, const CrossValidationOptions& options = {});

/// Same, reusing an already encoded batch of the whole manifest.
CVReport cross_validate(const Batch& encoded, const FoldPartition& folds, const ModelSpec& spec,
                        const TrainingConfig& config, const std::function<void(const FoldResult&)>& on_fold = {});

}  // namespace treebark
