#include "treebark/evaluator.hpp"

#include "treebark/error.hpp"
#include "treebark/log.hpp"

namespace treebark {

std::vector<int> predicted_classes(const torch::Tensor& probabilities) {
    if (probabilities.dim() != 2) throw ValidationError("probabilities must be a 2-D tensor");
    const auto p = probabilities.detach().to(torch::kFloat32).contiguous();
    std::vector<int> out(static_cast<std::size_t>(p.size(0)));
    const float* data = p.data_ptr<float>();
    for (std::int64_t r = 0; r < p.size(0); ++r) {
        out[static_cast<std::size_t>(r)] = argmax(data + r * p.size(1), static_cast<std::size_t>(p.size(1)));
    }
    return out;
}

EvaluationReport evaluate(Classifier& model, const Batch& test_batch) {
    const auto classes = model.spec().num_classes;
    if (test_batch.num_classes() != classes || (test_batch.labels.defined() && test_batch.labels.size(1) != classes)) {
        throw ValidationError("test batch has " + std::to_string(test_batch.num_classes()) + " classes, model expects " +
                              std::to_string(classes));
    }
    if (test_batch.size() == 0) throw ValidationError("test batch is empty");
    const auto predicted = predicted_classes(model.predict(test_batch.inputs));
    return classification_report(confusion_matrix(test_batch.class_indices(), predicted, static_cast<int>(classes),
                                                  test_batch.classes));
}

CVReport cross_validate(const Batch& encoded, const FoldPartition& folds, const ModelSpec& spec,
                        const TrainingConfig& config, const std::function<void(const FoldResult&)>& on_fold) {
    spec.validate();
    config.validate();
    CVReport report;
    report.k = folds.k;
    report.seed = folds.seed;
    auto rows_of = [](const std::vector<std::size_t>& indices) {
        return torch::tensor(std::vector<std::int64_t>(indices.begin(), indices.end()), torch::kLong);
    };
    auto take = [&](const std::vector<std::size_t>& indices) {
        Batch b;
        const auto rows = rows_of(indices);
        b.inputs = encoded.inputs.index_select(0, rows);
        b.labels = encoded.labels.index_select(0, rows);
        for (auto i : indices) b.index_map.push_back(encoded.index_map.empty() ? i : encoded.index_map[i]);
        b.classes = encoded.classes;
        return b;
    };

    for (int fold = 0; fold < folds.k; ++fold) {
        try {
            log::info("cross-validation fold " + std::to_string(fold + 1) + "/" + std::to_string(folds.k));
            auto model = build_model(spec);
            const auto history = train(*model, take(folds.training_indices(fold)), config);
            if (!history.ok()) throw RuntimeFailure(history.error);
            const auto report_fold = evaluate(*model, take(folds.folds[static_cast<std::size_t>(fold)]));
            FoldResult row;
            row.fold = fold;
            row.accuracy = report_fold.accuracy;
            row.precision = report_fold.weighted_avg.precision;
            row.recall = report_fold.weighted_avg.recall;
            row.f1 = report_fold.weighted_avg.f1;
            report.folds.push_back(row);
            if (on_fold) on_fold(row);
        } catch (const std::exception& e) {
            report.error = "fold " + std::to_string(fold + 1) + " failed: " + e.what();
            log::error(report.error);
            break;
        }
    }
    report.update_average();
    return report;
}

CVReport cross_validate(const DatasetManifest& manifest, const ModelSpec& spec, const TrainingConfig& config, int k,
                        std::uint64_t seed, const CrossValidationOptions& options) {
    const auto folds = kfold_partition(manifest, k, seed, options.stratified);
    if (static_cast<std::int64_t>(manifest.num_classes()) != spec.num_classes) {
        throw ValidationError("manifest has " + std::to_string(manifest.num_classes()) + " classes, model expects " +
                              std::to_string(spec.num_classes));
    }
    const auto encoded = encode_batch(manifest, options.preprocess);
    return cross_validate(encoded, folds, spec, config, options.on_fold);
}

}  // namespace treebark
