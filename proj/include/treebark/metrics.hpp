#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

/// counts(t, p): samples of true class t predicted as p.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    ConfusionMatrix(int num_classes, std::vector<std::string> class_names = {});

    int num_classes() const { return num_classes_; }
    const std::vector<std::string>& class_names() const { return class_names_; }

    std::int64_t at(int truth, int predicted) const {
        return counts_[static_cast<std::size_t>(truth * num_classes_ + predicted)];
    }
    std::int64_t& at(int truth, int predicted) { return counts_[static_cast<std::size_t>(truth * num_classes_ + predicted)]; }

    std::int64_t total() const;
    std::int64_t trace() const;
    std::int64_t row_sum(int truth) const;
    std::int64_t column_sum(int predicted) const;

    nlohmann::json to_json() const;
    static ConfusionMatrix from_json(const nlohmann::json& doc);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    int num_classes_ = 0;
    std::vector<std::string> class_names_;
    std::vector<std::int64_t> counts_;
};

/// Throws ValidationError on a length mismatch or an index outside [0, C).
ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int num_classes,
                                 std::vector<std::string> class_names = {});

struct ClassMetrics {
    std::string class_name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
    /// Zero denominators are reported as 0 with these flags set.
    bool precision_undefined = false;
    bool recall_undefined = false;
};

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvaluationReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    AverageMetrics macro_avg;
    AverageMetrics weighted_avg;
    std::int64_t total_support = 0;
    ConfusionMatrix confusion;

    /// Accuracy, weighted precision, weighted recall, weighted F1.
    std::vector<double> headline() const;

    /// Fixed-width table: precision / recall / f1-score / support per class,
    /// then accuracy, macro avg and weighted avg rows.
    std::string render_text(int digits = 2) const;
    nlohmann::json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& doc);
};

/// Throws ValidationError when the matrix holds no samples.
EvaluationReport classification_report(const ConfusionMatrix& cm);

/// Fraction of diagonal mass; shared by the trainer so both report identical accuracies.
double accuracy(const ConfusionMatrix& cm);

/// Index of the largest value; ties go to the lowest index.
int argmax(const float* values, std::size_t count);

struct FoldResult {
    int fold = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct CVReport {
    std::vector<FoldResult> folds;
    FoldResult average;  // fold = -1
    int k = 0;
    std::uint64_t seed = 0;
    /// Set when a fold failed; completed folds are still reported.
    std::string error;

    bool complete() const { return error.empty() && static_cast<int>(folds.size()) == k; }

    /// Recomputes `average` as arithmetic means of the fold rows.
    void update_average();

    nlohmann::json to_json() const;
    std::string to_csv() const;
    /// Fold rows as columns, one metric per line.
    std::string render_text() const;
};

}  // namespace treebark
