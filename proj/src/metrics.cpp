#include "treebark/metrics.hpp"

#include "treebark/error.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace treebark {

ConfusionMatrix::ConfusionMatrix(int num_classes, std::vector<std::string> class_names)
    : num_classes_(num_classes),
      class_names_(std::move(class_names)),
      counts_(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0) {
    if (num_classes < 1) throw ValidationError("confusion matrix needs at least one class");
    if (class_names_.empty()) {
        for (int c = 0; c < num_classes; ++c) class_names_.push_back(std::to_string(c));
    }
    if (static_cast<int>(class_names_.size()) != num_classes) {
        throw ValidationError("class name count does not match the number of classes");
    }
}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int c = 0; c < num_classes_; ++c) t += at(c, c);
    return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
    std::int64_t s = 0;
    for (int p = 0; p < num_classes_; ++p) s += at(truth, p);
    return s;
}

std::int64_t ConfusionMatrix::column_sum(int predicted) const {
    std::int64_t s = 0;
    for (int t = 0; t < num_classes_; ++t) s += at(t, predicted);
    return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int t = 0; t < num_classes_; ++t) {
        std::vector<std::int64_t> row(counts_.begin() + t * num_classes_, counts_.begin() + (t + 1) * num_classes_);
        rows.push_back(row);
    }
    return {{"classes", class_names_}, {"counts", rows}};
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& doc) {
    const auto rows = doc.at("counts").get<std::vector<std::vector<std::int64_t>>>();
    ConfusionMatrix cm(static_cast<int>(rows.size()), doc.at("classes").get<std::vector<std::string>>());
    for (int t = 0; t < cm.num_classes(); ++t) {
        if (static_cast<int>(rows[static_cast<std::size_t>(t)].size()) != cm.num_classes()) {
            throw ValidationError("confusion matrix must be square");
        }
        for (int p = 0; p < cm.num_classes(); ++p) cm.at(t, p) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return cm;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int num_classes,
                                 std::vector<std::string> class_names) {
    if (truth.size() != predicted.size()) {
        throw ValidationError("label lists differ in length (" + std::to_string(truth.size()) + " vs " +
                              std::to_string(predicted.size()) + ")");
    }
    ConfusionMatrix cm(num_classes, std::move(class_names));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw ValidationError("class index out of range at position " + std::to_string(i));
        }
        ++cm.at(t, p);
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    return total == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(total);
}

int argmax(const float* values, std::size_t count) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < count; ++i) {
        if (values[i] > values[best]) best = i;
    }
    return static_cast<int>(best);
}

EvaluationReport classification_report(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw ValidationError("cannot build a report from an empty confusion matrix");

    EvaluationReport report;
    report.confusion = cm;
    report.total_support = total;
    report.accuracy = accuracy(cm);
    const int n = cm.num_classes();
    for (int c = 0; c < n; ++c) {
        ClassMetrics m{.class_name = cm.class_names()[static_cast<std::size_t>(c)]};
        const auto tp = cm.at(c, c);
        const auto predicted = cm.column_sum(c);
        m.support = cm.row_sum(c);
        m.precision_undefined = predicted == 0;
        m.recall_undefined = m.support == 0;
        m.precision = m.precision_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
        m.recall = m.recall_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(m.support);
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        report.per_class.push_back(m);
    }
    // Sum first, divide once: a perfect report then averages to exactly 1.
    for (const auto& m : report.per_class) {
        const double s = static_cast<double>(m.support);
        report.macro_avg.precision += m.precision;
        report.macro_avg.recall += m.recall;
        report.macro_avg.f1 += m.f1;
        report.weighted_avg.precision += m.precision * s;
        report.weighted_avg.recall += m.recall * s;
        report.weighted_avg.f1 += m.f1 * s;
    }
    for (auto* a : {&report.macro_avg, &report.weighted_avg}) {
        const double d = a == &report.macro_avg ? static_cast<double>(n) : static_cast<double>(total);
        a->precision /= d;
        a->recall /= d;
        a->f1 /= d;
    }
    return report;
}

std::vector<double> EvaluationReport::headline() const {
    return {accuracy, weighted_avg.precision, weighted_avg.recall, weighted_avg.f1};
}

std::string EvaluationReport::render_text(int digits) const {
    std::size_t width = std::string("weighted avg").size();
    for (const auto& m : per_class) width = std::max(width, m.class_name.size());
    const int col = std::max(9, digits + 7);

    std::ostringstream out;
    out << std::fixed << std::setprecision(digits);
    auto label = [&](const std::string& text) { out << std::setw(static_cast<int>(width)) << std::right << text << ' '; };
    auto number = [&](double v) { out << ' ' << std::setw(col) << v; };
    auto count = [&](std::int64_t v) { out << ' ' << std::setw(col) << v << '\n'; };
    auto blank = [&] { out << ' ' << std::setw(col) << ""; };

    label("");
    for (const char* h : {"precision", "recall", "f1-score", "support"}) out << ' ' << std::setw(col) << h;
    out << "\n\n";
    bool any_undefined = false;
    for (const auto& m : per_class) {
        label(m.class_name);
        number(m.precision);
        number(m.recall);
        number(m.f1);
        count(m.support);
        any_undefined = any_undefined || m.precision_undefined || m.recall_undefined;
    }
    out << '\n';
    label("accuracy");
    blank();
    blank();
    number(accuracy);
    count(total_support);
    for (const auto& [name, avg] : {std::pair{"macro avg", macro_avg}, std::pair{"weighted avg", weighted_avg}}) {
        label(name);
        number(avg.precision);
        number(avg.recall);
        number(avg.f1);
        count(total_support);
    }
    if (any_undefined) {
        out << "\nNote: precision or recall is undefined (no predicted or true samples) for some classes and is reported as 0.\n";
    }
    return out.str();
}

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& m : per_class) {
        classes.push_back({{"class", m.class_name},
                           {"precision", m.precision},
                           {"recall", m.recall},
                           {"f1", m.f1},
                           {"support", m.support},
                           {"precision_undefined", m.precision_undefined},
                           {"recall_undefined", m.recall_undefined}});
    }
    auto avg = [](const AverageMetrics& a) { return nlohmann::json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}}; };
    const auto h = headline();
    return {{"per_class", classes},
            {"accuracy", accuracy},
            {"macro_avg", avg(macro_avg)},
            {"weighted_avg", avg(weighted_avg)},
            {"total_support", total_support},
            {"headline", {{"accuracy", h[0]}, {"precision", h[1]}, {"recall", h[2]}, {"f1", h[3]}}},
            {"confusion_matrix", confusion.to_json()}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& doc) {
    EvaluationReport r;
    try {
        for (const auto& c : doc.at("per_class")) {
            r.per_class.push_back({.class_name = c.at("class").get<std::string>(),
                                   .precision = c.at("precision").get<double>(),
                                   .recall = c.at("recall").get<double>(),
                                   .f1 = c.at("f1").get<double>(),
                                   .support = c.at("support").get<std::int64_t>(),
                                   .precision_undefined = c.value("precision_undefined", false),
                                   .recall_undefined = c.value("recall_undefined", false)});
        }
        auto avg = [](const nlohmann::json& a) {
            return AverageMetrics{a.at("precision").get<double>(), a.at("recall").get<double>(), a.at("f1").get<double>()};
        };
        r.accuracy = doc.at("accuracy").get<double>();
        r.macro_avg = avg(doc.at("macro_avg"));
        r.weighted_avg = avg(doc.at("weighted_avg"));
        r.total_support = doc.at("total_support").get<std::int64_t>();
        if (doc.contains("confusion_matrix")) r.confusion = ConfusionMatrix::from_json(doc.at("confusion_matrix"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
    return r;
}

void CVReport::update_average() {
    average = FoldResult{.fold = -1};
    if (folds.empty()) return;
    const double n = static_cast<double>(folds.size());
    for (const auto& f : folds) {
        average.accuracy += f.accuracy;
        average.precision += f.precision;
        average.recall += f.recall;
        average.f1 += f.f1;
    }
    average.accuracy /= n;
    average.precision /= n;
    average.recall /= n;
    average.f1 /= n;
}

nlohmann::json CVReport::to_json() const {
    auto row = [](const FoldResult& f) {
        return nlohmann::json{{"fold", f.fold}, {"accuracy", f.accuracy}, {"precision", f.precision}, {"recall", f.recall}, {"f1", f.f1}};
    };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& f : folds) rows.push_back(row(f));
    nlohmann::json avg = row(average);
    avg.erase("fold");
    nlohmann::json doc{{"k", k}, {"seed", seed}, {"folds", rows}, {"average", avg}, {"complete", complete()}};
    if (!error.empty()) doc["error"] = error;
    return doc;
}

std::string CVReport::to_csv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "fold,accuracy,precision,recall,f1\n";
    for (const auto& f : folds) {
        out << f.fold + 1 << ',' << f.accuracy << ',' << f.precision << ',' << f.recall << ',' << f.f1 << '\n';
    }
    out << "average," << average.accuracy << ',' << average.precision << ',' << average.recall << ',' << average.f1 << '\n';
    return out.str();
}

std::string CVReport::render_text() const {
    std::ostringstream out;
    out << std::fixed;
    out << std::setw(20) << std::left << "";
    for (const auto& f : folds) out << std::setw(12) << std::right << ("Fold - " + std::to_string(f.fold + 1));
    out << std::setw(12) << std::right << "Average" << '\n';
    auto line = [&](const char* name, auto member) {
        out << std::setw(20) << std::left << name;
        for (const auto& f : folds) out << std::setw(11) << std::right << std::setprecision(2) << 100.0 * (f.*member) << '%';
        out << std::setw(11) << std::right << std::setprecision(3) << 100.0 * (average.*member) << "%\n";
    };
    line("Testing Accuracy", &FoldResult::accuracy);
    line("Testing Precision", &FoldResult::precision);
    line("Testing Recall", &FoldResult::recall);
    if (!error.empty()) out << "aborted: " << error << '\n';
    return out.str();
}

}  // namespace treebark
