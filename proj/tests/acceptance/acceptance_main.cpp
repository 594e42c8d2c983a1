// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include "fixtures.hpp"
#include "metric_oracle.hpp"

#include "treebark/batch.hpp"
#include "treebark/config.hpp"
#include "treebark/dataset.hpp"
#include "treebark/evaluator.hpp"
#include "treebark/metrics.hpp"
#include "treebark/model.hpp"
#include "treebark/pipeline.hpp"
#include "treebark/preprocess.hpp"
#include "treebark/random.hpp"
#include "treebark/resampler.hpp"
#include "treebark/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace treebark;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and limits.
constexpr double kMetricTolerance = 1e-12;
constexpr double kSoftmaxTolerance = 1e-5;
constexpr double kOverfitTarget = 0.95;
constexpr int kOverfitMaxEpochs = 40;
constexpr int kLossWindow = 5;
constexpr double kLossWindowSlack = 1.05;  // a 5-epoch mean may exceed the previous one by at most 5%
constexpr int kWideLossWindow = 10;        // 10-epoch means must not increase at all
constexpr double kAccountingSeconds = 60.0;
constexpr double kRebalanceSeconds = 120.0;
constexpr double kOverfitSeconds = 600.0;

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Accumulates failure reasons; the first one becomes the detail line.
class Verdict {
public:
    void require(bool ok, const std::string& what) {
        if (!ok && pass_) {
            pass_ = false;
            reason_ = what;
        }
    }
    Outcome done(const std::string& summary) const { return {pass_, pass_ ? summary : reason_}; }

private:
    bool pass_ = true;
    std::string reason_;
};

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

ModelSpec default_spec() {
    ModelSpec spec;
    spec.pretrained = false;
    spec.init_seed = 2024;
    return spec;
}

Outcome parameter_accounting(double& seconds_out) {
    const auto start = std::chrono::steady_clock::now();
    auto model = build_model(default_spec());
    const auto r = count_parameters(*model);
    seconds_out = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Verdict v;
    v.require(r.total == 69'248'306, "total " + std::to_string(r.total));
    v.require(r.trainable == 69'150'642, "trainable " + std::to_string(r.trainable));
    v.require(r.non_trainable == 97'664, "non-trainable " + std::to_string(r.non_trainable));
    const std::vector<std::pair<std::string, std::int64_t>> dense{
        {"dense", 26'214'912}, {"dense_1", 262'656}, {"dense_2", 131'328}, {"dense_3", 12'850}};
    for (const auto& [name, expected] : dense) {
        const auto row = std::find_if(r.layers.begin(), r.layers.end(), [&](const ParamRow& p) { return p.name == name; });
        v.require(row != r.layers.end() && row->params == expected, name + " params differ");
    }
    v.require(seconds_out < kAccountingSeconds, "took " + fmt("%.1f s", seconds_out));
    return v.done("69,248,306 / 69,150,642 / 97,664; head 26,214,912 / 262,656 / 131,328 / 12,850");
}

Outcome backbone_shape() {
    auto model = build_model(default_spec());
    auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
    const auto f = model->features(torch::rand({1, 160, 160, 3}, gen));
    Verdict v;
    v.require(f.sizes().vec() == std::vector<std::int64_t>{1, 5, 5, 2048}, "feature map " + std::string(c10::str(f.sizes())));
    v.require(model->feature_shape() == std::vector<std::int64_t>{5, 5, 2048}, "reported feature shape differs");
    return v.done("160x160x3 -> 5x5x2048");
}

Outcome rebalance_invariant(double& seconds_out) {
    testing::TempDir dir("accept-rebalance");
    const auto corpus = testing::write_corpus(dir / "data", {60, 75, 110, 150, 200, 220}, 64, 48);
    const auto start = std::chrono::steady_clock::now();
    const auto plan = plan_rebalance(corpus, 110, 77);
    const auto first = execute_plan(plan, corpus, default_augmentations(), dir / "a");
    const auto second = execute_plan(plan_rebalance(corpus, 110, 77), corpus, default_augmentations(), dir / "b");
    seconds_out = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Verdict v;
    const auto counts = first.manifest.counts();
    v.require(std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 110; }), "a class count is not 110");
    v.require(first.manifest.size() == 660, "total " + std::to_string(first.manifest.size()));
    v.require(first.provenance.to_json() == second.provenance.to_json(), "provenance differs between runs");
    v.require(hash_tree(dir / "a") == hash_tree(dir / "b"), "augmented files differ between runs");
    v.require(verify_provenance(first.provenance, dir / "a").empty(), "provenance hashes do not match the files");
    v.require(seconds_out < kRebalanceSeconds, "took " + fmt("%.1f s", seconds_out));
    return v.done("6 x 110 = 660, " + std::to_string(first.provenance.entries.size()) +
                  " generated, provenance identical on re-run");
}

Outcome metric_oracle() {
    Rng rng(20240501);
    Verdict v;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto cm = testing::random_confusion(rng, 6);
        const auto r = classification_report(cm);
        worst = std::max(worst, testing::max_deviation(r, testing::brute_force_metrics(cm)));
        v.require(r.accuracy == static_cast<double>(cm.trace()) / static_cast<double>(cm.total()),
                  "accuracy != trace/total on trial " + std::to_string(trial));
    }
    v.require(worst <= kMetricTolerance, "max deviation " + fmt("%.3g", worst));
    for (int trial = 0; trial < 100; ++trial) {
        const int n = static_cast<int>(rng.between(1, 6));
        ConfusionMatrix cm(n);
        for (int c = 0; c < n; ++c) cm.at(c, c) = rng.between(1, 40);
        const auto r = classification_report(cm);
        bool all_one = r.accuracy == 1.0 && r.macro_avg.precision == 1.0 && r.macro_avg.recall == 1.0 &&
                       r.macro_avg.f1 == 1.0 && r.weighted_avg.precision == 1.0 && r.weighted_avg.recall == 1.0 &&
                       r.weighted_avg.f1 == 1.0;
        for (const auto& m : r.per_class) all_one = all_one && m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0;
        v.require(all_one, "perfect diagonal did not give 1.0 everywhere");
    }
    return v.done("1000 matrices, max deviation " + fmt("%.3g", worst) + ", 100 perfect diagonals");
}

Outcome report_format() {
    constexpr int kClasses = 50;
    Rng rng(50);
    std::vector<std::string> names;
    for (int c = 0; c < kClasses; ++c) names.push_back("Species " + std::to_string(c + 1));
    names[7] = "Wrightia religiosa";
    ConfusionMatrix cm(kClasses, names);
    for (int t = 0; t < kClasses; ++t) {
        const auto support = rng.between(15, 30);
        for (std::int64_t i = 0; i < support; ++i) {
            const int p = rng.bernoulli(0.92) ? t : static_cast<int>(rng.between(0, kClasses - 1));
            ++cm.at(t, p);
        }
    }
    const auto r = classification_report(cm);
    const auto text = r.render_text();
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);

    Verdict v;
    const std::size_t width = std::string("Wrightia religiosa").size();
    v.require(lines.size() == static_cast<std::size_t>(kClasses) + 6, "line count " + std::to_string(lines.size()));
    if (lines.size() != static_cast<std::size_t>(kClasses) + 6) return v.done("");
    const std::string header = std::string(width, ' ') + "  precision    recall  f1-score   support";
    v.require(lines[0] == header, "header layout differs: '" + lines[0] + "'");
    v.require(lines[1].empty() && lines[kClasses + 2].empty(), "blank separator lines missing");
    for (int c = 0; c < kClasses; ++c) {
        const auto& line = lines[static_cast<std::size_t>(c) + 2];
        const auto& m = r.per_class[static_cast<std::size_t>(c)];
        char expected[160];
        std::snprintf(expected, sizeof expected, "%*s  %9.2f %9.2f %9.2f %9lld", static_cast<int>(width),
                      names[static_cast<std::size_t>(c)].c_str(), m.precision, m.recall, m.f1,
                      static_cast<long long>(m.support));
        v.require(line == expected, "class row differs: '" + line + "'");
    }
    char accuracy_row[160];
    std::snprintf(accuracy_row, sizeof accuracy_row, "%*s  %9s %9s %9.2f %9lld", static_cast<int>(width), "accuracy", "",
                  "", r.accuracy, static_cast<long long>(r.total_support));
    v.require(lines[kClasses + 3] == accuracy_row, "accuracy row differs: '" + lines[kClasses + 3] + "'");
    v.require(lines[kClasses + 4].find("macro avg") != std::string::npos, "macro avg row missing");
    v.require(lines[kClasses + 5].find("weighted avg") != std::string::npos, "weighted avg row missing");
    for (std::size_t i = 2; i < lines.size(); ++i) {
        if (!lines[i].empty()) v.require(lines[i].size() == header.size(), "row width differs from header");
    }
    v.require(std::abs(r.weighted_avg.recall - r.accuracy) <= kMetricTolerance, "weighted recall != accuracy");
    return v.done("50 class rows + accuracy/macro avg/weighted avg, weighted recall = accuracy = " + fmt("%.4f", r.accuracy));
}

Outcome kfold_invariants() {
    const auto folds = kfold_partition(5500, 5, 8);
    Verdict v;
    std::vector<int> seen(5500, 0);
    for (const auto& f : folds.folds) {
        v.require(f.size() == 1100, "fold of size " + std::to_string(f.size()));
        for (auto i : f) ++seen[i];
    }
    v.require(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }), "folds are not a partition");
    for (int i = 0; i < 5; ++i) {
        v.require(folds.training_indices(i).size() == 4400, "training side is not 4400");
    }

    CVReport cv;
    cv.k = 5;
    Rng rng(9);
    for (int f = 0; f < 5; ++f) {
        cv.folds.push_back({f, rng.uniform(0.9, 0.97), rng.uniform(0.9, 0.97), rng.uniform(0.9, 0.97), rng.uniform(0.9, 0.97)});
    }
    cv.update_average();
    auto mean = [&](double FoldResult::*field) {
        double sum = 0.0;
        for (const auto& f : cv.folds) sum += f.*field;
        return sum / 5.0;
    };
    v.require(cv.average.accuracy == mean(&FoldResult::accuracy), "accuracy mean differs");
    v.require(cv.average.precision == mean(&FoldResult::precision), "precision mean differs");
    v.require(cv.average.recall == mean(&FoldResult::recall), "recall mean differs");
    v.require(cv.average.f1 == mean(&FoldResult::f1), "f1 mean differs");
    return v.done("5 disjoint folds of 1100 covering 5500; averages exact");
}

Outcome tiny_overfit(double& seconds_out) {
    testing::TempDir dir("accept-overfit");
    const auto corpus = testing::write_corpus(dir / "data", {8, 8, 8, 8, 8}, 80, 60);
    const auto batch = encode_batch(corpus, PreprocessConfig{});
    auto spec = default_spec();
    spec.num_classes = 5;
    spec.backbone_trainable = false;
    auto model = build_model(spec);
    TrainingConfig config;
    config.epochs = kOverfitMaxEpochs;
    config.learning_rate = 1e-3;
    config.batch_size = 8;
    config.seed = 31;

    const auto start = std::chrono::steady_clock::now();
    const auto history = train(*model, batch, config);
    const auto final_eval = evaluate(*model, batch);
    seconds_out = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    Verdict v;
    v.require(history.ok(), history.error);
    int reached_at = 0;
    double peak = 0.0;
    for (const auto& e : history.epochs) {
        peak = std::max(peak, e.train_accuracy);
        if (reached_at == 0 && e.train_accuracy >= kOverfitTarget) reached_at = e.epoch;
    }
    v.require(reached_at > 0, "peak running train accuracy " + fmt("%.3f", peak));
    v.require(final_eval.accuracy >= kOverfitTarget, "final train accuracy (inference mode) " + fmt("%.3f", final_eval.accuracy));

    auto window_means = [&](int width) {
        std::vector<double> means;
        const auto w = static_cast<std::size_t>(width);
        for (std::size_t begin = 0; begin + w <= history.epochs.size(); begin += w) {
            double sum = 0.0;
            for (std::size_t i = begin; i < begin + w; ++i) sum += history.epochs[i].train_loss;
            means.push_back(sum / width);
        }
        return means;
    };
    auto render = [&](const std::vector<double>& means) {
        std::string out;
        for (std::size_t i = 0; i < means.size(); ++i) out += (i ? " " : "") + fmt("%.3f", means[i]);
        return out;
    };
    const auto narrow = window_means(kLossWindow);
    const auto wide = window_means(kWideLossWindow);
    for (std::size_t i = 1; i < narrow.size(); ++i) {
        v.require(narrow[i] <= narrow[i - 1] * kLossWindowSlack, "5-epoch loss mean rose: " + render(narrow));
    }
    for (std::size_t i = 1; i < wide.size(); ++i) {
        v.require(wide[i] <= wide[i - 1], "10-epoch loss mean rose: " + render(wide));
    }
    const auto trend = render(narrow) + " | 10-epoch " + render(wide);
    v.require(seconds_out < kOverfitSeconds, "took " + fmt("%.0f s", seconds_out));
    return v.done("running train acc >= 0.95 at epoch " + std::to_string(reached_at) + ", final inference-mode " +
                  fmt("%.3f", final_eval.accuracy) + ", loss windows " + trend);
}

Outcome preprocessing_contracts() {
    testing::TempDir dir("accept-preprocess");
    Verdict v;
    Image probe(3, 1);
    const std::uint8_t values[3] = {255, 0, 128};
    for (int i = 0; i < 3; ++i) {
        for (int ch = 0; ch < 3; ++ch) probe.pixels[static_cast<std::size_t>(i * 3 + ch)] = values[i];
    }
    const auto n = normalize(probe);
    v.require(n[0] == 1.0f && n[3] == 0.0f && n[6] == 128.0f / 255.0f, "normalize does not map 255/0/128 exactly");

    fs::create_directories(dir / "data" / "a");
    fs::create_directories(dir / "data" / "b");
    save_image(testing::texture_image(0, 0, 303, 404), dir / "data" / "a" / "tall.png");
    save_image(testing::texture_image(0, 1, 404, 303), dir / "data" / "a" / "wide.png");
    save_image(testing::texture_image(1, 0, 303, 404), dir / "data" / "b" / "one.png");
    Image extremes(303, 404);
    for (std::size_t i = 0; i < extremes.pixels.size(); ++i) extremes.pixels[i] = (i / 3) % 2 ? 255 : 0;
    save_image(extremes, dir / "data" / "b" / "extremes.png");
    const auto manifest = scan_dataset(dir / "data");
    const auto batch = encode_batch(manifest, PreprocessConfig{});
    v.require(batch.inputs.sizes().vec() == std::vector<std::int64_t>{4, 160, 160, 3},
              "batch shape " + std::string(c10::str(batch.inputs.sizes())));
    v.require(batch.inputs.min().item<float>() >= 0.0f && batch.inputs.max().item<float>() <= 1.0f, "values leave [0, 1]");
    v.require(torch::equal(batch.labels.sum(1), torch::ones({4})), "one-hot rows do not sum to 1");
    v.require(((batch.labels == 0) | (batch.labels == 1)).all().item<bool>(), "labels are not 0/1");
    const auto resized = resize_image(load_image(dir / "data" / "a" / "tall.png"), PreprocessConfig{});
    v.require(resized.width == 160 && resized.height == 160 && resized.pixels.size() == 160 * 160 * 3,
              "303x404 did not resize to 160x160x3");
    return v.done("[0,1] range, 255/0/128 exact, one-hot sums 1, 303x404 -> 160x160x3");
}

Outcome determinism() {
    testing::TempDir dir("accept-determinism");
    testing::write_corpus(dir / "data", {5, 8, 11}, 80, 60);
    RunConfig config;
    config.dataset_root = dir / "data";
    config.output_dir = dir / "run";
    config.seed = 1234;
    config.threads = 1;
    config.resample.target_per_class = 8;
    config.model.pretrained = false;
    config.training.epochs = 1;
    config.training.batch_size = 8;
    config.training.record_timings = false;

    auto once = [&] {
        fs::remove_all(config.output_dir);
        run_train(config);
        return hash_tree(config.output_dir);
    };
    const auto first = once();
    const auto second = once();
    Verdict v;
    v.require(first.size() == second.size(), "artifact sets differ");
    for (std::size_t i = 0; i < std::min(first.size(), second.size()); ++i) {
        v.require(first[i] == second[i], "artifact differs: " + first[i].first);
    }
    for (const char* leaf : {"checkpoint.tbw", "history.csv", "report.json", "provenance.json", "split.json"}) {
        v.require(std::any_of(first.begin(), first.end(), [&](const auto& e) { return e.first == leaf; }),
                  std::string("missing artifact ") + leaf);
    }
    return v.done(std::to_string(first.size()) + " artifacts byte-identical across two runs");
}

Outcome softmax_contract() {
    auto model = build_model(default_spec());
    auto gen = at::make_generator<at::CPUGeneratorImpl>(100);
    const auto probs = model->predict(torch::rand({100, 160, 160, 3}, gen));
    Verdict v;
    v.require(probs.sizes().vec() == std::vector<std::int64_t>{100, 50}, "prediction shape");
    v.require(probs.min().item<float>() >= 0.0f, "negative probability");
    const double worst = (probs.sum(1) - 1.0).abs().max().item<double>();
    v.require(worst <= kSoftmaxTolerance, "row sum off by " + fmt("%.3g", worst));
    return v.done("100 rows, max |sum - 1| = " + fmt("%.3g", worst));
}

}  // namespace

int main() {
    torch::set_num_threads(1);
    log::set_level(log::Level::warn);
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    double accounting_s = 0.0, rebalance_s = 0.0, overfit_s = 0.0;
    const std::vector<Criterion> criteria{
        {"parameter-accounting", [&] { return parameter_accounting(accounting_s); }},
        {"backbone-shape", backbone_shape},
        {"rebalance-invariant", [&] { return rebalance_invariant(rebalance_s); }},
        {"metric-oracle", metric_oracle},
        {"report-format", report_format},
        {"kfold-invariants", kfold_invariants},
        {"tiny-overfit", [&] { return tiny_overfit(overfit_s); }},
        {"preprocessing-contracts", preprocessing_contracts},
        {"determinism", determinism},
        {"softmax-contract", softmax_contract},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " (" << fmt("%.1f s", s) << "): " << o.detail << std::endl;
    }
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
