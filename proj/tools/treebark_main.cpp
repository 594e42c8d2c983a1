#include "treebark/config.hpp"
#include "treebark/error.hpp"
#include "treebark/log.hpp"
#include "treebark/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using namespace treebark;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 3;

/// Options shared by the config-driven subcommands.
struct RunOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::string> output;
    std::optional<std::string> dataset;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<double> learning_rate;
    std::optional<int> threads;
    bool strict = false;
    bool split_first = false;

    void attach(CLI::App& cmd) {
        cmd.add_option("-c,--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        cmd.add_option("--set", overrides, "Override a config key, e.g. --set training.batch_size=16");
        cmd.add_option("-o,--output", output, "Run directory (overrides output_dir)");
        cmd.add_option("--dataset", dataset, "Dataset root (overrides dataset_root)");
        cmd.add_option("--seed", seed, "Global seed");
        cmd.add_option("--epochs", epochs, "Training epochs");
        cmd.add_option("--lr", learning_rate, "Learning rate");
        cmd.add_option("--threads", threads, "Intra-op threads (1 for bit-exact reruns)");
        cmd.add_flag("--strict", strict, "Treat empty classes and a zero learning rate as errors");
        cmd.add_flag("--split-first", split_first, "Split before rebalancing; only the training side is augmented");
    }

    RunConfig resolve() const {
        std::ifstream in(config_path);
        if (!in) throw ValidationError("config not found: " + config_path);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError("malformed config " + config_path + ": " + e.what());
        }
        for (const auto& o : overrides) apply_override(doc, o);
        if (output) doc["output_dir"] = *output;
        if (dataset) doc["dataset_root"] = *dataset;
        if (seed) doc["seed"] = *seed;
        if (epochs) doc["training"]["epochs"] = *epochs;
        if (learning_rate) doc["training"]["learning_rate"] = *learning_rate;
        if (threads) doc["threads"] = *threads;
        if (strict) doc["strict"] = true;
        if (split_first) doc["resample"]["split_first"] = true;
        auto config = RunConfig::from_json(doc);
        config.validate();
        return config;
    }
};

void print_report_summary(const EvaluationReport& report) {
    const auto h = report.headline();
    std::printf("accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f  (n=%lld)\n", h[0], h[1], h[2], h[3],
                static_cast<long long>(report.total_support));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bark texture species classification pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Only errors");

    std::string root;
    std::string out;
    bool strict_scan = false;
    auto* ingest = app.add_subcommand("ingest", "Scan a class-per-directory corpus into a manifest");
    ingest->add_option("--root", root, "Corpus root")->required();
    ingest->add_option("--out", out, "Manifest path")->required();
    ingest->add_flag("--strict", strict_scan, "Empty class directories are errors");

    std::string manifest_path;
    std::optional<std::string> rebalance_config;
    std::optional<int> target;
    std::optional<std::uint64_t> rebalance_seed;
    auto* rebalance = app.add_subcommand("rebalance", "Undersample/augment every class to a fixed count");
    rebalance->add_option("--manifest", manifest_path, "Manifest from ingest")->required()->check(CLI::ExistingFile);
    rebalance->add_option("-c,--config", rebalance_config, "Run configuration (augmentations, target, seed)")
        ->check(CLI::ExistingFile);
    rebalance->add_option("--out", out, "Output directory")->required();
    rebalance->add_option("--target", target, "Images per class (default 110)");
    rebalance->add_option("--seed", rebalance_seed, "Global seed");

    RunOptions train_opts;
    auto* train_cmd = app.add_subcommand("train", "Full pipeline: ingest, rebalance, split, train, evaluate");
    train_opts.attach(*train_cmd);

    std::string checkpoint;
    std::optional<std::string> split_path;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Classification report for a checkpoint");
    evaluate_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--manifest", manifest_path, "Manifest to evaluate on")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--split", split_path, "Split file; only its test side is evaluated")->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--out", out, "Report directory")->required();

    RunOptions cv_opts;
    std::optional<int> k;
    auto* crossval = app.add_subcommand("crossval", "K-fold cross-validation");
    cv_opts.attach(*crossval);
    crossval->add_option("-k,--folds", k, "Number of folds");

    std::string image;
    int top_n = 5;
    bool as_json = false;
    auto* predict = app.add_subcommand("predict", "Ranked class probabilities for one image");
    predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    predict->add_option("--image", image, "Image file")->required();
    predict->add_option("--top", top_n, "Number of classes to list");
    predict->add_flag("--json", as_json, "Print JSON");

    RunOptions sweep_opts;
    std::vector<int> sweep_points;
    auto* sweep = app.add_subcommand("sweep-epochs", "Train once, record test metrics at several epoch counts");
    sweep_opts.attach(*sweep);
    sweep->add_option("--at", sweep_points, "Epochs to record (e.g. --at 20 32 40)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    log::set_level(quiet ? log::Level::error : verbose ? log::Level::debug : log::Level::info);

    try {
        if (*ingest) {
            const auto manifest = run_ingest(root, out, strict_scan);
            std::printf("%zu images, %zu classes -> %s\n", manifest.size(), manifest.num_classes(), out.c_str());
        } else if (*rebalance) {
            RunConfig config;
            if (rebalance_config) config = RunConfig::load(*rebalance_config);
            if (target) config.resample.target_per_class = *target;
            if (rebalance_seed) config.seed = *rebalance_seed;
            for (const auto& s : config.resample.augmentations) s.validate();
            const auto result = run_rebalance(DatasetManifest::load(manifest_path), config, out);
            std::printf("%zu images (%zu augmented) -> %s\n", result.manifest.size(), result.provenance.entries.size(),
                        out.c_str());
        } else if (*train_cmd) {
            const auto config = train_opts.resolve();
            const auto outcome = run_train(config, fs::path(train_opts.config_path));
            const auto& last = outcome.history.epochs.back();
            std::printf("epoch %d: train loss %.4f, train accuracy %.4f\n", last.epoch, last.train_loss, last.train_accuracy);
            if (outcome.report) print_report_summary(*outcome.report);
            std::printf("artifacts in %s\n", config.output_dir.c_str());
        } else if (*evaluate_cmd) {
            const auto report = run_evaluate(checkpoint, manifest_path,
                                             split_path ? std::optional<fs::path>(*split_path) : std::nullopt, out);
            std::cout << report.render_text();
        } else if (*crossval) {
            auto config = cv_opts.resolve();
            if (k) {
                config.cv.k = *k;
                config.validate();
            }
            const auto report = run_crossval(config, fs::path(cv_opts.config_path));
            std::cout << report.render_text();
        } else if (*predict) {
            const auto ranked = run_predict(checkpoint, image, top_n);
            if (as_json) {
                nlohmann::json rows = nlohmann::json::array();
                for (const auto& r : ranked) rows.push_back({{"class", r.class_name}, {"index", r.class_index}, {"probability", r.probability}});
                std::cout << rows.dump(2) << '\n';
            } else {
                for (const auto& r : ranked) std::printf("%-32s %.6f\n", r.class_name.c_str(), r.probability);
            }
        } else if (*sweep) {
            auto config = sweep_opts.resolve();
            if (!sweep_points.empty()) {
                config.sweep_epochs = sweep_points;
                config.validate();
            }
            for (const auto& p : run_sweep(config, fs::path(sweep_opts.config_path))) {
                std::printf("epoch %3d  train acc %.4f", p.epoch, p.history.train_accuracy);
                if (p.report) std::printf("  test acc %.4f", p.report->accuracy);
                std::printf("\n");
            }
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsageError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntimeError;
    }
    return 0;
}
