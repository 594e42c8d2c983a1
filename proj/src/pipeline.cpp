#include "treebark/pipeline.hpp"

#include "treebark/batch.hpp"
#include "treebark/error.hpp"
#include "treebark/hash.hpp"
#include "treebark/image.hpp"
#include "treebark/log.hpp"

#include <ATen/Parallel.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

namespace treebark {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ValidationError(what + " not found: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed " + what + " " + path.string() + ": " + e.what());
    }
}

/// Applies the configured thread count for the lifetime of a command.
class ThreadScope {
public:
    explicit ThreadScope(int threads) : previous_(at::get_num_threads()) {
        if (threads > 0) at::set_num_threads(threads);
    }
    ~ThreadScope() { at::set_num_threads(previous_); }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;

private:
    int previous_;
};

void snapshot_config(const RunConfig& config, const std::optional<fs::path>& source, const RunLayout& layout) {
    if (source) {
        std::error_code ec;
        if (fs::exists(layout.config()) && fs::equivalent(*source, layout.config(), ec)) return;
        fs::copy_file(*source, layout.config(), fs::copy_options::overwrite_existing, ec);
        if (ec) throw IoError("cannot copy config to " + layout.config().string() + ": " + ec.message());
    } else {
        config.save(layout.config());
    }
}

void write_report(const EvaluationReport& report, const fs::path& json_path, const fs::path& text_path) {
    write_json(json_path, report.to_json());
    write_text(text_path, report.render_text());
}

}  // namespace

RunRecord::RunRecord(std::string command, const RunConfig& config, bool record_timestamps)
    : command_(std::move(command)), config_(config.to_json()), record_timestamps_(record_timestamps) {
    if (record_timestamps_) started_at_ = utc_now();
}

void RunRecord::add_artifact(const std::string& name, const fs::path& path) { artifacts_[name] = path.generic_string(); }

void RunRecord::add_input(const std::string& name, const fs::path& path) { inputs_[name] = path.generic_string(); }

nlohmann::json RunRecord::to_json() const {
    auto with_hashes = [](const nlohmann::json& paths) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [name, value] : paths.items()) {
            const fs::path p = value.get<std::string>();
            nlohmann::json entry{{"path", p.generic_string()}};
            if (fs::is_regular_file(p)) {
                entry["sha256"] = sha256_file(p);
            } else if (fs::is_directory(p)) {
                nlohmann::json files = nlohmann::json::object();
                for (const auto& [rel, hash] : hash_tree(p)) files[rel] = hash;
                entry["files"] = files;
            }
            out[name] = entry;
        }
        return out;
    };
    nlohmann::json doc{{"tool_version", kToolVersion},
                       {"command", command_},
                       {"config", config_},
                       {"inputs", with_hashes(inputs_)},
                       {"artifacts", with_hashes(artifacts_)}};
    for (const auto& [key, value] : extra_.items()) doc[key] = value;
    if (record_timestamps_) {
        doc["started_at"] = started_at_;
        doc["finished_at"] = utc_now();
    }
    return doc;
}

void RunRecord::save(const fs::path& path) {
    for (const auto& [name, value] : artifacts_.items()) {
        if (!fs::exists(fs::path(value.get<std::string>()))) {
            throw IoError("artifact '" + name + "' is missing: " + value.get<std::string>());
        }
    }
    write_json(path, to_json());
}

DatasetManifest run_ingest(const fs::path& root, const fs::path& out, bool strict) {
    auto manifest = scan_dataset(root, ScanOptions{.strict = strict});
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    manifest.save(out);
    log::info("ingested " + std::to_string(manifest.size()) + " images in " + std::to_string(manifest.num_classes()) +
              " classes");
    return manifest;
}

ResampledDataset run_rebalance(const DatasetManifest& manifest, const RunConfig& config, const fs::path& out_dir) {
    const RunLayout layout{out_dir};
    const auto plan = plan_rebalance(manifest, config.resample.target_per_class, config.resample_seed());
    fs::create_directories(out_dir);
    std::error_code ec;
    fs::remove_all(layout.augmented_dir(), ec);
    auto result = execute_plan(plan, manifest, config.resample.augmentations, layout.augmented_dir(),
                               ExecuteOptions{.threads = config.threads});
    result.manifest.save(layout.resampled_manifest());
    result.provenance.save(layout.provenance());
    log::info("rebalanced to " + std::to_string(result.manifest.size()) + " images (" +
              std::to_string(plan.generated_total()) + " augmented)");
    return result;
}

PreparedData prepare_data(const RunConfig& config, bool with_split) {
    config.validate();
    const RunLayout layout{config.output_dir};
    fs::create_directories(layout.root);

    PreparedData data;
    data.original = run_ingest(config.dataset_root, layout.manifest(), config.strict);
    const auto ratio = config.split.ratio;
    const auto stratified = config.split.stratified;

    if (!config.resample.enabled) {
        data.dataset = data.original;
        if (with_split) data.split = split_dataset(data.dataset, ratio, config.split_seed(), stratified);
    } else if (!config.resample.split_first || !with_split) {
        auto resampled = run_rebalance(data.original, config, layout.root);
        data.dataset = std::move(resampled.manifest);
        data.provenance = std::move(resampled.provenance);
        if (with_split) data.split = split_dataset(data.dataset, ratio, config.split_seed(), stratified);
    } else {
        const auto first = split_dataset(data.original, ratio, config.split_seed(), stratified);
        auto resampled = run_rebalance(data.original.subset(first.train_indices), config, layout.root);
        auto records = resampled.manifest.records();
        const auto train_count = records.size();
        for (auto i : first.test_indices) records.push_back(data.original.records()[i]);
        data.dataset = DatasetManifest(data.original.root(), data.original.classes(), std::move(records));
        data.provenance = std::move(resampled.provenance);
        data.split.ratio = ratio;
        data.split.seed = config.split_seed();
        data.split.stratified = stratified;
        for (std::size_t i = 0; i < data.dataset.size(); ++i) {
            (i < train_count ? data.split.train_indices : data.split.test_indices).push_back(i);
        }
        data.dataset.save(layout.resampled_manifest());
    }
    if (with_split) write_json(layout.split(), data.split.to_json());
    return data;
}

TrainOutcome run_train(const RunConfig& config, const std::optional<fs::path>& config_source) {
    ThreadScope threads(config.threads);
    const RunLayout layout{config.output_dir};
    const auto tconfig = config.training_config();
    RunRecord record("train", config, tconfig.record_timings);

    const auto data = prepare_data(config);
    snapshot_config(config, config_source, layout);
    const auto spec = config.model_for(data.dataset.num_classes());
    if (data.split.train_indices.empty()) throw ValidationError("split leaves no training images");

    const auto train_batch = encode_batch(data.dataset, data.split.train_indices, config.preprocess);
    std::optional<Batch> test_batch;
    if (!data.split.test_indices.empty()) test_batch = encode_batch(data.dataset, data.split.test_indices, config.preprocess);

    auto model = build_model(spec);
    TrainOutcome outcome;
    outcome.history = train(*model, train_batch, tconfig, test_batch);
    if (!outcome.history.epochs.empty()) {
        outcome.history.save_csv(layout.history());
        plot_history(outcome.history, layout.plots_dir());
        record.add_artifact("history", layout.history());
        record.add_artifact("plots", layout.plots_dir());
    }
    record.add_input("dataset_root", config.dataset_root);
    record.add_artifact("config", layout.config());
    record.add_artifact("manifest", layout.manifest());
    if (data.provenance) {
        record.add_artifact("resampled_manifest", layout.resampled_manifest());
        record.add_artifact("provenance", layout.provenance());
        record.add_artifact("augmented", layout.augmented_dir());
    }
    record.add_artifact("split", layout.split());
    if (!outcome.history.ok()) {
        record.set("error", outcome.history.error);
        record.save(layout.run_record());
        throw RuntimeFailure(outcome.history.error);
    }

    save_weights(*model, layout.checkpoint(), data.dataset.classes(), config.preprocess);
    record.add_artifact("checkpoint", layout.checkpoint());
    if (test_batch) {
        outcome.report = evaluate(*model, *test_batch);
        write_report(*outcome.report, layout.report_json(), layout.report_text());
        record.add_artifact("report_json", layout.report_json());
        record.add_artifact("report_text", layout.report_text());
        const auto h = outcome.report->headline();
        record.set("headline", {{"accuracy", h[0]}, {"precision", h[1]}, {"recall", h[2]}, {"f1", h[3]}});
    }
    record.save(layout.run_record());
    outcome.record = record.to_json();
    return outcome;
}

EvaluationReport run_evaluate(const fs::path& checkpoint, const fs::path& manifest_path, const std::optional<fs::path>& split,
                              const fs::path& out_dir) {
    CheckpointMeta meta;
    auto model = load_checkpoint(checkpoint, &meta);
    const auto manifest = DatasetManifest::load(manifest_path);
    if (manifest.classes() != meta.classes) {
        throw ValidationError("manifest has " + std::to_string(manifest.num_classes()) + " classes but the checkpoint was trained on " +
                              std::to_string(meta.classes.size()) + " (class lists differ)");
    }
    std::vector<std::size_t> indices;
    if (split) {
        indices = SplitAssignment::from_json(read_json(*split, "split")).test_indices;
        for (auto i : indices) {
            if (i >= manifest.size()) throw ValidationError("split index " + std::to_string(i) + " is outside the manifest");
        }
    } else {
        indices.resize(manifest.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    }
    if (indices.empty()) throw ValidationError("nothing to evaluate: the selection is empty");
    const auto batch = encode_batch(manifest, indices, meta.preprocess);
    const auto report = evaluate(*model, batch);
    fs::create_directories(out_dir);
    const RunLayout layout{out_dir};
    write_report(report, layout.report_json(), layout.report_text());
    return report;
}

CVReport run_crossval(const RunConfig& config, const std::optional<fs::path>& config_source) {
    ThreadScope threads(config.threads);
    const RunLayout layout{config.output_dir};
    const auto tconfig = config.training_config();
    RunRecord record("crossval", config, tconfig.record_timings);

    const auto data = prepare_data(config, false);
    snapshot_config(config, config_source, layout);
    const auto spec = config.model_for(data.dataset.num_classes());
    CrossValidationOptions options;
    options.stratified = config.cv.stratified;
    options.preprocess = config.preprocess;
    options.on_fold = [](const FoldResult& f) {
        log::info("fold " + std::to_string(f.fold + 1) + ": accuracy " + std::to_string(f.accuracy));
    };
    const auto report = cross_validate(data.dataset, spec, tconfig, config.cv.k, config.cv_seed(), options);

    write_json(layout.cv_json(), report.to_json());
    write_text(layout.cv_csv(), report.to_csv());
    write_text(layout.cv_text(), report.render_text());
    record.add_input("dataset_root", config.dataset_root);
    record.add_artifact("config", layout.config());
    record.add_artifact("manifest", layout.manifest());
    if (data.provenance) {
        record.add_artifact("resampled_manifest", layout.resampled_manifest());
        record.add_artifact("provenance", layout.provenance());
    }
    record.add_artifact("cv_json", layout.cv_json());
    record.add_artifact("cv_csv", layout.cv_csv());
    if (!report.error.empty()) record.set("error", report.error);
    record.save(layout.run_record());
    if (!report.error.empty()) throw RuntimeFailure(report.error);
    return report;
}

std::vector<RankedClass> run_predict(const fs::path& checkpoint, const fs::path& image_path, int top_n) {
    if (top_n < 1) throw ValidationError("top_n must be at least 1");
    CheckpointMeta meta;
    auto model = load_checkpoint(checkpoint, &meta);
    const auto image = load_image(image_path);
    const auto probs = model->predict(encode_image(image, meta.preprocess)).contiguous();
    std::vector<RankedClass> ranked;
    for (std::int64_t c = 0; c < probs.size(1); ++c) {
        ranked.push_back({meta.classes[static_cast<std::size_t>(c)], static_cast<int>(c), probs[0][c].item<double>()});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.probability > b.probability; });
    ranked.resize(std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(top_n)));
    return ranked;
}

std::vector<SweepPoint> run_sweep(const RunConfig& config, const std::optional<fs::path>& config_source) {
    ThreadScope threads(config.threads);
    if (config.sweep_epochs.empty()) throw ValidationError("sweep_epochs is empty");
    const RunLayout layout{config.output_dir};
    auto tconfig = config.training_config();
    const std::set<int> wanted(config.sweep_epochs.begin(), config.sweep_epochs.end());
    tconfig.epochs = *wanted.rbegin();
    RunRecord record("sweep-epochs", config, tconfig.record_timings);

    const auto data = prepare_data(config);
    snapshot_config(config, config_source, layout);
    const auto spec = config.model_for(data.dataset.num_classes());
    const auto train_batch = encode_batch(data.dataset, data.split.train_indices, config.preprocess);
    std::optional<Batch> test_batch;
    if (!data.split.test_indices.empty()) test_batch = encode_batch(data.dataset, data.split.test_indices, config.preprocess);

    auto model = build_model(spec);
    std::vector<SweepPoint> points;
    const auto history = train(*model, train_batch, tconfig, test_batch, [&](const EpochRecord& e, Classifier& m) {
        if (!wanted.count(e.epoch)) return;
        SweepPoint p{.epoch = e.epoch, .history = e, .report = std::nullopt};
        if (test_batch) p.report = evaluate(m, *test_batch);
        log::info("sweep: epoch " + std::to_string(e.epoch) + " recorded");
        points.push_back(std::move(p));
    });
    if (!history.epochs.empty()) {
        history.save_csv(layout.history());
        plot_history(history, layout.plots_dir());
        record.add_artifact("history", layout.history());
        record.add_artifact("plots", layout.plots_dir());
    }

    nlohmann::json rows = nlohmann::json::array();
    std::string csv = "epoch,train_loss,train_acc,test_accuracy,test_precision,test_recall,test_f1\n";
    for (const auto& p : points) {
        nlohmann::json row{{"epoch", p.epoch}, {"train_loss", p.history.train_loss}, {"train_accuracy", p.history.train_accuracy}};
        char line[256];
        if (p.report) {
            const auto h = p.report->headline();
            row["test"] = {{"accuracy", h[0]}, {"precision", h[1]}, {"recall", h[2]}, {"f1", h[3]}};
            std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.epoch, p.history.train_loss,
                          p.history.train_accuracy, h[0], h[1], h[2], h[3]);
        } else {
            std::snprintf(line, sizeof line, "%d,%.17g,%.17g,,,,\n", p.epoch, p.history.train_loss, p.history.train_accuracy);
        }
        csv += line;
        rows.push_back(row);
    }
    write_json(layout.sweep_json(), {{"epochs", rows}, {"complete", history.ok()}});
    write_text(layout.sweep_csv(), csv);
    record.add_input("dataset_root", config.dataset_root);
    record.add_artifact("config", layout.config());
    record.add_artifact("split", layout.split());
    record.add_artifact("sweep_json", layout.sweep_json());
    record.add_artifact("sweep_csv", layout.sweep_csv());
    if (!history.ok()) record.set("error", history.error);
    record.save(layout.run_record());
    if (!history.ok()) throw RuntimeFailure(history.error);
    return points;
}

std::vector<std::pair<std::string, std::string>> hash_tree(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        out.emplace_back(fs::relative(entry.path(), dir).generic_string(), sha256_file(entry.path()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace treebark
