#pragma once

#include "treebark/config.hpp"
#include "treebark/dataset.hpp"
#include "treebark/evaluator.hpp"
#include "treebark/metrics.hpp"
#include "treebark/resampler.hpp"
#include "treebark/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

/// File names inside a run directory.
struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.json"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
    std::filesystem::path resampled_manifest() const { return root / "resampled_manifest.json"; }
    std::filesystem::path provenance() const { return root / "provenance.json"; }
    std::filesystem::path augmented_dir() const { return root / "augmented"; }
    std::filesystem::path split() const { return root / "split.json"; }
    std::filesystem::path checkpoint() const { return root / "checkpoint.tbw"; }
    std::filesystem::path history() const { return root / "history.csv"; }
    std::filesystem::path plots_dir() const { return root / "plots"; }
    std::filesystem::path report_json() const { return root / "report.json"; }
    std::filesystem::path report_text() const { return root / "report.txt"; }
    std::filesystem::path cv_json() const { return root / "cv.json"; }
    std::filesystem::path cv_csv() const { return root / "cv.csv"; }
    std::filesystem::path cv_text() const { return root / "cv.txt"; }
    std::filesystem::path sweep_json() const { return root / "sweep.json"; }
    std::filesystem::path sweep_csv() const { return root / "sweep.csv"; }
    std::filesystem::path run_record() const { return root / "run_record.json"; }
};

/// Collects produced artifacts and writes run_record.json.
class RunRecord {
public:
    RunRecord(std::string command, const RunConfig& config, bool record_timestamps);

    void add_artifact(const std::string& name, const std::filesystem::path& path);
    void add_input(const std::string& name, const std::filesystem::path& path);
    void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

    nlohmann::json to_json() const;
    /// Throws IoError when a referenced artifact is missing.
    void save(const std::filesystem::path& path);

private:
    std::string command_;
    nlohmann::json config_;
    bool record_timestamps_;
    std::string started_at_;
    nlohmann::json artifacts_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::object();
    nlohmann::json extra_ = nlohmann::json::object();
};

/// Scans the corpus and writes its manifest.
DatasetManifest run_ingest(const std::filesystem::path& root, const std::filesystem::path& out, bool strict = false);

/// Plans and executes the rebalance of `manifest` into `out_dir`
/// (augmented/, resampled_manifest.json, provenance.json).
ResampledDataset run_rebalance(const DatasetManifest& manifest, const RunConfig& config, const std::filesystem::path& out_dir);

struct PreparedData {
    DatasetManifest original;
    /// Manifest that the split indexes: rebalanced, or original when resampling is off.
    DatasetManifest dataset;
    std::optional<Provenance> provenance;
    SplitAssignment split;
};

/// Ingest, rebalance and split according to the config; every step writes its
/// artifact into the run directory. In split-first mode only the training side
/// is rebalanced and the test side keeps its original images.
PreparedData prepare_data(const RunConfig& config, bool with_split = true);

struct TrainOutcome {
    TrainingHistory history;
    std::optional<EvaluationReport> report;  // absent when the split leaves no test images
    nlohmann::json record;
};

/// Runs ingest -> rebalance -> split -> encode -> build -> train -> evaluate and
/// writes every artifact under config.output_dir. `config_source` is copied
/// byte-for-byte into the run directory; without it the config is serialised.
/// Training divergence throws RuntimeFailure after the partial history is written.
TrainOutcome run_train(const RunConfig& config, const std::optional<std::filesystem::path>& config_source = std::nullopt);

/// Evaluates a checkpoint on a manifest (restricted to the split's test side
/// when a split file is given) and writes report.json / report.txt to out_dir.
/// Class lists must match the checkpoint (ValidationError otherwise).
EvaluationReport run_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                              const std::optional<std::filesystem::path>& split, const std::filesystem::path& out_dir);

/// K-fold cross-validation over the rebalanced dataset.
CVReport run_crossval(const RunConfig& config, const std::optional<std::filesystem::path>& config_source = std::nullopt);

struct RankedClass {
    std::string class_name;
    int class_index = 0;
    double probability = 0.0;
};

/// All classes sorted by descending probability (ties by class index), truncated to top_n.
std::vector<RankedClass> run_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& image, int top_n);

struct SweepPoint {
    int epoch = 0;
    EpochRecord history;
    std::optional<EvaluationReport> report;
};

/// Trains once to the largest requested epoch and snapshots test metrics at each requested epoch.
std::vector<SweepPoint> run_sweep(const RunConfig& config, const std::optional<std::filesystem::path>& config_source = std::nullopt);

/// Lowercase hex SHA-256 of every regular file under `dir`, keyed by relative path.
std::vector<std::pair<std::string, std::string>> hash_tree(const std::filesystem::path& dir);

}  // namespace treebark
