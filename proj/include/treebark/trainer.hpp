#pragma once

#include "treebark/batch.hpp"
#include "treebark/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

/// Multiplies the learning rate by `factor` once the monitored loss has not
/// improved for `patience` epochs (validation loss when available).
struct PlateauDecay {
    bool enabled = false;
    double factor = 0.5;
    int patience = 3;
    double min_learning_rate = 1e-7;
};

struct TrainingConfig {
    double learning_rate = 1e-4;
    int epochs = 32;
    int batch_size = 32;
    std::uint64_t seed = 0;
    // Adam moments and epsilon.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    PlateauDecay plateau;
    /// False writes 0 into the seconds column so histories compare byte-for-byte.
    bool record_timings = true;
    /// Strict mode also rejects learning_rate == 0.
    bool strict = false;

    /// Throws ValidationError. A zero learning rate passes unless strict.
    void validate() const;
    nlohmann::json to_json() const;
    static TrainingConfig from_json(const nlohmann::json& doc);
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
    double seconds = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    /// Non-empty when training stopped early; completed epochs stay recorded.
    std::string error;
    /// Predictions and truths behind the last epoch's train accuracy.
    std::vector<int> last_train_predictions;
    std::vector<int> last_train_truth;

    bool ok() const { return error.empty(); }

    /// Columns: epoch, train_loss, train_acc, val_loss, val_acc, seconds.
    std::string to_csv() const;
    static TrainingHistory from_csv(const std::string& text);
    void save_csv(const std::filesystem::path& path) const;
    static TrainingHistory load_csv(const std::filesystem::path& path);
};

/// Called after every completed epoch; used for epoch sweeps.
using EpochCallback = std::function<void(const EpochRecord&, Classifier&)>;

/// Adam on categorical cross-entropy. Mini-batch order is reshuffled each epoch
/// from derive_seed(config.seed, "epoch", e). Train loss and accuracy are the
/// running values over the epoch's mini-batches (dropout active). A frozen
/// backbone is evaluated once and only the head is optimised.
/// Throws ValidationError on a config or shape problem before any update.
TrainingHistory train(Classifier& model, const Batch& train_batch, const TrainingConfig& config,
                      const std::optional<Batch>& val_batch = std::nullopt, const EpochCallback& on_epoch = {});

struct PlotFiles {
    std::filesystem::path accuracy;
    std::filesystem::path loss;
    std::filesystem::path csv;
};

/// Writes accuracy.png, loss.png and history.csv into `out_dir`.
/// Throws ValidationError for an empty history.
PlotFiles plot_history(const TrainingHistory& history, const std::filesystem::path& out_dir);

}  // namespace treebark
