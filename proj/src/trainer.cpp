#include "treebark/trainer.hpp"

#include "treebark/error.hpp"
#include "treebark/log.hpp"
#include "treebark/metrics.hpp"
#include "treebark/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace treebark {

namespace fs = std::filesystem;

void TrainingConfig::validate() const {
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
        throw ValidationError("learning_rate must be a finite non-negative number");
    }
    if (learning_rate == 0.0) {
        if (strict) throw ValidationError("learning_rate must be positive (strict mode)");
        log::warn("learning_rate is 0; weights will not change");
    }
    if (epochs < 1) throw ValidationError("epochs must be at least 1, got " + std::to_string(epochs));
    if (batch_size < 1) throw ValidationError("batch_size must be at least 1, got " + std::to_string(batch_size));
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
    if (plateau.enabled) {
        if (!(plateau.factor > 0.0 && plateau.factor < 1.0)) throw ValidationError("plateau factor must lie in (0, 1)");
        if (plateau.patience < 1) throw ValidationError("plateau patience must be at least 1");
        if (!(plateau.min_learning_rate >= 0.0)) throw ValidationError("plateau min_learning_rate must be non-negative");
    }
}

nlohmann::json TrainingConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"seed", seed},
            {"beta1", beta1},
            {"beta2", beta2},
            {"epsilon", epsilon},
            {"plateau_decay",
             {{"enabled", plateau.enabled},
              {"factor", plateau.factor},
              {"patience", plateau.patience},
              {"min_learning_rate", plateau.min_learning_rate}}},
            {"record_timings", record_timings},
            {"strict", strict}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& doc) {
    TrainingConfig c;
    try {
        c.learning_rate = doc.value("learning_rate", c.learning_rate);
        c.epochs = doc.value("epochs", c.epochs);
        c.batch_size = doc.value("batch_size", c.batch_size);
        c.seed = doc.value("seed", c.seed);
        c.beta1 = doc.value("beta1", c.beta1);
        c.beta2 = doc.value("beta2", c.beta2);
        c.epsilon = doc.value("epsilon", c.epsilon);
        if (doc.contains("plateau_decay")) {
            const auto& p = doc.at("plateau_decay");
            c.plateau.enabled = p.value("enabled", c.plateau.enabled);
            c.plateau.factor = p.value("factor", c.plateau.factor);
            c.plateau.patience = p.value("patience", c.plateau.patience);
            c.plateau.min_learning_rate = p.value("min_learning_rate", c.plateau.min_learning_rate);
        }
        c.record_timings = doc.value("record_timings", c.record_timings);
        c.strict = doc.value("strict", c.strict);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed training config: ") + e.what());
    }
    return c;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& field, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("history CSV line " + std::to_string(line) + ": not a number: '" + field + "'");
    }
}

}  // namespace

std::string TrainingHistory::to_csv() const {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
    for (const auto& e : epochs) {
        out += std::to_string(e.epoch) + ',' + format_double(e.train_loss) + ',' + format_double(e.train_accuracy) + ',' +
               (e.val_loss ? format_double(*e.val_loss) : "") + ',' +
               (e.val_accuracy ? format_double(*e.val_accuracy) : "") + ',' + format_double(e.seconds) + '\n';
    }
    return out;
}

TrainingHistory TrainingHistory::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "epoch,train_loss,train_acc,val_loss,val_acc,seconds") {
        throw ValidationError("history CSV has an unexpected header");
    }
    TrainingHistory history;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream row(line);
        std::string field;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.emplace_back();
        if (fields.size() != 6) throw ValidationError("history CSV line " + std::to_string(line_no) + " needs 6 fields");
        EpochRecord e;
        e.epoch = static_cast<int>(parse_double(fields[0], line_no));
        e.train_loss = parse_double(fields[1], line_no);
        e.train_accuracy = parse_double(fields[2], line_no);
        if (!fields[3].empty()) e.val_loss = parse_double(fields[3], line_no);
        if (!fields[4].empty()) e.val_accuracy = parse_double(fields[4], line_no);
        e.seconds = parse_double(fields[5], line_no);
        history.epochs.push_back(e);
    }
    return history;
}

void TrainingHistory::save_csv(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write history: " + path.string());
    out << to_csv();
    if (!out) throw IoError("failed writing history: " + path.string());
}

TrainingHistory TrainingHistory::load_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("history not found: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_csv(buffer.str());
}

namespace {

void check_batch(const Classifier& model, const Batch& batch, const char* role) {
    const auto& spec = model.spec();
    const std::string what = std::string(role) + " batch";
    if (batch.size() == 0) throw ValidationError(what + " is empty");
    const auto& x = batch.inputs;
    if (x.dim() != 4 || x.size(1) != spec.input_height || x.size(2) != spec.input_width || x.size(3) != 3) {
        throw ValidationError(what + " inputs do not match the model input " + std::to_string(spec.input_height) + "x" +
                              std::to_string(spec.input_width) + "x3");
    }
    if (!batch.labels.defined() || batch.labels.dim() != 2 || batch.labels.size(0) != x.size(0)) {
        throw ValidationError(what + " labels do not line up with its inputs");
    }
    if (batch.labels.size(1) != spec.num_classes) {
        throw ValidationError(what + " has " + std::to_string(batch.labels.size(1)) + " label columns, model expects " +
                              std::to_string(spec.num_classes));
    }
}

/// Features are precomputed once when the backbone is frozen.
torch::Tensor frozen_features(Classifier& model, const torch::Tensor& inputs, std::int64_t chunk = 16) {
    torch::NoGradGuard no_grad;
    const bool was_training = model.is_training();
    model.set_training(false);
    std::vector<torch::Tensor> parts;
    for (std::int64_t begin = 0; begin < inputs.size(0); begin += chunk) {
        parts.push_back(model.features(inputs.slice(0, begin, std::min(begin + chunk, inputs.size(0)))));
    }
    model.set_training(was_training);
    return torch::cat(parts, 0);
}

std::vector<int> row_argmax(const torch::Tensor& scores) {
    const auto s = scores.detach().to(torch::kFloat32).contiguous();
    const auto rows = s.size(0);
    const auto cols = static_cast<std::size_t>(s.size(1));
    std::vector<int> out(static_cast<std::size_t>(rows));
    const float* data = s.data_ptr<float>();
    for (std::int64_t r = 0; r < rows; ++r) out[static_cast<std::size_t>(r)] = argmax(data + r * s.size(1), cols);
    return out;
}

torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels) {
    return -(labels * torch::log_softmax(logits, 1)).sum(1).mean();
}

struct ValidationScores {
    double loss = 0.0;
    double accuracy = 0.0;
};

ValidationScores score(Classifier& model, const torch::Tensor& inputs, const Batch& batch, bool inputs_are_features) {
    torch::NoGradGuard no_grad;
    const bool was_training = model.is_training();
    model.set_training(false);
    double loss_sum = 0.0;
    std::vector<int> predicted;
    const std::int64_t chunk = 32;
    for (std::int64_t begin = 0; begin < inputs.size(0); begin += chunk) {
        const auto end = std::min(begin + chunk, inputs.size(0));
        const auto part = inputs.slice(0, begin, end);
        const auto logits = inputs_are_features ? model.head_logits(part) : model.logits(part);
        loss_sum += cross_entropy(logits, batch.labels.slice(0, begin, end)).item<double>() * static_cast<double>(end - begin);
        const auto p = row_argmax(logits);
        predicted.insert(predicted.end(), p.begin(), p.end());
    }
    model.set_training(was_training);
    const auto cm = confusion_matrix(batch.class_indices(), predicted, static_cast<int>(model.spec().num_classes));
    return {loss_sum / static_cast<double>(inputs.size(0)), accuracy(cm)};
}

}  // namespace

TrainingHistory train(Classifier& model, const Batch& train_batch, const TrainingConfig& config,
                      const std::optional<Batch>& val_batch, const EpochCallback& on_epoch) {
    config.validate();
    check_batch(model, train_batch, "training");
    if (val_batch) check_batch(model, *val_batch, "validation");

    torch::manual_seed(derive_seed(config.seed, "dropout"));
    const bool frozen = !model.spec().backbone_trainable;
    const auto train_inputs = frozen ? frozen_features(model, train_batch.inputs) : train_batch.inputs;
    torch::Tensor val_inputs;
    if (val_batch) val_inputs = frozen ? frozen_features(model, val_batch->inputs) : val_batch->inputs;
    const auto truth = train_batch.class_indices();
    const int num_classes = static_cast<int>(model.spec().num_classes);

    torch::optim::Adam optimizer(model.trainable_parameters(), torch::optim::AdamOptions(config.learning_rate)
                                                                   .betas({config.beta1, config.beta2})
                                                                   .eps(config.epsilon));
    double learning_rate = config.learning_rate;
    double best_monitored = std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;

    TrainingHistory history;
    const auto n = train_batch.size();
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    model.set_training(true);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::int64_t{0});
        Rng rng(derive_seed(config.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        double loss_sum = 0.0;
        std::vector<int> predicted;
        std::vector<int> epoch_truth;
        predicted.reserve(order.size());
        epoch_truth.reserve(order.size());
        bool diverged = false;
        for (std::int64_t begin = 0; begin < n; begin += config.batch_size) {
            const auto end = std::min<std::int64_t>(begin + config.batch_size, n);
            const auto rows = torch::tensor(std::vector<std::int64_t>(order.begin() + begin, order.begin() + end), torch::kLong);
            const auto x = train_inputs.index_select(0, rows);
            const auto y = train_batch.labels.index_select(0, rows);

            optimizer.zero_grad();
            const auto logits = frozen ? model.head_logits(x) : model.logits(x);
            const auto loss = cross_entropy(logits, y);
            const double value = loss.item<double>();
            if (!std::isfinite(value)) {
                history.error = "training diverged: non-finite loss in epoch " + std::to_string(epoch) + " at sample " +
                                std::to_string(begin);
                diverged = true;
                break;
            }
            loss.backward();
            optimizer.step();

            loss_sum += value * static_cast<double>(end - begin);
            const auto p = row_argmax(logits);
            predicted.insert(predicted.end(), p.begin(), p.end());
            for (auto i = begin; i < end; ++i) epoch_truth.push_back(truth[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
        }
        if (diverged) {
            log::error(history.error);
            break;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(n);
        record.train_accuracy = accuracy(confusion_matrix(epoch_truth, predicted, num_classes));
        if (val_batch) {
            const auto s = score(model, val_inputs, *val_batch, frozen);
            record.val_loss = s.loss;
            record.val_accuracy = s.accuracy;
        }
        if (config.record_timings) {
            record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        }
        history.epochs.push_back(record);
        history.last_train_predictions = std::move(predicted);
        history.last_train_truth = std::move(epoch_truth);
        log::debug("epoch " + std::to_string(epoch) + " loss " + format_double(record.train_loss) + " acc " +
                   format_double(record.train_accuracy));

        if (config.plateau.enabled) {
            const double monitored = record.val_loss.value_or(record.train_loss);
            if (monitored < best_monitored) {
                best_monitored = monitored;
                epochs_without_improvement = 0;
            } else if (++epochs_without_improvement >= config.plateau.patience) {
                learning_rate = std::max(learning_rate * config.plateau.factor, config.plateau.min_learning_rate);
                for (auto& group : optimizer.param_groups()) {
                    static_cast<torch::optim::AdamOptions&>(group.options()).lr(learning_rate);
                }
                epochs_without_improvement = 0;
                log::info("plateau: learning rate reduced to " + format_double(learning_rate));
            }
        }
        if (on_epoch) on_epoch(record, model);
    }
    model.set_training(false);
    return history;
}

}  // namespace treebark
