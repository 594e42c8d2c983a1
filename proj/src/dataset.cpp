#include "treebark/dataset.hpp"

#include "treebark/error.hpp"
#include "treebark/log.hpp"
#include "treebark/image.hpp"
#include "treebark/random.hpp"


#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace treebark {

namespace fs = std::filesystem;

std::string to_string(Origin origin) { return origin == Origin::original ? "original" : "augmented"; }

namespace {

Origin origin_from_string(const std::string& text) {
    if (text == "original") return Origin::original;
    if (text == "augmented") return Origin::augmented;
    throw ValidationError("unknown record origin: " + text);
}

bool is_hidden(const fs::path& p) {
    const auto name = p.filename().string();
    return !name.empty() && name.front() == '.';
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (is_hidden(entry.path())) continue;
        if (directories ? entry.is_directory() : entry.is_regular_file()) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    return out;
}

}  // namespace

DatasetManifest::DatasetManifest(fs::path root, std::vector<std::string> classes, std::vector<ImageRecord> records)
    : root_(std::move(root)), classes_(std::move(classes)), records_(std::move(records)), counts_(classes_.size(), 0) {
    for (std::size_t i = 1; i < classes_.size(); ++i) {
        if (!(classes_[i - 1] < classes_[i])) {
            throw ValidationError("class list must be unique and sorted; offending entry: " + classes_[i]);
        }
    }
    for (const auto& r : records_) {
        if (r.class_index < 0 || static_cast<std::size_t>(r.class_index) >= classes_.size() ||
            classes_[static_cast<std::size_t>(r.class_index)] != r.class_name) {
            throw ValidationError("record class mismatch for " + r.path.string() + " (class '" + r.class_name + "')");
        }
        if (r.width <= 0 || r.height <= 0) {
            throw ValidationError("record has non-positive dimensions: " + r.path.string());
        }
        if (r.origin == Origin::augmented && !r.source_path) {
            throw ValidationError("augmented record without a source: " + r.path.string());
        }
        ++counts_[static_cast<std::size_t>(r.class_index)];
    }
}

int DatasetManifest::class_index(const std::string& name) const {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), name);
    if (it == classes_.end() || *it != name) {
        throw ValidationError("unknown class: " + name);
    }
    return static_cast<int>(it - classes_.begin());
}

std::vector<std::vector<std::size_t>> DatasetManifest::indices_by_class() const {
    std::vector<std::vector<std::size_t>> out(classes_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        out[static_cast<std::size_t>(records_[i].class_index)].push_back(i);
    }
    return out;
}

std::vector<int> DatasetManifest::labels() const {
    std::vector<int> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.class_index);
    return out;
}

DatasetManifest DatasetManifest::subset(const std::vector<std::size_t>& indices) const {
    std::vector<ImageRecord> picked;
    picked.reserve(indices.size());
    for (auto i : indices) {
        if (i >= records_.size()) {
            throw ValidationError("subset index out of range: " + std::to_string(i));
        }
        picked.push_back(records_[i]);
    }
    return DatasetManifest(root_, classes_, std::move(picked));
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : records_) {
        records.push_back({{"path", r.path.generic_string()},
                           {"class", r.class_name},
                           {"width", r.width},
                           {"height", r.height},
                           {"origin", to_string(r.origin)},
                           {"source", r.source_path ? nlohmann::json(r.source_path->generic_string()) : nlohmann::json()}});
    }
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t c = 0; c < classes_.size(); ++c) counts[classes_[c]] = counts_[c];
    return {{"root", root_.generic_string()}, {"classes", classes_}, {"records", records}, {"counts", counts}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& doc) {
    try {
        auto classes = doc.at("classes").get<std::vector<std::string>>();
        std::vector<ImageRecord> records;
        for (const auto& item : doc.at("records")) {
            ImageRecord r;
            r.path = item.at("path").get<std::string>();
            r.class_name = item.at("class").get<std::string>();
            const auto it = std::lower_bound(classes.begin(), classes.end(), r.class_name);
            r.class_index = (it != classes.end() && *it == r.class_name) ? static_cast<int>(it - classes.begin()) : -1;
            r.width = item.at("width").get<int>();
            r.height = item.at("height").get<int>();
            r.origin = origin_from_string(item.at("origin").get<std::string>());
            if (item.contains("source") && !item.at("source").is_null()) {
                r.source_path = item.at("source").get<std::string>();
            }
            records.push_back(std::move(r));
        }
        DatasetManifest manifest(doc.at("root").get<std::string>(), std::move(classes), std::move(records));
        if (doc.contains("counts")) {
            for (std::size_t c = 0; c < manifest.classes_.size(); ++c) {
                const auto& name = manifest.classes_[c];
                if (doc["counts"].value(name, std::size_t{0}) != manifest.counts_[c]) {
                    throw ValidationError("manifest counts disagree with records for class " + name);
                }
            }
        }
        return manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
}

void DatasetManifest::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("failed writing manifest: " + path.string());
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("manifest not found: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed manifest " + path.string() + ": " + e.what());
    }
    return from_json(doc);
}

DatasetManifest scan_dataset(const fs::path& root, const ScanOptions& options) {
    if (!fs::is_directory(root)) {
        throw ValidationError("root not found: " + root.string());
    }
    std::vector<std::string> classes;
    std::vector<ImageRecord> records;
    for (const auto& class_dir : sorted_entries(root, true)) {
        const auto class_name = class_dir.filename().string();
        const int class_index = static_cast<int>(classes.size());
        classes.push_back(class_name);
        std::size_t kept = 0;
        for (const auto& file : sorted_entries(class_dir, false)) {
            auto decoded = try_decode_image(file);
            if (!decoded) {
                log::warn("skipping undecodable file: " + file.string());
                continue;
            }
            if (decoded->warning) log::warn(*decoded->warning);
            records.push_back({.path = file,
                               .class_name = class_name,
                               .class_index = class_index,
                               .width = decoded->image.width,
                               .height = decoded->image.height,
                               .origin = Origin::original,
                               .source_path = std::nullopt});
            ++kept;
        }
        if (kept == 0) {
            if (options.strict) {
                throw ValidationError("empty class directory: " + class_dir.string());
            }
            log::warn("class directory has no decodable images: " + class_dir.string());
        }
    }
    return DatasetManifest(root, std::move(classes), std::move(records));
}

nlohmann::json SplitAssignment::to_json() const {
    return {{"train", train_indices}, {"test", test_indices}, {"ratio", ratio}, {"seed", seed}, {"stratified", stratified}};
}

SplitAssignment SplitAssignment::from_json(const nlohmann::json& doc) {
    try {
        return {.train_indices = doc.at("train").get<std::vector<std::size_t>>(),
                .test_indices = doc.at("test").get<std::vector<std::size_t>>(),
                .ratio = doc.at("ratio").get<double>(),
                .seed = doc.at("seed").get<std::uint64_t>(),
                .stratified = doc.at("stratified").get<bool>()};
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed split: ") + e.what());
    }
}

SplitAssignment split_dataset(const DatasetManifest& manifest, double ratio, std::uint64_t seed, bool stratified) {
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw ValidationError("split ratio must lie in (0, 1], got " + std::to_string(ratio));
    }
    const std::size_t n = manifest.size();
    if (n == 0) {
        throw ValidationError("cannot split an empty manifest");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    if (n_train == 0) {
        throw ValidationError("split ratio leaves no training items");
    }

    Rng rng(seed);
    SplitAssignment split;
    split.ratio = ratio;
    split.seed = seed;
    split.stratified = stratified;
    if (!stratified) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        split.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    } else {
        auto by_class = manifest.indices_by_class();
        // largest-remainder apportionment of the global train quota
        std::vector<std::size_t> quota(by_class.size());
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            const double exact = ratio * static_cast<double>(by_class[c].size());
            quota[c] = static_cast<std::size_t>(std::floor(exact));
            assigned += quota[c];
            remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < n_train && i < remainders.size(); ++i, ++assigned) {
            ++quota[remainders[i].second];
        }
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            auto& members = by_class[c];
            rng.shuffle(members);
            split.train_indices.insert(split.train_indices.end(), members.begin(),
                                       members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
            split.test_indices.insert(split.test_indices.end(),
                                      members.begin() + static_cast<std::ptrdiff_t>(quota[c]), members.end());
        }
    }
    std::sort(split.train_indices.begin(), split.train_indices.end());
    std::sort(split.test_indices.begin(), split.test_indices.end());
    return split;
}

std::vector<std::size_t> FoldPartition::training_indices(int i) const {
    std::vector<std::size_t> out;
    for (int f = 0; f < k; ++f) {
        if (f == i) continue;
        const auto& fold = folds[static_cast<std::size_t>(f)];
        out.insert(out.end(), fold.begin(), fold.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

FoldPartition deal_into_folds(const std::vector<std::size_t>& order, int k, std::uint64_t seed) {
    FoldPartition partition{.k = k, .folds = std::vector<std::vector<std::size_t>>(static_cast<std::size_t>(k)), .seed = seed};
    for (std::size_t i = 0; i < order.size(); ++i) {
        partition.folds[i % static_cast<std::size_t>(k)].push_back(order[i]);
    }
    for (auto& fold : partition.folds) std::sort(fold.begin(), fold.end());
    return partition;
}

void check_fold_count(std::size_t n, int k) {
    if (k < 2 || static_cast<std::size_t>(k) > n) {
        throw ValidationError("k must satisfy 2 <= k <= N (k=" + std::to_string(k) + ", N=" + std::to_string(n) + ")");
    }
}

}  // namespace

FoldPartition kfold_partition(std::size_t n, int k, std::uint64_t seed) {
    check_fold_count(n, k);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    return deal_into_folds(order, k, seed);
}

FoldPartition kfold_partition(const DatasetManifest& manifest, int k, std::uint64_t seed, bool stratified) {
    if (!stratified) {
        return kfold_partition(manifest.size(), k, seed);
    }
    check_fold_count(manifest.size(), k);
    // dealing the class-grouped sequence round-robin spreads each class evenly
    // while keeping global fold sizes within one of each other
    Rng rng(seed);
    std::vector<std::size_t> order;
    for (auto& members : manifest.indices_by_class()) {
        rng.shuffle(members);
        order.insert(order.end(), members.begin(), members.end());
    }
    return deal_into_folds(order, k, seed);
}

}  // namespace treebark
