#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

enum class Origin { original, augmented };

struct ImageRecord {
    std::filesystem::path path;
    std::string class_name;
    int class_index = 0;
    int width = 0;
    int height = 0;
    Origin origin = Origin::original;
    std::optional<std::filesystem::path> source_path;  // set when origin == augmented

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Index of a class-per-directory corpus. Classes are sorted lexicographically
/// and that order defines the label index of every record.
class DatasetManifest {
public:
    DatasetManifest() = default;

    /// Validates and freezes: sorts/dedups nothing, throws ValidationError when
    /// classes are not unique+sorted or a record disagrees with the class list.
    DatasetManifest(std::filesystem::path root, std::vector<std::string> classes, std::vector<ImageRecord> records);

    const std::filesystem::path& root() const { return root_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<ImageRecord>& records() const { return records_; }
    const std::vector<std::size_t>& counts() const { return counts_; }

    std::size_t size() const { return records_.size(); }
    std::size_t num_classes() const { return classes_.size(); }

    /// Throws ValidationError for unknown names.
    int class_index(const std::string& name) const;

    /// Record indices belonging to each class, in record order.
    std::vector<std::vector<std::size_t>> indices_by_class() const;

    /// Labels of the records, in record order.
    std::vector<int> labels() const;

    /// Manifest restricted to the given record indices (class list unchanged).
    DatasetManifest subset(const std::vector<std::size_t>& indices) const;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& doc);

    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path);

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

private:
    std::filesystem::path root_;
    std::vector<std::string> classes_;
    std::vector<ImageRecord> records_;
    std::vector<std::size_t> counts_;
};

struct ScanOptions {
    /// Empty class directories become fatal instead of a warning.
    bool strict = false;
};

/// Scans `<root>/<ClassName>/<image files>`. Undecodable files are skipped
/// with a warning. Throws ValidationError("root not found: ...") for a missing root.
DatasetManifest scan_dataset(const std::filesystem::path& root, const ScanOptions& options = {});

struct SplitAssignment {
    std::vector<std::size_t> train_indices;  // sorted ascending
    std::vector<std::size_t> test_indices;   // sorted ascending
    double ratio = 0.8;
    std::uint64_t seed = 0;
    bool stratified = false;

    nlohmann::json to_json() const;
    static SplitAssignment from_json(const nlohmann::json& doc);
};

/// Random train/test split with |train| = round(ratio * N). Stratified mode
/// apportions the train quota per class by largest remainder, so each class
/// lands within one image of ratio * count.
SplitAssignment split_dataset(const DatasetManifest& manifest, double ratio, std::uint64_t seed, bool stratified = false);

struct FoldPartition {
    int k = 0;
    std::vector<std::vector<std::size_t>> folds;  // each sorted ascending
    std::uint64_t seed = 0;

    /// Every index outside fold `i`, sorted.
    std::vector<std::size_t> training_indices(int i) const;
};

FoldPartition kfold_partition(const DatasetManifest& manifest, int k, std::uint64_t seed, bool stratified = false);

/// Index-only variant, used where no manifest exists (e.g. synthetic index sets).
FoldPartition kfold_partition(std::size_t n, int k, std::uint64_t seed);

std::string to_string(Origin origin);

}  // namespace treebark
