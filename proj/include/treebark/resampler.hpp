#pragma once

#include "treebark/augment.hpp"
#include "treebark/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treebark {

struct ClassPlan {
    std::string class_name;
    std::vector<std::size_t> keep;  // manifest indices, sorted, distinct
    std::size_t generate = 0;
};

/// Per class: |keep| + generate == target_per_class, and generate > 0 only when
/// the class had fewer originals than the target.
struct RebalancePlan {
    int target_per_class = 110;
    std::uint64_t seed = 0;
    std::vector<ClassPlan> classes;  // manifest class order

    std::size_t planned_total() const;
    std::size_t generated_total() const;

    /// Throws ValidationError when the plan does not fit `manifest`.
    void validate(const DatasetManifest& manifest) const;

    nlohmann::json to_json() const;
    static RebalancePlan from_json(const nlohmann::json& doc);
};

/// Undersamples classes above the target uniformly without replacement and
/// schedules synthetic images for classes below it. Throws ValidationError
/// naming any empty class.
RebalancePlan plan_rebalance(const DatasetManifest& manifest, int target_per_class, std::uint64_t seed);

struct ProvenanceEntry {
    std::filesystem::path out;      // relative to the output directory
    std::filesystem::path source;   // original record path
    std::string class_name;
    std::size_t ordinal = 0;        // per-class output ordinal
    std::uint64_t sub_seed = 0;
    std::vector<AppliedOp> ops;
    std::string content_hash;       // of the decoded output pixels
    /// Set when the scheduled source could not be decoded.
    std::optional<std::filesystem::path> substituted_for;

    friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

struct Provenance {
    int target = 0;
    std::uint64_t seed = 0;
    std::vector<AugmentationSpec> specs;
    std::vector<ProvenanceEntry> entries;

    nlohmann::json to_json() const;
    static Provenance from_json(const nlohmann::json& doc);
    void save(const std::filesystem::path& path) const;
    static Provenance load(const std::filesystem::path& path);
};

struct ResampledDataset {
    DatasetManifest manifest;  // per class: kept originals, then augmented records
    Provenance provenance;
};

struct ExecuteOptions {
    /// Worker threads for augmentation; 0 uses the torch intra-op pool size.
    int threads = 0;
};

/// Writes `<out_dir>/<Class>/aug_<ordinal>.png` for every planned synthetic
/// image. Sources cycle round-robin over the class originals; each image draws
/// from derive_seed(plan.seed, "augment/<Class>", ordinal). An undecodable
/// source is replaced by the next decodable original of the class. A write
/// failure removes every file written so far and throws IoError.
ResampledDataset execute_plan(const RebalancePlan& plan, const DatasetManifest& manifest,
                              const std::vector<AugmentationSpec>& specs, const std::filesystem::path& out_dir,
                              const ExecuteOptions& options = {});

/// Replays every provenance entry from its source and compares content hashes.
/// Returns the out paths whose replay differs.
std::vector<std::filesystem::path> verify_provenance(const Provenance& provenance, const std::filesystem::path& out_dir);

}  // namespace treebark
