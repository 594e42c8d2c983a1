#include "treebark/resampler.hpp"

#include "treebark/error.hpp"
#include "treebark/image.hpp"
#include "treebark/log.hpp"
#include "treebark/random.hpp"

#include <ATen/Parallel.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>

namespace treebark {

namespace fs = std::filesystem;

namespace {

std::string output_name(std::size_t ordinal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "aug_%04zu.png", ordinal);
    return buf;
}

std::uint64_t class_seed(std::uint64_t seed, std::string_view prefix, const std::string& class_name) {
    return derive_seed(seed, std::string(prefix) + class_name);
}

}  // namespace

std::size_t RebalancePlan::planned_total() const {
    std::size_t total = 0;
    for (const auto& c : classes) total += c.keep.size() + c.generate;
    return total;
}

std::size_t RebalancePlan::generated_total() const {
    std::size_t total = 0;
    for (const auto& c : classes) total += c.generate;
    return total;
}

void RebalancePlan::validate(const DatasetManifest& manifest) const {
    if (target_per_class < 1) throw ValidationError("target_per_class must be at least 1");
    if (classes.size() != manifest.num_classes()) throw ValidationError("plan class count does not match the manifest");
    const auto target = static_cast<std::size_t>(target_per_class);
    const auto& counts = manifest.counts();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const auto& entry = classes[c];
        if (entry.class_name != manifest.classes()[c]) {
            throw ValidationError("plan class '" + entry.class_name + "' does not match manifest class '" +
                                  manifest.classes()[c] + "'");
        }
        if (entry.keep.size() + entry.generate != target) {
            throw ValidationError("plan for class '" + entry.class_name + "' does not reach the target");
        }
        if (entry.keep.size() > counts[c]) throw ValidationError("plan keeps more images than class '" + entry.class_name + "' has");
        if (entry.generate > 0 && counts[c] >= target) {
            throw ValidationError("plan oversamples class '" + entry.class_name + "' which already meets the target");
        }
        if (entry.generate > 0 && entry.keep.empty()) {
            throw ValidationError("class '" + entry.class_name + "' has no sources for oversampling");
        }
        std::set<std::size_t> seen;
        for (auto i : entry.keep) {
            if (i >= manifest.size() || manifest.records()[i].class_index != static_cast<int>(c)) {
                throw ValidationError("plan keeps an index outside class '" + entry.class_name + "'");
            }
            if (!seen.insert(i).second) throw ValidationError("plan keeps index " + std::to_string(i) + " twice");
        }
    }
}

nlohmann::json RebalancePlan::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : classes) rows.push_back({{"class", c.class_name}, {"keep", c.keep}, {"generate", c.generate}});
    return {{"target_per_class", target_per_class}, {"seed", seed}, {"classes", rows}};
}

RebalancePlan RebalancePlan::from_json(const nlohmann::json& doc) {
    RebalancePlan plan;
    try {
        plan.target_per_class = doc.at("target_per_class").get<int>();
        plan.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& row : doc.at("classes")) {
            plan.classes.push_back({row.at("class").get<std::string>(), row.at("keep").get<std::vector<std::size_t>>(),
                                    row.at("generate").get<std::size_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed rebalance plan: ") + e.what());
    }
    return plan;
}

RebalancePlan plan_rebalance(const DatasetManifest& manifest, int target_per_class, std::uint64_t seed) {
    if (target_per_class < 1) throw ValidationError("target_per_class must be at least 1, got " + std::to_string(target_per_class));
    if (manifest.num_classes() == 0) throw ValidationError("manifest has no classes");
    const auto target = static_cast<std::size_t>(target_per_class);
    const auto by_class = manifest.indices_by_class();

    RebalancePlan plan;
    plan.target_per_class = target_per_class;
    plan.seed = seed;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& name = manifest.classes()[c];
        auto members = by_class[c];
        if (members.empty()) throw ValidationError("class '" + name + "' has no images");
        ClassPlan entry;
        entry.class_name = name;
        if (members.size() > target) {
            Rng rng(class_seed(seed, "undersample/", name));
            rng.shuffle(members);
            members.resize(target);
            std::sort(members.begin(), members.end());
        } else {
            entry.generate = target - members.size();
        }
        entry.keep = std::move(members);
        plan.classes.push_back(std::move(entry));
    }
    return plan;
}

nlohmann::json Provenance::to_json() const {
    nlohmann::json spec_docs = nlohmann::json::array();
    for (const auto& s : specs) spec_docs.push_back(s.to_json());
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json ops = nlohmann::json::array();
        for (const auto& op : e.ops) ops.push_back(op.to_json());
        nlohmann::json row{{"out", e.out.generic_string()},
                           {"source", e.source.generic_string()},
                           {"class", e.class_name},
                           {"ordinal", e.ordinal},
                           {"sub_seed", e.sub_seed},
                           {"ops", ops},
                           {"content_hash", e.content_hash}};
        if (e.substituted_for) row["substituted_for"] = e.substituted_for->generic_string();
        rows.push_back(std::move(row));
    }
    return {{"target", target}, {"seed", seed}, {"specs", spec_docs}, {"entries", rows}};
}

Provenance Provenance::from_json(const nlohmann::json& doc) {
    Provenance p;
    try {
        p.target = doc.at("target").get<int>();
        p.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& s : doc.at("specs")) p.specs.push_back(AugmentationSpec::from_json(s));
        for (const auto& row : doc.at("entries")) {
            ProvenanceEntry e;
            e.out = row.at("out").get<std::string>();
            e.source = row.at("source").get<std::string>();
            e.class_name = row.at("class").get<std::string>();
            e.ordinal = row.at("ordinal").get<std::size_t>();
            e.sub_seed = row.at("sub_seed").get<std::uint64_t>();
            for (const auto& op : row.at("ops")) e.ops.push_back(AppliedOp::from_json(op));
            e.content_hash = row.at("content_hash").get<std::string>();
            if (row.contains("substituted_for")) e.substituted_for = row.at("substituted_for").get<std::string>();
            p.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed provenance: ") + e.what());
    }
    return p;
}

void Provenance::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write provenance: " + path.string());
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("failed writing provenance: " + path.string());
}

Provenance Provenance::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("provenance not found: " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed provenance " + path.string() + ": " + e.what());
    }
}

namespace {

struct Job {
    std::size_t class_slot = 0;
    std::size_t ordinal = 0;
};

/// Decoded originals shared between jobs; each source is read at most once.
class SourceCache {
public:
    explicit SourceCache(const DatasetManifest& manifest) : manifest_(manifest) {}

    const Image* get(std::size_t index) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(index); it != cache_.end()) return it->second ? &*it->second : nullptr;
        }
        auto decoded = try_decode_image(manifest_.records()[index].path);
        std::lock_guard lock(mutex_);
        auto [it, inserted] = cache_.try_emplace(index);
        if (inserted) {
            if (decoded) {
                it->second = std::move(decoded->image);
            } else {
                log::warn("cannot decode augmentation source " + manifest_.records()[index].path.string());
            }
        }
        return it->second ? &*it->second : nullptr;
    }

private:
    const DatasetManifest& manifest_;
    std::mutex mutex_;
    std::map<std::size_t, std::optional<Image>> cache_;
};

void remove_outputs(const std::vector<fs::path>& files, const std::vector<fs::path>& created_dirs) {
    std::error_code ec;
    for (const auto& f : files) fs::remove(f, ec);
    for (auto it = created_dirs.rbegin(); it != created_dirs.rend(); ++it) fs::remove(*it, ec);
}

}  // namespace

ResampledDataset execute_plan(const RebalancePlan& plan, const DatasetManifest& manifest,
                              const std::vector<AugmentationSpec>& specs, const fs::path& out_dir,
                              const ExecuteOptions& options) {
    plan.validate(manifest);
    if (plan.generated_total() > 0) {
        if (specs.empty()) throw ValidationError("augmentation needs at least one operation");
        for (const auto& s : specs) s.validate();
    }

    std::vector<Job> jobs;
    for (std::size_t c = 0; c < plan.classes.size(); ++c) {
        for (std::size_t o = 0; o < plan.classes[c].generate; ++o) jobs.push_back({c, o});
    }

    std::vector<fs::path> created_dirs;
    std::vector<std::optional<ProvenanceEntry>> results(jobs.size());
    std::vector<std::string> failures(jobs.size());
    std::vector<std::size_t> chosen_source(jobs.size(), 0);
    std::atomic<bool> write_failed = false;

    if (!jobs.empty()) {
        std::error_code ec;
        if (!fs::exists(out_dir)) {
            if (!fs::create_directories(out_dir, ec)) throw IoError("cannot create output directory: " + out_dir.string());
            created_dirs.push_back(out_dir);
        }
        for (const auto& entry : plan.classes) {
            if (entry.generate == 0) continue;
            const auto dir = out_dir / entry.class_name;
            if (fs::exists(dir)) continue;
            if (!fs::create_directories(dir, ec)) {
                remove_outputs({}, created_dirs);
                throw IoError("cannot create output directory: " + dir.string());
            }
            created_dirs.push_back(dir);
        }

        SourceCache sources(manifest);
        auto run_job = [&](std::size_t j) {
            const auto& job = jobs[j];
            const auto& entry = plan.classes[job.class_slot];
            const auto& keep = entry.keep;
            const std::size_t scheduled = keep[job.ordinal % keep.size()];
            const Image* image = nullptr;
            std::size_t chosen = scheduled;
            for (std::size_t step = 0; step < keep.size() && image == nullptr; ++step) {
                chosen = keep[(job.ordinal + step) % keep.size()];
                image = sources.get(chosen);
            }
            if (image == nullptr) {
                failures[j] = "class '" + entry.class_name + "' has no decodable source image";
                return;
            }
            ProvenanceEntry prov;
            prov.class_name = entry.class_name;
            prov.ordinal = job.ordinal;
            prov.out = fs::path(entry.class_name) / output_name(job.ordinal);
            prov.source = manifest.records()[chosen].path;
            if (chosen != scheduled) {
                prov.substituted_for = manifest.records()[scheduled].path;
                log::warn("substituting " + prov.source.string() + " for undecodable " + prov.substituted_for->string());
            }
            prov.sub_seed = derive_seed(plan.seed, "augment/" + entry.class_name, job.ordinal);
            auto result = apply_augmentation(*image, specs, prov.sub_seed);
            prov.ops = std::move(result.ops);
            prov.content_hash = content_hash(result.image);
            try {
                save_image(result.image, out_dir / prov.out);
            } catch (const std::exception& e) {
                failures[j] = e.what();
                write_failed = true;
                return;
            }
            chosen_source[j] = chosen;
            results[j] = std::move(prov);
        };

        const int threads = options.threads > 0 ? options.threads : at::get_num_threads();
        if (threads <= 1) {
            for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
        } else {
            const int previous = at::get_num_threads();
            at::set_num_threads(threads);
            at::parallel_for(0, static_cast<std::int64_t>(jobs.size()), 1, [&](std::int64_t begin, std::int64_t end) {
                for (auto j = begin; j < end; ++j) run_job(static_cast<std::size_t>(j));
            });
            at::set_num_threads(previous);
        }

        const auto failed = std::find_if(failures.begin(), failures.end(), [](const auto& f) { return !f.empty(); });
        if (failed != failures.end()) {
            std::vector<fs::path> written;
            for (const auto& r : results) {
                if (r) written.push_back(out_dir / r->out);
            }
            remove_outputs(written, created_dirs);
            const std::string reason = *failed;
            if (write_failed) throw IoError("augmentation output failed, partial output removed: " + reason);
            throw IoError(reason);
        }
    }

    ResampledDataset out;
    out.provenance.target = plan.target_per_class;
    out.provenance.seed = plan.seed;
    out.provenance.specs = specs;

    std::vector<ImageRecord> records;
    records.reserve(plan.planned_total());
    std::size_t next_job = 0;
    for (std::size_t c = 0; c < plan.classes.size(); ++c) {
        for (auto i : plan.classes[c].keep) records.push_back(manifest.records()[i]);
        for (std::size_t o = 0; o < plan.classes[c].generate; ++o) {
            const auto& source = manifest.records()[chosen_source[next_job]];
            auto& prov = *results[next_job++];
            ImageRecord r;
            r.path = out_dir / prov.out;
            r.class_name = source.class_name;
            r.class_index = source.class_index;
            r.width = source.width;
            r.height = source.height;
            r.origin = Origin::augmented;
            r.source_path = prov.source;
            records.push_back(std::move(r));
            out.provenance.entries.push_back(std::move(prov));
        }
    }
    out.manifest = DatasetManifest(manifest.root(), manifest.classes(), std::move(records));
    return out;
}

std::vector<fs::path> verify_provenance(const Provenance& provenance, const fs::path& out_dir) {
    std::vector<fs::path> mismatched;
    for (const auto& e : provenance.entries) {
        const auto replayed = replay_ops(load_image(e.source), e.ops);
        const auto written = try_decode_image(out_dir / e.out);
        if (content_hash(replayed) != e.content_hash || !written || content_hash(written->image) != e.content_hash) {
            mismatched.push_back(e.out);
        }
    }
    return mismatched;
}

}  // namespace treebark
