#include "fixtures.hpp"

#include "treebark/error.hpp"
#include "treebark/hash.hpp"
#include "treebark/pipeline.hpp"
#include "treebark/resampler.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

using namespace treebark;
namespace fs = std::filesystem;

namespace {

DatasetManifest virtual_manifest(const std::vector<int>& counts) {
    std::vector<std::string> classes;
    std::vector<ImageRecord> records;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        classes.push_back(testing::class_name(static_cast<int>(c)));
        for (int i = 0; i < counts[c]; ++i) {
            ImageRecord r;
            r.path = "/virtual/" + classes.back() + "/" + std::to_string(i) + ".png";
            r.class_name = classes.back();
            r.class_index = static_cast<int>(c);
            r.width = 4;
            r.height = 4;
            records.push_back(r);
        }
    }
    return DatasetManifest("/virtual", classes, records);
}

}  // namespace

TEST_CASE("plan: {A:220, B:60} at 110") {
    const auto m = virtual_manifest({220, 60});
    const auto plan = plan_rebalance(m, 110, 5);
    CHECK(plan.classes[0].keep.size() == 110);
    CHECK(plan.classes[0].generate == 0);
    CHECK(plan.classes[1].keep.size() == 60);
    CHECK(plan.classes[1].generate == 50);
    CHECK_NOTHROW(plan.validate(m));
    CHECK(std::set<std::size_t>(plan.classes[0].keep.begin(), plan.classes[0].keep.end()).size() == 110);
}

TEST_CASE("plan: exactly-at-target class is kept whole") {
    const auto m = virtual_manifest({110});
    const auto plan = plan_rebalance(m, 110, 1);
    CHECK(plan.classes[0].keep.size() == 110);
    CHECK(plan.classes[0].generate == 0);
}

TEST_CASE("plan: 50 classes at 110 totals 5500") {
    std::vector<int> counts;
    for (int c = 0; c < 50; ++c) counts.push_back(60 + (c * 37) % 161);
    const auto plan = plan_rebalance(virtual_manifest(counts), 110, 3);
    CHECK(plan.planned_total() == 5500);
}

TEST_CASE("plan: undersampling is seeded and reasonably uniform") {
    const auto m = virtual_manifest({200});
    CHECK(plan_rebalance(m, 110, 9).classes[0].keep == plan_rebalance(m, 110, 9).classes[0].keep);
    CHECK(plan_rebalance(m, 110, 9).classes[0].keep != plan_rebalance(m, 110, 10).classes[0].keep);
    std::vector<int> hits(200, 0);
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        const auto plan = plan_rebalance(m, 110, seed);
        for (auto i : plan.classes[0].keep) ++hits[i];
    }
    // expected 400 * 110/200 = 220 per record
    for (int h : hits) {
        CHECK(h > 160);
        CHECK(h < 280);
    }
}

TEST_CASE("plan: errors") {
    const auto empty_class = virtual_manifest({3, 0});
    CHECK_THROWS_WITH_AS(plan_rebalance(empty_class, 5, 1), doctest::Contains(testing::class_name(1).c_str()), ValidationError);
    CHECK_THROWS_AS(plan_rebalance(virtual_manifest({3}), 0, 1), ValidationError);
}

TEST_CASE("plan: validate rejects broken plans") {
    const auto m = virtual_manifest({5, 2});
    auto plan = plan_rebalance(m, 4, 1);
    CHECK_NOTHROW(plan.validate(m));
    auto dup = plan;
    dup.classes[0].keep[1] = dup.classes[0].keep[0];
    CHECK_THROWS_AS(dup.validate(m), ValidationError);
    auto short_plan = plan;
    short_plan.classes[1].generate = 1;
    CHECK_THROWS_AS(short_plan.validate(m), ValidationError);
    auto cross = plan;
    cross.classes[1].keep[0] = 0;
    CHECK_THROWS_AS(cross.validate(m), ValidationError);
    CHECK(RebalancePlan::from_json(plan.to_json()).to_json() == plan.to_json());
}

TEST_CASE("execute: counts, provenance and replay") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "data", {3, 7, 5, 1});
    const auto plan = plan_rebalance(m, 5, 21);
    const auto out = execute_plan(plan, m, default_augmentations(), dir / "aug");
    CHECK(out.manifest.counts() == std::vector<std::size_t>{5, 5, 5, 5});
    CHECK(out.manifest.size() == 20);
    CHECK(out.provenance.entries.size() == 2 + 4);
    for (const auto& e : out.provenance.entries) {
        CHECK(fs::exists(dir / "aug" / e.out));
        CHECK(e.out.parent_path().filename().string() == e.class_name);
        const auto src = std::find_if(m.records().begin(), m.records().end(), [&](const auto& r) { return r.path == e.source; });
        REQUIRE(src != m.records().end());
        CHECK(src->class_name == e.class_name);
        CHECK_FALSE(e.ops.empty());
        CHECK(content_hash(load_image(dir / "aug" / e.out)) == e.content_hash);
    }
    for (const auto& r : out.manifest.records()) {
        if (r.origin == Origin::augmented) {
            REQUIRE(r.source_path);
            const auto src = std::find_if(m.records().begin(), m.records().end(),
                                          [&](const auto& o) { return o.path == *r.source_path; });
            REQUIRE(src != m.records().end());
            CHECK(src->class_name == r.class_name);
        }
    }
    CHECK(verify_provenance(out.provenance, dir / "aug").empty());
}

TEST_CASE("execute: sources are used round-robin") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "data", {3});
    const auto out = execute_plan(plan_rebalance(m, 10, 2), m, default_augmentations(), dir / "aug");
    std::map<fs::path, int> uses;
    for (const auto& e : out.provenance.entries) ++uses[e.source];
    CHECK(uses.size() == 3);
    for (const auto& [_, n] : uses) CHECK(n >= 2);
    CHECK(out.provenance.entries[0].source == m.records()[0].path);
    CHECK(out.provenance.entries[1].source == m.records()[1].path);
    CHECK(out.provenance.entries[3].source == m.records()[0].path);
}

TEST_CASE("execute: all-identity plan writes nothing and keeps the manifest") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "data", {4, 4});
    const auto out = execute_plan(plan_rebalance(m, 4, 1), m, default_augmentations(), dir / "aug");
    CHECK(out.manifest == m);
    CHECK(out.provenance.entries.empty());
    CHECK_FALSE(fs::exists(dir / "aug"));
}

TEST_CASE("execute: same inputs give identical provenance and files") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "data", {2, 6, 3});
    const auto plan = plan_rebalance(m, 5, 77);
    const auto a = execute_plan(plan, m, default_augmentations(), dir / "a");
    const auto b = execute_plan(plan, m, default_augmentations(), dir / "b", ExecuteOptions{.threads = 2});
    CHECK(a.provenance.to_json() == b.provenance.to_json());
    CHECK(hash_tree(dir / "a") == hash_tree(dir / "b"));
    CHECK(Provenance::from_json(a.provenance.to_json()).to_json() == a.provenance.to_json());
}

TEST_CASE("execute: undecodable source is substituted with a warning") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "data", {3});
    std::ofstream(m.records()[0].path, std::ios::trunc) << "garbage";
    testing::LogCapture capture;
    const auto out = execute_plan(plan_rebalance(m, 5, 4), m, default_augmentations(), dir / "aug");
    CHECK(out.manifest.size() == 5);
    const auto& first = out.provenance.entries[0];
    REQUIRE(first.substituted_for);
    CHECK(*first.substituted_for == m.records()[0].path);
    CHECK(first.source == m.records()[1].path);
    CHECK(capture.contains("substituting"));
}

TEST_CASE("execute: write failure removes partial output") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "data", {1, 1});
    fs::create_directories(dir / "aug" / testing::class_name(0));
    // a directory where the second image file must be written makes imwrite fail
    fs::create_directories(dir / "aug" / testing::class_name(1) / "aug_0001.png");
    const auto plan = plan_rebalance(m, 3, 1);
    CHECK_THROWS_AS(execute_plan(plan, m, default_augmentations(), dir / "aug"), IoError);
    CHECK_FALSE(fs::exists(dir / "aug" / testing::class_name(0) / "aug_0000.png"));
    CHECK_FALSE(fs::exists(dir / "aug" / testing::class_name(1) / "aug_0000.png"));
}

TEST_CASE("execute: rejects empty or invalid specs when images are needed") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "data", {1});
    CHECK_THROWS_AS(execute_plan(plan_rebalance(m, 2, 1), m, {}, dir / "aug"), ValidationError);
    CHECK_THROWS_AS(execute_plan(plan_rebalance(m, 2, 1), m, {AugmentationSpec::zoom(2.0)}, dir / "aug"), ValidationError);
}
