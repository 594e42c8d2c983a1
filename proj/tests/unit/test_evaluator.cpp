#include "fixtures.hpp"

#include "treebark/batch.hpp"
#include "treebark/error.hpp"
#include "treebark/evaluator.hpp"

#include <doctest.h>

#include <cmath>

using namespace treebark;

namespace {

PreprocessConfig small_preprocess() {
    PreprocessConfig pre;
    pre.height = pre.width = 64;
    return pre;
}

TrainingConfig quick_config() {
    TrainingConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    c.learning_rate = 1e-3;
    c.seed = 3;
    c.record_timings = false;
    return c;
}

/// Zero final kernel with a bias favouring `preferred`: every row predicts it.
void make_constant(Classifier& model, int preferred) {
    torch::NoGradGuard no_grad;
    auto params = model.head().back().dense->named_parameters();
    params["kernel"].zero_();
    params["bias"].zero_();
    params["bias"][preferred] = 1.0f;
}

}  // namespace

TEST_CASE("predicted_classes picks the row maximum") {
    const auto p = torch::tensor({0.1f, 0.7f, 0.2f, 0.5f, 0.5f, 0.0f}).reshape({2, 3});
    CHECK(predicted_classes(p) == std::vector<int>{1, 0});
}

TEST_CASE("a constant classifier on a balanced two-class set scores 0.5") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "d", {5, 5});
    const auto batch = encode_batch(m, small_preprocess());
    auto model = build_model(testing::small_spec(2));
    make_constant(*model, 0);
    const auto r = evaluate(*model, batch);
    CHECK(r.accuracy == 0.5);
    CHECK(r.per_class[0].recall == 1.0);
    CHECK(r.per_class[1].recall == 0.0);
    CHECK(r.per_class[1].precision_undefined);
    CHECK(r.confusion.at(1, 0) == 5);
    CHECK(r.per_class[0].class_name == testing::class_name(0));
}

TEST_CASE("evaluation is repeatable and does not alter the model") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "d", {3, 4, 2});
    const auto batch = encode_batch(m, small_preprocess());
    auto model = build_model(testing::small_spec(3));
    const auto a = evaluate(*model, batch);
    const auto b = evaluate(*model, batch);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.total_support == 9);
}

TEST_CASE("class-count mismatch and empty batches are rejected") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "d", {2, 2, 2});
    const auto batch = encode_batch(m, small_preprocess());
    auto model = build_model(testing::small_spec(2));
    CHECK_THROWS_AS(evaluate(*model, batch), ValidationError);
    auto model3 = build_model(testing::small_spec(3));
    CHECK_THROWS_AS(evaluate(*model3, batch.slice(0, 0)), ValidationError);
}

TEST_CASE("leave-one-out cross-validation") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "d", {3, 3});
    CrossValidationOptions opts;
    opts.preprocess = small_preprocess();
    std::vector<int> seen;
    opts.on_fold = [&](const FoldResult& f) { seen.push_back(f.fold); };
    const auto cv = cross_validate(m, testing::small_spec(2), quick_config(), 6, 17, opts);
    REQUIRE(cv.complete());
    CHECK(cv.folds.size() == 6);
    CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5});
    double sum = 0.0;
    for (const auto& f : cv.folds) {
        CHECK((f.accuracy == 0.0 || f.accuracy == 1.0));
        sum += f.accuracy;
    }
    CHECK(cv.average.accuracy == doctest::Approx(sum / 6.0).epsilon(1e-15));
    CHECK(cv.average.fold == -1);

    const auto again = cross_validate(m, testing::small_spec(2), quick_config(), 6, 17, opts);
    CHECK(again.to_json() == cv.to_json());
}

TEST_CASE("cross-validation argument errors") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "d", {3, 3});
    CrossValidationOptions opts;
    opts.preprocess = small_preprocess();
    CHECK_THROWS_AS(cross_validate(m, testing::small_spec(2), quick_config(), 1, 1, opts), ValidationError);
    CHECK_THROWS_AS(cross_validate(m, testing::small_spec(2), quick_config(), 7, 1, opts), ValidationError);
    CHECK_THROWS_AS(cross_validate(m, testing::small_spec(3), quick_config(), 2, 1, opts), ValidationError);
}

TEST_CASE("a failing fold stops the run and keeps the finished folds") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir / "d", {2, 2});
    const auto batch = encode_batch(m, small_preprocess());
    FoldPartition folds;
    folds.k = 3;
    folds.folds = {{0, 2}, {1, 3}, {}};  // nothing to evaluate in the third fold
    testing::LogCapture logs;
    const auto cv = cross_validate(batch, folds, testing::small_spec(2), quick_config());
    CHECK_FALSE(cv.complete());
    CHECK(cv.folds.size() == 2);
    CHECK(cv.error.find("fold 3") != std::string::npos);
    CHECK(cv.average.accuracy == (cv.folds[0].accuracy + cv.folds[1].accuracy) / 2.0);
    CHECK(cv.render_text().find("aborted") != std::string::npos);
    CHECK(logs.contains("fold 3"));
}
