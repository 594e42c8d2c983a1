#include "fixtures.hpp"

#include "treebark/batch.hpp"
#include "treebark/error.hpp"
#include "treebark/preprocess.hpp"

#include <doctest.h>

#include <algorithm>

using namespace treebark;

TEST_CASE("303x404 resizes to 160x160x3") {
    const auto img = testing::texture_image(2, 0, 404, 303);
    for (auto interp : {Interpolation::bilinear, Interpolation::nearest}) {
        PreprocessConfig cfg;
        cfg.interpolation = interp;
        const auto out = resize_image(img, cfg);
        CHECK(out.width == 160);
        CHECK(out.height == 160);
        CHECK(out.pixels.size() == 160u * 160u * 3u);
    }
}

TEST_CASE("same-size resize is an exact copy") {
    const auto img = testing::texture_image(1, 0, 160, 160);
    CHECK(resize_image(img, PreprocessConfig{}) == img);
}

TEST_CASE("nearest 320x320 -> 160x160 samples (2i, 2j)") {
    const auto img = testing::texture_image(4, 3, 320, 320);
    PreprocessConfig cfg;
    cfg.interpolation = Interpolation::nearest;
    const auto out = resize_image(img, cfg);
    for (int i = 0; i < 160; ++i) {
        for (int j = 0; j < 160; ++j) {
            for (int c = 0; c < 3; ++c) REQUIRE(out.at(i, j, c) == img.at(2 * i, 2 * j, c));
        }
    }
}

TEST_CASE("bilinear downscale by 2 averages 2x2 blocks") {
    Image img(4, 2);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 4; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(10 * (y * 4 + x) + c);
        }
    }
    const auto out = resize(img, 2, 1, Interpolation::bilinear);
    // block mean of {0,10,40,50} = 25 and of {20,30,60,70} = 45
    CHECK(out.at(0, 0, 0) == 25);
    CHECK(out.at(0, 1, 0) == 45);
    CHECK(out.at(0, 1, 2) == 47);
}

TEST_CASE("uniform images stay uniform under bilinear resize") {
    Image img(37, 23);
    std::fill(img.pixels.begin(), img.pixels.end(), std::uint8_t{173});
    const auto out = resize_image(img, PreprocessConfig{});
    CHECK(std::all_of(out.pixels.begin(), out.pixels.end(), [](auto v) { return v == 173; }));
}

TEST_CASE("zero-dimension input is rejected") {
    CHECK_THROWS_AS(resize_image(Image{}, PreprocessConfig{}), ValidationError);
    PreprocessConfig bad;
    bad.height = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("normalize: 255 -> 1, 0 -> 0, 128 -> 128/255") {
    Image img(3, 1);
    img.at(0, 0, 0) = 255;
    img.at(0, 1, 0) = 0;
    img.at(0, 2, 0) = 128;
    const auto v = normalize(img);
    CHECK(v[0] == 1.0f);
    CHECK(v[3] == 0.0f);
    CHECK(v[6] == 128.0f / 255.0f);
    CHECK(v[6] == doctest::Approx(0.50196).epsilon(1e-5));
}

TEST_CASE("denormalize inverts normalize for every 8-bit value") {
    Image img(256, 1);
    for (int x = 0; x < 256; ++x) {
        for (int c = 0; c < 3; ++c) img.at(0, x, c) = static_cast<std::uint8_t>(x);
    }
    CHECK(denormalize(normalize(img), 256, 1) == img);
    const auto tex = testing::texture_image(5, 2, 31, 17);
    CHECK(denormalize(normalize(tex), 31, 17) == tex);
}

TEST_CASE("encode_batch: shapes, range, one-hot rows") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {2, 1, 3}, 404, 303);
    const auto b = encode_batch(m, PreprocessConfig{});
    CHECK(b.inputs.sizes() == torch::IntArrayRef{6, 160, 160, 3});
    CHECK(b.labels.sizes() == torch::IntArrayRef{6, 3});
    CHECK(b.inputs.min().item<float>() >= 0.0f);
    CHECK(b.inputs.max().item<float>() <= 1.0f);
    CHECK(torch::equal(b.labels.sum(1), torch::ones({6})));
    CHECK(torch::equal((b.labels == 1.0f).sum(1), torch::ones({6}, torch::kLong)));
    CHECK(torch::equal((b.labels == 0.0f).sum(1), torch::full({6}, 2, torch::kLong)));
    CHECK(b.class_indices() == std::vector<int>{0, 0, 1, 2, 2, 2});
    CHECK(b.index_map == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("encode_batch: single record of class 0 -> [1, 0, ..., 0]") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {1, 1, 1, 1});
    const auto b = encode_batch(m, {0}, PreprocessConfig{});
    CHECK(torch::equal(b.labels, torch::tensor({{1.0f, 0.0f, 0.0f, 0.0f}})));
}

TEST_CASE("encode_batch: values equal normalize(resize(image))") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {1}, 404, 303);
    const auto b = encode_batch(m, PreprocessConfig{});
    const auto expected = normalize(resize_image(load_image(m.records()[0].path), PreprocessConfig{}));
    const auto flat = b.inputs.reshape({-1}).contiguous();
    REQUIRE(static_cast<std::size_t>(flat.numel()) == expected.size());
    CHECK(std::equal(expected.begin(), expected.end(), flat.data_ptr<float>()));
}

TEST_CASE("encode_batch: permuting records permutes rows") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {2, 3});
    const std::vector<std::size_t> order{0, 1, 2, 3, 4};
    const std::vector<std::size_t> perm{3, 0, 4, 2, 1};
    const auto a = encode_batch(m, order, PreprocessConfig{});
    const auto b = encode_batch(m, perm, PreprocessConfig{});
    CHECK(b.index_map == perm);
    for (std::size_t r = 0; r < perm.size(); ++r) {
        const auto row = static_cast<std::int64_t>(r);
        const auto src = static_cast<std::int64_t>(perm[r]);
        CHECK(torch::equal(b.inputs[row], a.inputs[src]));
        CHECK(torch::equal(b.labels[row], a.labels[src]));
    }
    std::vector<ImageRecord> records;
    for (auto i : perm) records.push_back(m.records()[i]);
    const auto c = encode_batch(records, m, PreprocessConfig{});
    CHECK(torch::equal(c.inputs, b.inputs));
    CHECK(c.index_map == perm);
}

TEST_CASE("encode_batch: unreadable image names its path") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {2});
    std::filesystem::remove(m.records()[1].path);
    CHECK_THROWS_WITH_AS(encode_batch(m, PreprocessConfig{}), doctest::Contains(m.records()[1].path.filename().string().c_str()), IoError);
}

TEST_CASE("encode_batch: records outside the manifest are rejected") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {2});
    auto stray = m.records()[0];
    stray.path = dir / "elsewhere.png";
    CHECK_THROWS_AS(encode_batch(std::vector<ImageRecord>{stray}, m, PreprocessConfig{}), ValidationError);
}

TEST_CASE("batch stream yields the same rows in chunks") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {3, 4});
    PreprocessConfig cfg;
    cfg.height = 32;
    cfg.width = 32;
    const auto full = encode_batch(m, cfg);
    BatchStream stream(m, {0, 1, 2, 3, 4, 5, 6}, cfg, 3);
    std::vector<torch::Tensor> parts;
    while (auto chunk = stream.next()) parts.push_back(chunk->inputs);
    CHECK(parts.size() == 3);
    CHECK(torch::equal(torch::cat(parts, 0), full.inputs));
}

TEST_CASE("batch cache round-trips exactly") {
    testing::TempDir dir;
    const auto m = testing::write_corpus(dir.path(), {2, 2});
    PreprocessConfig cfg;
    cfg.height = 20;
    cfg.width = 24;
    const auto b = encode_batch(m, {3, 1, 0}, cfg);
    save_batch_cache(b, dir / "cache.bin");
    const auto r = load_batch_cache(dir / "cache.bin");
    CHECK(torch::equal(r.inputs, b.inputs));
    CHECK(torch::equal(r.labels, b.labels));
    CHECK(r.index_map == b.index_map);
    CHECK(r.classes == b.classes);
}

TEST_CASE("preprocess config JSON round-trip") {
    PreprocessConfig cfg;
    cfg.height = 96;
    cfg.interpolation = Interpolation::nearest;
    CHECK(PreprocessConfig::from_json(cfg.to_json()) == cfg);
    CHECK_THROWS_AS(parse_interpolation("bicubic"), ValidationError);
}
