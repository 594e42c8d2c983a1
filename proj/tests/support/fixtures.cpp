#include "fixtures.hpp"

#include "treebark/random.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <unistd.h>

namespace treebark::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

LogCapture::LogCapture() {
    log::set_sink([this](log::Level level, const std::string& message) {
        if (level >= log::Level::warn) warnings_.push_back(message);
    });
}

LogCapture::~LogCapture() { log::set_sink(nullptr); }

bool LogCapture::contains(const std::string& fragment) const {
    for (const auto& w : warnings_) {
        if (w.find(fragment) != std::string::npos) return true;
    }
    return false;
}

std::string class_name(int class_index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%02d", class_index);
    return buf;
}

Image texture_image(int class_index, int variant, int width, int height, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "texture", static_cast<std::uint64_t>(class_index) * 100003u + static_cast<std::uint64_t>(variant)));
    Image img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    const double angle = class_index * 0.7;
    const double freq = 0.15 + 0.12 * (class_index % 5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double base[3] = {60.0 + 37.0 * (class_index % 5), 70.0 + 29.0 * ((class_index * 3) % 7), 50.0 + 41.0 * ((class_index * 2) % 4)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double t = std::sin(freq * (x * std::cos(angle) + y * std::sin(angle)) + phase);
            for (int c = 0; c < 3; ++c) {
                const double v = base[c] + 50.0 * t + rng.uniform(-12.0, 12.0);
                img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return img;
}

DatasetManifest write_corpus(const fs::path& root, const std::vector<int>& counts, int width, int height,
                             std::uint64_t seed) {
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const auto dir = root / class_name(static_cast<int>(c));
        fs::create_directories(dir);
        for (int i = 0; i < counts[c]; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "img_%03d.png", i);
            save_image(texture_image(static_cast<int>(c), i, width, height, seed), dir / name);
        }
    }
    return scan_dataset(root);
}

ModelSpec small_spec(int num_classes, int size, bool frozen) {
    ModelSpec spec;
    spec.backbone = BackboneKind::resnet50;
    spec.pretrained = false;
    spec.input_height = size;
    spec.input_width = size;
    spec.num_classes = num_classes;
    spec.backbone_trainable = !frozen;
    spec.init_seed = 11;
    return spec;
}

}  // namespace treebark::testing
