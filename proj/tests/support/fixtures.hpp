#pragma once

#include "treebark/dataset.hpp"
#include "treebark/image.hpp"
#include "treebark/log.hpp"
#include "treebark/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace treebark::testing {

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "treebark");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

/// Striped texture whose colour, stripe frequency and orientation depend on the
/// class; `variant` shifts phase and adds noise.
Image texture_image(int class_index, int variant, int width, int height, std::uint64_t seed = 7);

/// Writes `<root>/<class_NN>/img_MMM.png` for each entry of `counts`.
DatasetManifest write_corpus(const std::filesystem::path& root, const std::vector<int>& counts, int width = 48,
                             int height = 36, std::uint64_t seed = 7);

/// Collects log messages for the lifetime of the object.
class LogCapture {
public:
    LogCapture();
    ~LogCapture();
    LogCapture(const LogCapture&) = delete;
    LogCapture& operator=(const LogCapture&) = delete;

    const std::vector<std::string>& warnings() const { return warnings_; }
    bool contains(const std::string& fragment) const;

private:
    std::vector<std::string> warnings_;
};

/// Small randomly initialised model for fast tests: frozen resnet50 on
/// `size` x `size` inputs, no pretrained weights.
ModelSpec small_spec(int num_classes, int size = 64, bool frozen = true);

/// Names used by write_corpus.
std::string class_name(int class_index);

}  // namespace treebark::testing
