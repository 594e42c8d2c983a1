#pragma once

#include "treebark/dataset.hpp"
#include "treebark/preprocess.hpp"

#include <filesystem>
#include <optional>
#include <vector>

#include <torch/torch.h>

namespace treebark {

/// Encoded images ready for the classifier.
///
/// inputs: float32 N x h x w x 3 in [0, 1]; labels: float32 one-hot N x C in
/// the manifest's class order; index_map[row] is the manifest index of the
/// record encoded into that row.
struct Batch {
    torch::Tensor inputs;
    torch::Tensor labels;
    std::vector<std::size_t> index_map;
    std::vector<std::string> classes;

    std::int64_t size() const { return inputs.defined() ? inputs.size(0) : 0; }
    std::int64_t num_classes() const { return static_cast<std::int64_t>(classes.size()); }

    /// Class index per row (argmax of the one-hot label).
    std::vector<int> class_indices() const;

    /// Rows [begin, end) as views.
    Batch slice(std::int64_t begin, std::int64_t end) const;
};

/// Row of a one-hot label matrix for a single class.
torch::Tensor one_hot(const std::vector<int>& class_indices, std::int64_t num_classes);

/// Encodes manifest records (by index) row by row in the given order.
/// Throws IoError naming the first unreadable path.
Batch encode_batch(const DatasetManifest& manifest, const std::vector<std::size_t>& indices, const PreprocessConfig& config);

/// Encodes explicit records; each must be present in the manifest (matched by path).
Batch encode_batch(const std::vector<ImageRecord>& records, const DatasetManifest& manifest, const PreprocessConfig& config);

/// Encodes every record of the manifest.
Batch encode_batch(const DatasetManifest& manifest, const PreprocessConfig& config);

/// Single decoded image -> 1 x h x w x 3 tensor.
torch::Tensor encode_image(const Image& image, const PreprocessConfig& config);

/// Lazily encodes fixed-size chunks of a record list, for corpora that do not fit in memory.
class BatchStream {
public:
    BatchStream(const DatasetManifest& manifest, std::vector<std::size_t> indices, PreprocessConfig config,
                std::size_t chunk_size);

    /// Next chunk, or nullopt when exhausted.
    std::optional<Batch> next();

    void reset() { cursor_ = 0; }
    std::size_t remaining() const { return indices_.size() - cursor_; }

private:
    const DatasetManifest* manifest_;
    std::vector<std::size_t> indices_;
    PreprocessConfig config_;
    std::size_t chunk_size_;
    std::size_t cursor_ = 0;
};

/// Packed on-disk batch cache. Layout (all integers little-endian):
///   8 bytes  magic "TBBATCH1"
///   u64      header length L
///   L bytes  JSON header {n, height, width, channels, num_classes, dtype, classes, index_map}
///   n*h*w*3  float32 inputs, row-major
///   n*C      float32 labels, row-major
void save_batch_cache(const Batch& batch, const std::filesystem::path& path);
Batch load_batch_cache(const std::filesystem::path& path);

}  // namespace treebark
