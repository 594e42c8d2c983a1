#include "treebark/batch.hpp"

#include "treebark/binary_io.hpp"
#include "treebark/error.hpp"

#include <ATen/Parallel.h>

#include <cstring>
#include <fstream>
#include <unordered_map>

namespace treebark {

std::vector<int> Batch::class_indices() const {
    std::vector<int> out;
    if (!labels.defined() || labels.size(0) == 0) return out;
    const auto arg = labels.argmax(1).to(torch::kInt64).contiguous();
    const auto* data = arg.data_ptr<std::int64_t>();
    out.assign(data, data + arg.numel());
    return out;
}

Batch Batch::slice(std::int64_t begin, std::int64_t end) const {
    Batch out;
    out.inputs = inputs.slice(0, begin, end);
    out.labels = labels.slice(0, begin, end);
    out.index_map.assign(index_map.begin() + begin, index_map.begin() + end);
    out.classes = classes;
    return out;
}

torch::Tensor one_hot(const std::vector<int>& class_indices, std::int64_t num_classes) {
    auto labels = torch::zeros({static_cast<std::int64_t>(class_indices.size()), num_classes}, torch::kFloat32);
    auto acc = labels.accessor<float, 2>();
    for (std::size_t i = 0; i < class_indices.size(); ++i) {
        const auto c = class_indices[i];
        if (c < 0 || c >= num_classes) {
            throw ValidationError("class index out of range: " + std::to_string(c));
        }
        acc[static_cast<std::int64_t>(i)][c] = 1.0f;
    }
    return labels;
}

namespace {

void write_row(float* dst, const Image& resized) {
    for (std::size_t i = 0; i < resized.pixels.size(); ++i) {
        dst[i] = static_cast<float>(resized.pixels[i]) / 255.0f;
    }
}

}  // namespace

torch::Tensor encode_image(const Image& image, const PreprocessConfig& config) {
    const auto resized = resize_image(image, config);
    auto out = torch::empty({1, config.height, config.width, 3}, torch::kFloat32);
    write_row(out.data_ptr<float>(), resized);
    return out;
}

Batch encode_batch(const DatasetManifest& manifest, const std::vector<std::size_t>& indices, const PreprocessConfig& config) {
    config.validate();
    const auto n = static_cast<std::int64_t>(indices.size());
    const std::int64_t row_size = static_cast<std::int64_t>(config.height) * config.width * 3;
    Batch batch;
    batch.classes = manifest.classes();
    batch.index_map = indices;
    batch.inputs = torch::empty({n, config.height, config.width, 3}, torch::kFloat32);

    std::vector<int> labels;
    labels.reserve(indices.size());
    for (auto i : indices) {
        if (i >= manifest.size()) {
            throw ValidationError("record index out of range: " + std::to_string(i));
        }
        labels.push_back(manifest.records()[i].class_index);
    }
    batch.labels = one_hot(labels, static_cast<std::int64_t>(manifest.num_classes()));

    float* base = batch.inputs.data_ptr<float>();
    // rows are independent, so the parallel loop keeps the output order-exact
    at::parallel_for(0, n, 4, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t row = begin; row < end; ++row) {
            const auto& record = manifest.records()[indices[static_cast<std::size_t>(row)]];
            auto decoded = try_decode_image(record.path);
            if (!decoded) {
                throw IoError("unreadable image: " + record.path.string());
            }
            write_row(base + row * row_size, resize_image(decoded->image, config));
        }
    });
    return batch;
}

Batch encode_batch(const std::vector<ImageRecord>& records, const DatasetManifest& manifest, const PreprocessConfig& config) {
    std::unordered_map<std::string, std::size_t> by_path;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        by_path.emplace(manifest.records()[i].path.generic_string(), i);
    }
    std::vector<std::size_t> indices;
    indices.reserve(records.size());
    for (const auto& r : records) {
        const auto it = by_path.find(r.path.generic_string());
        if (it == by_path.end() || manifest.records()[it->second].class_name != r.class_name) {
            throw ValidationError("record is not part of the manifest: " + r.path.string());
        }
        indices.push_back(it->second);
    }
    return encode_batch(manifest, indices, config);
}

Batch encode_batch(const DatasetManifest& manifest, const PreprocessConfig& config) {
    std::vector<std::size_t> all(manifest.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return encode_batch(manifest, all, config);
}

BatchStream::BatchStream(const DatasetManifest& manifest, std::vector<std::size_t> indices, PreprocessConfig config,
                         std::size_t chunk_size)
    : manifest_(&manifest), indices_(std::move(indices)), config_(config), chunk_size_(chunk_size) {
    if (chunk_size_ == 0) throw ValidationError("chunk size must be positive");
}

std::optional<Batch> BatchStream::next() {
    if (cursor_ >= indices_.size()) return std::nullopt;
    const auto end = std::min(indices_.size(), cursor_ + chunk_size_);
    std::vector<std::size_t> chunk(indices_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                   indices_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return encode_batch(*manifest_, chunk, config_);
}

namespace {

constexpr char kBatchMagic[8] = {'T', 'B', 'B', 'A', 'T', 'C', 'H', '1'};

}  // namespace

void save_batch_cache(const Batch& batch, const std::filesystem::path& path) {
    const auto inputs = batch.inputs.contiguous().to(torch::kFloat32);
    const auto labels = batch.labels.contiguous().to(torch::kFloat32);
    const nlohmann::json header{{"n", inputs.size(0)},
                                {"height", inputs.size(1)},
                                {"width", inputs.size(2)},
                                {"channels", inputs.size(3)},
                                {"num_classes", labels.size(1)},
                                {"dtype", "float32"},
                                {"classes", batch.classes},
                                {"index_map", batch.index_map}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write batch cache: " + path.string());
    const auto text = header.dump();
    out.write(kBatchMagic, sizeof(kBatchMagic));
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_floats_le(out, inputs.data_ptr<float>(), static_cast<std::size_t>(inputs.numel()));
    write_floats_le(out, labels.data_ptr<float>(), static_cast<std::size_t>(labels.numel()));
    if (!out) throw IoError("failed writing batch cache: " + path.string());
}

Batch load_batch_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open batch cache: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kBatchMagic, sizeof(magic)) != 0) {
        throw IoError("not a batch cache: " + path.string());
    }
    const auto length = read_le<std::uint64_t>(in);
    if (length > (1u << 30)) throw IoError("corrupt batch cache header: " + path.string());
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt batch cache header: " + std::string(e.what()));
    }
    Batch batch;
    const auto n = header.at("n").get<std::int64_t>();
    const auto h = header.at("height").get<std::int64_t>();
    const auto w = header.at("width").get<std::int64_t>();
    const auto c = header.at("num_classes").get<std::int64_t>();
    batch.classes = header.at("classes").get<std::vector<std::string>>();
    batch.index_map = header.at("index_map").get<std::vector<std::size_t>>();
    batch.inputs = torch::empty({n, h, w, 3}, torch::kFloat32);
    batch.labels = torch::empty({n, c}, torch::kFloat32);
    read_floats_le(in, batch.inputs.data_ptr<float>(), static_cast<std::size_t>(batch.inputs.numel()));
    read_floats_le(in, batch.labels.data_ptr<float>(), static_cast<std::size_t>(batch.labels.numel()));
    if (!in) throw IoError("truncated batch cache: " + path.string());
    return batch;
}

}  // namespace treebark
