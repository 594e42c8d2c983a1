// Compares the native backbone against features dumped by
// tools/export_keras_weights.py --dump-features for the same weights.
//
// usage: backbone_parity <backbone> <weights_dir> <prefix> <size>

#include "treebark/model.hpp"

#include <fstream>
#include <iostream>
#include <string>

using namespace treebark;

namespace {

constexpr double kRelativeTolerance = 1e-4;

bool read_floats(const std::string& path, torch::Tensor& t) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in || static_cast<std::int64_t>(in.tellg()) != t.numel() * 4) return false;
    in.seekg(0);
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()), t.numel() * 4);
    return static_cast<bool>(in);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 5) {
        std::cerr << "usage: backbone_parity <backbone> <weights_dir> <prefix> <size>\n";
        return 2;
    }
    torch::set_num_threads(1);
    ModelSpec spec;
    spec.backbone = parse_backbone(argv[1]);
    spec.weights_dir = argv[2];
    spec.input_height = spec.input_width = std::stoi(argv[4]);
    auto model = build_model(spec);
    model->set_training(false);

    const std::string prefix = argv[3];
    auto inputs = torch::empty({2, spec.input_height, spec.input_width, 3});
    if (!read_floats(prefix + ".input", inputs)) {
        std::cerr << "cannot read " << prefix << ".input\n";
        return 1;
    }
    torch::NoGradGuard no_grad;
    // The dump is already in the backbone's native input range.
    const auto features = model->backbone().forward(inputs.permute({0, 3, 1, 2}).contiguous()).permute({0, 2, 3, 1}).contiguous();
    auto reference = torch::empty_like(features);
    if (!read_floats(prefix + ".features", reference)) {
        std::cerr << "reference features do not match shape " << features.sizes() << '\n';
        return 1;
    }
    const double diff = (features - reference).abs().max().item<double>();
    const double scale = reference.abs().max().item<double>();
    const double relative = scale > 0.0 ? diff / scale : diff;
    const bool ok = relative < kRelativeTolerance;
    std::cout << (ok ? "PASS " : "FAIL ") << argv[1] << ' ' << features.sizes() << " max |diff| " << diff
              << " relative " << relative << '\n';
    return ok ? 0 : 1;
}
