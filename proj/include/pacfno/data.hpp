#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pacfno/tensor.hpp"

namespace pacfno {

// One labeled dataset at a single resolution, values in [0,1].
struct LabeledImageSet {
    std::vector<Tensor> images;  // each [3,H,W]
    std::vector<int> labels;
    int class_count = 0;
    int resolution = 0;
    std::string split;       // train / val / test
    std::string provenance;  // synthetic seed or source file

    size_t size() const { return images.size(); }
};

// The same labeled data materialized at several resolutions, index-aligned.
struct MultiResDataset {
    std::map<int, LabeledImageSet> by_resolution;
    int target_resolution = 0;

    const LabeledImageSet& target() const { return by_resolution.at(target_resolution); }
    std::vector<int> resolutions() const {
        std::vector<int> out;
        for (auto& [r, s] : by_resolution) out.push_back(r);
        return out;
    }
};

// Procedural anti-aliased shape renderings, deterministic from the seed and
// balanced across classes. Shape vocabulary (K <= 8): circle, square,
// triangle, cross, ring, bar, diamond, dot-grid.
LabeledImageSet gen_shapes(uint64_t seed, int count, int classes, int resolution);

// IDX ingestion (big-endian magic 0x803 images / 0x801 labels); grayscale is
// replicated to 3 channels and scaled to [0,1].
LabeledImageSet load_idx(const std::string& images_path, const std::string& labels_path);

// Bilinear-downscaled pyramid; the source resolution is kept as the target.
MultiResDataset make_multires(const LabeledImageSet& src, const std::vector<int>& resolutions);

enum class CorruptionKind { kGaussianNoise, kBrightness, kContrast, kPixelate, kFog };

CorruptionKind corruption_from_name(const std::string& name);
std::string corruption_name(CorruptionKind kind);

// ImageNet-C style corruption at severities 1..5 (severity 0 is the exposed
// identity limit for testing). Deterministic given the seed; output clamped
// to [0,1].
Tensor corrupt(const Tensor& x, CorruptionKind kind, int severity, uint64_t seed);

// Binary P6 PPM, 8-bit. Round trip error is bounded by quantization (1/255).
void write_ppm(const Tensor& x, const std::string& path);
Tensor read_ppm(const std::string& path);

// Directory layout: <root>/<split>/<resolution>/<index>_<label>.ppm
void save_set_ppm(const LabeledImageSet& set, const std::string& root);
LabeledImageSet load_set_ppm(const std::string& root, const std::string& split, int resolution);

// Stacks images[indices] into one [N,3,H,W] batch with its labels.
Tensor stack_batch(const LabeledImageSet& set, const std::vector<int>& indices,
                   std::vector<int>* labels_out);

}  // namespace pacfno
