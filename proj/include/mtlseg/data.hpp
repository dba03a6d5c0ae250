#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtlseg/tensor.hpp"

namespace mtlseg {

// One training example: normalized image plus binary footprint and boundary
// masks. The boundary mask is always derived from the footprint mask, never
// warped independently.
struct Sample {
    Tensor image;     // (1,C,H,W), values in [0,1]
    Tensor seg_mask;  // (1,1,H,W), strictly {0,1}
    Tensor bnd_mask;  // (1,1,H,W), strictly {0,1}
    int id = 0;
};

// Parameters of the synthetic footprint scenes.
struct SceneConfig {
    int size = 64;      // square scenes, H = W
    int channels = 3;
    int count_min = 3;  // buildings per scene, inclusive range
    int count_max = 8;
    int size_min = 8;   // building edge length in px, inclusive range (>= 3)
    int size_max = 20;
    float texture_amplitude = 0.15f;  // background texture strength
    int boundary_radius = 3;          // disk radius for boundary thickening
    std::uint64_t rng_seed = 0;
};

// Train/val/test ratios; must sum to 1.
struct SplitSpec {
    double train = 0.7;
    double val = 0.2;
    double test = 0.1;
    std::uint64_t seed = 0;
};

struct SplitResult {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

// Which augmentation stages run. Magnitudes are sampled inside augment();
// a disabled stage is skipped entirely, so identity() reproduces the input
// sample bit for bit (given a matching boundary_radius).
struct AugmentPolicy {
    bool flip = true;
    bool perspective = true;
    bool gamma = true;
    bool brightness = true;
    bool contrast = true;
    bool blur = true;
    bool noise = true;
    int boundary_radius = 3;

    static AugmentPolicy identity(int boundary_radius = 3);
};

// Deterministic in (config.rng_seed, index): textured background plus a
// random count of axis-aligned and rotated rectangles with per-building
// shading. Overlapping buildings merge in the mask.
Sample generate_scene(const SceneConfig& config, int index);

// Inner boundary (mask pixels with a zero 4-neighbor; the image border counts
// as zero) dilated by a disk of the given radius.
Tensor extract_boundary(const Tensor& mask, int dilation_radius);

// Value-level mirror helpers, used by augmentation and its tests.
Tensor flip_horizontal(const Tensor& t);
Tensor flip_vertical(const Tensor& t);

Sample augment(const Sample& sample, std::mt19937& rng, const AugmentPolicy& policy);

// Same random window applied to image and both masks.
Sample random_crop(const Sample& sample, int size, std::mt19937& rng);

// Shuffles 0..n-1, then allocates floor(n*ratio) to each subset and hands the
// remainder out one index at a time to train, then val, then test.
SplitResult split_dataset(int n, const SplitSpec& spec);

// Binary netpbm I/O: P5 (one channel) and P6 (three channels), maxval 255.
// Values map to [0,1] by /255; writing quantizes by rounding.
Tensor read_netpbm(const std::string& path);
void write_netpbm(const std::string& path, const Tensor& t);

// ---- dataset directory ---------------------------------------------------------

// On-disk layout: img_<id>.ppm, seg_<id>.pgm, bnd_<id>.pgm, split.csv
// (id,subset), gen_config.txt (key=value provenance).
void write_dataset(const std::string& dir, const SceneConfig& config, int n,
                   const SplitSpec& split);

struct Dataset {
    std::vector<Sample> samples;  // ordered by id
    SplitResult split;            // indices into samples
    SceneConfig scene;            // recovered from gen_config.txt
};

Dataset load_dataset(const std::string& dir);

}  // namespace mtlseg
