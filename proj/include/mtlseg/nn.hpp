#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtlseg/tensor.hpp"

namespace mtlseg {

// Architecture description. widths are decoder-ordered: widths[0] is the
// deepest decoder level (straight after the bottleneck), widths.back() the
// level that feeds the output heads. The encoder mirrors them in reverse.
struct ModelConfig {
    int in_channels = 3;
    int depth = 3;
    std::vector<int> widths = {32, 16, 8};
    bool seg_skip = true;   // fixed true
    bool bnd_skip = true;   // fixed true
    bool rec_skip = false;  // fixed false: the reconstruction head sees only
                            // the bottleneck, never encoder skips
};

namespace detail {
struct ConvRef {
    std::size_t w = 0;  // indices into Model::params
    std::size_t b = 0;
};
struct ConvPair {
    ConvRef c1;
    ConvRef c2;
};
}  // namespace detail

// Shared encoder, bottleneck, and three decoder stacks. All learnables live
// in `params` (registry order is also checkpoint order); the layer tables
// below hold indices into it.
struct Model {
    ModelConfig config;
    std::vector<Parameter> params;

    std::vector<detail::ConvPair> encoder;  // shallow to deep
    detail::ConvPair bottleneck;
    std::vector<detail::ConvRef> dec_seg;  // deep to shallow
    std::vector<detail::ConvRef> dec_bnd;
    std::vector<detail::ConvRef> dec_rec;
    detail::ConvRef head_seg;
    detail::ConvRef head_bnd;
    detail::ConvRef head_rec;

    std::vector<Parameter*> parameters();
    Parameter& param(const std::string& name);
};

struct ModelOutputs {
    Tensor seg_logits;  // (N,1,H,W)
    Tensor bnd_logits;  // (N,1,H,W)
    Tensor recon;       // (N,Cin,H,W), sigmoid-activated
};

// Deterministic construction: conv weights ~ U(+-sqrt(6/fan_in)) drawn in
// registry order from one engine, biases zero.
Model build_model(const ModelConfig& config, std::uint64_t rng_seed);

// Runs the full three-headed network. H and W must be divisible by 2^depth.
ModelOutputs forward(Tape& tape, Model& model, const Tensor& batch);

// Closed-form learnable count for a config; with_uncertainty adds the three
// per-task log-variance scalars a training run may attach.
std::int64_t parameter_count(const ModelConfig& config, bool with_uncertainty = false);

// ---- checkpointing ------------------------------------------------------------

// Provenance carried alongside the weights: which task losses were trained
// and which seeds produced the run.
struct CheckpointMeta {
    bool task_seg = true;
    bool task_bnd = false;
    bool task_rec = false;
    std::uint64_t model_seed = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t shuffle_seed = 0;
};

struct LoadedCheckpoint {
    Model model;
    CheckpointMeta meta;
    std::vector<float> extras;  // trained uncertainty log-variances, if any
};

// Flat binary container: magic "MTLSEG1", little-endian integer header
// (config, task flags, seeds, extra count), then every parameter in registry
// order as little-endian 32-bit floats, then the extras. Bit-exact.
void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta,
                     const std::vector<float>& extras = {});
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace mtlseg
