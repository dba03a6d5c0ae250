#include "mtlseg/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mtlseg/common.hpp"
#include "mtlseg/rng.hpp"

namespace mtlseg {

namespace {

void validate_config(const ModelConfig& c) {
    if (c.in_channels <= 0) throw ConfigError("in_channels must be positive");
    if (c.depth <= 0) throw ConfigError("depth must be positive");
    if (static_cast<int>(c.widths.size()) != c.depth) {
        throw ConfigError("widths has " + std::to_string(c.widths.size()) +
                          " entries but depth is " + std::to_string(c.depth));
    }
    for (int w : c.widths) {
        if (w <= 0) throw ConfigError("widths must be positive");
    }
    if (!c.seg_skip || !c.bnd_skip) {
        throw ConfigError("seg_skip and bnd_skip are fixed true");
    }
    if (c.rec_skip) {
        throw ConfigError("rec_skip is fixed false: the reconstruction head takes no skips");
    }
}

// Encoder width at level i (shallow to deep) mirrors the decoder widths.
int encoder_width(const ModelConfig& c, int level) {
    return c.widths[static_cast<std::size_t>(c.depth - 1 - level)];
}

struct Builder {
    Model& model;
    std::vector<std::pair<std::size_t, int>> weight_fanins;  // (param index, fan_in)

    detail::ConvRef add_conv(const std::string& name, int cout, int cin, int k) {
        detail::ConvRef ref;
        ref.w = model.params.size();
        model.params.emplace_back(Tensor::zeros(Shape{cout, cin, k, k}), false,
                                  name + ".weight");
        weight_fanins.emplace_back(ref.w, cin * k * k);
        ref.b = model.params.size();
        model.params.emplace_back(Tensor::zeros(Shape{1, cout, 1, 1}), false,
                                  name + ".bias");
        return ref;
    }
};

}  // namespace

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    out.reserve(params.size());
    for (Parameter& p : params) out.push_back(&p);
    return out;
}

Parameter& Model::param(const std::string& name) {
    for (Parameter& p : params) {
        if (p.name == name) return p;
    }
    throw ValueError("no parameter named '" + name + "'");
}

Model build_model(const ModelConfig& config, std::uint64_t rng_seed) {
    validate_config(config);

    Model m;
    m.config = config;
    Builder b{m, {}};

    int ch = config.in_channels;
    for (int i = 0; i < config.depth; ++i) {
        const int w = encoder_width(config, i);
        detail::ConvPair level;
        level.c1 = b.add_conv("enc" + std::to_string(i) + ".conv1", w, ch, 3);
        level.c2 = b.add_conv("enc" + std::to_string(i) + ".conv2", w, w, 3);
        m.encoder.push_back(level);
        ch = w;
    }
    m.bottleneck.c1 = b.add_conv("bottleneck.conv1", config.widths[0], ch, 3);
    m.bottleneck.c2 = b.add_conv("bottleneck.conv2", config.widths[0], config.widths[0], 3);

    const auto add_decoder = [&](const char* head, bool skip) {
        std::vector<detail::ConvRef> dec;
        for (int i = 0; i < config.depth; ++i) {
            const int up_in = i == 0 ? config.widths[0] : config.widths[i - 1];
            const int cin = up_in + (skip ? config.widths[i] : 0);
            dec.push_back(b.add_conv(std::string(head) + "_dec" + std::to_string(i) + ".conv",
                                     config.widths[i], cin, 3));
        }
        return dec;
    };
    m.dec_seg = add_decoder("seg", config.seg_skip);
    m.dec_bnd = add_decoder("bnd", config.bnd_skip);
    m.dec_rec = add_decoder("rec", config.rec_skip);

    const int top = config.widths.back();
    m.head_seg = b.add_conv("seg_head", 1, top, 1);
    m.head_bnd = b.add_conv("bnd_head", 1, top, 1);
    m.head_rec = b.add_conv("rec_head", config.in_channels, top, 1);

    // He-style uniform fan-in initialization, one engine consumed in registry
    // order so identical (config, seed) gives bit-identical parameters.
    std::mt19937 g = make_rng(rng_seed);
    for (const auto& [index, fan_in] : b.weight_fanins) {
        const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
        for (float& v : m.params[index].value.values()) {
            v = uniform_range(g, -bound, bound);
        }
    }
    return m;
}

namespace {

Tensor conv_layer(Tape& tape, Model& m, const detail::ConvRef& ref, const Tensor& x) {
    const Shape& ws = m.params[ref.w].value.shape();
    const int padding = ws.h == 1 ? 0 : 1;
    return conv2d(tape, x, m.params[ref.w].value, m.params[ref.b].value, 1, padding);
}

Tensor run_decoder(Tape& tape, Model& m, const std::vector<detail::ConvRef>& dec,
                   bool skip, const Tensor& bottom, const std::vector<Tensor>& skips) {
    Tensor h = bottom;
    const int depth = m.config.depth;
    for (int i = 0; i < depth; ++i) {
        h = upsample2(tape, h);
        if (skip) {
            h = concat_channels(tape, h, skips[static_cast<std::size_t>(depth - 1 - i)]);
        }
        h = relu(tape, conv_layer(tape, m, dec[static_cast<std::size_t>(i)], h));
    }
    return h;
}

}  // namespace

ModelOutputs forward(Tape& tape, Model& model, const Tensor& batch) {
    const Shape& s = batch.shape();
    if (s.c != model.config.in_channels) {
        throw ShapeError("batch has " + std::to_string(s.c) + " channels, model expects " +
                         std::to_string(model.config.in_channels));
    }
    const int divisor = 1 << model.config.depth;
    if (s.h % divisor != 0 || s.w % divisor != 0) {
        throw ShapeError("spatial extent " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " must be divisible by 2^depth = " + std::to_string(divisor));
    }

    std::vector<Tensor> skips;
    Tensor x = batch;
    for (const detail::ConvPair& level : model.encoder) {
        x = relu(tape, conv_layer(tape, model, level.c1, x));
        x = relu(tape, conv_layer(tape, model, level.c2, x));
        skips.push_back(x);
        x = max_pool2(tape, x);
    }
    x = relu(tape, conv_layer(tape, model, model.bottleneck.c1, x));
    x = relu(tape, conv_layer(tape, model, model.bottleneck.c2, x));

    Tensor seg_top = run_decoder(tape, model, model.dec_seg, model.config.seg_skip, x, skips);
    Tensor bnd_top = run_decoder(tape, model, model.dec_bnd, model.config.bnd_skip, x, skips);
    Tensor rec_top = run_decoder(tape, model, model.dec_rec, model.config.rec_skip, x, skips);

    ModelOutputs out;
    out.seg_logits = conv_layer(tape, model, model.head_seg, seg_top);
    out.bnd_logits = conv_layer(tape, model, model.head_bnd, bnd_top);
    out.recon = sigmoid(tape, conv_layer(tape, model, model.head_rec, rec_top));
    return out;
}

std::int64_t parameter_count(const ModelConfig& config, bool with_uncertainty) {
    validate_config(config);
    const auto conv = [](int cout, int cin, int k) {
        return static_cast<std::int64_t>(cout) * cin * k * k + cout;
    };

    std::int64_t total = 0;
    int ch = config.in_channels;
    for (int i = 0; i < config.depth; ++i) {
        const int w = encoder_width(config, i);
        total += conv(w, ch, 3) + conv(w, w, 3);
        ch = w;
    }
    total += conv(config.widths[0], ch, 3) + conv(config.widths[0], config.widths[0], 3);

    for (const bool skip : {config.seg_skip, config.bnd_skip, config.rec_skip}) {
        for (int i = 0; i < config.depth; ++i) {
            const int up_in = i == 0 ? config.widths[0] : config.widths[i - 1];
            total += conv(config.widths[i], up_in + (skip ? config.widths[i] : 0), 3);
        }
    }
    const int top = config.widths.back();
    total += conv(1, top, 1) + conv(1, top, 1) + conv(config.in_channels, top, 1);
    if (with_uncertainty) total += 3;
    return total;
}

// ---- checkpoint I/O -------------------------------------------------------------

namespace {

constexpr char kMagic[7] = {'M', 'T', 'L', 'S', 'E', 'G', '1'};

void put_i32(std::ostream& os, std::int32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_i64(std::ostream& os, std::int64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& os, float v) {
    put_i32(os, static_cast<std::int32_t>(std::bit_cast<std::uint32_t>(v)));
}

std::int32_t get_i32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw IoError("checkpoint truncated");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return static_cast<std::int32_t>(v);
}

std::int64_t get_i64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw IoError("checkpoint truncated");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<std::int64_t>(v);
}

float get_f32(std::istream& is) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(get_i32(is)));
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta,
                     const std::vector<float>& extras) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");

    os.write(kMagic, sizeof kMagic);
    put_i32(os, model.config.in_channels);
    put_i32(os, model.config.depth);
    for (int w : model.config.widths) put_i32(os, w);
    put_i32(os, model.config.seg_skip ? 1 : 0);
    put_i32(os, model.config.bnd_skip ? 1 : 0);
    put_i32(os, model.config.rec_skip ? 1 : 0);
    put_i32(os, meta.task_seg ? 1 : 0);
    put_i32(os, meta.task_bnd ? 1 : 0);
    put_i32(os, meta.task_rec ? 1 : 0);
    put_i64(os, static_cast<std::int64_t>(meta.model_seed));
    put_i64(os, static_cast<std::int64_t>(meta.data_seed));
    put_i64(os, static_cast<std::int64_t>(meta.shuffle_seed));
    put_i32(os, static_cast<std::int32_t>(extras.size()));

    for (Parameter& p : model.params) {
        for (float v : p.value.values()) put_f32(os, v);
    }
    for (float v : extras) put_f32(os, v);
    if (!os) throw IoError("short write to '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");

    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw IoError("'" + path + "' is not a model checkpoint");
    }

    ModelConfig config;
    config.in_channels = get_i32(is);
    config.depth = get_i32(is);
    if (config.depth <= 0 || config.depth > 16) {
        throw IoError("checkpoint depth " + std::to_string(config.depth) + " out of range");
    }
    config.widths.clear();
    for (int i = 0; i < config.depth; ++i) config.widths.push_back(get_i32(is));
    config.seg_skip = get_i32(is) != 0;
    config.bnd_skip = get_i32(is) != 0;
    config.rec_skip = get_i32(is) != 0;

    LoadedCheckpoint loaded{Model{}, CheckpointMeta{}, {}};
    loaded.meta.task_seg = get_i32(is) != 0;
    loaded.meta.task_bnd = get_i32(is) != 0;
    loaded.meta.task_rec = get_i32(is) != 0;
    loaded.meta.model_seed = static_cast<std::uint64_t>(get_i64(is));
    loaded.meta.data_seed = static_cast<std::uint64_t>(get_i64(is));
    loaded.meta.shuffle_seed = static_cast<std::uint64_t>(get_i64(is));
    const std::int32_t extra_count = get_i32(is);
    if (extra_count < 0) throw IoError("checkpoint extra count is negative");

    loaded.model = build_model(config, 0);
    for (Parameter& p : loaded.model.params) {
        for (float& v : p.value.values()) v = get_f32(is);
    }
    loaded.extras.resize(static_cast<std::size_t>(extra_count));
    for (float& v : loaded.extras) v = get_f32(is);

    if (is.peek() != std::ifstream::traits_type::eof()) {
        throw IoError("trailing bytes after checkpoint payload in '" + path + "'");
    }
    return loaded;
}

}  // namespace mtlseg
