#include "mtlseg/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtlseg/common.hpp"
#include "mtlseg/rng.hpp"

namespace fs = std::filesystem;

namespace mtlseg {

namespace {

constexpr float kTwoPi = 6.28318530717958647692f;

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

void require_binary(const Tensor& mask, const char* what) {
    for (float v : mask.values()) {
        if (v != 0.0f && v != 1.0f) {
            throw ValueError(std::string(what) + " must be strictly binary, found " +
                             std::to_string(v));
        }
    }
}

void require_mask_shape(const Tensor& mask, const char* what) {
    const Shape& s = mask.shape();
    if (s.n != 1 || s.c != 1) {
        throw ShapeError(std::string(what) + " must be (1,1,H,W), got " + s.str());
    }
}

}  // namespace

AugmentPolicy AugmentPolicy::identity(int boundary_radius) {
    AugmentPolicy p;
    p.flip = p.perspective = p.gamma = p.brightness = p.contrast = p.blur = p.noise = false;
    p.boundary_radius = boundary_radius;
    return p;
}

// ---- scene generation ------------------------------------------------------------

namespace {

void validate_scene_config(const SceneConfig& c) {
    if (c.size <= 0) throw ValueError("scene size must be positive");
    if (c.channels <= 0) throw ValueError("scene channels must be positive");
    if (c.count_min < 0 || c.count_max < c.count_min) {
        throw ValueError("building count range is invalid");
    }
    if (c.size_min < 3) {
        throw ValueError("building size must be at least 3 px for a well-defined boundary");
    }
    if (c.size_max < c.size_min) throw ValueError("building size range is invalid");
    if (c.texture_amplitude < 0.0f) throw ValueError("texture amplitude must be >= 0");
    if (c.boundary_radius < 0) throw ValueError("boundary radius must be >= 0");
}

}  // namespace

Sample generate_scene(const SceneConfig& config, int index) {
    validate_scene_config(config);
    const int size = config.size;
    std::mt19937 g = make_rng(config.rng_seed, static_cast<std::uint64_t>(index));

    Sample sample;
    sample.id = index;
    sample.image = Tensor::zeros(Shape{1, config.channels, size, size});
    sample.seg_mask = Tensor::zeros(Shape{1, 1, size, size});

    // Background: per-channel base tone modulated by one sinusoidal wave and
    // one per-pixel noise field shared across channels.
    std::vector<float> base(static_cast<std::size_t>(config.channels));
    for (float& b : base) b = uniform_range(g, 0.25f, 0.55f);
    const float fx = uniform_range(g, 0.03f, 0.12f);
    const float fy = uniform_range(g, 0.03f, 0.12f);
    const float phase = uniform_range(g, 0.0f, kTwoPi);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const float wave =
                std::sin(kTwoPi * (fx * static_cast<float>(x) + fy * static_cast<float>(y)) +
                         phase);
            const float noise = uniform_range(g, -0.5f, 0.5f);
            const float bump = config.texture_amplitude * (0.6f * wave + 0.8f * noise);
            for (int c = 0; c < config.channels; ++c) {
                sample.image.at(0, c, y, x) = clamp01(base[static_cast<std::size_t>(c)] + bump);
            }
        }
    }

    // Buildings. Every per-building draw happens unconditionally so the
    // stream layout never depends on sampled values.
    const int count = uniform_int(g, config.count_min, config.count_max);
    std::vector<float> tint(static_cast<std::size_t>(config.channels));
    for (int b = 0; b < count; ++b) {
        const int bw = uniform_int(g, config.size_min, config.size_max);
        const int bh = uniform_int(g, config.size_min, config.size_max);
        const bool rotated = uniform_float(g) < 0.5f;
        float angle = uniform_range(g, 0.0f, kTwoPi / 4.0f);
        if (!rotated) angle = 0.0f;
        const float ux = uniform_float(g);
        const float uy = uniform_float(g);
        const float shade = uniform_range(g, 0.60f, 0.92f);
        for (float& t : tint) t = clamp01(shade + uniform_range(g, -0.07f, 0.07f));

        // Keep the whole rotated footprint inside the scene.
        const float margin =
            0.5f * std::hypot(static_cast<float>(bw), static_cast<float>(bh)) + 1.0f;
        const float lo = margin;
        const float hi = static_cast<float>(size) - margin;
        const float cx = hi > lo ? lo + ux * (hi - lo) : static_cast<float>(size) * 0.5f;
        const float cy = hi > lo ? lo + uy * (hi - lo) : static_cast<float>(size) * 0.5f;

        // A pixel belongs to the footprint when its center falls inside the
        // rectangle shrunk by 1/3 px per side; this inset keeps the rasterized
        // area of a w x h footprint within [(w-1)(h-1), w*h] at every angle.
        const float ex = 0.5f * static_cast<float>(bw) - 1.0f / 3.0f;
        const float ey = 0.5f * static_cast<float>(bh) - 1.0f / 3.0f;
        const float ca = std::cos(angle);
        const float sa = std::sin(angle);
        const float reach = std::hypot(ex, ey) + 1.0f;
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
        const int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + reach)));
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
        const int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + reach)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const float dx = static_cast<float>(x) + 0.5f - cx;
                const float dy = static_cast<float>(y) + 0.5f - cy;
                const float u = dx * ca + dy * sa;
                const float v = -dx * sa + dy * ca;
                if (std::abs(u) <= ex && std::abs(v) <= ey) {
                    sample.seg_mask.at(0, 0, y, x) = 1.0f;
                    for (int c = 0; c < config.channels; ++c) {
                        sample.image.at(0, c, y, x) = tint[static_cast<std::size_t>(c)];
                    }
                }
            }
        }
    }

    sample.bnd_mask = extract_boundary(sample.seg_mask, config.boundary_radius);
    return sample;
}

// ---- boundary extraction -----------------------------------------------------------

Tensor extract_boundary(const Tensor& mask, int dilation_radius) {
    require_mask_shape(mask, "boundary input");
    require_binary(mask, "boundary input");
    if (dilation_radius < 0) throw ValueError("dilation radius must be >= 0");

    const int h = mask.shape().h;
    const int w = mask.shape().w;
    const auto on = [&](int y, int x) {
        if (y < 0 || y >= h || x < 0 || x >= w) return false;  // border counts as zero
        return mask.at(0, 0, y, x) == 1.0f;
    };

    // Disk offsets for the dilation stamp.
    std::vector<std::pair<int, int>> disk;
    for (int dy = -dilation_radius; dy <= dilation_radius; ++dy) {
        for (int dx = -dilation_radius; dx <= dilation_radius; ++dx) {
            if (dy * dy + dx * dx <= dilation_radius * dilation_radius) {
                disk.emplace_back(dy, dx);
            }
        }
    }

    Tensor out = Tensor::zeros(mask.shape());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!on(y, x)) continue;
            const bool inner =
                !on(y - 1, x) || !on(y + 1, x) || !on(y, x - 1) || !on(y, x + 1);
            if (!inner) continue;
            for (const auto& [dy, dx] : disk) {
                const int yy = y + dy;
                const int xx = x + dx;
                if (yy >= 0 && yy < h && xx >= 0 && xx < w) {
                    out.at(0, 0, yy, xx) = 1.0f;
                }
            }
        }
    }
    return out;
}

// ---- flips ---------------------------------------------------------------------------

Tensor flip_horizontal(const Tensor& t) {
    const Shape& s = t.shape();
    Tensor out = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    out.at(n, c, y, x) = t.at(n, c, y, s.w - 1 - x);
                }
            }
        }
    }
    return out;
}

Tensor flip_vertical(const Tensor& t) {
    const Shape& s = t.shape();
    Tensor out = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    out.at(n, c, y, x) = t.at(n, c, s.h - 1 - y, x);
                }
            }
        }
    }
    return out;
}

// ---- augmentation ----------------------------------------------------------------------

namespace {

// Solves the 8x8 linear system of the direct linear transform by Gaussian
// elimination with partial pivoting; h[8] is fixed at 1.
std::array<double, 9> homography(const std::array<std::pair<double, double>, 4>& from,
                                 const std::array<std::pair<double, double>, 4>& to) {
    double m[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        const auto [x, y] = from[static_cast<std::size_t>(i)];
        const auto [u, v] = to[static_cast<std::size_t>(i)];
        double* r0 = m[2 * i];
        double* r1 = m[2 * i + 1];
        r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -u * x; r0[7] = -u * y; r0[8] = u;
        r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -v * x; r1[7] = -v * y; r1[8] = v;
    }
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 8; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        if (std::abs(m[pivot][col]) < 1e-12) {
            throw ValueError("degenerate perspective warp corners");
        }
        std::swap_ranges(m[col], m[col] + 9, m[pivot]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < 9; ++c) m[r][c] -= f * m[col][c];
        }
    }
    std::array<double, 9> h{};
    for (int i = 0; i < 8; ++i) h[static_cast<std::size_t>(i)] = m[i][8] / m[i][i];
    h[8] = 1.0;
    return h;
}

float sample_bilinear(const Tensor& t, int n, int c, double sy, double sx) {
    const Shape& s = t.shape();
    const auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    const double fy = std::floor(sy);
    const double fx = std::floor(sx);
    const int y0 = clampi(static_cast<int>(fy), s.h - 1);
    const int x0 = clampi(static_cast<int>(fx), s.w - 1);
    const int y1 = clampi(y0 + 1, s.h - 1);
    const int x1 = clampi(x0 + 1, s.w - 1);
    const double wy = std::min(std::max(sy - fy, 0.0), 1.0);
    const double wx = std::min(std::max(sx - fx, 0.0), 1.0);
    const double top = t.at(n, c, y0, x0) * (1.0 - wx) + t.at(n, c, y0, x1) * wx;
    const double bot = t.at(n, c, y1, x0) * (1.0 - wx) + t.at(n, c, y1, x1) * wx;
    return static_cast<float>(top * (1.0 - wy) + bot * wy);
}

float sample_nearest(const Tensor& t, int n, int c, double sy, double sx) {
    const Shape& s = t.shape();
    int y = static_cast<int>(std::lround(sy));
    int x = static_cast<int>(std::lround(sx));
    y = y < 0 ? 0 : (y >= s.h ? s.h - 1 : y);
    x = x < 0 ? 0 : (x >= s.w ? s.w - 1 : x);
    return t.at(n, c, y, x);
}

Tensor warp(const Tensor& t, const std::array<double, 9>& h, bool bilinear) {
    const Shape& s = t.shape();
    Tensor out = Tensor::zeros(s);
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            const double d = h[6] * x + h[7] * y + h[8];
            const double sx = (h[0] * x + h[1] * y + h[2]) / d;
            const double sy = (h[3] * x + h[4] * y + h[5]) / d;
            for (int n = 0; n < s.n; ++n) {
                for (int c = 0; c < s.c; ++c) {
                    out.at(n, c, y, x) = bilinear ? sample_bilinear(t, n, c, sy, sx)
                                                  : sample_nearest(t, n, c, sy, sx);
                }
            }
        }
    }
    return out;
}

// 3x3 binomial blur, separable [1 2 1]/4 with clamp-to-edge borders.
Tensor blur3(const Tensor& t) {
    const Shape& s = t.shape();
    Tensor mid = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    const int xl = x > 0 ? x - 1 : 0;
                    const int xr = x < s.w - 1 ? x + 1 : s.w - 1;
                    mid.at(n, c, y, x) = 0.25f * t.at(n, c, y, xl) + 0.5f * t.at(n, c, y, x) +
                                         0.25f * t.at(n, c, y, xr);
                }
            }
        }
    }
    Tensor out = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                const int yu = y > 0 ? y - 1 : 0;
                const int yd = y < s.h - 1 ? y + 1 : s.h - 1;
                for (int x = 0; x < s.w; ++x) {
                    out.at(n, c, y, x) = 0.25f * mid.at(n, c, yu, x) + 0.5f * mid.at(n, c, y, x) +
                                         0.25f * mid.at(n, c, yd, x);
                }
            }
        }
    }
    return out;
}

}  // namespace

Sample augment(const Sample& sample, std::mt19937& rng, const AugmentPolicy& policy) {
    require_mask_shape(sample.seg_mask, "seg_mask");
    require_binary(sample.seg_mask, "seg_mask");

    Tensor img = sample.image.detached_copy();
    Tensor seg = sample.seg_mask.detached_copy();
    const Shape& s = img.shape();

    if (policy.flip) {
        if (uniform_float(rng) < 0.5f) {
            img = flip_horizontal(img);
            seg = flip_horizontal(seg);
        }
        if (uniform_float(rng) < 0.5f) {
            img = flip_vertical(img);
            seg = flip_vertical(seg);
        }
    }

    if (policy.perspective) {
        const double W = s.w - 1;
        const double H = s.h - 1;
        const std::array<std::pair<double, double>, 4> dst{
            {{0.0, 0.0}, {W, 0.0}, {W, H}, {0.0, H}}};
        std::array<std::pair<double, double>, 4> src = dst;
        for (auto& [cx, cy] : src) {
            cx += uniform_range(rng, -0.05f, 0.05f) * static_cast<float>(s.w);
            cy += uniform_range(rng, -0.05f, 0.05f) * static_cast<float>(s.h);
        }
        const std::array<double, 9> h = homography(dst, src);
        img = warp(img, h, /*bilinear=*/true);
        seg = warp(seg, h, /*bilinear=*/false);
        for (float& v : seg.values()) v = v > 0.5f ? 1.0f : 0.0f;  // re-binarize
    }

    if (policy.gamma) {
        const float gamma = uniform_range(rng, 0.7f, 1.4f);
        for (float& v : img.values()) v = std::pow(v, gamma);
    }
    if (policy.brightness) {
        const float delta = uniform_range(rng, -0.2f, 0.2f);
        for (float& v : img.values()) v += delta;
    }
    if (policy.contrast) {
        const float factor = uniform_range(rng, 0.7f, 1.3f);
        for (int c = 0; c < s.c; ++c) {
            double acc = 0.0;
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) acc += img.at(0, c, y, x);
            }
            const float mean = static_cast<float>(acc / (static_cast<double>(s.h) * s.w));
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    float& v = img.at(0, c, y, x);
                    v = mean + factor * (v - mean);
                }
            }
        }
    }
    if (policy.blur && uniform_float(rng) < 0.25f) {
        img = blur3(img);
    }
    if (policy.noise) {
        const float sigma = uniform_range(rng, 0.0f, 0.05f);
        for (float& v : img.values()) v += sigma * normal_float(rng);
    }
    for (float& v : img.values()) v = clamp01(v);

    Sample out;
    out.id = sample.id;
    out.image = img;
    out.seg_mask = seg;
    if (policy.flip || policy.perspective) {
        out.bnd_mask = extract_boundary(seg, policy.boundary_radius);
    } else {
        out.bnd_mask = sample.bnd_mask.detached_copy();
    }
    return out;
}

Sample random_crop(const Sample& sample, int size, std::mt19937& rng) {
    const Shape& s = sample.image.shape();
    if (size <= 0 || size > s.h || size > s.w) {
        throw ValueError("crop size " + std::to_string(size) + " does not fit in " +
                         std::to_string(s.h) + "x" + std::to_string(s.w));
    }
    const int y0 = uniform_int(rng, 0, s.h - size);
    const int x0 = uniform_int(rng, 0, s.w - size);

    const auto window = [&](const Tensor& t) {
        const Shape& ts = t.shape();
        Tensor out = Tensor::zeros(Shape{ts.n, ts.c, size, size});
        for (int n = 0; n < ts.n; ++n) {
            for (int c = 0; c < ts.c; ++c) {
                for (int y = 0; y < size; ++y) {
                    for (int x = 0; x < size; ++x) {
                        out.at(n, c, y, x) = t.at(n, c, y0 + y, x0 + x);
                    }
                }
            }
        }
        return out;
    };

    Sample out;
    out.id = sample.id;
    out.image = window(sample.image);
    out.seg_mask = window(sample.seg_mask);
    out.bnd_mask = window(sample.bnd_mask);
    return out;
}

// ---- splitting --------------------------------------------------------------------------

SplitResult split_dataset(int n, const SplitSpec& spec) {
    const double ratios[3] = {spec.train, spec.val, spec.test};
    double sum = 0.0;
    int nonzero = 0;
    for (double r : ratios) {
        if (r < 0.0) throw ValueError("split ratios must be non-negative");
        sum += r;
        if (r > 0.0) ++nonzero;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ValueError("split ratios must sum to 1, got " + str_g9(sum));
    }
    if (n < 3) throw ValueError("need at least 3 samples to split");
    if (n < nonzero) {
        throw ValueError("cannot split " + std::to_string(n) + " samples into " +
                         std::to_string(nonzero) + " nonempty subsets");
    }

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::mt19937 g = make_rng(spec.seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = uniform_int(g, 0, i);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }

    // Floor allocation; the remainder goes one index each to train, then val,
    // then test, in that order.
    int sizes[3];
    int allocated = 0;
    for (int i = 0; i < 3; ++i) {
        sizes[i] = static_cast<int>(std::floor(static_cast<double>(n) * ratios[i] + 1e-9));
        allocated += sizes[i];
    }
    for (int i = 0; allocated < n; i = (i + 1) % 3) {
        ++sizes[i];
        ++allocated;
    }

    SplitResult out;
    auto it = perm.begin();
    out.train.assign(it, it + sizes[0]);
    it += sizes[0];
    out.val.assign(it, it + sizes[1]);
    it += sizes[1];
    out.test.assign(it, it + sizes[2]);
    return out;
}

// ---- netpbm I/O ----------------------------------------------------------------------------

namespace {

// Next whitespace-delimited token, skipping '#' comments.
std::string pbm_token(std::istream& is, const std::string& path) {
    std::string tok;
    int ch = is.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = is.get();
        } else if (std::isspace(ch)) {
            if (!tok.empty()) return tok;  // the terminating byte is consumed
        } else {
            tok.push_back(static_cast<char>(ch));
        }
        ch = is.get();
    }
    if (tok.empty()) throw IoError("unexpected end of header in '" + path + "'");
    return tok;
}

int pbm_int(std::istream& is, const std::string& path, const char* field) {
    const std::string tok = pbm_token(is, path);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError("bad " + std::string(field) + " '" + tok + "' in '" + path + "'");
    }
}

}  // namespace

Tensor read_netpbm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");

    const std::string magic = pbm_token(is, path);
    int channels = 0;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw IoError("unsupported netpbm type '" + magic + "' in '" + path +
                      "' (only binary P5/P6)");
    }
    const int w = pbm_int(is, path, "width");
    const int h = pbm_int(is, path, "height");
    const int maxval = pbm_int(is, path, "maxval");
    if (w <= 0 || h <= 0) throw IoError("non-positive image size in '" + path + "'");
    if (maxval != 255) {
        throw IoError("unsupported maxval " + std::to_string(maxval) + " in '" + path +
                      "' (must be 255)");
    }

    const std::size_t payload =
        static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
        static_cast<std::size_t>(channels);
    std::vector<unsigned char> bytes(payload);
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(payload));
    if (static_cast<std::size_t>(is.gcount()) != payload) {
        throw IoError("truncated pixel data in '" + path + "'");
    }
    if (is.peek() != std::ifstream::traits_type::eof()) {
        throw IoError("trailing bytes after pixel data in '" + path + "'");
    }

    Tensor t = Tensor::zeros(Shape{1, channels, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t i =
                    (static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                     static_cast<std::size_t>(x)) *
                        static_cast<std::size_t>(channels) +
                    static_cast<std::size_t>(c);
                t.at(0, c, y, x) = static_cast<float>(bytes[i]) / 255.0f;
            }
        }
    }
    return t;
}

void write_netpbm(const std::string& path, const Tensor& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || (s.c != 1 && s.c != 3)) {
        throw ShapeError("netpbm writer needs (1,1,H,W) or (1,3,H,W), got " + s.str());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");

    os << (s.c == 1 ? "P5" : "P6") << "\n" << s.w << " " << s.h << "\n255\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(static_cast<std::size_t>(s.numel()));
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            for (int c = 0; c < s.c; ++c) {
                bytes.push_back(static_cast<unsigned char>(
                    std::lround(clamp01(t.at(0, c, y, x)) * 255.0f)));
            }
        }
    }
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("short write to '" + path + "'");
}

// ---- dataset directory ------------------------------------------------------------------------

void write_dataset(const std::string& dir, const SceneConfig& config, int n,
                   const SplitSpec& split) {
    validate_scene_config(config);
    if (n <= 0) throw ValueError("dataset size must be positive");
    const SplitResult result = split_dataset(n, split);

    fs::create_directories(dir);
    const fs::path root(dir);

    std::vector<std::string> subset(static_cast<std::size_t>(n));
    for (int i : result.train) subset[static_cast<std::size_t>(i)] = "train";
    for (int i : result.val) subset[static_cast<std::size_t>(i)] = "val";
    for (int i : result.test) subset[static_cast<std::size_t>(i)] = "test";

    for (int id = 0; id < n; ++id) {
        const Sample s = generate_scene(config, id);
        write_netpbm((root / ("img_" + std::to_string(id) + ".ppm")).string(), s.image);
        write_netpbm((root / ("seg_" + std::to_string(id) + ".pgm")).string(), s.seg_mask);
        write_netpbm((root / ("bnd_" + std::to_string(id) + ".pgm")).string(), s.bnd_mask);
    }

    {
        std::ofstream os((root / "split.csv").string(), std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write split.csv");
        os << "id,subset\n";
        for (int id = 0; id < n; ++id) {
            os << id << "," << subset[static_cast<std::size_t>(id)] << "\n";
        }
    }
    {
        std::ofstream os((root / "gen_config.txt").string(), std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write gen_config.txt");
        os << "size=" << config.size << "\n"
           << "channels=" << config.channels << "\n"
           << "count_min=" << config.count_min << "\n"
           << "count_max=" << config.count_max << "\n"
           << "size_min=" << config.size_min << "\n"
           << "size_max=" << config.size_max << "\n"
           << "texture_amplitude=" << str_g9(config.texture_amplitude) << "\n"
           << "boundary_radius=" << config.boundary_radius << "\n"
           << "rng_seed=" << config.rng_seed << "\n"
           << "n=" << n << "\n"
           << "split_train=" << str_g9(split.train) << "\n"
           << "split_val=" << str_g9(split.val) << "\n"
           << "split_test=" << str_g9(split.test) << "\n"
           << "split_seed=" << split.seed << "\n";
    }
}

Dataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream split_file((root / "split.csv").string());
    if (!split_file) throw IoError("cannot open '" + (root / "split.csv").string() + "'");

    Dataset ds;
    std::string line;
    if (!std::getline(split_file, line) || line != "id,subset") {
        throw IoError("split.csv must start with header 'id,subset'");
    }
    while (std::getline(split_file, line)) {
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) throw IoError("malformed split.csv row: " + line);
        int id = 0;
        try {
            id = std::stoi(line.substr(0, comma));
        } catch (const std::exception&) {
            throw IoError("malformed split.csv id: " + line);
        }
        const std::string subset = line.substr(comma + 1);

        Sample s;
        s.id = id;
        s.image = read_netpbm((root / ("img_" + std::to_string(id) + ".ppm")).string());
        s.seg_mask = read_netpbm((root / ("seg_" + std::to_string(id) + ".pgm")).string());
        s.bnd_mask = read_netpbm((root / ("bnd_" + std::to_string(id) + ".pgm")).string());
        require_binary(s.seg_mask, "loaded seg_mask");
        require_binary(s.bnd_mask, "loaded bnd_mask");
        const int index = static_cast<int>(ds.samples.size());
        ds.samples.push_back(std::move(s));

        if (subset == "train") {
            ds.split.train.push_back(index);
        } else if (subset == "val") {
            ds.split.val.push_back(index);
        } else if (subset == "test") {
            ds.split.test.push_back(index);
        } else {
            throw IoError("unknown subset '" + subset + "' in split.csv");
        }
    }
    if (ds.samples.empty()) throw IoError("dataset '" + dir + "' is empty");

    // Provenance; the boundary radius feeds augmentation during training.
    std::ifstream cfg((root / "gen_config.txt").string());
    if (cfg) {
        while (std::getline(cfg, line)) {
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq);
            const std::string value = line.substr(eq + 1);
            try {
                if (key == "size") ds.scene.size = std::stoi(value);
                else if (key == "channels") ds.scene.channels = std::stoi(value);
                else if (key == "count_min") ds.scene.count_min = std::stoi(value);
                else if (key == "count_max") ds.scene.count_max = std::stoi(value);
                else if (key == "size_min") ds.scene.size_min = std::stoi(value);
                else if (key == "size_max") ds.scene.size_max = std::stoi(value);
                else if (key == "texture_amplitude") ds.scene.texture_amplitude = std::stof(value);
                else if (key == "boundary_radius") ds.scene.boundary_radius = std::stoi(value);
                else if (key == "rng_seed") ds.scene.rng_seed = std::stoull(value);
            } catch (const std::exception&) {
                throw IoError("malformed gen_config.txt line: " + line);
            }
        }
    }
    return ds;
}

}  // namespace mtlseg
