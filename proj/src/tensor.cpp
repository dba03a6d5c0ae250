#include "mtlseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtlseg {

std::string Shape::str() const {
    std::ostringstream os;
    os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
    return os.str();
}

namespace {

std::shared_ptr<detail::TensorNode> make_node(Shape s, bool requires_grad) {
    if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0) {
        throw ShapeError("non-positive tensor shape " + s.str());
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = s;
    node->data.assign(static_cast<std::size_t>(s.numel()), 0.0f);
    node->requires_grad = requires_grad;
    return node;
}

inline std::size_t flat_index(const Shape& s, int n, int c, int h, int w) {
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
}

}  // namespace

Tensor Tensor::zeros(Shape s, bool requires_grad) {
    Tensor t;
    t.node_ = make_node(s, requires_grad);
    return t;
}

Tensor Tensor::full(Shape s, float value, bool requires_grad) {
    Tensor t = zeros(s, requires_grad);
    for (float& v : t.node_->data) v = value;
    return t;
}

Tensor Tensor::from_values(Shape s, std::vector<float> values, bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != s.numel()) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + s.str());
    }
    Tensor t;
    t.node_ = make_node(s, requires_grad);
    t.node_->data = std::move(values);
    return t;
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return full(Shape{1, 1, 1, 1}, value, requires_grad);
}

float& Tensor::at(int n, int c, int h, int w) {
    return node_->data[flat_index(node_->shape, n, c, h, w)];
}

float Tensor::at(int n, int c, int h, int w) const {
    return node_->data[flat_index(node_->shape, n, c, h, w)];
}

float Tensor::item() const {
    if (!node_) throw ValueError("item() on an undefined tensor");
    if (numel() != 1) {
        throw ShapeError("item() requires a single-element tensor, got " + shape().str());
    }
    return node_->data[0];
}

std::span<float> Tensor::grad() {
    if (!has_grad()) throw ValueError("tensor has no gradient buffer");
    return node_->grad;
}

std::span<const float> Tensor::grad() const {
    if (!has_grad()) throw ValueError("tensor has no gradient buffer");
    return node_->grad;
}

void Tensor::ensure_grad() {
    if (!node_) throw ValueError("ensure_grad() on an undefined tensor");
    if (!node_->requires_grad) {
        throw ValueError("ensure_grad() on a tensor that does not require gradients");
    }
    if (node_->grad.empty()) {
        node_->grad.assign(node_->data.size(), 0.0f);
    }
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) {
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
    }
}

Tensor Tensor::detached_copy() const {
    if (!node_) return {};
    Tensor t = zeros(node_->shape, false);
    t.node_->data = node_->data;
    return t;
}

void Tape::backward(Tensor& scalar_output) {
    if (!scalar_output.defined()) {
        throw ValueError("backward() on an undefined tensor");
    }
    if (scalar_output.numel() != 1) {
        throw ShapeError("backward() requires a single-element output, got " +
                         scalar_output.shape().str());
    }
    if (!scalar_output.requires_grad()) {
        throw ValueError("backward() output has no gradient path");
    }
    scalar_output.ensure_grad();
    scalar_output.grad()[0] += 1.0f;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
        (*it)();
    }
    steps_.clear();
}

// ---- op plumbing -------------------------------------------------------------

namespace {

// Marks the output differentiable and guarantees every participating gradient
// buffer exists before the backward closure is recorded. Returns true when the
// op should record a backward step.
bool setup_grads(Tape& tape, Tensor& out, std::initializer_list<const Tensor*> inputs) {
    if (!tape.recording()) return false;
    bool any = false;
    for (const Tensor* in : inputs) {
        if (in->requires_grad()) any = true;
    }
    if (!any) return false;
    out.node()->requires_grad = true;
    out.ensure_grad();
    for (const Tensor* in : inputs) {
        if (in->requires_grad()) const_cast<Tensor*>(in)->ensure_grad();
    }
    return true;
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    const Shape& bs = bias.shape();
    if (stride < 1) throw ValueError("conv2d stride must be >= 1");
    if (padding < 0) throw ValueError("conv2d padding must be >= 0");
    if (ws.c != xs.c) {
        throw ShapeError("conv2d weight expects " + std::to_string(ws.c) +
                         " input channels, got " + xs.str());
    }
    if (bs.n != 1 || bs.c != ws.n || bs.h != 1 || bs.w != 1) {
        throw ShapeError("conv2d bias must be (1, " + std::to_string(ws.n) +
                         ", 1, 1), got " + bs.str());
    }
    const int span_h = xs.h + 2 * padding - ws.h;
    const int span_w = xs.w + 2 * padding - ws.w;
    if (span_h < 0 || span_w < 0) {
        throw ShapeError("conv2d kernel " + ws.str() + " exceeds padded input " + xs.str());
    }
    if (span_h % stride != 0 || span_w % stride != 0) {
        throw ShapeError("conv2d geometry not divisible: input " + xs.str() + ", kernel " +
                         ws.str() + ", stride " + std::to_string(stride) + ", padding " +
                         std::to_string(padding));
    }
    const int oh = span_h / stride + 1;
    const int ow = span_w / stride + 1;
    const Shape os{xs.n, ws.n, oh, ow};

    // The hot loops run over whole rows per kernel tap ("shifted plane" form)
    // so the compiler can vectorize the x loop. For output position ox the
    // tap (ky,kx) reads input row iy = oy*stride - padding + ky at column
    // ix = ox*stride - padding + kx; the valid ox range is precomputed.
    const auto tap_range = [stride, padding](int k, int in_extent, int out_extent) {
        int lo = 0;
        while (lo < out_extent && lo * stride - padding + k < 0) ++lo;
        int hi = out_extent - 1;
        while (hi >= lo && hi * stride - padding + k >= in_extent) --hi;
        return std::pair<int, int>(lo, hi);
    };

    Tensor out = Tensor::zeros(os);
    {
        const float* in = input.values().data();
        const float* wv = weight.values().data();
        const float* bv = bias.values().data();
        float* ov = out.values().data();
        for (int n = 0; n < xs.n; ++n) {
            for (int co = 0; co < ws.n; ++co) {
                float* oplane = ov + flat_index(os, n, co, 0, 0);
                const float b = bv[co];
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) {
                    oplane[i] = b;
                }
                for (int ci = 0; ci < xs.c; ++ci) {
                    const float* iplane = in + flat_index(xs, n, ci, 0, 0);
                    for (int ky = 0; ky < ws.h; ++ky) {
                        const auto [oy0, oy1] = tap_range(ky, xs.h, oh);
                        for (int kx = 0; kx < ws.w; ++kx) {
                            const auto [ox0, ox1] = tap_range(kx, xs.w, ow);
                            const float w = wv[flat_index(ws, co, ci, ky, kx)];
                            for (int oy = oy0; oy <= oy1; ++oy) {
                                const float* irow =
                                    iplane + (oy * stride - padding + ky) * xs.w - padding + kx;
                                float* orow = oplane + oy * ow;
                                if (stride == 1) {
                                    for (int ox = ox0; ox <= ox1; ++ox) {
                                        orow[ox] += w * irow[ox];
                                    }
                                } else {
                                    for (int ox = ox0; ox <= ox1; ++ox) {
                                        orow[ox] += w * irow[ox * stride];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if (setup_grads(tape, out, {&input, &weight, &bias})) {
        tape.record([=, input = input, weight = weight, bias = bias]() mutable {
            const bool gx = input.requires_grad();
            const bool gw = weight.requires_grad();
            const bool gb = bias.requires_grad();
            // Branches of the graph no loss reaches (e.g. unused output heads)
            // replay with an all-zero output gradient; skip their heavy loops.
            const auto gspan = out.grad();
            if (std::all_of(gspan.begin(), gspan.end(), [](float v) { return v == 0.0f; })) {
                return;
            }
            const float* go = out.grad().data();
            const float* in = input.values().data();
            const float* wv = weight.values().data();
            for (int n = 0; n < xs.n; ++n) {
                for (int co = 0; co < ws.n; ++co) {
                    const float* gplane = go + flat_index(os, n, co, 0, 0);
                    if (gb) {
                        double acc = 0.0;
                        for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) {
                            acc += gplane[i];
                        }
                        bias.grad()[co] += static_cast<float>(acc);
                    }
                    if (!gx && !gw) continue;
                    for (int ci = 0; ci < xs.c; ++ci) {
                        const float* iplane = in + flat_index(xs, n, ci, 0, 0);
                        float* gxplane = gx ? input.grad().data() + flat_index(xs, n, ci, 0, 0)
                                            : nullptr;
                        for (int ky = 0; ky < ws.h; ++ky) {
                            const auto [oy0, oy1] = tap_range(ky, xs.h, oh);
                            for (int kx = 0; kx < ws.w; ++kx) {
                                const auto [ox0, ox1] = tap_range(kx, xs.w, ow);
                                const std::size_t wi = flat_index(ws, co, ci, ky, kx);
                                const float w = wv[wi];
                                double wacc = 0.0;
                                for (int oy = oy0; oy <= oy1; ++oy) {
                                    const std::int64_t ibase =
                                        static_cast<std::int64_t>(oy * stride - padding + ky) *
                                            xs.w -
                                        padding + kx;
                                    const float* grow = gplane + oy * ow;
                                    if (gx) {
                                        float* gxrow = gxplane + ibase;
                                        for (int ox = ox0; ox <= ox1; ++ox) {
                                            gxrow[ox * stride] += w * grow[ox];
                                        }
                                    }
                                    if (gw) {
                                        const float* irow = iplane + ibase;
                                        for (int ox = ox0; ox <= ox1; ++ox) {
                                            wacc += static_cast<double>(grow[ox]) *
                                                    irow[ox * stride];
                                        }
                                    }
                                }
                                if (gw) weight.grad()[wi] += static_cast<float>(wacc);
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        ov[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    }
    if (setup_grads(tape, out, {&x})) {
        tape.record([=, x = x]() mutable {
            for (std::size_t i = 0; i < xv.size(); ++i) {
                if (x.values()[i] > 0.0f) x.grad()[i] += out.grad()[i];
            }
        });
    }
    return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const float v = xv[i];
        if (v >= 0.0f) {
            ov[i] = 1.0f / (1.0f + std::exp(-v));
        } else {
            const float e = std::exp(v);
            ov[i] = e / (1.0f + e);
        }
    }
    if (setup_grads(tape, out, {&x})) {
        tape.record([=, x = x]() mutable {
            for (std::size_t i = 0; i < xv.size(); ++i) {
                const float y = out.values()[i];
                x.grad()[i] += out.grad()[i] * y * (1.0f - y);
            }
        });
    }
    return out;
}

Tensor max_pool2(Tape& tape, const Tensor& x) {
    const Shape& xs = x.shape();
    if (xs.h % 2 != 0 || xs.w % 2 != 0) {
        throw ShapeError("max_pool2 requires even spatial extent, got " + xs.str());
    }
    const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
    Tensor out = Tensor::zeros(os);
    // Flat input index of each window's winner; ties keep the first candidate
    // in row-major window order so backward routing is reproducible.
    auto argmax = std::make_shared<std::vector<std::size_t>>(
        static_cast<std::size_t>(os.numel()));
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            for (int y = 0; y < os.h; ++y) {
                for (int x2 = 0; x2 < os.w; ++x2) {
                    std::size_t best_i = flat_index(xs, n, c, 2 * y, 2 * x2);
                    float best = x.values()[best_i];
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t i = flat_index(xs, n, c, 2 * y + dy, 2 * x2 + dx);
                            if (x.values()[i] > best) {
                                best = x.values()[i];
                                best_i = i;
                            }
                        }
                    }
                    const std::size_t oi = flat_index(os, n, c, y, x2);
                    out.values()[oi] = best;
                    (*argmax)[oi] = best_i;
                }
            }
        }
    }
    if (setup_grads(tape, out, {&x})) {
        tape.record([=, x = x]() mutable {
            for (std::size_t oi = 0; oi < argmax->size(); ++oi) {
                x.grad()[(*argmax)[oi]] += out.grad()[oi];
            }
        });
    }
    return out;
}

Tensor upsample2(Tape& tape, const Tensor& x) {
    const Shape& xs = x.shape();
    const Shape os{xs.n, xs.c, xs.h * 2, xs.w * 2};
    Tensor out = Tensor::zeros(os);
    for (int n = 0; n < os.n; ++n) {
        for (int c = 0; c < os.c; ++c) {
            for (int y = 0; y < os.h; ++y) {
                for (int x2 = 0; x2 < os.w; ++x2) {
                    out.at(n, c, y, x2) = x.at(n, c, y / 2, x2 / 2);
                }
            }
        }
    }
    if (setup_grads(tape, out, {&x})) {
        tape.record([=, x = x]() mutable {
            for (int n = 0; n < os.n; ++n) {
                for (int c = 0; c < os.c; ++c) {
                    for (int y = 0; y < os.h; ++y) {
                        for (int x2 = 0; x2 < os.w; ++x2) {
                            x.grad()[flat_index(xs, n, c, y / 2, x2 / 2)] +=
                                out.grad()[flat_index(os, n, c, y, x2)];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
        throw ShapeError("concat_channels extents differ: " + as.str() + " vs " + bs.str());
    }
    const Shape os{as.n, as.c + bs.c, as.h, as.w};
    Tensor out = Tensor::zeros(os);
    for (int n = 0; n < os.n; ++n) {
        for (int c = 0; c < os.c; ++c) {
            const bool from_a = c < as.c;
            for (int y = 0; y < os.h; ++y) {
                for (int x = 0; x < os.w; ++x) {
                    out.at(n, c, y, x) =
                        from_a ? a.at(n, c, y, x) : b.at(n, c - as.c, y, x);
                }
            }
        }
    }
    if (setup_grads(tape, out, {&a, &b})) {
        tape.record([=, a = a, b = b]() mutable {
            const bool ga = a.requires_grad();
            const bool gb = b.requires_grad();
            for (int n = 0; n < os.n; ++n) {
                for (int c = 0; c < os.c; ++c) {
                    for (int y = 0; y < os.h; ++y) {
                        for (int x = 0; x < os.w; ++x) {
                            const float go = out.grad()[flat_index(os, n, c, y, x)];
                            if (c < as.c) {
                                if (ga) a.grad()[flat_index(as, n, c, y, x)] += go;
                            } else {
                                if (gb) b.grad()[flat_index(bs, n, c - as.c, y, x)] += go;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError("add shapes differ: " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        out.values()[i] = a.values()[i] + b.values()[i];
    }
    if (setup_grads(tape, out, {&a, &b})) {
        tape.record([=, a = a, b = b]() mutable {
            for (std::size_t i = 0; i < out.values().size(); ++i) {
                const float go = out.grad()[i];
                if (a.requires_grad()) a.grad()[i] += go;
                if (b.requires_grad()) b.grad()[i] += go;
            }
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError("mul shapes differ: " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        out.values()[i] = a.values()[i] * b.values()[i];
    }
    if (setup_grads(tape, out, {&a, &b})) {
        tape.record([=, a = a, b = b]() mutable {
            for (std::size_t i = 0; i < out.values().size(); ++i) {
                const float go = out.grad()[i];
                if (a.requires_grad()) a.grad()[i] += go * b.values()[i];
                if (b.requires_grad()) b.grad()[i] += go * a.values()[i];
            }
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& a, float c) {
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        out.values()[i] = a.values()[i] * c;
    }
    if (setup_grads(tape, out, {&a})) {
        tape.record([=, a = a]() mutable {
            for (std::size_t i = 0; i < out.values().size(); ++i) {
                a.grad()[i] += out.grad()[i] * c;
            }
        });
    }
    return out;
}

Tensor exp(Tape& tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        out.values()[i] = std::exp(a.values()[i]);
    }
    if (setup_grads(tape, out, {&a})) {
        tape.record([=, a = a]() mutable {
            for (std::size_t i = 0; i < out.values().size(); ++i) {
                a.grad()[i] += out.grad()[i] * out.values()[i];
            }
        });
    }
    return out;
}

Tensor sum_all(Tape& tape, const Tensor& a) {
    double acc = 0.0;
    for (float v : a.values()) acc += v;
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (setup_grads(tape, out, {&a})) {
        tape.record([=, a = a]() mutable {
            const float go = out.grad()[0];
            if (go == 0.0f) return;
            for (std::size_t i = 0; i < a.values().size(); ++i) {
                a.grad()[i] += go;
            }
        });
    }
    return out;
}

// ---- optimizer ----------------------------------------------------------------

Parameter::Parameter(Tensor v, bool exempt, std::string n)
    : value(std::move(v)), decay_exempt(exempt), name(std::move(n)) {
    if (!value.defined()) throw ValueError("parameter built from an undefined tensor");
    value.node()->requires_grad = true;
    momentum_buffer.assign(value.values().size(), 0.0f);
}

void sgd_step(const std::vector<Parameter*>& params, float lr, float momentum,
              float weight_decay) {
    for (Parameter* p : params) {
        if (!p->value.has_grad()) {
            throw ValueError("parameter '" + p->name +
                             "' has no gradient; run backward before stepping");
        }
        auto values = p->value.values();
        auto grads = p->value.grad();
        const float wd = p->decay_exempt ? 0.0f : weight_decay;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const float g = grads[i] + wd * values[i];
            p->momentum_buffer[i] = momentum * p->momentum_buffer[i] + g;
            values[i] -= lr * p->momentum_buffer[i];
        }
        p->value.zero_grad();
    }
}

// ---- gradient-check oracle ------------------------------------------------------

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        float eps) {
    if (eps <= 0.0f) throw ValueError("finite_diff_grad eps must be positive");
    Tensor probe = x.detached_copy();
    Tensor grad = Tensor::zeros(x.shape());
    auto pv = probe.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const float saved = pv[i];
        pv[i] = saved + eps;
        const double fp = f(probe);
        pv[i] = saved - eps;
        const double fm = f(probe);
        pv[i] = saved;
        grad.values()[i] = static_cast<float>((fp - fm) / (2.0 * static_cast<double>(eps)));
    }
    return grad;
}

}  // namespace mtlseg
