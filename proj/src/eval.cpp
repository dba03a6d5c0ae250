#include "mtlseg/eval.hpp"

#include <string>

#include "mtlseg/common.hpp"

namespace mtlseg {

namespace {

void require_binary(const Tensor& mask, const char* what) {
    for (float v : mask.values()) {
        if (v != 0.0f && v != 1.0f) {
            throw ValueError(std::string(what) + " must be strictly binary, found " +
                             std::to_string(v));
        }
    }
}

}  // namespace

Tensor threshold(const Tensor& prob_map, float t) {
    if (!(t > 0.0f && t < 1.0f)) {
        throw ValueError("threshold must lie in (0,1), got " + str_g9(t));
    }
    for (float v : prob_map.values()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw ValueError("probability map value " + str_g9(v) + " outside [0,1]");
        }
    }
    Tensor out = Tensor::zeros(prob_map.shape());
    const auto pv = prob_map.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
        ov[i] = pv[i] >= t ? 1.0f : 0.0f;
    }
    return out;
}

ConfusionCounts confusion(const Tensor& pred, const Tensor& gt) {
    if (!(pred.shape() == gt.shape())) {
        throw ShapeError("confusion shapes differ: " + pred.shape().str() + " vs " +
                         gt.shape().str());
    }
    require_binary(pred, "prediction");
    require_binary(gt, "ground truth");

    ConfusionCounts c;
    const auto pv = pred.values();
    const auto gv = gt.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] == 1.0f) {
            gv[i] == 1.0f ? ++c.tp : ++c.fp;
        } else {
            gv[i] == 1.0f ? ++c.fn : ++c.tn;
        }
    }
    return c;
}

MetricsReport metrics(const ConfusionCounts& counts) {
    if (counts.tp < 0 || counts.fp < 0 || counts.fn < 0 || counts.tn < 0) {
        throw ValueError("confusion counts must be non-negative");
    }
    MetricsReport r;
    r.counts = counts;
    const std::int64_t denom = counts.tp + counts.fp + counts.fn;
    if (denom == 0) {
        r.iou = 1.0;  // no positives anywhere: perfect agreement on absence
        r.f1 = 1.0;
    } else {
        r.iou = static_cast<double>(counts.tp) / static_cast<double>(denom);
        r.f1 = static_cast<double>(2 * counts.tp) /
               static_cast<double>(2 * counts.tp + counts.fp + counts.fn);
    }
    return r;
}

namespace {

enum class Morph { kErode, kDilate };

Tensor morph(const Tensor& mask, int se_radius, Morph op) {
    if (se_radius < 0) throw ValueError("structuring element radius must be >= 0");
    require_binary(mask, "morphology input");
    const Shape& s = mask.shape();

    Tensor out = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    // Out-of-image pixels count as 0 for both operations.
                    bool all_one = true;
                    bool any_one = false;
                    for (int dy = -se_radius; dy <= se_radius; ++dy) {
                        for (int dx = -se_radius; dx <= se_radius; ++dx) {
                            const int yy = y + dy;
                            const int xx = x + dx;
                            const bool on = yy >= 0 && yy < s.h && xx >= 0 && xx < s.w &&
                                            mask.at(n, c, yy, xx) == 1.0f;
                            all_one = all_one && on;
                            any_one = any_one || on;
                        }
                    }
                    out.at(n, c, y, x) = (op == Morph::kErode ? all_one : any_one) ? 1.0f : 0.0f;
                }
            }
        }
    }
    return out;
}

}  // namespace

Tensor erode(const Tensor& mask, int se_radius) { return morph(mask, se_radius, Morph::kErode); }

Tensor dilate(const Tensor& mask, int se_radius) {
    return morph(mask, se_radius, Morph::kDilate);
}

Tensor opening(const Tensor& mask, int se_radius) {
    return dilate(erode(mask, se_radius), se_radius);
}

Tensor fuse_postprocess(const Tensor& seg_mask, const Tensor& bnd_mask, int se_radius) {
    if (!(seg_mask.shape() == bnd_mask.shape())) {
        throw ShapeError("fusion shapes differ: " + seg_mask.shape().str() + " vs " +
                         bnd_mask.shape().str());
    }
    require_binary(seg_mask, "seg mask");
    require_binary(bnd_mask, "bnd mask");

    Tensor fused = Tensor::zeros(seg_mask.shape());
    const auto sv = seg_mask.values();
    const auto bv = bnd_mask.values();
    auto fv = fused.values();
    for (std::size_t i = 0; i < sv.size(); ++i) {
        fv[i] = (sv[i] == 1.0f && bv[i] == 0.0f) ? 1.0f : 0.0f;
    }
    return opening(fused, se_radius);
}

}  // namespace mtlseg
