#include "mtlseg/loss.hpp"

#include <cmath>

#include "mtlseg/common.hpp"

namespace mtlseg {

UncertaintyParams make_uncertainty_params() {
    return UncertaintyParams{
        Parameter(Tensor::scalar(0.0f), /*exempt=*/true, "s_seg"),
        Parameter(Tensor::scalar(0.0f), /*exempt=*/true, "s_bnd"),
        Parameter(Tensor::scalar(0.0f), /*exempt=*/true, "s_rec"),
    };
}

Tensor bce_loss(Tape& tape, const Tensor& logits, const Tensor& target) {
    if (!(logits.shape() == target.shape())) {
        throw ShapeError("bce_loss shapes differ: " + logits.shape().str() + " vs " +
                         target.shape().str());
    }
    const auto xv = logits.values();
    const auto yv = target.values();
    for (std::size_t i = 0; i < yv.size(); ++i) {
        if (yv[i] != 0.0f && yv[i] != 1.0f) {
            throw ValueError("bce_loss target must be binary, found " +
                             std::to_string(yv[i]));
        }
    }
    const double inv_n = 1.0 / static_cast<double>(xv.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const float x = xv[i];
        acc += static_cast<double>(std::max(x, 0.0f)) - static_cast<double>(x) * yv[i] +
               std::log1p(std::exp(-std::abs(static_cast<double>(x))));
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc * inv_n));

    if (tape.recording() && logits.requires_grad()) {
        out.node()->requires_grad = true;
        out.ensure_grad();
        const_cast<Tensor&>(logits).ensure_grad();
        tape.record([=, logits = logits]() mutable {
            const float go = out.grad()[0];
            if (go == 0.0f) return;
            const float w = go * static_cast<float>(inv_n);
            for (std::size_t i = 0; i < xv.size(); ++i) {
                const float x = logits.values()[i];
                float p;
                if (x >= 0.0f) {
                    p = 1.0f / (1.0f + std::exp(-x));
                } else {
                    const float e = std::exp(x);
                    p = e / (1.0f + e);
                }
                logits.grad()[i] += w * (p - target.values()[i]);
            }
        });
    }
    return out;
}

Tensor mae_loss(Tape& tape, const Tensor& recon, const Tensor& image) {
    if (!(recon.shape() == image.shape())) {
        throw ShapeError("mae_loss shapes differ: " + recon.shape().str() + " vs " +
                         image.shape().str());
    }
    const auto av = recon.values();
    const auto bv = image.values();
    const double inv_n = 1.0 / static_cast<double>(av.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        acc += std::abs(static_cast<double>(av[i]) - bv[i]);
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc * inv_n));

    if (tape.recording() && recon.requires_grad()) {
        out.node()->requires_grad = true;
        out.ensure_grad();
        const_cast<Tensor&>(recon).ensure_grad();
        tape.record([=, recon = recon]() mutable {
            const float go = out.grad()[0];
            if (go == 0.0f) return;
            const float w = go * static_cast<float>(inv_n);
            for (std::size_t i = 0; i < av.size(); ++i) {
                const float d = recon.values()[i] - image.values()[i];
                if (d > 0.0f) {
                    recon.grad()[i] += w;
                } else if (d < 0.0f) {
                    recon.grad()[i] -= w;
                }
            }
        });
    }
    return out;
}

Tensor joint_loss_fixed(Tape& tape, const Tensor& l_seg, const Tensor& l_bnd,
                        const Tensor& l_rec, const TaskWeights& w) {
    if (w.seg < 0.0f || w.bnd < 0.0f || w.rec < 0.0f) {
        throw ValueError("task weights must be non-negative");
    }
    if (w.seg == 0.0f && w.bnd == 0.0f && w.rec == 0.0f) {
        throw ValueError("at least one task weight must be positive");
    }
    Tensor acc = add(tape, scale(tape, l_seg, w.seg), scale(tape, l_bnd, w.bnd));
    return add(tape, acc, scale(tape, l_rec, w.rec));
}

Tensor uncertainty_task_term(Tape& tape, const Tensor& task_loss, Parameter& s,
                             bool is_regression) {
    if (!std::isfinite(task_loss.item())) {
        throw ValueError("non-finite task loss fed to uncertainty weighting");
    }
    Tensor weight = exp(tape, scale(tape, s.value, -1.0f));  // e^(-s)
    Tensor weighted = mul(tape, weight, task_loss);
    if (is_regression) {
        weighted = scale(tape, weighted, 0.5f);
    }
    return add(tape, weighted, scale(tape, s.value, 0.5f));
}

std::pair<Tensor, LossBreakdown> joint_loss_uncertainty(Tape& tape, const Tensor& l_seg,
                                                        const Tensor& l_bnd,
                                                        const Tensor& l_rec,
                                                        UncertaintyParams& u) {
    Tensor t_seg = uncertainty_task_term(tape, l_seg, u.s_seg, false);
    Tensor t_bnd = uncertainty_task_term(tape, l_bnd, u.s_bnd, false);
    Tensor t_rec = uncertainty_task_term(tape, l_rec, u.s_rec, true);
    Tensor joint = add(tape, add(tape, t_seg, t_bnd), t_rec);

    LossBreakdown b;
    b.l_seg = l_seg.item();
    b.l_bnd = l_bnd.item();
    b.l_rec = l_rec.item();
    b.l_joint = joint.item();
    b.s_values = {u.s_seg.value.item(), u.s_bnd.value.item(), u.s_rec.value.item()};
    b.effective_weights = {std::exp(-b.s_values[0]), std::exp(-b.s_values[1]),
                           0.5f * std::exp(-b.s_values[2])};
    b.regularizer_terms = {0.5f * b.s_values[0], 0.5f * b.s_values[1],
                           0.5f * b.s_values[2]};
    return {joint, b};
}

double optimal_s_for_constant_loss(double loss_value, bool is_regression) {
    if (loss_value <= 0.0) {
        throw ValueError("constant loss must be positive, got " + str_g9(loss_value));
    }
    return is_regression ? std::log(loss_value) : std::log(2.0 * loss_value);
}

std::string loss_csv_header() {
    return "step,l_seg,l_bnd,l_rec,l_joint,w_seg_eff,w_bnd_eff,w_rec_eff,s_seg,s_bnd,"
           "s_rec";
}

std::string loss_csv_row(long step, const LossBreakdown& b) {
    std::string row = std::to_string(step);
    const float cols[] = {b.l_seg,
                          b.l_bnd,
                          b.l_rec,
                          b.l_joint,
                          b.effective_weights[0],
                          b.effective_weights[1],
                          b.effective_weights[2],
                          b.s_values[0],
                          b.s_values[1],
                          b.s_values[2]};
    for (float v : cols) {
        row += ',';
        row += str_g9(v);
    }
    return row;
}

}  // namespace mtlseg
