#pragma once

#include <array>
#include <string>
#include <utility>

#include "mtlseg/tensor.hpp"

namespace mtlseg {

// Hand-chosen task weights for the fixed joint loss.
struct TaskWeights {
    float seg = 1.0f;
    float bnd = 1.0f;
    float rec = 1.0f;
};

// Learnable log-variances s_t = log(sigma_t^2), one per task. They carry no
// weight decay: decay would pull every sigma toward 1 regardless of how noisy
// the task actually is.
struct UncertaintyParams {
    Parameter s_seg;
    Parameter s_bnd;
    Parameter s_rec;
};

UncertaintyParams make_uncertainty_params();

// Everything a training step logs about its loss, one CSV row per step.
struct LossBreakdown {
    float l_seg = 0.0f;
    float l_bnd = 0.0f;
    float l_rec = 0.0f;
    float l_joint = 0.0f;
    std::array<float, 3> effective_weights{0.0f, 0.0f, 0.0f};  // seg, bnd, rec
    std::array<float, 3> regularizer_terms{0.0f, 0.0f, 0.0f};
    std::array<float, 3> s_values{0.0f, 0.0f, 0.0f};
};

// Mean binary cross-entropy from logits, computed in the overflow-safe form
// max(x,0) - x*y + log(1 + e^(-|x|)). Targets must be exactly {0,1}.
Tensor bce_loss(Tape& tape, const Tensor& logits, const Tensor& target);

// Mean absolute error; the subgradient at zero difference is 0.
Tensor mae_loss(Tape& tape, const Tensor& recon, const Tensor& image);

// w_seg*l_seg + w_bnd*l_bnd + w_rec*l_rec. Weights must be non-negative and
// not all zero.
Tensor joint_loss_fixed(Tape& tape, const Tensor& l_seg, const Tensor& l_bnd,
                        const Tensor& l_rec, const TaskWeights& w);

// One task's share of the uncertainty-weighted joint loss:
//   classification: e^(-s) * L + s/2
//   regression:     0.5 * e^(-s) * L + s/2
// Gradients flow into both L's inputs and s.
Tensor uncertainty_task_term(Tape& tape, const Tensor& task_loss, Parameter& s,
                             bool is_regression);

// Full three-task uncertainty-weighted joint loss (seg and bnd treated as
// classification, rec as regression) plus the logged breakdown. Non-finite
// task losses are rejected so training can abort with a readable report.
std::pair<Tensor, LossBreakdown> joint_loss_uncertainty(Tape& tape, const Tensor& l_seg,
                                                        const Tensor& l_bnd,
                                                        const Tensor& l_rec,
                                                        UncertaintyParams& u);

// Where gradient descent on s alone settles when the task loss is a positive
// constant L: ln(2L) for classification terms, ln(L) for regression terms.
double optimal_s_for_constant_loss(double loss_value, bool is_regression);

// Per-step loss log serialization.
std::string loss_csv_header();
std::string loss_csv_row(long step, const LossBreakdown& b);

}  // namespace mtlseg
