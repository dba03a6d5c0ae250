#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mtlseg/loss.hpp"
#include "mtlseg/rng.hpp"

using namespace mtlseg;

namespace {

// Independent oracle: textbook cross-entropy through sigmoid, in double.
double bce_reference(const std::vector<float>& logits, const std::vector<float>& targets) {
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
        const double y = targets[i];
        acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    return acc / static_cast<double>(logits.size());
}

Tensor constant_scalar(float v) {
    return Tensor::scalar(v);
}

}  // namespace

TEST_CASE("bce_loss closed-form values") {
    Tape tape(false);

    // logit 0 is maximally uncertain: loss = ln 2 for either label
    Tensor zero = Tensor::from_values({1, 1, 1, 2}, {0.0f, 0.0f});
    Tensor y01 = Tensor::from_values({1, 1, 1, 2}, {0.0f, 1.0f});
    CHECK(bce_loss(tape, zero, y01).item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    // logit 1 with label 1: softplus(-1) = ln(1 + e^-1)
    Tensor one = Tensor::from_values({1, 1, 1, 1}, {1.0f});
    Tensor y1 = Tensor::from_values({1, 1, 1, 1}, {1.0f});
    CHECK(bce_loss(tape, one, y1).item() == doctest::Approx(0.313261688).epsilon(1e-6));

    // confident and correct: loss near zero; confident and wrong: near |x|
    Tensor big = Tensor::from_values({1, 1, 1, 1}, {20.0f});
    CHECK(bce_loss(tape, big, y1).item() == doctest::Approx(0.0).epsilon(1e-6));
    Tensor y0 = Tensor::from_values({1, 1, 1, 1}, {0.0f});
    CHECK(bce_loss(tape, big, y0).item() == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("bce_loss matches the naive double-precision formula on random data") {
    std::mt19937 g = make_rng(404);
    Tape tape(false);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> logits(24);
        std::vector<float> targets(24);
        for (std::size_t i = 0; i < logits.size(); ++i) {
            logits[i] = uniform_range(g, -6.0f, 6.0f);
            targets[i] = uniform_float(g) < 0.5f ? 0.0f : 1.0f;
        }
        Tensor x = Tensor::from_values({2, 3, 2, 2}, logits);
        Tensor y = Tensor::from_values({2, 3, 2, 2}, targets);
        CHECK(bce_loss(tape, x, y).item() ==
              doctest::Approx(bce_reference(logits, targets)).epsilon(1e-5));
    }
}

TEST_CASE("bce_loss stays finite at extreme logits") {
    Tape tape(false);
    Tensor x = Tensor::from_values({1, 1, 1, 2}, {80.0f, -80.0f});
    Tensor y = Tensor::from_values({1, 1, 1, 2}, {0.0f, 1.0f});
    const float loss = bce_loss(tape, x, y).item();
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(80.0).epsilon(1e-6));
}

TEST_CASE("bce_loss input validation") {
    Tape tape(false);
    Tensor x = Tensor::zeros({1, 1, 2, 2});
    CHECK_THROWS_AS(bce_loss(tape, x, Tensor::zeros({1, 1, 2, 3})), ShapeError);
    Tensor soft = Tensor::from_values({1, 1, 2, 2}, {0.0f, 0.5f, 1.0f, 0.0f});
    CHECK_THROWS_AS(bce_loss(tape, x, soft), ValueError);  // target must be binary
}

TEST_CASE("bce_loss gradient is (sigmoid(x) - y) / N") {
    Tape tape;
    std::mt19937 g = make_rng(405);
    std::vector<float> lv(8);
    std::vector<float> tv(8);
    for (std::size_t i = 0; i < lv.size(); ++i) {
        lv[i] = uniform_range(g, -3.0f, 3.0f);
        tv[i] = uniform_float(g) < 0.5f ? 0.0f : 1.0f;
    }
    Tensor x = Tensor::from_values({1, 2, 2, 2}, lv, true);
    Tensor y = Tensor::from_values({1, 2, 2, 2}, tv);
    Tensor loss = bce_loss(tape, x, y);
    tape.backward(loss);
    for (std::size_t i = 0; i < lv.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(lv[i])));
        CHECK(x.grad()[i] == doctest::Approx((s - tv[i]) / 8.0).epsilon(1e-5));
    }

    // and against finite differences
    Tensor fd = finite_diff_grad(
        [&](const Tensor& xx) {
            Tape t(false);
            return static_cast<double>(bce_loss(t, xx, y).item());
        },
        x, 1e-3f);
    for (std::size_t i = 0; i < lv.size(); ++i) {
        CHECK(x.grad()[i] == doctest::Approx(fd.values()[i]).epsilon(1e-3));
    }
}

TEST_CASE("mae_loss value and subgradient") {
    Tape tape;
    Tensor a = Tensor::from_values({1, 1, 1, 4}, {0.0f, 0.5f, 1.0f, 0.25f}, true);
    Tensor b = Tensor::from_values({1, 1, 1, 4}, {0.5f, 0.5f, 0.2f, 0.45f});
    Tensor loss = mae_loss(tape, a, b);
    CHECK(loss.item() == doctest::Approx((0.5 + 0.0 + 0.8 + 0.2) / 4.0).epsilon(1e-6));

    tape.backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(-0.25));  // a < b: sign -1, /4
    CHECK(a.grad()[1] == 0.0f);                    // equal: subgradient 0
    CHECK(a.grad()[2] == doctest::Approx(0.25));
    CHECK(a.grad()[3] == doctest::Approx(-0.25));

    CHECK_THROWS_AS(mae_loss(tape, a, Tensor::zeros({1, 1, 1, 3})), ShapeError);
}

TEST_CASE("joint_loss_fixed is the exact weighted sum") {
    Tape tape(false);
    std::mt19937 g = make_rng(406);
    const TaskWeights w{1.0f, 1.0f, 0.5f};
    for (int trial = 0; trial < 100; ++trial) {
        const float l1 = uniform_range(g, 0.01f, 1.5f);
        const float l2 = uniform_range(g, 0.01f, 1.5f);
        const float l3 = uniform_range(g, 0.01f, 1.5f);
        const float joint =
            joint_loss_fixed(tape, constant_scalar(l1), constant_scalar(l2), constant_scalar(l3), w)
                .item();
        CHECK(std::abs(joint - (l1 + l2 + 0.5f * l3)) <= 1e-6f);
    }
}

TEST_CASE("joint_loss_fixed validates weights") {
    Tape tape(false);
    Tensor l = constant_scalar(1.0f);
    CHECK_THROWS_AS(joint_loss_fixed(tape, l, l, l, TaskWeights{-0.1f, 1.0f, 1.0f}), ValueError);
    CHECK_THROWS_AS(joint_loss_fixed(tape, l, l, l, TaskWeights{0.0f, 0.0f, 0.0f}), ValueError);
}

TEST_CASE("uncertainty joint loss at s=0 equals the (1,1,0.5) fixed sum") {
    std::mt19937 g = make_rng(407);
    for (int trial = 0; trial < 100; ++trial) {
        const float l1 = uniform_range(g, 0.01f, 1.5f);
        const float l2 = uniform_range(g, 0.01f, 1.5f);
        const float l3 = uniform_range(g, 0.01f, 1.5f);
        Tape tape(false);
        UncertaintyParams u = make_uncertainty_params();
        auto [joint, bd] = joint_loss_uncertainty(tape, constant_scalar(l1), constant_scalar(l2),
                                                  constant_scalar(l3), u);
        CHECK(std::abs(joint.item() - (l1 + l2 + 0.5f * l3)) <= 1e-6f);
        // freshly initialized s = 0: effective weights are exactly (1, 1, 0.5)
        CHECK(bd.effective_weights[0] == 1.0f);
        CHECK(bd.effective_weights[1] == 1.0f);
        CHECK(bd.effective_weights[2] == 0.5f);
        CHECK(bd.regularizer_terms[0] == 0.0f);
    }
}

TEST_CASE("uncertainty_task_term rejects non-finite task losses") {
    Tape tape;
    UncertaintyParams u = make_uncertainty_params();
    Tensor bad = constant_scalar(std::numeric_limits<float>::infinity());
    CHECK_THROWS_AS(uncertainty_task_term(tape, bad, u.s_seg, false), ValueError);
    Tensor nan = constant_scalar(std::numeric_limits<float>::quiet_NaN());
    CHECK_THROWS_AS(uncertainty_task_term(tape, nan, u.s_bnd, false), ValueError);
}

TEST_CASE("uncertainty_task_term gradient wrt s matches the closed form") {
    // d/ds [e^-s L + s/2] = -e^-s L + 1/2 ;  d/ds [0.5 e^-s L + s/2] likewise
    std::mt19937 g = make_rng(408);
    for (int reg = 0; reg <= 1; ++reg) {
        for (int trial = 0; trial < 5; ++trial) {
            const float L = uniform_range(g, 0.05f, 2.0f);
            const float s0 = uniform_range(g, -1.0f, 1.0f);
            UncertaintyParams u = make_uncertainty_params();
            u.s_seg.value.values()[0] = s0;
            Tape tape;
            Tensor term = uncertainty_task_term(tape, constant_scalar(L), u.s_seg, reg == 1);
            tape.backward(term);
            const double factor = reg == 1 ? 0.5 : 1.0;
            const double want = -factor * std::exp(-static_cast<double>(s0)) * L + 0.5;
            CHECK(u.s_seg.value.grad()[0] == doctest::Approx(want).epsilon(1e-4));
        }
    }
}

TEST_CASE("gradient descent on s alone finds the closed-form optimum") {
    // Task losses frozen at (1, 4, 2): optima (ln 2, ln 8, ln 2).
    UncertaintyParams u = make_uncertainty_params();
    const float losses[3] = {1.0f, 4.0f, 2.0f};
    Parameter* ps[3] = {&u.s_seg, &u.s_bnd, &u.s_rec};
    for (int step = 0; step < 5000; ++step) {
        Tape tape;
        Tensor j = uncertainty_task_term(tape, constant_scalar(losses[0]), u.s_seg, false);
        j = add(tape, j, uncertainty_task_term(tape, constant_scalar(losses[1]), u.s_bnd, false));
        j = add(tape, j, uncertainty_task_term(tape, constant_scalar(losses[2]), u.s_rec, true));
        tape.backward(j);
        sgd_step({ps[0], ps[1], ps[2]}, 0.1f, 0.0f, 0.0f);
    }
    CHECK(u.s_seg.value.item() == doctest::Approx(std::log(2.0)).epsilon(1e-2));
    CHECK(u.s_bnd.value.item() == doctest::Approx(std::log(8.0)).epsilon(1e-2));
    CHECK(u.s_rec.value.item() == doctest::Approx(std::log(2.0)).epsilon(1e-2));
}

TEST_CASE("optimal_s_for_constant_loss closed forms") {
    CHECK(optimal_s_for_constant_loss(1.0, false) == doctest::Approx(std::log(2.0)));
    CHECK(optimal_s_for_constant_loss(4.0, false) == doctest::Approx(std::log(8.0)));
    CHECK(optimal_s_for_constant_loss(2.0, true) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(optimal_s_for_constant_loss(0.0, false), ValueError);
    CHECK_THROWS_AS(optimal_s_for_constant_loss(-1.0, true), ValueError);
}

TEST_CASE("noisier tasks converge to weaker effective weights") {
    // At the optimum e^-s = 1/(2L) for classification: weight halves as the
    // constant loss doubles, so the ordering is strictly monotone.
    const double w1 = std::exp(-optimal_s_for_constant_loss(0.5, false));
    const double w2 = std::exp(-optimal_s_for_constant_loss(1.0, false));
    const double w3 = std::exp(-optimal_s_for_constant_loss(2.0, false));
    CHECK(w1 > w2);
    CHECK(w2 > w3);
    CHECK(w2 == doctest::Approx(0.5));
}

TEST_CASE("loss CSV serialization") {
    CHECK(loss_csv_header() ==
          "step,l_seg,l_bnd,l_rec,l_joint,w_seg_eff,w_bnd_eff,w_rec_eff,s_seg,s_bnd,s_rec");

    LossBreakdown b;
    b.l_seg = 0.5f;
    b.l_bnd = 0.25f;
    b.l_rec = 0.125f;
    b.l_joint = 0.875f;
    b.effective_weights = {1.0f, 1.0f, 0.5f};
    b.s_values = {0.0f, 0.0f, 0.0f};
    CHECK(loss_csv_row(7, b) == "7,0.5,0.25,0.125,0.875,1,1,0.5,0,0,0");
}
