#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtlseg/common.hpp"

namespace mtlseg {

// Logical (N, C, H, W) extent of a tensor. Weight tensors reuse the same
// slots as (Cout, Cin, kH, kW); per-channel biases are stored as (1, C, 1, 1).
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

namespace detail {
struct TensorNode {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until a taped op or backward touches it
    bool requires_grad = false;
};
}  // namespace detail

// Shared handle to a flat row-major (N,C,H,W) float buffer plus an optional
// gradient buffer of the same length. Copies alias the same storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape s, bool requires_grad = false);
    static Tensor full(Shape s, float value, bool requires_grad = false);
    static Tensor from_values(Shape s, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);  // shape (1,1,1,1)

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->shape.numel(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    std::span<float> values() { return node_->data; }
    std::span<const float> values() const { return node_->data; }

    float& at(int n, int c, int h, int w);
    float at(int n, int c, int h, int w) const;

    // Value of a single-element tensor.
    float item() const;

    bool has_grad() const { return node_ && !node_->grad.empty(); }
    std::span<float> grad();
    std::span<const float> grad() const;

    // Allocates a zero gradient buffer if absent. Requires requires_grad.
    void ensure_grad();
    void zero_grad();

    // Deep copy of the values, detached from any gradient bookkeeping.
    Tensor detached_copy() const;

    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

// Ordered record of executed operations. Ops push their backward step as they
// run, so record order is already topological; backward() replays the steps
// in reverse exactly once and then clears the tape.
class Tape {
public:
    Tape() = default;
    explicit Tape(bool recording) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

    // Seeds d(output)/d(output) = 1 and propagates through every recorded
    // step. scalar_output must be a single element and carry a gradient path.
    void backward(Tensor& scalar_output);

private:
    std::vector<std::function<void()>> steps_;
    bool recording_ = true;
};

// ---- differentiable operations ---------------------------------------------

// Cross-correlation with per-output-channel bias. weight is (Cout,Cin,kH,kW),
// bias is (1,Cout,1,1). (H + 2*padding - k) must be divisible by stride.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);

// 2x2 max pooling, stride 2; gradient goes to the first maximum in row-major
// window order. H and W must be even.
Tensor max_pool2(Tape& tape, const Tensor& x);

// Nearest-neighbor 2x upsampling; backward sums the four child gradients.
Tensor upsample2(Tape& tape, const Tensor& x);

// Channel concatenation, a's channels first. N, H, W must agree.
Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise helpers used to compose scalar loss expressions.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, float c);
Tensor exp(Tape& tape, const Tensor& a);

// Sum of all elements, as a (1,1,1,1) tensor.
Tensor sum_all(Tape& tape, const Tensor& a);

// ---- optimizer --------------------------------------------------------------

// A learnable tensor plus its momentum state. decay_exempt parameters skip
// weight decay (used for the uncertainty log-variances).
struct Parameter {
    Tensor value;
    std::vector<float> momentum_buffer;
    bool decay_exempt = false;
    std::string name;

    explicit Parameter(Tensor v, bool exempt = false, std::string n = {});
};

// SGD with momentum and L2 weight decay:
//   g <- grad + weight_decay * value   (decay skipped when exempt)
//   buf <- momentum * buf + g
//   value <- value - lr * buf
// Gradients are zeroed afterwards. A parameter with no gradient buffer is an
// error (backward was never run through it).
void sgd_step(const std::vector<Parameter*>& params, float lr, float momentum,
              float weight_decay);

// ---- gradient-check oracle ---------------------------------------------------

// Central finite differences (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps) per
// element. f receives detached copies and must rebuild its computation.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        float eps);

}  // namespace mtlseg
