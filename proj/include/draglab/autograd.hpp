#pragma once

#include <draglab/tensor.hpp>

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace draglab::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    /// Frozen parameters enter tapes as constants and are skipped by the optimizer.
    bool trainable = true;
};

/// Owns model parameters in registration order. Addresses are stable.
class ParameterStore {
public:
    Parameter& add(std::string name, Shape shape);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;

    std::vector<std::unique_ptr<Parameter>>& params() noexcept { return params_; }
    const std::vector<std::unique_ptr<Parameter>>& params() const noexcept { return params_; }
    std::size_t numel() const;
    void zero_grad();

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

struct Node {
    Tensor value;
    /// Set for parameter leaves so the tape reads weights in place.
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Node&)> backward;

    const Tensor& val() const noexcept { return ref ? *ref : value; }
    /// Gradient buffer, zero-initialized on first use.
    Tensor& grad_buffer();
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, Node* node) : tape_(tape), node_(node) {}

    const Tensor& value() const { return node_->val(); }
    const Shape& shape() const { return node_->val().shape(); }
    int dim(std::size_t axis) const { return node_->val().dim(axis); }
    bool requires_grad() const { return node_->requires_grad; }
    /// Gradient after Tape::backward; empty if nothing flowed here.
    const Tensor& grad() const { return node_->grad; }
    Tape& tape() const { return *tape_; }
    Node* node() const { return node_; }
    explicit operator bool() const noexcept { return node_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    Node* node_ = nullptr;
};

/// Reverse-mode tape. Nodes are created in topological order, so backward
/// walks them in reverse. A non-recording tape evaluates without keeping
/// backward closures.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const noexcept { return recording_; }

    Var constant(Tensor value);
    /// Leaf that requires grad; gradients land in the Var itself.
    Var variable(Tensor value);
    Var param(Parameter& p);
    Var make(Tensor value, bool requires_grad, std::function<void(Node&)> backward);

    /// Seeds d(out)/d(out) = 1 for a single-element output and propagates.
    void backward(const Var& out);

private:
    bool recording_;
    std::deque<Node> nodes_;
    std::unordered_map<Parameter*, Node*> params_;
};

// Activation layout: [N, H, W, C] with N = clips * frames_per_clip.

/// Spatial convolution applied per frame. Weight [K, K, Cin, Cout], bias [Cout],
/// padding K/2, output size ceil-style for stride 2.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride = 1);
/// Convolution along the frame axis within each clip of `clip_length` frames,
/// zero padded. Weight [K, Cin, Cout], bias [Cout].
Var temporal_conv(const Var& x, const Var& weight, const Var& bias, int clip_length, int dilation = 1);
/// x [B, Cin] times weight [Cin, Cout] plus bias.
Var linear(const Var& x, const Var& weight, const Var& bias);
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps = 1e-5);
Var silu(const Var& x);
Var add(const Var& a, const Var& b);
/// Adds per-clip channel vector e [B, C] to every frame and pixel of x.
Var add_clip_bias(const Var& x, const Var& e, int clip_length);
Var concat_channels(const Var& a, const Var& b);
/// Nearest-neighbour resize to (height, width); source index floor(y * H / height).
Var upsample_nearest(const Var& x, int height, int width);
/// Space-to-depth: [N, H, W, C] -> [N, H/f, W/f, f*f*C].
Var pixel_unshuffle(const Var& x, int factor);
/// Zero-pads bottom and right to (height, width).
Var pad_spatial(const Var& x, int height, int width);
Var scale(const Var& x, real factor);
/// Scalar sum(x * weights); weights are a constant tensor of the same size.
Var weighted_sum(const Var& x, const Tensor& weights);

/// C = alpha * op(A) * op(B) + beta * C, row-major.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha, const real* a, int lda, const real* b,
          int ldb, real beta, real* c, int ldc);

}  // namespace draglab::nn
