#pragma once

#include "sxr/rng.hpp"
#include "sxr/tensor.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sxr::nn {

// A learnable tensor with its gradient accumulator. All backward functions
// ACCUMULATE into gradient outputs; callers zero them at step boundaries.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}

    void zero_grad() { grad.fill(0.0); }
};

// He-uniform initialization: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
void init_he_uniform(Tensor& w, int fan_in, RngStream& rng);

// ---------------------------------------------------------------------------
// Dilated causal 1D convolution.
//   in:  C_in x T      w: C_out x C_in x K      b: C_out      out: C_out x T
//   out[c,t] = b[c] + sum_{i,k} w[c,i,k] * in[i, t - (K-1-k)*d]   (zero padded)
// ---------------------------------------------------------------------------
void conv1d_dilated_forward(const Tensor& in, const Tensor& w, const Tensor& b, int dilation,
                            Tensor& out);
void conv1d_dilated_backward(const Tensor& in, const Tensor& w, int dilation,
                             const Tensor& grad_out, Tensor& grad_in, Tensor& grad_w,
                             Tensor& grad_b);

// ---------------------------------------------------------------------------
// 2D convolution, stride 1, zero same-padding on H (kh odd), valid on W.
//   in: C_in x H x W    w: C_out x C_in x kh x kw    out: C_out x H x (W-kw+1)
// ---------------------------------------------------------------------------
void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out);
void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& grad_out, Tensor& grad_in,
                     Tensor& grad_w, Tensor& grad_b);

// ---------------------------------------------------------------------------
// Group normalization over channel groups (statistics span every non-channel
// element of the group). gain/bias are per channel. eps guards variance.
// ---------------------------------------------------------------------------
struct GroupNormCache {
    std::vector<double> mean;
    std::vector<double> inv_std;
};
void group_norm_forward(const Tensor& in, int groups, const Tensor& gain, const Tensor& bias,
                        double eps, Tensor& out, GroupNormCache& cache);
void group_norm_backward(const Tensor& in, int groups, const Tensor& gain,
                         const GroupNormCache& cache, const Tensor& grad_out, Tensor& grad_in,
                         Tensor& grad_gain, Tensor& grad_bias);

// ---------------------------------------------------------------------------
// Pointwise activations.
// ---------------------------------------------------------------------------
void relu_forward(const Tensor& in, Tensor& out);
void relu_backward(const Tensor& in, const Tensor& grad_out, Tensor& grad_in);

void sigmoid_forward(const Tensor& in, Tensor& out);
// takes the forward OUTPUT (sigmoid values), not the input
void sigmoid_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in);

// softmax over axis 0 of a vector (rank 1) or per column of a matrix (rank 2)
void softmax_forward(const Tensor& in, Tensor& out);
void softmax_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in);

// ---------------------------------------------------------------------------
// Max pooling on C x H x W with window ph x pw and stride equal to the
// window; ties break toward the earliest (row-major) index. The argmax cache
// stores flat input indices for backward routing.
// ---------------------------------------------------------------------------
void maxpool_forward(const Tensor& in, int ph, int pw, Tensor& out,
                     std::vector<std::int64_t>& argmax);
void maxpool_backward(const std::vector<std::int64_t>& argmax, const Tensor& grad_out,
                      Tensor& grad_in);

// ---------------------------------------------------------------------------
// Linear layers. Vector form y = Wx + b and column-batched form applying the
// same layer to every column of an N x T input.
// ---------------------------------------------------------------------------
void linear_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out);
void linear_backward(const Tensor& in, const Tensor& w, const Tensor& grad_out, Tensor& grad_in,
                     Tensor& grad_w, Tensor& grad_b);

void linear_cols_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out);
void linear_cols_backward(const Tensor& in, const Tensor& w, const Tensor& grad_out,
                          Tensor& grad_in, Tensor& grad_w, Tensor& grad_b);

// ---------------------------------------------------------------------------
// Dropout masks. Survivors carry 1/(1-p); apply the same mask in forward and
// backward. Channel masks hold one entry per axis-0 channel.
// ---------------------------------------------------------------------------
Tensor dropout_mask(const std::vector<int>& shape, double p, RngStream& rng);
Tensor channel_dropout_mask(int channels, double p, RngStream& rng);
void apply_mask(const Tensor& mask, Tensor& x);         // elementwise, shapes equal
void apply_channel_mask(const Tensor& mask, Tensor& x); // mask: rank 1 over axis 0

// ---------------------------------------------------------------------------
// Losses on logits (log-sum-exp stable). Backward contributions are scaled by
// `grad_scale` and accumulated, so batch averaging is a caller choice.
// ---------------------------------------------------------------------------

// Multi-class: logits rank 1 (K). loss = weight[target] * (lse - logit[target]).
double ce_loss_logits(const Tensor& logits, int target, const Tensor& class_weights,
                      Tensor* grad_logits, double grad_scale = 1.0);

// Binary with one logit per element; targets hold 0/1; weights = (w_neg, w_pos).
// loss = mean over elements of weight[y] * nll.
double bce_loss_logits(const Tensor& logits, const Tensor& targets, const Tensor& class_weights,
                       Tensor* grad_logits, double grad_scale = 1.0);

// ---------------------------------------------------------------------------
// Adam with bias correction over a fixed parameter registry.
// ---------------------------------------------------------------------------
struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    AdamState(std::vector<Param*> params, AdamConfig cfg);

    void step();           // applies param.grad to param.value
    void zero_grads();
    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Param*> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Central finite-difference gradient check: perturbs each listed value by
// +-eps, re-evaluates `loss_fn`, and reports the max relative error against
// the analytic gradients captured beforehand.
// ---------------------------------------------------------------------------
double grad_check_max_rel(const std::function<double()>& loss_fn, std::span<double> values,
                          std::span<const double> analytic_grad, double eps = 1e-4);

} // namespace sxr::nn
