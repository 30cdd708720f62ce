#include "sxr/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sxr::nn {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("nn: ") + what);
}

void ensure_shape(Tensor& t, std::vector<int> shape) {
    if (t.shape() != shape) t = Tensor(std::move(shape));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

void init_he_uniform(Tensor& w, int fan_in, RngStream& rng) {
    require(fan_in > 0, "he init needs positive fan-in");
    const double bound = std::sqrt(6.0 / fan_in);
    for (std::int64_t i = 0; i < w.size(); ++i) w.flat(i) = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// conv1d (dilated, causal)
// ---------------------------------------------------------------------------

void conv1d_dilated_forward(const Tensor& in, const Tensor& w, const Tensor& b, int dilation,
                            Tensor& out) {
    require(in.rank() == 2 && w.rank() == 3 && b.rank() == 1, "conv1d: bad ranks");
    require(w.dim(1) == in.dim(0), "conv1d: C_in mismatch");
    require(b.dim(0) == w.dim(0), "conv1d: bias size mismatch");
    require(dilation >= 1 && w.dim(2) >= 1, "conv1d: bad kernel/dilation");

    const int c_in = in.dim(0), T = in.dim(1), c_out = w.dim(0), K = w.dim(2);
    ensure_shape(out, {c_out, T});

    for (int c = 0; c < c_out; ++c) {
        double* orow = out.data() + static_cast<std::int64_t>(c) * T;
        const double bias = b(c);
        for (int t = 0; t < T; ++t) orow[t] = bias;
        for (int i = 0; i < c_in; ++i) {
            const double* irow = in.data() + static_cast<std::int64_t>(i) * T;
            for (int k = 0; k < K; ++k) {
                const int off = (K - 1 - k) * dilation;
                if (off >= T) continue;
                const double wv = w(c, i, k);
                for (int t = off; t < T; ++t) orow[t] += wv * irow[t - off];
            }
        }
    }
}

void conv1d_dilated_backward(const Tensor& in, const Tensor& w, int dilation,
                             const Tensor& grad_out, Tensor& grad_in, Tensor& grad_w,
                             Tensor& grad_b) {
    const int c_in = in.dim(0), T = in.dim(1), c_out = w.dim(0), K = w.dim(2);
    require(grad_out.rank() == 2 && grad_out.dim(0) == c_out && grad_out.dim(1) == T,
            "conv1d backward: grad_out shape");
    require(grad_in.same_shape(in) && grad_w.same_shape(w) && grad_b.rank() == 1 &&
                grad_b.dim(0) == c_out,
            "conv1d backward: grad shapes");

    for (int c = 0; c < c_out; ++c) {
        const double* grow = grad_out.data() + static_cast<std::int64_t>(c) * T;
        double gb = 0.0;
        for (int t = 0; t < T; ++t) gb += grow[t];
        grad_b(c) += gb;
        for (int i = 0; i < c_in; ++i) {
            const double* irow = in.data() + static_cast<std::int64_t>(i) * T;
            double* girow = grad_in.data() + static_cast<std::int64_t>(i) * T;
            for (int k = 0; k < K; ++k) {
                const int off = (K - 1 - k) * dilation;
                if (off >= T) continue;
                const double wv = w(c, i, k);
                double gw = 0.0;
                for (int t = off; t < T; ++t) {
                    gw += grow[t] * irow[t - off];
                    girow[t - off] += wv * grow[t];
                }
                grad_w(c, i, k) += gw;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// conv2d (same-pad H, valid W)
// ---------------------------------------------------------------------------

void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out) {
    require(in.rank() == 3 && w.rank() == 4 && b.rank() == 1, "conv2d: bad ranks");
    require(w.dim(1) == in.dim(0), "conv2d: C_in mismatch");
    require(b.dim(0) == w.dim(0), "conv2d: bias size mismatch");
    require(w.dim(2) % 2 == 1, "conv2d: kh must be odd for same padding");
    require(w.dim(3) <= in.dim(2), "conv2d: kw exceeds W");

    const int c_in = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int pad = (kh - 1) / 2, w_out = W - kw + 1;
    ensure_shape(out, {c_out, H, w_out});

    for (int c = 0; c < c_out; ++c) {
        double* oplane = out.data() + static_cast<std::int64_t>(c) * H * w_out;
        const double bias = b(c);
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * w_out; ++i) oplane[i] = bias;
        for (int i = 0; i < c_in; ++i) {
            const double* iplane = in.data() + static_cast<std::int64_t>(i) * H * W;
            for (int r = 0; r < kh; ++r) {
                const int h_lo = std::max(0, pad - r);
                const int h_hi = std::min(H, H + pad - r);
                for (int s = 0; s < kw; ++s) {
                    const double wv = w(c, i, r, s);
                    for (int h = h_lo; h < h_hi; ++h) {
                        const double* irow = iplane + static_cast<std::int64_t>(h + r - pad) * W + s;
                        double* orow = oplane + static_cast<std::int64_t>(h) * w_out;
                        for (int x = 0; x < w_out; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& grad_out, Tensor& grad_in,
                     Tensor& grad_w, Tensor& grad_b) {
    const int c_in = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int pad = (kh - 1) / 2, w_out = W - kw + 1;
    require(grad_out.rank() == 3 && grad_out.dim(0) == c_out && grad_out.dim(1) == H &&
                grad_out.dim(2) == w_out,
            "conv2d backward: grad_out shape");
    require(grad_in.same_shape(in) && grad_w.same_shape(w) && grad_b.dim(0) == c_out,
            "conv2d backward: grad shapes");

    for (int c = 0; c < c_out; ++c) {
        const double* gplane = grad_out.data() + static_cast<std::int64_t>(c) * H * w_out;
        double gb = 0.0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * w_out; ++i) gb += gplane[i];
        grad_b(c) += gb;
        for (int i = 0; i < c_in; ++i) {
            const double* iplane = in.data() + static_cast<std::int64_t>(i) * H * W;
            double* giplane = grad_in.data() + static_cast<std::int64_t>(i) * H * W;
            for (int r = 0; r < kh; ++r) {
                const int h_lo = std::max(0, pad - r);
                const int h_hi = std::min(H, H + pad - r);
                for (int s = 0; s < kw; ++s) {
                    const double wv = w(c, i, r, s);
                    double gw = 0.0;
                    for (int h = h_lo; h < h_hi; ++h) {
                        const double* irow = iplane + static_cast<std::int64_t>(h + r - pad) * W + s;
                        double* girow = giplane + static_cast<std::int64_t>(h + r - pad) * W + s;
                        const double* grow = gplane + static_cast<std::int64_t>(h) * w_out;
                        for (int x = 0; x < w_out; ++x) {
                            gw += grow[x] * irow[x];
                            girow[x] += wv * grow[x];
                        }
                    }
                    grad_w(c, i, r, s) += gw;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// group norm
// ---------------------------------------------------------------------------

void group_norm_forward(const Tensor& in, int groups, const Tensor& gain, const Tensor& bias,
                        double eps, Tensor& out, GroupNormCache& cache) {
    require(in.rank() >= 2, "group_norm: rank must be >= 2");
    const int C = in.dim(0);
    require(groups >= 1 && C % groups == 0, "group_norm: channels not divisible by groups");
    require(gain.rank() == 1 && gain.dim(0) == C && bias.rank() == 1 && bias.dim(0) == C,
            "group_norm: gain/bias size");

    const std::int64_t M = in.size() / C;      // elements per channel
    const int cs = C / groups;                 // channels per group
    const std::int64_t N = cs * M;             // elements per group
    ensure_shape(out, in.shape());
    cache.mean.assign(static_cast<std::size_t>(groups), 0.0);
    cache.inv_std.assign(static_cast<std::size_t>(groups), 0.0);

    for (int g = 0; g < groups; ++g) {
        const double* gin = in.data() + static_cast<std::int64_t>(g) * N;
        double sum = 0.0, sum2 = 0.0;
        for (std::int64_t i = 0; i < N; ++i) {
            sum += gin[i];
            sum2 += gin[i] * gin[i];
        }
        const double mean = sum / static_cast<double>(N);
        const double var = sum2 / static_cast<double>(N) - mean * mean;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        cache.mean[static_cast<std::size_t>(g)] = mean;
        cache.inv_std[static_cast<std::size_t>(g)] = inv_std;

        for (int c = g * cs; c < (g + 1) * cs; ++c) {
            const double* irow = in.data() + static_cast<std::int64_t>(c) * M;
            double* orow = out.data() + static_cast<std::int64_t>(c) * M;
            const double a = gain(c) * inv_std;
            const double b = bias(c) - gain(c) * inv_std * mean;
            for (std::int64_t i = 0; i < M; ++i) orow[i] = a * irow[i] + b;
        }
    }
}

void group_norm_backward(const Tensor& in, int groups, const Tensor& gain,
                         const GroupNormCache& cache, const Tensor& grad_out, Tensor& grad_in,
                         Tensor& grad_gain, Tensor& grad_bias) {
    const int C = in.dim(0);
    const std::int64_t M = in.size() / C;
    const int cs = C / groups;
    const std::int64_t N = cs * M;
    require(grad_out.same_shape(in) && grad_in.same_shape(in), "group_norm backward: shapes");
    require(grad_gain.dim(0) == C && grad_bias.dim(0) == C, "group_norm backward: gain/bias");

    for (int g = 0; g < groups; ++g) {
        const double mean = cache.mean[static_cast<std::size_t>(g)];
        const double inv_std = cache.inv_std[static_cast<std::size_t>(g)];

        // per-group reductions over d_xhat = grad_out * gain
        double sum1 = 0.0, sum2 = 0.0;
        for (int c = g * cs; c < (g + 1) * cs; ++c) {
            const double* irow = in.data() + static_cast<std::int64_t>(c) * M;
            const double* grow = grad_out.data() + static_cast<std::int64_t>(c) * M;
            const double gn = gain(c);
            double gg = 0.0, gb = 0.0;
            for (std::int64_t i = 0; i < M; ++i) {
                const double xhat = (irow[i] - mean) * inv_std;
                const double dxh = grow[i] * gn;
                sum1 += dxh;
                sum2 += dxh * xhat;
                gg += grow[i] * xhat;
                gb += grow[i];
            }
            grad_gain(c) += gg;
            grad_bias(c) += gb;
        }
        const double invN = 1.0 / static_cast<double>(N);
        for (int c = g * cs; c < (g + 1) * cs; ++c) {
            const double* irow = in.data() + static_cast<std::int64_t>(c) * M;
            const double* grow = grad_out.data() + static_cast<std::int64_t>(c) * M;
            double* girow = grad_in.data() + static_cast<std::int64_t>(c) * M;
            const double gn = gain(c);
            for (std::int64_t i = 0; i < M; ++i) {
                const double xhat = (irow[i] - mean) * inv_std;
                const double dxh = grow[i] * gn;
                girow[i] += inv_std * (dxh - invN * (sum1 + xhat * sum2));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

void relu_forward(const Tensor& in, Tensor& out) {
    ensure_shape(out, in.shape());
    for (std::int64_t i = 0; i < in.size(); ++i) out.flat(i) = in.flat(i) > 0.0 ? in.flat(i) : 0.0;
}

void relu_backward(const Tensor& in, const Tensor& grad_out, Tensor& grad_in) {
    require(grad_out.same_shape(in) && grad_in.same_shape(in), "relu backward: shapes");
    for (std::int64_t i = 0; i < in.size(); ++i)
        if (in.flat(i) > 0.0) grad_in.flat(i) += grad_out.flat(i);
}

void sigmoid_forward(const Tensor& in, Tensor& out) {
    ensure_shape(out, in.shape());
    for (std::int64_t i = 0; i < in.size(); ++i) out.flat(i) = sigmoid(in.flat(i));
}

void sigmoid_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in) {
    require(grad_out.same_shape(out) && grad_in.same_shape(out), "sigmoid backward: shapes");
    for (std::int64_t i = 0; i < out.size(); ++i)
        grad_in.flat(i) += grad_out.flat(i) * out.flat(i) * (1.0 - out.flat(i));
}

namespace {

// softmax over rows of one column (stride = number of columns)
void softmax_slice(const double* x, double* y, int n, std::int64_t stride) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i * stride]);
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
        y[i * stride] = std::exp(x[i * stride] - mx);
        denom += y[i * stride];
    }
    for (int i = 0; i < n; ++i) y[i * stride] /= denom;
}

} // namespace

void softmax_forward(const Tensor& in, Tensor& out) {
    require(in.rank() == 1 || in.rank() == 2, "softmax: rank must be 1 or 2");
    ensure_shape(out, in.shape());
    if (in.rank() == 1) {
        softmax_slice(in.data(), out.data(), in.dim(0), 1);
        return;
    }
    const int rows = in.dim(0), cols = in.dim(1);
    for (int t = 0; t < cols; ++t) softmax_slice(in.data() + t, out.data() + t, rows, cols);
}

void softmax_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in) {
    require(grad_out.same_shape(out) && grad_in.same_shape(out), "softmax backward: shapes");
    const int rows = out.dim(0);
    const int cols = out.rank() == 2 ? out.dim(1) : 1;
    for (int t = 0; t < cols; ++t) {
        const double* y = out.data() + t;
        const double* gy = grad_out.data() + t;
        double* gx = grad_in.data() + t;
        double dot = 0.0;
        for (int i = 0; i < rows; ++i) dot += y[i * cols] * gy[i * cols];
        for (int i = 0; i < rows; ++i) gx[i * cols] += y[i * cols] * (gy[i * cols] - dot);
    }
}

// ---------------------------------------------------------------------------
// max pooling
// ---------------------------------------------------------------------------

void maxpool_forward(const Tensor& in, int ph, int pw, Tensor& out,
                     std::vector<std::int64_t>& argmax) {
    require(in.rank() == 3, "maxpool: rank must be 3");
    require(ph >= 1 && pw >= 1, "maxpool: bad window");
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    require(H % ph == 0 && W % pw == 0, "maxpool: dims not divisible by window");
    const int oh = H / ph, ow = W / pw;
    ensure_shape(out, {C, oh, ow});
    argmax.assign(static_cast<std::size_t>(out.size()), 0);

    std::int64_t o = 0;
    for (int c = 0; c < C; ++c) {
        const double* plane = in.data() + static_cast<std::int64_t>(c) * H * W;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x, ++o) {
                std::int64_t best_idx = static_cast<std::int64_t>(y) * ph * W + x * pw;
                double best = plane[best_idx];
                for (int r = 0; r < ph; ++r)
                    for (int s = 0; s < pw; ++s) {
                        const std::int64_t idx =
                            (static_cast<std::int64_t>(y) * ph + r) * W + x * pw + s;
                        if (plane[idx] > best) { // strict: ties keep the earliest
                            best = plane[idx];
                            best_idx = idx;
                        }
                    }
                out.flat(o) = best;
                argmax[static_cast<std::size_t>(o)] =
                    static_cast<std::int64_t>(c) * H * W + best_idx;
            }
    }
}

void maxpool_backward(const std::vector<std::int64_t>& argmax, const Tensor& grad_out,
                      Tensor& grad_in) {
    require(static_cast<std::int64_t>(argmax.size()) == grad_out.size(),
            "maxpool backward: argmax size");
    for (std::int64_t i = 0; i < grad_out.size(); ++i)
        grad_in.flat(argmax[static_cast<std::size_t>(i)]) += grad_out.flat(i);
}

// ---------------------------------------------------------------------------
// linear layers
// ---------------------------------------------------------------------------

void linear_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out) {
    require(in.rank() == 1 && w.rank() == 2 && b.rank() == 1, "linear: bad ranks");
    require(w.dim(1) == in.dim(0) && b.dim(0) == w.dim(0), "linear: shape mismatch");
    const int M = w.dim(0), N = w.dim(1);
    ensure_shape(out, {M});
    for (int m = 0; m < M; ++m) {
        const double* wrow = w.data() + static_cast<std::int64_t>(m) * N;
        double acc = b(m);
        for (int n = 0; n < N; ++n) acc += wrow[n] * in.flat(n);
        out(m) = acc;
    }
}

void linear_backward(const Tensor& in, const Tensor& w, const Tensor& grad_out, Tensor& grad_in,
                     Tensor& grad_w, Tensor& grad_b) {
    const int M = w.dim(0), N = w.dim(1);
    require(grad_out.rank() == 1 && grad_out.dim(0) == M, "linear backward: grad_out");
    require(grad_in.same_shape(in) && grad_w.same_shape(w) && grad_b.dim(0) == M,
            "linear backward: grad shapes");
    for (int m = 0; m < M; ++m) {
        const double g = grad_out(m);
        grad_b(m) += g;
        const double* wrow = w.data() + static_cast<std::int64_t>(m) * N;
        double* gwrow = grad_w.data() + static_cast<std::int64_t>(m) * N;
        for (int n = 0; n < N; ++n) {
            gwrow[n] += g * in.flat(n);
            grad_in.flat(n) += g * wrow[n];
        }
    }
}

void linear_cols_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out) {
    require(in.rank() == 2 && w.rank() == 2 && b.rank() == 1, "linear_cols: bad ranks");
    require(w.dim(1) == in.dim(0) && b.dim(0) == w.dim(0), "linear_cols: shape mismatch");
    const int M = w.dim(0), N = w.dim(1), T = in.dim(1);
    ensure_shape(out, {M, T});
    for (int m = 0; m < M; ++m) {
        double* orow = out.data() + static_cast<std::int64_t>(m) * T;
        const double bias = b(m);
        for (int t = 0; t < T; ++t) orow[t] = bias;
        const double* wrow = w.data() + static_cast<std::int64_t>(m) * N;
        for (int n = 0; n < N; ++n) {
            const double wv = wrow[n];
            const double* irow = in.data() + static_cast<std::int64_t>(n) * T;
            for (int t = 0; t < T; ++t) orow[t] += wv * irow[t];
        }
    }
}

void linear_cols_backward(const Tensor& in, const Tensor& w, const Tensor& grad_out,
                          Tensor& grad_in, Tensor& grad_w, Tensor& grad_b) {
    const int M = w.dim(0), N = w.dim(1), T = in.dim(1);
    require(grad_out.rank() == 2 && grad_out.dim(0) == M && grad_out.dim(1) == T,
            "linear_cols backward: grad_out");
    require(grad_in.same_shape(in) && grad_w.same_shape(w) && grad_b.dim(0) == M,
            "linear_cols backward: grad shapes");
    for (int m = 0; m < M; ++m) {
        const double* grow = grad_out.data() + static_cast<std::int64_t>(m) * T;
        double gb = 0.0;
        for (int t = 0; t < T; ++t) gb += grow[t];
        grad_b(m) += gb;
        const double* wrow = w.data() + static_cast<std::int64_t>(m) * N;
        double* gwrow = grad_w.data() + static_cast<std::int64_t>(m) * N;
        for (int n = 0; n < N; ++n) {
            const double* irow = in.data() + static_cast<std::int64_t>(n) * T;
            double* girow = grad_in.data() + static_cast<std::int64_t>(n) * T;
            const double wv = wrow[n];
            double gw = 0.0;
            for (int t = 0; t < T; ++t) {
                gw += grow[t] * irow[t];
                girow[t] += wv * grow[t];
            }
            gwrow[n] += gw;
        }
    }
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

Tensor dropout_mask(const std::vector<int>& shape, double p, RngStream& rng) {
    require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
    Tensor mask(shape);
    const double keep = 1.0 / (1.0 - p);
    for (std::int64_t i = 0; i < mask.size(); ++i) mask.flat(i) = rng.next_bool(p) ? 0.0 : keep;
    return mask;
}

Tensor channel_dropout_mask(int channels, double p, RngStream& rng) {
    return dropout_mask({channels}, p, rng);
}

void apply_mask(const Tensor& mask, Tensor& x) {
    require(mask.same_shape(x), "apply_mask: shape mismatch");
    for (std::int64_t i = 0; i < x.size(); ++i) x.flat(i) *= mask.flat(i);
}

void apply_channel_mask(const Tensor& mask, Tensor& x) {
    require(mask.rank() == 1 && mask.dim(0) == x.dim(0), "apply_channel_mask: channel count");
    const std::int64_t M = x.size() / x.dim(0);
    for (int c = 0; c < x.dim(0); ++c) {
        const double mv = mask(c);
        double* row = x.data() + static_cast<std::int64_t>(c) * M;
        for (std::int64_t i = 0; i < M; ++i) row[i] *= mv;
    }
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

double ce_loss_logits(const Tensor& logits, int target, const Tensor& class_weights,
                      Tensor* grad_logits, double grad_scale) {
    require(logits.rank() == 1, "ce: logits must be rank 1");
    const int K = logits.dim(0);
    require(target >= 0 && target < K, "ce: target out of range");
    require(class_weights.rank() == 1 && class_weights.dim(0) == K, "ce: weight size");

    double mx = logits(0);
    for (int k = 1; k < K; ++k) mx = std::max(mx, logits(k));
    if (!std::isfinite(mx)) throw std::invalid_argument("nn: ce: non-finite logits");
    double denom = 0.0;
    for (int k = 0; k < K; ++k) denom += std::exp(logits(k) - mx);
    const double lse = mx + std::log(denom);
    const double wt = class_weights(target);
    const double loss = wt * (lse - logits(target));

    if (grad_logits) {
        require(grad_logits->same_shape(logits), "ce: grad shape");
        for (int k = 0; k < K; ++k) {
            const double p = std::exp(logits(k) - mx) / denom;
            (*grad_logits)(k) += grad_scale * wt * (p - (k == target ? 1.0 : 0.0));
        }
    }
    return loss;
}

double bce_loss_logits(const Tensor& logits, const Tensor& targets, const Tensor& class_weights,
                       Tensor* grad_logits, double grad_scale) {
    require(targets.same_shape(logits), "bce: logits/targets shape mismatch");
    require(class_weights.rank() == 1 && class_weights.dim(0) == 2, "bce: needs 2 class weights");
    const std::int64_t n = logits.size();
    require(n > 0, "bce: empty input");

    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = logits.flat(i);
        if (!std::isfinite(x)) throw std::invalid_argument("nn: bce: non-finite logits");
        const double y = targets.flat(i);
        require(y == 0.0 || y == 1.0, "bce: targets must be 0 or 1");
        const double wt = class_weights(y > 0.5 ? 1 : 0);
        // stable: max(x,0) - x*y + log(1 + exp(-|x|))
        const double nll = std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
        total += wt * nll;
        if (grad_logits) (*grad_logits).flat(i) += grad_scale * wt * (sigmoid(x) - y) / static_cast<double>(n);
    }
    return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState::AdamState(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
        require(p != nullptr && p->value.same_shape(p->grad), "adam: bad param registry");
        m_.emplace_back(static_cast<std::size_t>(p->value.size()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p->value.size()), 0.0);
    }
}

void AdamState::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Param& p = *params_[pi];
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        for (std::int64_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.flat(i);
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value.flat(i) -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void AdamState::zero_grads() {
    for (Param* p : params_) p->zero_grad();
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

double grad_check_max_rel(const std::function<double()>& loss_fn, std::span<double> values,
                          std::span<const double> analytic_grad, double eps) {
    require(values.size() == analytic_grad.size(), "grad_check: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + eps;
        const double up = loss_fn();
        values[i] = keep - eps;
        const double down = loss_fn();
        values[i] = keep;
        const double fd = (up - down) / (2.0 * eps);
        const double an = analytic_grad[i];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
        worst = std::max(worst, std::abs(fd - an) / denom);
    }
    return worst;
}

} // namespace sxr::nn
