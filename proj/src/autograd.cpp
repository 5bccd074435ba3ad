#include <draglab/autograd.hpp>

#ifndef DRAGLAB_DOUBLE
#include <cblas.h>
#endif

#include <algorithm>
#include <cmath>
#include <cstring>

namespace draglab::nn {

// ---------------------------------------------------------------------------
// Parameters and tape

Parameter& ParameterStore::add(std::string name, Shape shape) {
    if (by_name_.count(name)) throw ArgumentError("duplicate parameter name " + name);
    auto p = std::make_unique<Parameter>();
    p->name = std::move(name);
    p->value = Tensor(shape);
    p->grad = Tensor(shape);
    by_name_[p->name] = p.get();
    params_.push_back(std::move(p));
    return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

std::size_t ParameterStore::numel() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->grad.fill(0);
}

Tensor& Node::grad_buffer() {
    if (grad.empty() && val().size() > 0) grad = Tensor(val().shape());
    return grad;
}

Var Tape::constant(Tensor value) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    return Var(this, &n);
}

Var Tape::variable(Tensor value) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = recording_;
    return Var(this, &n);
}

Var Tape::param(Parameter& p) {
    if (auto it = params_.find(&p); it != params_.end()) return Var(this, it->second);
    Node& n = nodes_.emplace_back();
    n.ref = &p.value;
    n.requires_grad = recording_ && p.trainable;
    if (n.requires_grad) {
        Parameter* target = &p;
        n.backward = [target](Node& self) {
            if (target->grad.empty()) target->grad = Tensor(target->value.shape());
            target->grad += self.grad;
        };
    }
    params_[&p] = &n;
    return Var(this, &n);
}

Var Tape::make(Tensor value, bool requires_grad, std::function<void(Node&)> backward) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = recording_ && requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return Var(this, &n);
}

void Tape::backward(const Var& out) {
    if (!recording_) throw ArgumentError("backward on a non-recording tape");
    if (out.value().size() != 1) throw ArgumentError("backward needs a single-element output");
    if (!out.requires_grad()) return;
    out.node()->grad_buffer()[0] += 1;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->requires_grad && it->backward && !it->grad.empty()) it->backward(*it);
    }
}

// ---------------------------------------------------------------------------
// BLAS

void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha, const real* a, int lda, const real* b,
          int ldb, real beta, real* c, int ldc) {
    if (m == 0 || n == 0) return;
#ifdef DRAGLAB_DOUBLE
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        for (int p = 0; p < k; ++p) {
            const double av = trans_a ? a[static_cast<std::size_t>(p) * lda + i] : a[static_cast<std::size_t>(i) * lda + p];
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j)
                row[j] += av * (trans_b ? b[static_cast<std::size_t>(j) * ldb + p] : b[static_cast<std::size_t>(p) * ldb + j]);
        }
        real* ci = c + static_cast<std::size_t>(i) * ldc;
        for (int j = 0; j < n; ++j) ci[j] = alpha * row[j] + (beta == 0 ? 0.0 : beta * ci[j]);
    }
#else
    const auto ta = trans_a ? CblasTrans : CblasNoTrans;
    const auto tb = trans_b ? CblasTrans : CblasNoTrans;
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
#endif
}

namespace {

void require_rank4(const Var& x, const char* op) {
    if (x.value().rank() != 4) {
        throw ArgumentError(std::string(op) + ": expected [N, H, W, C] input, got " + shape_string(x.shape()));
    }
}

bool any_grad(const Var& a) { return a && a.requires_grad(); }
bool any_grad(const Var& a, const Var& b) { return any_grad(a) || any_grad(b); }
bool any_grad(const Var& a, const Var& b, const Var& c) { return any_grad(a) || any_grad(b) || any_grad(c); }

struct ConvGeometry {
    int n, h, w, ci, k, stride, pad, ho, wo;
};

void im2col(const real* x, const ConvGeometry& g, real* col) {
    const int kk = g.k * g.k * g.ci;
    for (int n = 0; n < g.n; ++n)
        for (int oy = 0; oy < g.ho; ++oy)
            for (int ox = 0; ox < g.wo; ++ox) {
                real* row = col + ((static_cast<std::size_t>(n) * g.ho + oy) * g.wo + ox) * kk;
                for (int ky = 0; ky < g.k; ++ky) {
                    const int iy = oy * g.stride - g.pad + ky;
                    for (int kx = 0; kx < g.k; ++kx) {
                        const int ix = ox * g.stride - g.pad + kx;
                        real* dst = row + (ky * g.k + kx) * g.ci;
                        if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) {
                            std::memset(dst, 0, sizeof(real) * g.ci);
                        } else {
                            std::memcpy(dst, x + ((static_cast<std::size_t>(n) * g.h + iy) * g.w + ix) * g.ci,
                                        sizeof(real) * g.ci);
                        }
                    }
                }
            }
}

void col2im(const real* col, const ConvGeometry& g, real* dx) {
    const int kk = g.k * g.k * g.ci;
    for (int n = 0; n < g.n; ++n)
        for (int oy = 0; oy < g.ho; ++oy)
            for (int ox = 0; ox < g.wo; ++ox) {
                const real* row = col + ((static_cast<std::size_t>(n) * g.ho + oy) * g.wo + ox) * kk;
                for (int ky = 0; ky < g.k; ++ky) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    for (int kx = 0; kx < g.k; ++kx) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix < 0 || ix >= g.w) continue;
                        const real* src = row + (ky * g.k + kx) * g.ci;
                        real* dst = dx + ((static_cast<std::size_t>(n) * g.h + iy) * g.w + ix) * g.ci;
                        for (int c = 0; c < g.ci; ++c) dst[c] += src[c];
                    }
                }
            }
}

void add_bias_rows(real* y, const real* bias, std::size_t rows, int cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        real* row = y + r * cols;
        for (int c = 0; c < cols; ++c) row[c] += bias[c];
    }
}

void sum_rows_into(const real* y, std::size_t rows, int cols, real* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const real* row = y + r * cols;
        for (int c = 0; c < cols; ++c) out[c] += row[c];
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolutions

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride) {
    require_rank4(x, "conv2d");
    const Tensor& w = weight.value();
    if (w.rank() != 4 || w.dim(0) != w.dim(1) || w.dim(2) != x.dim(3)) {
        throw ArgumentError("conv2d: weight " + shape_string(w.shape()) + " does not fit input " +
                            shape_string(x.shape()));
    }
    if (stride < 1) throw ArgumentError("conv2d: stride must be positive");
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), stride, w.dim(0) / 2, 0, 0};
    g.ho = (g.h + 2 * g.pad - g.k) / stride + 1;
    g.wo = (g.w + 2 * g.pad - g.k) / stride + 1;
    const int co = w.dim(3);
    if (bias && bias.value().size() != static_cast<std::size_t>(co)) throw ArgumentError("conv2d: bias size mismatch");

    const std::size_t rows = static_cast<std::size_t>(g.n) * g.ho * g.wo;
    const int kk = g.k * g.k * g.ci;
    const bool direct = g.k == 1 && stride == 1;
    std::shared_ptr<std::vector<real>> col;
    const real* a = x.value().data();
    if (!direct) {
        col = std::make_shared<std::vector<real>>(rows * kk);
        im2col(x.value().data(), g, col->data());
        a = col->data();
    }
    Tensor y({g.n, g.ho, g.wo, co});
    gemm(false, false, static_cast<int>(rows), co, kk, 1, a, kk, w.data(), co, 0, y.data(), co);
    if (bias) add_bias_rows(y.data(), bias.value().data(), rows, co);

    const bool needs = any_grad(x, weight, bias);
    Tape& tape = x.tape();
    if (!tape.recording() || !needs) col.reset();
    Node* xn = x.node();
    Node* wn = weight.node();
    Node* bn = bias ? bias.node() : nullptr;
    return tape.make(std::move(y), needs, [=](Node& self) {
        const real* dy = self.grad.data();
        const real* acol = direct ? xn->val().data() : col->data();
        if (wn->requires_grad) {
            gemm(true, false, kk, co, static_cast<int>(rows), 1, acol, kk, dy, co, 1, wn->grad_buffer().data(), co);
        }
        if (bn && bn->requires_grad) sum_rows_into(dy, rows, co, bn->grad_buffer().data());
        if (xn->requires_grad) {
            if (direct) {
                gemm(false, true, static_cast<int>(rows), kk, co, 1, dy, co, wn->val().data(), co, 1,
                     xn->grad_buffer().data(), kk);
            } else {
                std::vector<real> dcol(rows * kk);
                gemm(false, true, static_cast<int>(rows), kk, co, 1, dy, co, wn->val().data(), co, 0, dcol.data(), kk);
                col2im(dcol.data(), g, xn->grad_buffer().data());
            }
        }
    });
}

Var temporal_conv(const Var& x, const Var& weight, const Var& bias, int clip_length, int dilation) {
    require_rank4(x, "temporal_conv");
    const Tensor& w = weight.value();
    const int n = x.dim(0), ci = x.dim(3);
    if (w.rank() != 3 || w.dim(1) != ci) {
        throw ArgumentError("temporal_conv: weight " + shape_string(w.shape()) + " does not fit input " +
                            shape_string(x.shape()));
    }
    if (clip_length <= 0 || n % clip_length != 0) {
        throw ArgumentError("temporal_conv: frame count " + std::to_string(n) + " is not a multiple of clip length " +
                            std::to_string(clip_length));
    }
    if (dilation < 1) throw ArgumentError("temporal_conv: dilation must be positive");
    const int k = w.dim(0), co = w.dim(2);
    const int clips = n / clip_length;
    const int hw = x.dim(1) * x.dim(2);
    const int half = k / 2;

    // Visits (clip, tap) blocks: output frames [lo, hi) read input frames shifted by off.
    auto for_blocks = [=](auto&& fn) {
        for (int b = 0; b < clips; ++b)
            for (int j = 0; j < k; ++j) {
                const int off = (j - half) * dilation;
                const int lo = std::max(0, -off), hi = std::min(clip_length, clip_length - off);
                if (hi <= lo) continue;
                const std::size_t out_frame = static_cast<std::size_t>(b) * clip_length + lo;
                fn(j, out_frame, out_frame + off, (hi - lo) * hw);
            }
    };

    Tensor y({n, x.dim(1), x.dim(2), co});
    const real* xd = x.value().data();
    const real* wd = w.data();
    for_blocks([&](int j, std::size_t out_frame, std::size_t in_frame, int rows) {
        gemm(false, false, rows, co, ci, 1, xd + in_frame * hw * ci, ci, wd + static_cast<std::size_t>(j) * ci * co, co,
             1, y.data() + out_frame * hw * co, co);
    });
    if (bias) add_bias_rows(y.data(), bias.value().data(), static_cast<std::size_t>(n) * hw, co);

    Node* xn = x.node();
    Node* wn = weight.node();
    Node* bn = bias ? bias.node() : nullptr;
    return x.tape().make(std::move(y), any_grad(x, weight, bias), [=](Node& self) {
        const real* dy = self.grad.data();
        if (bn && bn->requires_grad) sum_rows_into(dy, static_cast<std::size_t>(n) * hw, co, bn->grad_buffer().data());
        for_blocks([&](int j, std::size_t out_frame, std::size_t in_frame, int rows) {
            const real* dblock = dy + out_frame * hw * co;
            if (wn->requires_grad) {
                gemm(true, false, ci, co, rows, 1, xn->val().data() + in_frame * hw * ci, ci, dblock, co, 1,
                     wn->grad_buffer().data() + static_cast<std::size_t>(j) * ci * co, co);
            }
            if (xn->requires_grad) {
                gemm(false, true, rows, ci, co, 1, dblock, co, wn->val().data() + static_cast<std::size_t>(j) * ci * co,
                     co, 1, xn->grad_buffer().data() + in_frame * hw * ci, ci);
            }
        });
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    const Tensor& w = weight.value();
    if (x.value().rank() != 2 || w.rank() != 2 || w.dim(0) != x.dim(1)) {
        throw ArgumentError("linear: weight " + shape_string(w.shape()) + " does not fit input " +
                            shape_string(x.shape()));
    }
    const int b = x.dim(0), ci = x.dim(1), co = w.dim(1);
    Tensor y({b, co});
    gemm(false, false, b, co, ci, 1, x.value().data(), ci, w.data(), co, 0, y.data(), co);
    if (bias) add_bias_rows(y.data(), bias.value().data(), b, co);
    Node* xn = x.node();
    Node* wn = weight.node();
    Node* bn = bias ? bias.node() : nullptr;
    return x.tape().make(std::move(y), any_grad(x, weight, bias), [=](Node& self) {
        const real* dy = self.grad.data();
        if (wn->requires_grad) gemm(true, false, ci, co, b, 1, xn->val().data(), ci, dy, co, 1, wn->grad_buffer().data(), co);
        if (bn && bn->requires_grad) sum_rows_into(dy, b, co, bn->grad_buffer().data());
        if (xn->requires_grad) gemm(false, true, b, ci, co, 1, dy, co, wn->val().data(), co, 1, xn->grad_buffer().data(), ci);
    });
}

// ---------------------------------------------------------------------------
// Normalization and pointwise ops

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
    require_rank4(x, "group_norm");
    const int n = x.dim(0), c = x.dim(3);
    const int hw = x.dim(1) * x.dim(2);
    if (groups <= 0 || c % groups != 0) {
        throw ArgumentError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                            std::to_string(groups) + " groups");
    }
    if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c)) {
        throw ArgumentError("group_norm: affine parameter size mismatch");
    }
    const int cg = c / groups;
    const double count = static_cast<double>(hw) * cg;
    auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * groups * 2);
    Tensor y(x.shape());
    const real* xd = x.value().data();
    const real* gd = gamma.value().data();
    const real* bd = beta.value().data();
    for (int s = 0; s < n; ++s) {
        const real* xs = xd + static_cast<std::size_t>(s) * hw * c;
        real* ys = y.data() + static_cast<std::size_t>(s) * hw * c;
        for (int g = 0; g < groups; ++g) {
            double sum = 0.0, sq = 0.0;
            for (int p = 0; p < hw; ++p)
                for (int k = g * cg; k < (g + 1) * cg; ++k) {
                    const double v = xs[static_cast<std::size_t>(p) * c + k];
                    sum += v;
                    sq += v * v;
                }
            const double mean = sum / count;
            const double var = std::max(0.0, sq / count - mean * mean);
            const double rstd = 1.0 / std::sqrt(var + eps);
            (*stats)[(static_cast<std::size_t>(s) * groups + g) * 2] = mean;
            (*stats)[(static_cast<std::size_t>(s) * groups + g) * 2 + 1] = rstd;
            for (int p = 0; p < hw; ++p)
                for (int k = g * cg; k < (g + 1) * cg; ++k) {
                    const std::size_t i = static_cast<std::size_t>(p) * c + k;
                    ys[i] = static_cast<real>((xs[i] - mean) * rstd * gd[k] + bd[k]);
                }
        }
    }
    Node* xn = x.node();
    Node* gn = gamma.node();
    Node* bn = beta.node();
    return x.tape().make(std::move(y), any_grad(x, gamma, beta), [=](Node& self) {
        const real* dy = self.grad.data();
        const real* xv = xn->val().data();
        const real* gv = gn->val().data();
        real* dg = gn->requires_grad ? gn->grad_buffer().data() : nullptr;
        real* db = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
        real* dx = xn->requires_grad ? xn->grad_buffer().data() : nullptr;
        for (int s = 0; s < n; ++s) {
            const std::size_t base = static_cast<std::size_t>(s) * hw * c;
            for (int g = 0; g < groups; ++g) {
                const double mean = (*stats)[(static_cast<std::size_t>(s) * groups + g) * 2];
                const double rstd = (*stats)[(static_cast<std::size_t>(s) * groups + g) * 2 + 1];
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int p = 0; p < hw; ++p)
                    for (int k = g * cg; k < (g + 1) * cg; ++k) {
                        const std::size_t i = base + static_cast<std::size_t>(p) * c + k;
                        const double xhat = (xv[i] - mean) * rstd;
                        const double dxhat = static_cast<double>(dy[i]) * gv[k];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        if (dg) dg[k] += static_cast<real>(dy[i] * xhat);
                        if (db) db[k] += dy[i];
                    }
                if (!dx) continue;
                const double m1 = sum_dxhat / count, m2 = sum_dxhat_xhat / count;
                for (int p = 0; p < hw; ++p)
                    for (int k = g * cg; k < (g + 1) * cg; ++k) {
                        const std::size_t i = base + static_cast<std::size_t>(p) * c + k;
                        const double xhat = (xv[i] - mean) * rstd;
                        const double dxhat = static_cast<double>(dy[i]) * gv[k];
                        dx[i] += static_cast<real>(rstd * (dxhat - m1 - xhat * m2));
                    }
            }
        }
    });
}

Var silu(const Var& x) {
    Tensor y(x.shape());
    const real* xd = x.value().data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xd[i] / (real(1) + std::exp(-xd[i]));
    Node* xn = x.node();
    return x.tape().make(std::move(y), any_grad(x), [=](Node& self) {
        const real* xv = xn->val().data();
        real* dx = xn->grad_buffer().data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const real s = real(1) / (real(1) + std::exp(-xv[i]));
            dx[i] += self.grad[i] * s * (real(1) + xv[i] * (real(1) - s));
        }
    });
}

Var add(const Var& a, const Var& b) {
    if (a.shape() != b.shape()) {
        throw ArgumentError("add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    Tensor y = a.value();
    y += b.value();
    Node* an = a.node();
    Node* bn = b.node();
    return a.tape().make(std::move(y), any_grad(a, b), [=](Node& self) {
        if (an->requires_grad) an->grad_buffer() += self.grad;
        if (bn->requires_grad) bn->grad_buffer() += self.grad;
    });
}

Var add_clip_bias(const Var& x, const Var& e, int clip_length) {
    require_rank4(x, "add_clip_bias");
    const int n = x.dim(0), c = x.dim(3);
    const int hw = x.dim(1) * x.dim(2);
    if (clip_length <= 0 || n % clip_length != 0 || e.value().rank() != 2 || e.dim(0) != n / clip_length ||
        e.dim(1) != c) {
        throw ArgumentError("add_clip_bias: bias " + shape_string(e.shape()) + " does not fit " +
                            shape_string(x.shape()) + " with clip length " + std::to_string(clip_length));
    }
    Tensor y = x.value();
    const real* ed = e.value().data();
    for (int s = 0; s < n; ++s)
        add_bias_rows(y.data() + static_cast<std::size_t>(s) * hw * c, ed + static_cast<std::size_t>(s / clip_length) * c,
                      hw, c);
    Node* xn = x.node();
    Node* en = e.node();
    return x.tape().make(std::move(y), any_grad(x, e), [=](Node& self) {
        if (xn->requires_grad) xn->grad_buffer() += self.grad;
        if (en->requires_grad) {
            real* de = en->grad_buffer().data();
            for (int s = 0; s < n; ++s)
                sum_rows_into(self.grad.data() + static_cast<std::size_t>(s) * hw * c,
                              hw, c, de + static_cast<std::size_t>(s / clip_length) * c);
        }
    });
}

Var concat_channels(const Var& a, const Var& b) {
    require_rank4(a, "concat_channels");
    require_rank4(b, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
        throw ArgumentError("concat_channels: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    const int ca = a.dim(3), cb = b.dim(3), c = ca + cb;
    const std::size_t px = static_cast<std::size_t>(a.dim(0)) * a.dim(1) * a.dim(2);
    Tensor y({a.dim(0), a.dim(1), a.dim(2), c});
    const real* ad = a.value().data();
    const real* bd = b.value().data();
    for (std::size_t p = 0; p < px; ++p) {
        std::memcpy(y.data() + p * c, ad + p * ca, sizeof(real) * ca);
        std::memcpy(y.data() + p * c + ca, bd + p * cb, sizeof(real) * cb);
    }
    Node* an = a.node();
    Node* bn = b.node();
    return a.tape().make(std::move(y), any_grad(a, b), [=](Node& self) {
        const real* dy = self.grad.data();
        if (an->requires_grad) {
            real* da = an->grad_buffer().data();
            for (std::size_t p = 0; p < px; ++p)
                for (int k = 0; k < ca; ++k) da[p * ca + k] += dy[p * c + k];
        }
        if (bn->requires_grad) {
            real* db = bn->grad_buffer().data();
            for (std::size_t p = 0; p < px; ++p)
                for (int k = 0; k < cb; ++k) db[p * cb + k] += dy[p * c + ca + k];
        }
    });
}

Var upsample_nearest(const Var& x, int height, int width) {
    require_rank4(x, "upsample_nearest");
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (height < h || width < w) throw ArgumentError("upsample_nearest: target smaller than input");
    Tensor y({n, height, width, c});
    const real* xd = x.value().data();
    auto src = [=](int s, int oy, int ox) {
        const int iy = static_cast<int>(static_cast<long long>(oy) * h / height);
        const int ix = static_cast<int>(static_cast<long long>(ox) * w / width);
        return ((static_cast<std::size_t>(s) * h + iy) * w + ix) * c;
    };
    for (int s = 0; s < n; ++s)
        for (int oy = 0; oy < height; ++oy)
            for (int ox = 0; ox < width; ++ox)
                std::memcpy(&y.at(s, oy, ox, 0), xd + src(s, oy, ox), sizeof(real) * c);
    Node* xn = x.node();
    return x.tape().make(std::move(y), any_grad(x), [=](Node& self) {
        real* dx = xn->grad_buffer().data();
        const real* dy = self.grad.data();
        for (int s = 0; s < n; ++s)
            for (int oy = 0; oy < height; ++oy)
                for (int ox = 0; ox < width; ++ox) {
                    const real* g = dy + ((static_cast<std::size_t>(s) * height + oy) * width + ox) * c;
                    real* d = dx + src(s, oy, ox);
                    for (int k = 0; k < c; ++k) d[k] += g[k];
                }
    });
}

Var pixel_unshuffle(const Var& x, int factor) {
    require_rank4(x, "pixel_unshuffle");
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (factor < 1 || h % factor || w % factor) {
        throw ArgumentError("pixel_unshuffle: " + shape_string(x.shape()) + " not divisible by " +
                            std::to_string(factor));
    }
    const int ho = h / factor, wo = w / factor, co = c * factor * factor;
    Tensor y({n, ho, wo, co});
    const real* xd = x.value().data();
    auto visit = [=](auto&& fn) {
        for (int s = 0; s < n; ++s)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox)
                    for (int dy = 0; dy < factor; ++dy)
                        for (int dx = 0; dx < factor; ++dx) {
                            const std::size_t in = ((static_cast<std::size_t>(s) * h + oy * factor + dy) * w +
                                                    ox * factor + dx) * c;
                            const std::size_t out = ((static_cast<std::size_t>(s) * ho + oy) * wo + ox) * co +
                                                    static_cast<std::size_t>(dy * factor + dx) * c;
                            fn(in, out);
                        }
    };
    visit([&](std::size_t in, std::size_t out) { std::memcpy(y.data() + out, xd + in, sizeof(real) * c); });
    Node* xn = x.node();
    return x.tape().make(std::move(y), any_grad(x), [=](Node& self) {
        real* dx = xn->grad_buffer().data();
        const real* dy = self.grad.data();
        visit([&](std::size_t in, std::size_t out) {
            for (int k = 0; k < c; ++k) dx[in + k] += dy[out + k];
        });
    });
}

Var pad_spatial(const Var& x, int height, int width) {
    require_rank4(x, "pad_spatial");
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (height < h || width < w) throw ArgumentError("pad_spatial: target smaller than input");
    if (height == h && width == w) return x;
    Tensor y({n, height, width, c});
    const Tensor& xv = x.value();
    for (int s = 0; s < n; ++s)
        for (int iy = 0; iy < h; ++iy)
            std::memcpy(&y.at(s, iy, 0, 0), xv.data() + (static_cast<std::size_t>(s) * h + iy) * w * c,
                        sizeof(real) * w * c);
    Node* xn = x.node();
    return x.tape().make(std::move(y), any_grad(x), [=](Node& self) {
        Tensor& dx = xn->grad_buffer();
        for (int s = 0; s < n; ++s)
            for (int iy = 0; iy < h; ++iy)
                for (int ix = 0; ix < w; ++ix)
                    for (int k = 0; k < c; ++k) dx.at(s, iy, ix, k) += self.grad.at(s, iy, ix, k);
    });
}

Var scale(const Var& x, real factor) {
    Tensor y = x.value();
    y *= factor;
    Node* xn = x.node();
    return x.tape().make(std::move(y), any_grad(x), [=](Node& self) {
        real* dx = xn->grad_buffer().data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += factor * self.grad[i];
    });
}

Var weighted_sum(const Var& x, const Tensor& weights) {
    if (weights.size() != x.value().size()) throw ArgumentError("weighted_sum: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += static_cast<double>(x.value()[i]) * weights[i];
    Tensor y({1}, std::vector<real>{static_cast<real>(acc)});
    Node* xn = x.node();
    auto w = std::make_shared<Tensor>(weights);
    return x.tape().make(std::move(y), any_grad(x), [=](Node& self) {
        real* dx = xn->grad_buffer().data();
        const real g = self.grad[0];
        for (std::size_t i = 0; i < w->size(); ++i) dx[i] += g * (*w)[i];
    });
}

}  // namespace draglab::nn
