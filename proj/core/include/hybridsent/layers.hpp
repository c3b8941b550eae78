#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridsent/errors.hpp"
#include "hybridsent/rng.hpp"
#include "hybridsent/tensor.hpp"

namespace hybridsent {

template <typename T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    explicit Param(std::vector<std::size_t> shape) : value(shape), grad(std::move(shape)) {}

    void zero_grad() { grad.fill(T(0)); }
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<T>(rng.uniform(-limit, limit));
    }
}

// Random orthogonal n x n matrix: modified Gram-Schmidt on a Gaussian sample
// in a contiguous double workspace; rows come out orthonormal. A corrective
// re-pass runs only when a projection wipes out most of a row's mass.
template <typename T>
Tensor<T> orthogonal(std::size_t n, Rng& rng) {
    std::vector<double> q(n * n);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) v[j] = rng.normal();
        const auto project_out = [&]() {
            for (std::size_t r = 0; r < i; ++r) {
                const double* qr = q.data() + r * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += v[j] * qr[j];
                for (std::size_t j = 0; j < n; ++j) v[j] -= dot * qr[j];
            }
        };
        project_out();
        double norm2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) norm2 += v[j] * v[j];
        if (norm2 < 0.25 * static_cast<double>(n - i)) {
            // Unusually collinear draw: one more sweep restores orthogonality.
            project_out();
            norm2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) norm2 += v[j] * v[j];
            if (norm2 < 1e-24) {
                std::fill(v.begin(), v.end(), 0.0);
                v[i % n] = 1.0;
                project_out();
                norm2 = 0.0;
                for (std::size_t j = 0; j < n; ++j) norm2 += v[j] * v[j];
            }
        }
        const double inv = 1.0 / std::sqrt(norm2);
        double* qi = q.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) qi[j] = v[j] * inv;
    }
    Tensor<T> out({n, n});
    for (std::size_t j = 0; j < n * n; ++j) out[j] = static_cast<T>(q[j]);
    return out;
}

// ---------------------------------------------------------------------------
// Small dense kernels shared by the layer implementations
// ---------------------------------------------------------------------------

namespace detail {

// y = W x for W [m,n], x [n].
template <typename T>
void matvec(const Tensor<T>& w, const T* x, T* y) {
    const std::size_t m = w.dim(0), n = w.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
        const T* wr = w.row(i);
        T acc = T(0);
        for (std::size_t j = 0; j < n; ++j) acc += wr[j] * x[j];
        y[i] = acc;
    }
}

// y += W^T g for W [m,n], g [m], y [n].
template <typename T>
void matvec_transposed_accum(const Tensor<T>& w, const T* g, T* y) {
    const std::size_t m = w.dim(0), n = w.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
        const T gi = g[i];
        const T* wr = w.row(i);
        for (std::size_t j = 0; j < n; ++j) y[j] += gi * wr[j];
    }
}

// dW += g x^T for g [m], x [n], dW [m,n].
template <typename T>
void outer_accum(Tensor<T>& dw, const T* g, const T* x) {
    const std::size_t m = dw.dim(0), n = dw.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
        const T gi = g[i];
        T* dr = dw.row(i);
        for (std::size_t j = 0; j < n; ++j) dr[j] += gi * x[j];
    }
}

template <typename T>
void require_cached(const Tensor<T>& t, const char* op) {
    if (t.empty()) {
        throw std::logic_error(std::string(op) + ": backward called without cached forward state");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution over token sequences (valid padding)
// ---------------------------------------------------------------------------

template <typename T>
struct Conv1dParams {
    Param<T> w;  // [l, h, d]: l filters over h consecutive rows of width d
    Param<T> b;  // [l]

    Conv1dParams() = default;
    Conv1dParams(std::size_t filters, std::size_t region, std::size_t input_dim, Rng& rng)
        : w({filters, region, input_dim}), b({filters}) {
        glorot_uniform(w.value, region * input_dim, region * filters, rng);
    }

    std::size_t filters() const { return w.value.dim(0); }
    std::size_t region() const { return w.value.dim(1); }
    std::size_t input_dim() const { return w.value.dim(2); }
};

template <typename T>
struct Conv1dCache {
    Tensor<T> x;    // [T, d]
    Tensor<T> pre;  // [T-h+1, l] pre-activation
    Activation act = Activation::Relu;
};

// out[i,f] = act(sum_k sum_j x[i+k, j] * W[f,k,j] + b[f]); inner accumulation
// runs rows-then-columns of the window, matching the equation's summation.
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Conv1dParams<T>& p, Activation act,
                         Conv1dCache<T>* cache = nullptr) {
    if (x.rank() != 2 || x.dim(1) != p.input_dim()) {
        throw DimensionError("conv1d input " + x.shape_string() + " does not match filter depth " +
                             std::to_string(p.input_dim()));
    }
    const std::size_t steps = x.dim(0), h = p.region(), l = p.filters(), d = p.input_dim();
    if (steps < h) {
        throw DimensionError("conv1d sequence too short: " + std::to_string(steps) +
                             " rows for region size " + std::to_string(h));
    }
    const std::size_t n = steps - h + 1;
    Tensor<T> pre({n, l});
    for (std::size_t i = 0; i < n; ++i) {
        T* prow = pre.row(i);
        for (std::size_t f = 0; f < l; ++f) {
            T acc = T(0);
            for (std::size_t k = 0; k < h; ++k) {
                const T* xr = x.row(i + k);
                const T* wr = &p.w.value(f, k, 0);
                for (std::size_t j = 0; j < d; ++j) acc += xr[j] * wr[j];
            }
            prow[f] = acc + p.b.value[f];
        }
    }
    Tensor<T> out = map(pre, act);
    if (cache) {
        cache->x = x;
        cache->pre = std::move(pre);
        cache->act = act;
    }
    return out;
}

template <typename T>
Tensor<T> conv1d_backward(Conv1dParams<T>& p, const Conv1dCache<T>& cache, const Tensor<T>& dout) {
    detail::require_cached(cache.x, "conv1d");
    const std::size_t n = cache.pre.dim(0), l = p.filters(), h = p.region(), d = p.input_dim();
    Tensor<T> dx(cache.x.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const T* drow = dout.row(i);
        const T* prow = cache.pre.row(i);
        for (std::size_t f = 0; f < l; ++f) {
            const T g = drow[f] * scalar::apply_grad(cache.act, prow[f]);
            if (g == T(0)) continue;
            p.b.grad[f] += g;
            for (std::size_t k = 0; k < h; ++k) {
                const T* xr = cache.x.row(i + k);
                T* wg = &p.w.grad(f, k, 0);
                const T* wv = &p.w.value(f, k, 0);
                T* dxr = dx.row(i + k);
                for (std::size_t j = 0; j < d; ++j) {
                    wg[j] += g * xr[j];
                    dxr[j] += g * wv[j];
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPoolCache {
    std::vector<std::size_t> argmax;  // per output cell, row index of the max
    std::size_t in_rows = 0;
};

// Pool over all positions per filter; ties break toward the lowest index.
template <typename T>
Tensor<T> maxpool_global_forward(const Tensor<T>& c, MaxPoolCache<T>* cache = nullptr) {
    if (c.rank() != 2 || c.dim(0) < 1) {
        throw DimensionError("maxpool_global requires a non-empty [n,l] input");
    }
    const std::size_t n = c.dim(0), l = c.dim(1);
    Tensor<T> out({l});
    std::vector<std::size_t> argmax(l, 0);
    for (std::size_t f = 0; f < l; ++f) out[f] = c(0, f);
    for (std::size_t i = 1; i < n; ++i) {
        const T* row = c.row(i);
        for (std::size_t f = 0; f < l; ++f) {
            if (row[f] > out[f]) {
                out[f] = row[f];
                argmax[f] = i;
            }
        }
    }
    if (cache) {
        cache->argmax = std::move(argmax);
        cache->in_rows = n;
    }
    return out;
}

template <typename T>
Tensor<T> maxpool_global_backward(const MaxPoolCache<T>& cache, const Tensor<T>& dout) {
    if (cache.in_rows == 0) throw std::logic_error("maxpool_global: backward without forward");
    const std::size_t l = dout.size();
    Tensor<T> dc({cache.in_rows, l});
    for (std::size_t f = 0; f < l; ++f) dc(cache.argmax[f], f) = dout[f];
    return dc;
}

// Non-overlapping windowed max; the trailing remainder is dropped.
template <typename T>
Tensor<T> maxpool_local_forward(const Tensor<T>& c, std::size_t window, std::size_t stride,
                                MaxPoolCache<T>* cache = nullptr) {
    if (c.rank() != 2) throw DimensionError("maxpool_local requires a [n,l] input");
    if (window != stride) throw ConfigError("maxpool_local supports window == stride only");
    const std::size_t n = c.dim(0), l = c.dim(1);
    if (n < window) {
        throw DimensionError("maxpool_local input rows " + std::to_string(n) +
                             " smaller than window " + std::to_string(window));
    }
    const std::size_t out_rows = n / window;
    Tensor<T> out({out_rows, l});
    std::vector<std::size_t> argmax(out_rows * l, 0);
    for (std::size_t o = 0; o < out_rows; ++o) {
        const std::size_t base = o * stride;
        T* orow = out.row(o);
        for (std::size_t f = 0; f < l; ++f) {
            T best = c(base, f);
            std::size_t best_i = base;
            for (std::size_t k = 1; k < window; ++k) {
                const T v = c(base + k, f);
                if (v > best) {
                    best = v;
                    best_i = base + k;
                }
            }
            orow[f] = best;
            argmax[o * l + f] = best_i;
        }
    }
    if (cache) {
        cache->argmax = std::move(argmax);
        cache->in_rows = n;
    }
    return out;
}

template <typename T>
Tensor<T> maxpool_local_backward(const MaxPoolCache<T>& cache, const Tensor<T>& dout) {
    if (cache.in_rows == 0) throw std::logic_error("maxpool_local: backward without forward");
    const std::size_t out_rows = dout.dim(0), l = dout.dim(1);
    Tensor<T> dc({cache.in_rows, l});
    for (std::size_t o = 0; o < out_rows; ++o) {
        const T* drow = dout.row(o);
        for (std::size_t f = 0; f < l; ++f) dc(cache.argmax[o * l + f], f) += drow[f];
    }
    return dc;
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

template <typename T>
struct LstmParams {
    Param<T> w_fx, w_ix, w_cx, w_ox;  // [u, d]
    Param<T> w_fh, w_ih, w_ch, w_oh;  // [u, u]
    Param<T> b_f, b_i, b_c, b_o;      // [u]

    LstmParams() = default;
    LstmParams(std::size_t units, std::size_t input_dim, Rng& rng) {
        for (Param<T>* p : {&w_fx, &w_ix, &w_cx, &w_ox}) {
            *p = Param<T>({units, input_dim});
            glorot_uniform(p->value, input_dim, units, rng);
        }
        for (Param<T>* p : {&w_fh, &w_ih, &w_ch, &w_oh}) {
            *p = Param<T>({units, units});
            p->value = orthogonal<T>(units, rng);
        }
        for (Param<T>* p : {&b_f, &b_i, &b_c, &b_o}) *p = Param<T>({units});
    }

    std::size_t units() const { return b_f.value.size(); }
    std::size_t input_dim() const { return w_fx.value.dim(1); }
};

template <typename T>
struct LstmStepCache {
    Tensor<T> x, h_prev, c_prev;
    Tensor<T> f, i, cbar, o, c, tanh_c;
};

template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_step(const Tensor<T>& x, const Tensor<T>& h_prev,
                                          const Tensor<T>& c_prev, const LstmParams<T>& p,
                                          LstmStepCache<T>* cache = nullptr) {
    const std::size_t u = p.units();
    if (x.size() != p.input_dim() || h_prev.size() != u || c_prev.size() != u) {
        throw DimensionError("lstm_step shape mismatch: x " + x.shape_string() + ", h " +
                             h_prev.shape_string() + ", C " + c_prev.shape_string());
    }
    const auto gate = [&](const Param<T>& wx, const Param<T>& wh, const Param<T>& b,
                          Activation act) {
        Tensor<T> a({u});
        detail::matvec(wx.value, x.data(), a.data());
        Tensor<T> ah({u});
        detail::matvec(wh.value, h_prev.data(), ah.data());
        for (std::size_t r = 0; r < u; ++r) a[r] = scalar::apply(act, a[r] + ah[r] + b.value[r]);
        return a;
    };
    Tensor<T> f = gate(p.w_fx, p.w_fh, p.b_f, Activation::Sigmoid);
    Tensor<T> i = gate(p.w_ix, p.w_ih, p.b_i, Activation::Sigmoid);
    Tensor<T> cbar = gate(p.w_cx, p.w_ch, p.b_c, Activation::Tanh);
    Tensor<T> o = gate(p.w_ox, p.w_oh, p.b_o, Activation::Sigmoid);
    Tensor<T> c({u}), h({u}), tanh_c({u});
    for (std::size_t r = 0; r < u; ++r) {
        c[r] = f[r] * c_prev[r] + i[r] * cbar[r];
        tanh_c[r] = std::tanh(c[r]);
        h[r] = o[r] * tanh_c[r];
    }
    if (cache) {
        cache->x = x;
        cache->h_prev = h_prev;
        cache->c_prev = c_prev;
        cache->f = std::move(f);
        cache->i = std::move(i);
        cache->cbar = std::move(cbar);
        cache->o = std::move(o);
        cache->c = c;
        cache->tanh_c = std::move(tanh_c);
    }
    return {std::move(h), std::move(c)};
}

// Accumulates parameter gradients; returns gradients w.r.t. x, h_prev, c_prev.
template <typename T>
void lstm_step_backward(LstmParams<T>& p, const LstmStepCache<T>& cache, const Tensor<T>& dh,
                        const Tensor<T>& dc_in, Tensor<T>& dx, Tensor<T>& dh_prev,
                        Tensor<T>& dc_prev) {
    detail::require_cached(cache.x, "lstm_step");
    const std::size_t u = p.units();
    Tensor<T> da_f({u}), da_i({u}), da_c({u}), da_o({u});
    dc_prev = Tensor<T>({u});
    for (std::size_t r = 0; r < u; ++r) {
        const T do_r = dh[r] * cache.tanh_c[r];
        const T dc = dc_in[r] + dh[r] * cache.o[r] * (T(1) - cache.tanh_c[r] * cache.tanh_c[r]);
        const T df = dc * cache.c_prev[r];
        const T di = dc * cache.cbar[r];
        const T dcbar = dc * cache.i[r];
        dc_prev[r] = dc * cache.f[r];
        da_f[r] = df * cache.f[r] * (T(1) - cache.f[r]);
        da_i[r] = di * cache.i[r] * (T(1) - cache.i[r]);
        da_c[r] = dcbar * (T(1) - cache.cbar[r] * cache.cbar[r]);
        da_o[r] = do_r * cache.o[r] * (T(1) - cache.o[r]);
    }
    dx = Tensor<T>(cache.x.shape());
    dh_prev = Tensor<T>({u});
    const auto backprop_gate = [&](Param<T>& wx, Param<T>& wh, Param<T>& b, const Tensor<T>& da) {
        detail::outer_accum(wx.grad, da.data(), cache.x.data());
        detail::outer_accum(wh.grad, da.data(), cache.h_prev.data());
        for (std::size_t r = 0; r < u; ++r) b.grad[r] += da[r];
        detail::matvec_transposed_accum(wx.value, da.data(), dx.data());
        detail::matvec_transposed_accum(wh.value, da.data(), dh_prev.data());
    };
    backprop_gate(p.w_fx, p.w_fh, p.b_f, da_f);
    backprop_gate(p.w_ix, p.w_ih, p.b_i, da_i);
    backprop_gate(p.w_cx, p.w_ch, p.b_c, da_c);
    backprop_gate(p.w_ox, p.w_oh, p.b_o, da_o);
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

template <typename T>
struct GruParams {
    Param<T> w_zx, w_rx, w_hx;  // [u, d]
    Param<T> w_zh, w_rh, w_hh;  // [u, u]
    Param<T> b_z, b_r, b_h;     // [u]

    GruParams() = default;
    GruParams(std::size_t units, std::size_t input_dim, Rng& rng) {
        for (Param<T>* p : {&w_zx, &w_rx, &w_hx}) {
            *p = Param<T>({units, input_dim});
            glorot_uniform(p->value, input_dim, units, rng);
        }
        for (Param<T>* p : {&w_zh, &w_rh, &w_hh}) {
            *p = Param<T>({units, units});
            p->value = orthogonal<T>(units, rng);
        }
        for (Param<T>* p : {&b_z, &b_r, &b_h}) *p = Param<T>({units});
    }

    std::size_t units() const { return b_z.value.size(); }
    std::size_t input_dim() const { return w_zx.value.dim(1); }
};

template <typename T>
struct GruStepCache {
    Tensor<T> x, h_prev;
    Tensor<T> z, r, hbar, whh_h;  // whh_h = W_hh * h_prev before the reset gate
};

// The reset gate acts on the recurrent product: hbar = tanh(W_hx x + r .* (W_hh h) + b_h),
// and h_t = z .* h_prev + (1 - z) .* hbar.
template <typename T>
Tensor<T> gru_step(const Tensor<T>& x, const Tensor<T>& h_prev, const GruParams<T>& p,
                   GruStepCache<T>* cache = nullptr) {
    const std::size_t u = p.units();
    if (x.size() != p.input_dim() || h_prev.size() != u) {
        throw DimensionError("gru_step shape mismatch: x " + x.shape_string() + ", h " +
                             h_prev.shape_string());
    }
    const auto gate = [&](const Param<T>& wx, const Param<T>& wh, const Param<T>& b) {
        Tensor<T> a({u});
        detail::matvec(wx.value, x.data(), a.data());
        Tensor<T> ah({u});
        detail::matvec(wh.value, h_prev.data(), ah.data());
        for (std::size_t r = 0; r < u; ++r) {
            a[r] = scalar::sigmoid(a[r] + ah[r] + b.value[r]);
        }
        return a;
    };
    Tensor<T> z = gate(p.w_zx, p.w_zh, p.b_z);
    Tensor<T> r = gate(p.w_rx, p.w_rh, p.b_r);
    Tensor<T> ax({u});
    detail::matvec(p.w_hx.value, x.data(), ax.data());
    Tensor<T> whh_h({u});
    detail::matvec(p.w_hh.value, h_prev.data(), whh_h.data());
    Tensor<T> hbar({u}), h({u});
    for (std::size_t k = 0; k < u; ++k) {
        hbar[k] = std::tanh(ax[k] + r[k] * whh_h[k] + p.b_h.value[k]);
        h[k] = z[k] * h_prev[k] + (T(1) - z[k]) * hbar[k];
    }
    if (cache) {
        cache->x = x;
        cache->h_prev = h_prev;
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->hbar = std::move(hbar);
        cache->whh_h = std::move(whh_h);
    }
    return h;
}

template <typename T>
void gru_step_backward(GruParams<T>& p, const GruStepCache<T>& cache, const Tensor<T>& dh,
                       Tensor<T>& dx, Tensor<T>& dh_prev) {
    detail::require_cached(cache.x, "gru_step");
    const std::size_t u = p.units();
    Tensor<T> da_z({u}), da_r({u}), da_h({u}), dwhh_h({u});
    dh_prev = Tensor<T>({u});
    for (std::size_t k = 0; k < u; ++k) {
        const T dz = dh[k] * (cache.h_prev[k] - cache.hbar[k]);
        const T dhbar = dh[k] * (T(1) - cache.z[k]);
        dh_prev[k] = dh[k] * cache.z[k];
        da_h[k] = dhbar * (T(1) - cache.hbar[k] * cache.hbar[k]);
        const T dr = da_h[k] * cache.whh_h[k];
        dwhh_h[k] = da_h[k] * cache.r[k];
        da_z[k] = dz * cache.z[k] * (T(1) - cache.z[k]);
        da_r[k] = dr * cache.r[k] * (T(1) - cache.r[k]);
    }
    dx = Tensor<T>(cache.x.shape());
    const auto backprop_gate = [&](Param<T>& wx, Param<T>& wh, Param<T>& b, const Tensor<T>& da) {
        detail::outer_accum(wx.grad, da.data(), cache.x.data());
        detail::outer_accum(wh.grad, da.data(), cache.h_prev.data());
        for (std::size_t k = 0; k < u; ++k) b.grad[k] += da[k];
        detail::matvec_transposed_accum(wx.value, da.data(), dx.data());
        detail::matvec_transposed_accum(wh.value, da.data(), dh_prev.data());
    };
    backprop_gate(p.w_zx, p.w_zh, p.b_z, da_z);
    backprop_gate(p.w_rx, p.w_rh, p.b_r, da_r);
    // Candidate state: the recurrent term is gated, so W_hh sees r .* da_h.
    detail::outer_accum(p.w_hx.grad, da_h.data(), cache.x.data());
    detail::outer_accum(p.w_hh.grad, dwhh_h.data(), cache.h_prev.data());
    for (std::size_t k = 0; k < u; ++k) p.b_h.grad[k] += da_h[k];
    detail::matvec_transposed_accum(p.w_hx.value, da_h.data(), dx.data());
    detail::matvec_transposed_accum(p.w_hh.value, dwhh_h.data(), dh_prev.data());
}

// ---------------------------------------------------------------------------
// Sequence-level recurrent pass (BPTT)
// ---------------------------------------------------------------------------

template <typename T>
struct RnnCache {
    std::vector<LstmStepCache<T>> lstm_steps;
    std::vector<GruStepCache<T>> gru_steps;
    std::size_t last_index = 0;  // last unmasked step
    bool return_sequence = false;
    std::size_t steps = 0;
};

// Initial recurrent state is zero. With return_sequence the output stacks all
// T hidden states (pad steps still computed); otherwise it is the hidden state
// at the last unmasked step.
template <typename T, typename Params>
Tensor<T> rnn_forward(const Tensor<T>& x, const std::vector<std::uint8_t>& mask, const Params& p,
                      bool return_sequence, RnnCache<T>* cache = nullptr) {
    if (x.rank() != 2) throw DimensionError("rnn_forward expects [T,d] input");
    const std::size_t steps = x.dim(0), u = p.units();
    std::size_t last = steps;  // sentinel: none found
    for (std::size_t t = 0; t < steps; ++t) {
        if (t >= mask.size() || mask[t] != 0) last = t;
    }
    if (last == steps) throw DataError("rnn_forward: all time steps are masked");

    constexpr bool is_lstm = std::is_same_v<Params, LstmParams<T>>;
    Tensor<T> h({u}), c({u});
    Tensor<T> all({steps, u});
    if (cache) {
        cache->steps = steps;
        cache->last_index = last;
        cache->return_sequence = return_sequence;
        if constexpr (is_lstm) cache->lstm_steps.resize(steps);
        else cache->gru_steps.resize(steps);
    }
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor<T> xt({x.dim(1)});
        std::copy(x.row(t), x.row(t) + x.dim(1), xt.data());
        if constexpr (is_lstm) {
            auto [hn, cn] = lstm_step(xt, h, c, p, cache ? &cache->lstm_steps[t] : nullptr);
            h = std::move(hn);
            c = std::move(cn);
        } else {
            h = gru_step(xt, h, p, cache ? &cache->gru_steps[t] : nullptr);
        }
        std::copy(h.data(), h.data() + u, all.row(t));
    }
    if (return_sequence) return all;
    Tensor<T> out({u});
    std::copy(all.row(last), all.row(last) + u, out.data());
    return out;
}

// Upstream gradient comes as a full [T,u] tensor; for last-state mode the
// caller scatters its [u] gradient into row `last_index` and zeros elsewhere.
template <typename T, typename Params>
Tensor<T> rnn_backward(Params& p, const RnnCache<T>& cache, const Tensor<T>& dh_all) {
    constexpr bool is_lstm = std::is_same_v<Params, LstmParams<T>>;
    if (cache.steps == 0) throw std::logic_error("rnn: backward without forward");
    const std::size_t steps = cache.steps, u = p.units();
    const std::size_t d = p.input_dim();
    Tensor<T> dx_all({steps, d});
    Tensor<T> dh({u}), dc({u});
    for (std::size_t ti = steps; ti-- > 0;) {
        for (std::size_t k = 0; k < u; ++k) dh[k] += dh_all(ti, k);
        Tensor<T> dx, dh_prev, dc_prev;
        if constexpr (is_lstm) {
            lstm_step_backward(p, cache.lstm_steps[ti], dh, dc, dx, dh_prev, dc_prev);
            dc = std::move(dc_prev);
        } else {
            gru_step_backward(p, cache.gru_steps[ti], dh, dx, dh_prev);
        }
        std::copy(dx.data(), dx.data() + d, dx_all.row(ti));
        dh = std::move(dh_prev);
    }
    return dx_all;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

template <typename T>
struct DenseParams {
    Param<T> w;  // [out, in]
    Param<T> b;  // [out]

    DenseParams() = default;
    DenseParams(std::size_t out, std::size_t in, Rng& rng) : w({out, in}), b({out}) {
        glorot_uniform(w.value, in, out, rng);
    }

    std::size_t out_dim() const { return w.value.dim(0); }
    std::size_t in_dim() const { return w.value.dim(1); }
};

template <typename T>
struct DenseCache {
    Tensor<T> x;
};

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const DenseParams<T>& p, DenseCache<T>* cache = nullptr) {
    if (x.size() != p.in_dim()) {
        throw DimensionError("dense input " + x.shape_string() + " does not match weight [" +
                             std::to_string(p.out_dim()) + "x" + std::to_string(p.in_dim()) + "]");
    }
    Tensor<T> y({p.out_dim()});
    detail::matvec(p.w.value, x.data(), y.data());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += p.b.value[i];
    if (cache) cache->x = x;
    return y;
}

template <typename T>
Tensor<T> dense_backward(DenseParams<T>& p, const DenseCache<T>& cache, const Tensor<T>& dout) {
    detail::require_cached(cache.x, "dense");
    detail::outer_accum(p.w.grad, dout.data(), cache.x.data());
    for (std::size_t i = 0; i < dout.size(); ++i) p.b.grad[i] += dout[i];
    Tensor<T> dx(cache.x.shape());
    detail::matvec_transposed_accum(p.w.value, dout.data(), dx.data());
    return dx;
}

// ---------------------------------------------------------------------------
// Trainable embedding table
// ---------------------------------------------------------------------------

template <typename T>
struct EmbeddingTable {
    Param<T> table;  // [V, e]; the [PAD] row trains like any other

    EmbeddingTable() = default;
    EmbeddingTable(std::size_t vocab, std::size_t dim, Rng& rng) : table({vocab, dim}) {
        for (std::size_t i = 0; i < table.value.size(); ++i) {
            table.value[i] = static_cast<T>(rng.uniform(-0.05, 0.05));
        }
    }

    std::size_t vocab() const { return table.value.dim(0); }
    std::size_t dim() const { return table.value.dim(1); }
};

template <typename T>
Tensor<T> embedding_forward(const std::vector<std::int32_t>& ids, const EmbeddingTable<T>& emb) {
    const std::size_t e = emb.dim();
    Tensor<T> out({ids.size(), e});
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const std::int32_t id = ids[t];
        if (id < 0 || static_cast<std::size_t>(id) >= emb.vocab()) {
            throw DataError("embedding id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(emb.vocab()) + ")");
        }
        std::copy(emb.table.value.row(static_cast<std::size_t>(id)),
                  emb.table.value.row(static_cast<std::size_t>(id)) + e, out.row(t));
    }
    return out;
}

template <typename T>
void embedding_backward(EmbeddingTable<T>& emb, const std::vector<std::int32_t>& ids,
                        const Tensor<T>& dout) {
    const std::size_t e = emb.dim();
    for (std::size_t t = 0; t < ids.size(); ++t) {
        T* grad_row = emb.table.grad.row(static_cast<std::size_t>(ids[t]));
        const T* drow = dout.row(t);
        for (std::size_t j = 0; j < e; ++j) grad_row[j] += drow[j];
    }
}

}  // namespace hybridsent
