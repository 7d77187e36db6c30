// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relight/errors.hpp"
#include "relight/rng.hpp"
#include "relight/tensor.hpp"

namespace relight {

// Layers are templated on the scalar so the whole network can run in f64
// for finite-difference gradient checks and in f32 for training. Every
// layer owns its parameters, caches what backward needs during forward,
// and accumulates parameter gradients on backward.

template <typename S>
struct nd {
    std::vector<int64_t> dims;
    std::vector<S> v;

    nd() = default;
    explicit nd(std::vector<int64_t> d, S fill = S(0)) : dims(std::move(d)) {
        v.assign(size_t(tensor::numel_of(dims)), fill);
    }

    int64_t numel() const { return int64_t(v.size()); }
    bool same_shape(const nd& o) const { return dims == o.dims; }
};

template <typename S>
using mat_t = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
struct param_t {
    std::string name;
    nd<S> w;  // value
    nd<S> g;  // gradient, same shape
    bool temporal = false;

    void shape(std::vector<int64_t> dims) {
        w = nd<S>(dims);
        g = nd<S>(std::move(dims));
    }
    void zero_grad() { std::fill(g.v.begin(), g.v.end(), S(0)); }
};

template <typename S>
using param_list = std::vector<param_t<S>*>;

template <typename S>
inline int64_t param_count(const param_list<S>& ps) {
    int64_t n = 0;
    for (const auto* p : ps) n += p->w.numel();
    return n;
}

template <typename S>
inline void zero_grads(const param_list<S>& ps) {
    for (auto* p : ps) p->zero_grad();
}

template <typename S>
inline void check_finite(const nd<S>& t, const char* where) {
    for (S x : t.v)
        if (!std::isfinite(double(x)))
            throw numeric_error(std::string("non-finite activation at ") + where);
}

namespace nn_detail {

template <typename S>
inline S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

}  // namespace nn_detail

// ---- linear ----

// y = x * W^T + b with x [N, in], W [out, in], b [out].
template <typename S>
struct linear_t {
    param_t<S> w, b;
    nd<S> x_cache;

    void configure(const std::string& name, int64_t in, int64_t out) {
        w.name = name + ".w";
        w.shape({out, in});
        b.name = name + ".b";
        b.shape({out});
    }
    void init(rng& r) {
        S s = S(1.0 / std::sqrt(double(w.w.dims[1])));
        for (S& x : w.w.v) x = S(r.normal()) * s;
        std::fill(b.w.v.begin(), b.w.v.end(), S(0));
    }
    void collect(param_list<S>& ps) {
        ps.push_back(&w);
        ps.push_back(&b);
    }

    nd<S> forward(const nd<S>& x) {
        if (x.dims.size() != 2 || x.dims[1] != w.w.dims[1])
            throw usage_error("linear " + w.name + ": bad input shape");
        x_cache = x;
        int64_t n = x.dims[0], in = w.w.dims[1], out = w.w.dims[0];
        nd<S> y({n, out});
        Eigen::Map<const mat_t<S>> X(x.v.data(), n, in);
        Eigen::Map<const mat_t<S>> W(w.w.v.data(), out, in);
        Eigen::Map<mat_t<S>> Y(y.v.data(), n, out);
        Y.noalias() = X * W.transpose();
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < out; ++j) y.v[size_t(i * out + j)] += b.w.v[size_t(j)];
        return y;
    }

    nd<S> backward(const nd<S>& gy) {
        int64_t n = x_cache.dims[0], in = w.w.dims[1], out = w.w.dims[0];
        nd<S> gx({n, in});
        Eigen::Map<const mat_t<S>> X(x_cache.v.data(), n, in);
        Eigen::Map<const mat_t<S>> W(w.w.v.data(), out, in);
        Eigen::Map<const mat_t<S>> GY(gy.v.data(), n, out);
        Eigen::Map<mat_t<S>> GX(gx.v.data(), n, in);
        Eigen::Map<mat_t<S>> GW(w.g.v.data(), out, in);
        GX.noalias() = GY * W;
        GW.noalias() += GY.transpose() * X;
        for (int64_t j = 0; j < out; ++j) {
            S acc = 0;
            for (int64_t i = 0; i < n; ++i) acc += gy.v[size_t(i * out + j)];
            b.g.v[size_t(j)] += acc;
        }
        return gx;
    }
};

// ---- SiLU ----

template <typename S>
struct silu_t {
    nd<S> x_cache;

    nd<S> forward(const nd<S>& x) {
        x_cache = x;
        nd<S> y = x;
        for (S& v : y.v) v = v * nn_detail::sigmoid(v);
        return y;
    }
    nd<S> backward(const nd<S>& gy) {
        nd<S> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i) {
            S x = x_cache.v[i];
            S sg = nn_detail::sigmoid(x);
            gx.v[i] *= sg * (S(1) + x * (S(1) - sg));
        }
        return gx;
    }
};

// ---- conv2d ----

// Per-frame spatial convolution over clips [T, C, H, W]; weight
// [Cout, Cin, k, k], zero padding.
template <typename S>
struct conv2d_t {
    param_t<S> w, b;
    int k = 3, stride = 1, pad = 1;
    nd<S> x_cache;

    void configure(const std::string& name, int64_t cin, int64_t cout, int kernel, int stride_,
                   int pad_) {
        k = kernel;
        stride = stride_;
        pad = pad_;
        w.name = name + ".w";
        w.shape({cout, cin, kernel, kernel});
        b.name = name + ".b";
        b.shape({cout});
    }
    void init(rng& r) {
        S s = S(1.0 / std::sqrt(double(w.w.dims[1] * k * k)));
        for (S& x : w.w.v) x = S(r.normal()) * s;
        std::fill(b.w.v.begin(), b.w.v.end(), S(0));
    }
    void zero_init() {
        std::fill(w.w.v.begin(), w.w.v.end(), S(0));
        std::fill(b.w.v.begin(), b.w.v.end(), S(0));
    }
    void collect(param_list<S>& ps) {
        ps.push_back(&w);
        ps.push_back(&b);
    }

    int64_t out_extent(int64_t in) const { return (in + 2 * pad - k) / stride + 1; }

    void im2col(const S* frame, int64_t cin, int64_t h, int64_t wd, mat_t<S>& cols) const {
        int64_t ho = out_extent(h), wo = out_extent(wd);
        cols.resize(cin * k * k, ho * wo);
        for (int64_t ci = 0; ci < cin; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    int64_t row = (ci * k + ky) * k + kx;
                    for (int64_t oy = 0; oy < ho; ++oy) {
                        int64_t iy = oy * stride + ky - pad;
                        for (int64_t ox = 0; ox < wo; ++ox) {
                            int64_t ix = ox * stride + kx - pad;
                            S val = S(0);
                            if (iy >= 0 && iy < h && ix >= 0 && ix < wd)
                                val = frame[(ci * h + iy) * wd + ix];
                            cols(row, oy * wo + ox) = val;
                        }
                    }
                }
            }
        }
    }

    nd<S> forward(const nd<S>& x) {
        if (x.dims.size() != 4 || x.dims[1] != w.w.dims[1])
            throw usage_error("conv " + w.name + ": bad input shape");
        x_cache = x;
        int64_t T = x.dims[0], cin = x.dims[1], h = x.dims[2], wd = x.dims[3];
        int64_t cout = w.w.dims[0], ho = out_extent(h), wo = out_extent(wd);
        nd<S> y({T, cout, ho, wo});
        Eigen::Map<const mat_t<S>> W(w.w.v.data(), cout, cin * k * k);
        mat_t<S> cols;
        for (int64_t t = 0; t < T; ++t) {
            im2col(x.v.data() + t * cin * h * wd, cin, h, wd, cols);
            Eigen::Map<mat_t<S>> Y(y.v.data() + t * cout * ho * wo, cout, ho * wo);
            Y.noalias() = W * cols;
            for (int64_t co = 0; co < cout; ++co) Y.row(co).array() += b.w.v[size_t(co)];
        }
        return y;
    }

    nd<S> backward(const nd<S>& gy) {
        int64_t T = x_cache.dims[0], cin = x_cache.dims[1];
        int64_t h = x_cache.dims[2], wd = x_cache.dims[3];
        int64_t cout = w.w.dims[0], ho = out_extent(h), wo = out_extent(wd);
        nd<S> gx(x_cache.dims);
        Eigen::Map<const mat_t<S>> W(w.w.v.data(), cout, cin * k * k);
        Eigen::Map<mat_t<S>> GW(w.g.v.data(), cout, cin * k * k);
        mat_t<S> cols, gcols;
        for (int64_t t = 0; t < T; ++t) {
            im2col(x_cache.v.data() + t * cin * h * wd, cin, h, wd, cols);
            Eigen::Map<const mat_t<S>> GY(gy.v.data() + t * cout * ho * wo, cout, ho * wo);
            GW.noalias() += GY * cols.transpose();
            // fixed-order accumulation; vectorized redux would round
            // differently depending on buffer alignment
            for (int64_t co = 0; co < cout; ++co) {
                S acc = S(0);
                for (int64_t i = 0; i < ho * wo; ++i) acc += GY(co, i);
                b.g.v[size_t(co)] += acc;
            }
            gcols.noalias() = W.transpose() * GY;
            // col2im scatter-add
            S* gframe = gx.v.data() + t * cin * h * wd;
            for (int64_t ci = 0; ci < cin; ++ci) {
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        int64_t row = (ci * k + ky) * k + kx;
                        for (int64_t oy = 0; oy < ho; ++oy) {
                            int64_t iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int64_t ox = 0; ox < wo; ++ox) {
                                int64_t ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= wd) continue;
                                gframe[(ci * h + iy) * wd + ix] += gcols(row, oy * wo + ox);
                            }
                        }
                    }
                }
            }
        }
        return gx;
    }
};

// ---- nearest-neighbor 2x upsample ----

template <typename S>
inline nd<S> upsample2_forward(const nd<S>& x) {
    int64_t T = x.dims[0], c = x.dims[1], h = x.dims[2], w = x.dims[3];
    nd<S> y({T, c, h * 2, w * 2});
    for (int64_t t = 0; t < T; ++t)
        for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t i = 0; i < h; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    S v = x.v[size_t(((t * c + ci) * h + i) * w + j)];
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj)
                            y.v[size_t(((t * c + ci) * h * 2 + i * 2 + di) * w * 2 + j * 2 + dj)] =
                                v;
                }
    return y;
}

template <typename S>
inline nd<S> upsample2_backward(const nd<S>& gy, const std::vector<int64_t>& in_dims) {
    int64_t T = in_dims[0], c = in_dims[1], h = in_dims[2], w = in_dims[3];
    nd<S> gx(in_dims);
    for (int64_t t = 0; t < T; ++t)
        for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t i = 0; i < h; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    S acc = S(0);
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj)
                            acc += gy.v[size_t(((t * c + ci) * h * 2 + i * 2 + di) * w * 2 +
                                               j * 2 + dj)];
                    gx.v[size_t(((t * c + ci) * h + i) * w + j)] = acc;
                }
    return gx;
}

// ---- cross-attention ----

// Spatial positions of each frame attend to context rows; single head,
// residual add. x [T, C, H, W], ctx [M, d].
template <typename S>
struct cross_attention_t {
    param_t<S> wq, wk, wv, wo;  // wq [da, C], wk/wv [da, d], wo [C, da]
    nd<S> x_cache, ctx_cache;
    mat_t<S> K, V;
    std::vector<mat_t<S>> Q_f, A_f, O_f;

    void configure(const std::string& name, int64_t channels, int64_t ctx_dim, int64_t attn_dim) {
        wq.name = name + ".wq";
        wq.shape({attn_dim, channels});
        wk.name = name + ".wk";
        wk.shape({attn_dim, ctx_dim});
        wv.name = name + ".wv";
        wv.shape({attn_dim, ctx_dim});
        wo.name = name + ".wo";
        wo.shape({channels, attn_dim});
    }
    void init(rng& r) {
        auto fill = [&r](param_t<S>& p) {
            S s = S(1.0 / std::sqrt(double(p.w.dims[1])));
            for (S& x : p.w.v) x = S(r.normal()) * s;
        };
        fill(wq);
        fill(wk);
        fill(wv);
        fill(wo);
    }
    void collect(param_list<S>& ps) {
        ps.push_back(&wq);
        ps.push_back(&wk);
        ps.push_back(&wv);
        ps.push_back(&wo);
    }

    nd<S> forward(const nd<S>& x, const nd<S>& ctx) {
        if (ctx.dims.size() != 2 || ctx.dims[1] != wk.w.dims[1])
            throw usage_error("attention " + wq.name + ": bad context shape");
        x_cache = x;
        ctx_cache = ctx;
        int64_t T = x.dims[0], c = x.dims[1], h = x.dims[2], wd = x.dims[3];
        int64_t p = h * wd, m = ctx.dims[0], da = wq.w.dims[0];
        S scale = S(1.0 / std::sqrt(double(da)));

        Eigen::Map<const mat_t<S>> CTX(ctx.v.data(), m, ctx.dims[1]);
        Eigen::Map<const mat_t<S>> WK(wk.w.v.data(), da, wk.w.dims[1]);
        Eigen::Map<const mat_t<S>> WV(wv.w.v.data(), da, wv.w.dims[1]);
        Eigen::Map<const mat_t<S>> WQ(wq.w.v.data(), da, c);
        Eigen::Map<const mat_t<S>> WO(wo.w.v.data(), c, da);
        K.noalias() = CTX * WK.transpose();  // [M, da]
        V.noalias() = CTX * WV.transpose();

        Q_f.assign(size_t(T), {});
        A_f.assign(size_t(T), {});
        O_f.assign(size_t(T), {});
        nd<S> y = x;
        for (int64_t t = 0; t < T; ++t) {
            // Positions-as-rows view of the frame.
            mat_t<S> Xp(p, c);
            const S* frame = x.v.data() + t * c * p;
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t pp = 0; pp < p; ++pp) Xp(pp, ci) = frame[ci * p + pp];

            mat_t<S>& Q = Q_f[size_t(t)];
            Q.noalias() = Xp * WQ.transpose();  // [P, da]
            mat_t<S> logits = Q * K.transpose() * scale;  // [P, M]
            mat_t<S>& A = A_f[size_t(t)];
            A.resize(p, m);
            for (int64_t pp = 0; pp < p; ++pp) {
                S mx = logits.row(pp).maxCoeff();
                S denom = S(0);
                for (int64_t q = 0; q < m; ++q) {
                    S e = std::exp(logits(pp, q) - mx);
                    A(pp, q) = e;
                    denom += e;
                }
                A.row(pp) /= denom;
            }
            mat_t<S>& O = O_f[size_t(t)];
            O.noalias() = A * V;                   // [P, da]
            mat_t<S> Y2 = O * WO.transpose();      // [P, C]
            S* out_frame = y.v.data() + t * c * p;
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t pp = 0; pp < p; ++pp) out_frame[ci * p + pp] += Y2(pp, ci);
        }
        return y;
    }

    // Returns grad wrt x; accumulates wrt params and *gctx.
    nd<S> backward(const nd<S>& gy, nd<S>* gctx) {
        int64_t T = x_cache.dims[0], c = x_cache.dims[1];
        int64_t p = x_cache.dims[2] * x_cache.dims[3];
        int64_t m = ctx_cache.dims[0], d = ctx_cache.dims[1], da = wq.w.dims[0];
        S scale = S(1.0 / std::sqrt(double(da)));

        Eigen::Map<const mat_t<S>> CTX(ctx_cache.v.data(), m, d);
        Eigen::Map<const mat_t<S>> WQ(wq.w.v.data(), da, c);
        Eigen::Map<const mat_t<S>> WO(wo.w.v.data(), c, da);
        Eigen::Map<const mat_t<S>> WK(wk.w.v.data(), da, d);
        Eigen::Map<const mat_t<S>> WV(wv.w.v.data(), da, d);
        Eigen::Map<mat_t<S>> GWQ(wq.g.v.data(), da, c);
        Eigen::Map<mat_t<S>> GWK(wk.g.v.data(), da, d);
        Eigen::Map<mat_t<S>> GWV(wv.g.v.data(), da, d);
        Eigen::Map<mat_t<S>> GWO(wo.g.v.data(), c, da);

        mat_t<S> GK = mat_t<S>::Zero(m, da), GV = mat_t<S>::Zero(m, da);
        nd<S> gx = gy;  // residual path
        for (int64_t t = 0; t < T; ++t) {
            const S* frame = x_cache.v.data() + t * c * p;
            mat_t<S> Xp(p, c), GY2(p, c);
            const S* gframe = gy.v.data() + t * c * p;
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t pp = 0; pp < p; ++pp) {
                    Xp(pp, ci) = frame[ci * p + pp];
                    GY2(pp, ci) = gframe[ci * p + pp];
                }

            const mat_t<S>& Q = Q_f[size_t(t)];
            const mat_t<S>& A = A_f[size_t(t)];
            const mat_t<S>& O = O_f[size_t(t)];

            mat_t<S> GO = GY2 * WO;                 // [P, da]
            GWO.noalias() += GY2.transpose() * O;
            mat_t<S> GA = GO * V.transpose();       // [P, M]
            GV.noalias() += A.transpose() * GO;
            // softmax backward per row
            mat_t<S> GS(p, m);
            for (int64_t pp = 0; pp < p; ++pp) {
                S dotv = S(0);
                for (int64_t q = 0; q < m; ++q) dotv += GA(pp, q) * A(pp, q);
                for (int64_t q = 0; q < m; ++q)
                    GS(pp, q) = A(pp, q) * (GA(pp, q) - dotv) * scale;
            }
            mat_t<S> GQ = GS * K;                   // [P, da]
            GK.noalias() += GS.transpose() * Q;
            GWQ.noalias() += GQ.transpose() * Xp;
            mat_t<S> GXp = GQ * WQ;                 // [P, C]
            S* gx_frame = gx.v.data() + t * c * p;
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t pp = 0; pp < p; ++pp) gx_frame[ci * p + pp] += GXp(pp, ci);
        }
        GWK.noalias() += GK.transpose() * CTX;
        GWV.noalias() += GV.transpose() * CTX;
        if (gctx) {
            if (gctx->dims != ctx_cache.dims) *gctx = nd<S>(ctx_cache.dims);
            Eigen::Map<mat_t<S>> GCTX(gctx->v.data(), m, d);
            GCTX.noalias() += GK * WK + GV * WV;
        }
        return gx;
    }
};

// ---- temporal mixing ----

// Depthwise temporal conv (width 3, zero-padded) at fixed spatial position,
// gated residual: y = x + gate_c * sum_j k[c][j] * x[t+j-1]. Gates start at
// zero so the layer is the identity at init for any clip length.
template <typename S>
struct temporal_mix_t {
    param_t<S> kern, gate;  // kern [C, 3], gate [C]
    nd<S> x_cache, u_cache;

    void configure(const std::string& name, int64_t channels) {
        kern.name = name + ".k";
        kern.shape({channels, 3});
        kern.temporal = true;
        gate.name = name + ".gate";
        gate.shape({channels});
        gate.temporal = true;
    }
    void init(rng& r) {
        for (S& x : kern.w.v) x = S(r.normal()) * S(0.5);
        std::fill(gate.w.v.begin(), gate.w.v.end(), S(0));
    }
    void collect(param_list<S>& ps) {
        ps.push_back(&kern);
        ps.push_back(&gate);
    }

    nd<S> forward(const nd<S>& x) {
        x_cache = x;
        int64_t T = x.dims[0], c = x.dims[1], p = x.dims[2] * x.dims[3];
        u_cache = nd<S>(x.dims);
        nd<S> y = x;
        for (int64_t t = 0; t < T; ++t)
            for (int64_t ci = 0; ci < c; ++ci) {
                S k0 = kern.w.v[size_t(ci * 3 + 0)];
                S k1 = kern.w.v[size_t(ci * 3 + 1)];
                S k2 = kern.w.v[size_t(ci * 3 + 2)];
                S g = gate.w.v[size_t(ci)];
                const S* xm = t > 0 ? x.v.data() + ((t - 1) * c + ci) * p : nullptr;
                const S* x0 = x.v.data() + (t * c + ci) * p;
                const S* xp = t + 1 < T ? x.v.data() + ((t + 1) * c + ci) * p : nullptr;
                S* u = u_cache.v.data() + (t * c + ci) * p;
                S* yo = y.v.data() + (t * c + ci) * p;
                for (int64_t pp = 0; pp < p; ++pp) {
                    S acc = k1 * x0[pp];
                    if (xm) acc += k0 * xm[pp];
                    if (xp) acc += k2 * xp[pp];
                    u[pp] = acc;
                    yo[pp] += g * acc;
                }
            }
        return y;
    }

    nd<S> backward(const nd<S>& gy) {
        int64_t T = x_cache.dims[0], c = x_cache.dims[1];
        int64_t p = x_cache.dims[2] * x_cache.dims[3];
        nd<S> gx = gy;  // identity path
        for (int64_t ci = 0; ci < c; ++ci) {
            S g = gate.w.v[size_t(ci)];
            S k0 = kern.w.v[size_t(ci * 3 + 0)];
            S k1 = kern.w.v[size_t(ci * 3 + 1)];
            S k2 = kern.w.v[size_t(ci * 3 + 2)];
            S ggate = S(0), gk0 = S(0), gk1 = S(0), gk2 = S(0);
            for (int64_t t = 0; t < T; ++t) {
                const S* gyp = gy.v.data() + (t * c + ci) * p;
                const S* u = u_cache.v.data() + (t * c + ci) * p;
                const S* xm = t > 0 ? x_cache.v.data() + ((t - 1) * c + ci) * p : nullptr;
                const S* x0 = x_cache.v.data() + (t * c + ci) * p;
                const S* xp = t + 1 < T ? x_cache.v.data() + ((t + 1) * c + ci) * p : nullptr;
                S* gxm = t > 0 ? gx.v.data() + ((t - 1) * c + ci) * p : nullptr;
                S* gx0 = gx.v.data() + (t * c + ci) * p;
                S* gxp = t + 1 < T ? gx.v.data() + ((t + 1) * c + ci) * p : nullptr;
                for (int64_t pp = 0; pp < p; ++pp) {
                    S gu = g * gyp[pp];
                    ggate += gyp[pp] * u[pp];
                    gk1 += gu * x0[pp];
                    gx0[pp] += k1 * gu;
                    if (xm) {
                        gk0 += gu * xm[pp];
                        gxm[pp] += k0 * gu;
                    }
                    if (xp) {
                        gk2 += gu * xp[pp];
                        gxp[pp] += k2 * gu;
                    }
                }
            }
            gate.g.v[size_t(ci)] += ggate;
            kern.g.v[size_t(ci * 3 + 0)] += gk0;
            kern.g.v[size_t(ci * 3 + 1)] += gk1;
            kern.g.v[size_t(ci * 3 + 2)] += gk2;
        }
        return gx;
    }
};

// ---- residual block with timestep conditioning ----

// y = x + conv2(silu(conv1(x) + emb_proj(temb) per channel)).
template <typename S>
struct resblock_t {
    conv2d_t<S> conv1, conv2;
    linear_t<S> emb_proj;  // temb_dim -> C
    silu_t<S> act;

    void configure(const std::string& name, int64_t channels, int64_t temb_dim) {
        conv1.configure(name + ".conv1", channels, channels, 3, 1, 1);
        conv2.configure(name + ".conv2", channels, channels, 3, 1, 1);
        emb_proj.configure(name + ".emb", temb_dim, channels);
    }
    void init(rng& r) {
        conv1.init(r);
        conv2.init(r);
        emb_proj.init(r);
    }
    void collect(param_list<S>& ps) {
        conv1.collect(ps);
        conv2.collect(ps);
        emb_proj.collect(ps);
    }

    nd<S> forward(const nd<S>& x, const nd<S>& temb) {
        nd<S> h = conv1.forward(x);
        nd<S> bias = emb_proj.forward(temb);  // [1, C]
        int64_t T = h.dims[0], c = h.dims[1], p = h.dims[2] * h.dims[3];
        for (int64_t t = 0; t < T; ++t)
            for (int64_t ci = 0; ci < c; ++ci) {
                S bb = bias.v[size_t(ci)];
                S* hp = h.v.data() + (t * c + ci) * p;
                for (int64_t pp = 0; pp < p; ++pp) hp[pp] += bb;
            }
        nd<S> s = act.forward(h);
        nd<S> out = conv2.forward(s);
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += x.v[i];
        return out;
    }

    // Returns grad wrt x; accumulates param grads and *gtemb [1, temb_dim].
    nd<S> backward(const nd<S>& gy, nd<S>* gtemb) {
        nd<S> gs = conv2.backward(gy);
        nd<S> gh = act.backward(gs);
        int64_t T = gh.dims[0], c = gh.dims[1], p = gh.dims[2] * gh.dims[3];
        nd<S> gbias({int64_t(1), c});
        for (int64_t t = 0; t < T; ++t)
            for (int64_t ci = 0; ci < c; ++ci) {
                const S* ghp = gh.v.data() + (t * c + ci) * p;
                S acc = S(0);
                for (int64_t pp = 0; pp < p; ++pp) acc += ghp[pp];
                gbias.v[size_t(ci)] += acc;
            }
        nd<S> gt = emb_proj.backward(gbias);
        if (gtemb) {
            if (gtemb->dims != gt.dims) *gtemb = nd<S>(gt.dims);
            for (size_t i = 0; i < gt.v.size(); ++i) gtemb->v[i] += gt.v[i];
        }
        nd<S> gx = conv1.backward(gh);
        for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gy.v[i];
        return gx;
    }
};

// ---- timestep features ----

// Sinusoidal features of t in [0, 1], transformer-style frequencies.
template <typename S>
inline nd<S> timestep_features(S t, int64_t dim) {
    if (dim % 2 != 0) throw usage_error("timestep_features: dim must be even");
    int64_t half = dim / 2;
    nd<S> out({int64_t(1), dim});
    for (int64_t j = 0; j < half; ++j) {
        double freq = std::exp(-std::log(10000.0) * double(j) / double(half));
        double arg = 1000.0 * double(t) * freq;
        out.v[size_t(j)] = S(std::sin(arg));
        out.v[size_t(half + j)] = S(std::cos(arg));
    }
    return out;
}

// ---- f32 bridge for checkpoints ----

template <typename S>
inline tensor to_f32_tensor(const nd<S>& t) {
    tensor out(t.dims);
    for (size_t i = 0; i < t.v.size(); ++i) out.data[i] = float(t.v[i]);
    return out;
}

template <typename S>
inline void from_f32_tensor(const tensor& src, nd<S>& dst) {
    if (src.dims != dst.dims) throw data_error("checkpoint tensor shape mismatch");
    for (size_t i = 0; i < src.data.size(); ++i) dst.v[i] = S(src.data[i]);
}

}  // namespace relight
