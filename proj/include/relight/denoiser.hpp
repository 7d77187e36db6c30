// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "relight/nn.hpp"

namespace relight {

// Two-resolution conditional video denoiser. Per-frame spatial residual
// blocks, one cross-attention per resolution, gated temporal mixing, a
// timestep MLP shared across blocks, zero-initialized output conv so the
// model predicts v = 0 at init.
struct denoiser_config {
    int latent_channels = 48;  // 3 * p^2 for patchify p=4
    int c0 = 32, c1 = 48;      // channels at full and half resolution
    int context_dim = 64;
    int attn_dim = 32;
    int temb_dim = 32;
};

template <typename S>
struct denoiser_t {
    denoiser_config cfg;

    linear_t<S> temb_l1, temb_l2;
    silu_t<S> temb_act;
    conv2d_t<S> in_conv;
    resblock_t<S> b1;
    cross_attention_t<S> x1;
    temporal_mix_t<S> t1;
    conv2d_t<S> down;
    resblock_t<S> b2;
    cross_attention_t<S> x2;
    temporal_mix_t<S> t2;
    conv2d_t<S> up_conv;
    resblock_t<S> b3;
    temporal_mix_t<S> t3;
    conv2d_t<S> out_conv;

    // backward bookkeeping
    std::vector<int64_t> h2_dims_;
    std::vector<int64_t> cat_dims_;

    void configure(const denoiser_config& c, const std::string& prefix = "denoiser") {
        cfg = c;
        int64_t cz = cfg.latent_channels;
        temb_l1.configure(prefix + ".temb1", cfg.temb_dim, cfg.temb_dim);
        temb_l2.configure(prefix + ".temb2", cfg.temb_dim, cfg.temb_dim);
        in_conv.configure(prefix + ".in", 2 * cz + 1, cfg.c0, 3, 1, 1);
        b1.configure(prefix + ".b1", cfg.c0, cfg.temb_dim);
        x1.configure(prefix + ".x1", cfg.c0, cfg.context_dim, cfg.attn_dim);
        t1.configure(prefix + ".t1", cfg.c0);
        down.configure(prefix + ".down", cfg.c0, cfg.c1, 3, 2, 1);
        b2.configure(prefix + ".b2", cfg.c1, cfg.temb_dim);
        x2.configure(prefix + ".x2", cfg.c1, cfg.context_dim, cfg.attn_dim);
        t2.configure(prefix + ".t2", cfg.c1);
        up_conv.configure(prefix + ".up", cfg.c1, cfg.c0, 3, 1, 1);
        b3.configure(prefix + ".b3", cfg.c0, cfg.temb_dim);
        t3.configure(prefix + ".t3", cfg.c0);
        out_conv.configure(prefix + ".out", cfg.c0, cz, 3, 1, 1);
    }

    void init(rng& r) {
        temb_l1.init(r);
        temb_l2.init(r);
        in_conv.init(r);
        b1.init(r);
        x1.init(r);
        t1.init(r);
        down.init(r);
        b2.init(r);
        x2.init(r);
        t2.init(r);
        up_conv.init(r);
        b3.init(r);
        t3.init(r);
        out_conv.init(r);
        out_conv.zero_init();  // v-hat = 0 at init
    }

    void collect(param_list<S>& ps) {
        temb_l1.collect(ps);
        temb_l2.collect(ps);
        in_conv.collect(ps);
        b1.collect(ps);
        x1.collect(ps);
        t1.collect(ps);
        down.collect(ps);
        b2.collect(ps);
        x2.collect(ps);
        t2.collect(ps);
        up_conv.collect(ps);
        b3.collect(ps);
        t3.collect(ps);
        out_conv.collect(ps);
    }

    // x_t, cond: [T, Cz, h, w]; mask: one 0/1 flag per frame, broadcast as
    // an input channel; t: diffusion time; ctx: [M, d]. Returns v-hat.
    nd<S> forward(const nd<S>& x_t, const nd<S>& cond, const std::vector<S>& mask, S t,
                  const nd<S>& ctx) {
        if (x_t.dims.size() != 4 || x_t.dims[1] != cfg.latent_channels)
            throw usage_error("denoiser: bad noise latent shape");
        if (cond.dims != x_t.dims) throw usage_error("denoiser: input latent shape mismatch");
        if (int64_t(mask.size()) != x_t.dims[0])
            throw usage_error("denoiser: mask length differs from frame count");
        if (x_t.dims[2] % 2 != 0 || x_t.dims[3] % 2 != 0)
            throw usage_error("denoiser: latent extent must be even");

        int64_t T = x_t.dims[0], cz = cfg.latent_channels, h = x_t.dims[2], w = x_t.dims[3];
        nd<S> cat({T, 2 * cz + 1, h, w});
        cat_dims_ = cat.dims;
        int64_t plane = h * w;
        for (int64_t f = 0; f < T; ++f) {
            S* dst = cat.v.data() + f * (2 * cz + 1) * plane;
            const S* xs = x_t.v.data() + f * cz * plane;
            const S* cs = cond.v.data() + f * cz * plane;
            std::copy(xs, xs + cz * plane, dst);
            std::copy(cs, cs + cz * plane, dst + cz * plane);
            std::fill(dst + 2 * cz * plane, dst + (2 * cz + 1) * plane, mask[size_t(f)]);
        }

        nd<S> temb = temb_l2.forward(temb_act.forward(temb_l1.forward(timestep_features<S>(t, cfg.temb_dim))));

        nd<S> h0 = in_conv.forward(cat);
        check_finite(h0, "in_conv");
        nd<S> a1 = t1.forward(x1.forward(b1.forward(h0, temb), ctx));
        check_finite(a1, "res1");
        nd<S> h2 = down.forward(a1);
        nd<S> a2 = t2.forward(x2.forward(b2.forward(h2, temb), ctx));
        check_finite(a2, "res2");
        h2_dims_ = a2.dims;
        nd<S> u = up_conv.forward(upsample2_forward(a2));
        for (size_t i = 0; i < u.v.size(); ++i) u.v[i] += a1.v[i];  // skip connection
        nd<S> a3 = t3.forward(b3.forward(u, temb));
        check_finite(a3, "res3");
        nd<S> v = out_conv.forward(a3);
        check_finite(v, "out_conv");
        return v;
    }

    // Accumulates parameter grads; adds the context gradient into *gctx
    // when given. Gradients wrt data inputs are discarded.
    void backward(const nd<S>& gv, nd<S>* gctx) {
        nd<S> gtemb;
        nd<S> g3 = b3.backward(t3.backward(out_conv.backward(gv)), &gtemb);
        nd<S> gskip = g3;  // from the additive skip
        nd<S> g2 = upsample2_backward(up_conv.backward(g3), h2_dims_);
        g2 = b2.backward(x2.backward(t2.backward(g2), gctx), &gtemb);
        nd<S> g1 = down.backward(g2);
        for (size_t i = 0; i < g1.v.size(); ++i) g1.v[i] += gskip.v[i];
        g1 = b1.backward(x1.backward(t1.backward(g1), gctx), &gtemb);
        in_conv.backward(g1);
        temb_l1.backward(temb_act.backward(temb_l2.backward(gtemb)));
    }
};

}  // namespace relight
