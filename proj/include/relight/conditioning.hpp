// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "relight/dataset.hpp"
#include "relight/light_rig.hpp"
#include "relight/nn.hpp"

namespace relight {

// Per-light environment sums with their cell mean directions; the raw
// material of the lighting condition.
struct light_token_seq {
    light_weights tokens;          // N RGB sums, radiance * steradian
    std::vector<vec3d> mean_dirs;  // N unit vectors
};

inline light_token_seq tokens_from_env(const light_rig& rig, const radiance_map& map) {
    light_token_seq seq;
    seq.tokens = project_env_to_weights(rig, map);
    seq.mean_dirs = rig.cell_mean_dir;
    return seq;
}

enum class cond_mode { hdr, ref, both, none };

inline const char* to_string(cond_mode m) {
    switch (m) {
        case cond_mode::hdr: return "hdr";
        case cond_mode::ref: return "ref";
        case cond_mode::both: return "both";
        default: return "none";
    }
}

inline cond_mode cond_mode_from_string(const std::string& s) {
    if (s == "hdr") return cond_mode::hdr;
    if (s == "ref") return cond_mode::ref;
    if (s == "both") return cond_mode::both;
    if (s == "none") return cond_mode::none;
    throw data_error("unknown condition mode '" + s + "'");
}

inline bool mode_uses_hdr(cond_mode m) { return m == cond_mode::hdr || m == cond_mode::both; }
inline bool mode_uses_ref(cond_mode m) { return m == cond_mode::ref || m == cond_mode::both; }

// D_m clips train reference-conditioned only; D_l clips draw hdr / ref /
// both uniformly.
inline cond_mode sample_condition_mode(clip_source source, rng& r) {
    if (source == clip_source::motion_rich) return cond_mode::ref;
    switch (r.uniform_index(3)) {
        case 0: return cond_mode::hdr;
        case 1: return cond_mode::ref;
        default: return cond_mode::both;
    }
}

struct conditioner_config {
    int n_lights = 16;
    int pe_freqs = 4;   // F
    int d = 64;         // context width
    int mlp_hidden = 64;
    int ref_grid = 8;   // g; reference frames must be (8g) x (8g)
    int ref_c1 = 16, ref_c2 = 32;
    bool log1p_tokens = true;

    int pe_dim() const { return 6 * pe_freqs; }  // sin+cos per coordinate per frequency
    int context_rows() const { return n_lights + ref_grid * ref_grid; }
};

template <typename S>
inline nd<S> nd_from_image(const image3f& img) {
    nd<S> out({1, 3, img.height, img.width});
    size_t p = img.pixel_count();
    for (size_t i = 0; i < p; ++i)
        for (int c = 0; c < 3; ++c) out.v[size_t(c) * p + i] = S(img.pixels[i * 3 + size_t(c)]);
    return out;
}

// Token MLP + directional positional encodings, reference CNN encoder,
// and the learned null rows; assembles the cross-attention context.
template <typename S>
struct conditioner_t {
    conditioner_config cfg;
    linear_t<S> mlp1, mlp2;
    silu_t<S> mlp_act;
    conv2d_t<S> ref1, ref2, ref3;
    silu_t<S> ref_act1, ref_act2;
    param_t<S> null_hdr, null_ref;

    void configure(const conditioner_config& c, const std::string& prefix = "cond") {
        cfg = c;
        if (cfg.d <= cfg.pe_dim()) throw usage_error("conditioner: d must exceed pe_dim");
        mlp1.configure(prefix + ".mlp1", 3, cfg.mlp_hidden);
        mlp2.configure(prefix + ".mlp2", cfg.mlp_hidden, cfg.d - cfg.pe_dim());
        ref1.configure(prefix + ".ref1", 3, cfg.ref_c1, 3, 2, 1);
        ref2.configure(prefix + ".ref2", cfg.ref_c1, cfg.ref_c2, 3, 2, 1);
        ref3.configure(prefix + ".ref3", cfg.ref_c2, cfg.d, 3, 2, 1);
        null_hdr.name = prefix + ".null_hdr";
        null_hdr.shape({cfg.d});
        null_ref.name = prefix + ".null_ref";
        null_ref.shape({cfg.d});
    }

    void init(rng& r) {
        mlp1.init(r);
        mlp2.init(r);
        ref1.init(r);
        ref2.init(r);
        ref3.init(r);
        // Null rows start at zero, as learned placeholders.
        std::fill(null_hdr.w.v.begin(), null_hdr.w.v.end(), S(0));
        std::fill(null_ref.w.v.begin(), null_ref.w.v.end(), S(0));
    }

    void collect(param_list<S>& ps) {
        mlp1.collect(ps);
        mlp2.collect(ps);
        ref1.collect(ps);
        ref2.collect(ps);
        ref3.collect(ps);
        ps.push_back(&null_hdr);
        ps.push_back(&null_ref);
    }

    // row_i = MLP(log1p(token_i)) concat PE(mean_dir_i); output [N, d].
    nd<S> embed_tokens(const light_token_seq& seq) {
        int64_t n = int64_t(seq.tokens.size());
        if (n != cfg.n_lights) throw usage_error("embed_tokens: token count differs from config");
        if (seq.mean_dirs.size() != seq.tokens.size())
            throw usage_error("embed_tokens: token/direction count mismatch");
        nd<S> x({n, 3});
        for (int64_t i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) {
                double v = seq.tokens[size_t(i)][c];
                if (!std::isfinite(v)) throw numeric_error("embed_tokens: non-finite token");
                x.v[size_t(i * 3 + c)] = S(cfg.log1p_tokens ? std::log1p(v) : v);
            }
        nd<S> h = mlp2.forward(mlp_act.forward(mlp1.forward(x)));

        int64_t d = cfg.d, mlp_d = d - cfg.pe_dim();
        nd<S> out({n, d});
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t j = 0; j < mlp_d; ++j) out.v[size_t(i * d + j)] = h.v[size_t(i * mlp_d + j)];
            int64_t col = mlp_d;
            for (int c = 0; c < 3; ++c) {
                double coord = seq.mean_dirs[size_t(i)][c];
                for (int f = 0; f < cfg.pe_freqs; ++f) {
                    double arg = std::ldexp(coord, f);  // 2^f * coordinate
                    out.v[size_t(i * d + col++)] = S(std::sin(arg));
                    out.v[size_t(i * d + col++)] = S(std::cos(arg));
                }
            }
        }
        return out;
    }

    void backward_embed(const nd<S>& g_le) {
        int64_t n = g_le.dims[0], d = cfg.d, mlp_d = d - cfg.pe_dim();
        nd<S> gh({n, mlp_d});
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < mlp_d; ++j) gh.v[size_t(i * mlp_d + j)] = g_le.v[size_t(i * d + j)];
        mlp1.backward(mlp_act.backward(mlp2.backward(gh)));
    }

    // Strided conv stack to a g x g x d grid, reshaped row-major to g^2 x d.
    nd<S> encode_reference(const nd<S>& frame) {
        if (frame.dims.size() != 4 || frame.dims[0] != 1 || frame.dims[1] != 3)
            throw usage_error("encode_reference: frame must be 1 x 3 x H x W");
        int64_t h = frame.dims[2], w = frame.dims[3];
        if (h % 8 != 0 || w % 8 != 0)
            throw data_error("encode_reference: frame dims not divisible by total stride 8");
        if (h / 8 != cfg.ref_grid || w / 8 != cfg.ref_grid)
            throw data_error("encode_reference: frame dims disagree with the configured grid");
        nd<S> f3 = ref3.forward(ref_act2.forward(ref2.forward(ref_act1.forward(ref1.forward(frame)))));
        int64_t g = cfg.ref_grid, d = cfg.d;
        nd<S> out({g * g, d});
        for (int64_t c = 0; c < d; ++c)
            for (int64_t i = 0; i < g; ++i)
                for (int64_t j = 0; j < g; ++j)
                    out.v[size_t((i * g + j) * d + c)] = f3.v[size_t((c * g + i) * g + j)];
        return out;
    }

    void backward_ref(const nd<S>& g_ref) {
        int64_t g = cfg.ref_grid, d = cfg.d;
        nd<S> gmap({1, d, g, g});
        for (int64_t c = 0; c < d; ++c)
            for (int64_t i = 0; i < g; ++i)
                for (int64_t j = 0; j < g; ++j)
                    gmap.v[size_t((c * g + i) * g + j)] = g_ref.v[size_t((i * g + j) * d + c)];
        ref1.backward(ref_act1.backward(ref2.backward(ref_act2.backward(ref3.backward(gmap)))));
    }

    // Context: N light rows (or hdr-null copies), then g^2 reference rows
    // (or ref-null copies). Row count is mode-independent.
    nd<S> assemble(const nd<S>* le, const nd<S>* lref, cond_mode mode) {
        int64_t n = cfg.n_lights, g2 = int64_t(cfg.ref_grid) * cfg.ref_grid, d = cfg.d;
        if (mode_uses_hdr(mode)) {
            if (!le) throw usage_error("assemble: mode requires a light embedding");
            if (le->dims != std::vector<int64_t>{n, d})
                throw usage_error("assemble: light embedding has wrong shape");
        }
        if (mode_uses_ref(mode)) {
            if (!lref) throw usage_error("assemble: mode requires a reference embedding");
            if (lref->dims != std::vector<int64_t>{g2, d})
                throw usage_error("assemble: reference embedding has wrong shape");
        }
        nd<S> ctx({n + g2, d});
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < d; ++j)
                ctx.v[size_t(i * d + j)] =
                    mode_uses_hdr(mode) ? le->v[size_t(i * d + j)] : null_hdr.w.v[size_t(j)];
        for (int64_t i = 0; i < g2; ++i)
            for (int64_t j = 0; j < d; ++j)
                ctx.v[size_t((n + i) * d + j)] =
                    mode_uses_ref(mode) ? lref->v[size_t(i * d + j)] : null_ref.w.v[size_t(j)];
        return ctx;
    }

    // Routes the context gradient into the branch that produced each block
    // of rows; null rows accumulate into the null parameters.
    void backward(const nd<S>& gctx, cond_mode mode) {
        int64_t n = cfg.n_lights, g2 = int64_t(cfg.ref_grid) * cfg.ref_grid, d = cfg.d;
        if (gctx.dims != std::vector<int64_t>{n + g2, d})
            throw usage_error("conditioner backward: bad context grad shape");
        if (mode_uses_hdr(mode)) {
            nd<S> g_le({n, d});
            std::copy(gctx.v.begin(), gctx.v.begin() + n * d, g_le.v.begin());
            backward_embed(g_le);
        } else {
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < d; ++j) null_hdr.g.v[size_t(j)] += gctx.v[size_t(i * d + j)];
        }
        if (mode_uses_ref(mode)) {
            nd<S> g_ref({g2, d});
            std::copy(gctx.v.begin() + n * d, gctx.v.end(), g_ref.v.begin());
            backward_ref(g_ref);
        } else {
            for (int64_t i = 0; i < g2; ++i)
                for (int64_t j = 0; j < d; ++j)
                    null_ref.g.v[size_t(j)] += gctx.v[size_t((n + i) * d + j)];
        }
    }
};

}  // namespace relight
