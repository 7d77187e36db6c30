// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relight/conditioning.hpp"
#include "relight/container.hpp"
#include "relight/dataset.hpp"
#include "relight/denoiser.hpp"
#include "relight/equirect.hpp"
#include "relight/errors.hpp"
#include "relight/nn.hpp"
#include "relight/rng.hpp"
#include "relight/sequencer.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// cosine schedule, v-parameterization algebra

template <typename S>
struct noise_level {
    S alpha, sigma;
};

template <typename S>
inline noise_level<S> schedule_at(S t) {
    if (!(t >= S(0) && t <= S(1))) throw usage_error("schedule_at: t outside [0, 1]");
    double a = std::cos(0.5 * kPi * double(t));
    double s = std::sin(0.5 * kPi * double(t));
    return {S(a), S(s)};
}

template <typename S>
inline nd<S> add_noise(const nd<S>& x0, S t, const nd<S>& eps) {
    if (x0.dims != eps.dims) throw usage_error("add_noise: x0/eps shapes disagree");
    noise_level<S> nl = schedule_at(t);
    nd<S> out(x0.dims);
    for (size_t i = 0; i < x0.v.size(); ++i) out.v[i] = nl.alpha * x0.v[i] + nl.sigma * eps.v[i];
    return out;
}

template <typename S>
inline nd<S> v_target(const nd<S>& x0, const nd<S>& eps, S t) {
    if (x0.dims != eps.dims) throw usage_error("v_target: x0/eps shapes disagree");
    noise_level<S> nl = schedule_at(t);
    nd<S> out(x0.dims);
    for (size_t i = 0; i < x0.v.size(); ++i) out.v[i] = nl.alpha * eps.v[i] - nl.sigma * x0.v[i];
    return out;
}

template <typename S>
inline nd<S> x0_from_v(const nd<S>& xt, const nd<S>& v, S t) {
    if (xt.dims != v.dims) throw usage_error("x0_from_v: shapes disagree");
    noise_level<S> nl = schedule_at(t);
    nd<S> out(xt.dims);
    for (size_t i = 0; i < xt.v.size(); ++i) out.v[i] = nl.alpha * xt.v[i] - nl.sigma * v.v[i];
    return out;
}

template <typename S>
inline nd<S> eps_from_v(const nd<S>& xt, const nd<S>& v, S t) {
    if (xt.dims != v.dims) throw usage_error("eps_from_v: shapes disagree");
    noise_level<S> nl = schedule_at(t);
    nd<S> out(xt.dims);
    for (size_t i = 0; i < xt.v.size(); ++i) out.v[i] = nl.sigma * xt.v[i] + nl.alpha * v.v[i];
    return out;
}

template <typename S>
inline nd<S> randn(rng& r, const std::vector<int64_t>& dims) {
    nd<S> out(dims);
    for (auto& x : out.v) x = S(r.normal());
    return out;
}

// ---------------------------------------------------------------------------
// patchify: space-to-channel with p x p patches, pixels mapped to [-1, 1]

template <typename S>
inline nd<S> patchify(const std::vector<image3f>& frames, int p = 4) {
    if (frames.empty()) throw usage_error("patchify: no frames");
    if (p < 1) throw usage_error("patchify: patch size must be positive");
    int h = frames[0].height, w = frames[0].width;
    if (h % p != 0 || w % p != 0)
        throw data_error("patchify: frame extent not divisible by patch size");
    int64_t ph = h / p, pw = w / p, cz = int64_t(3) * p * p;
    nd<S> out({int64_t(frames.size()), cz, ph, pw});
    for (size_t f = 0; f < frames.size(); ++f) {
        const image3f& img = frames[f];
        if (img.height != h || img.width != w) throw data_error("patchify: frame dims disagree");
        S* dst = out.v.data() + int64_t(f) * cz * ph * pw;
        for (int ch = 0; ch < 3; ++ch)
            for (int py = 0; py < p; ++py)
                for (int px = 0; px < p; ++px) {
                    int64_t c = (int64_t(ch) * p + py) * p + px;
                    for (int64_t i = 0; i < ph; ++i)
                        for (int64_t j = 0; j < pw; ++j) {
                            float x = img.at(int(i * p + py), int(j * p + px))[ch];
                            dst[(c * ph + i) * pw + j] = (S(x) - S(0.5)) / S(0.5);
                        }
                }
    }
    return out;
}

template <typename S>
inline std::vector<image3f> unpatchify(const nd<S>& latent, int p = 4) {
    if (latent.dims.size() != 4) throw usage_error("unpatchify: need [F, Cz, h, w]");
    if (latent.dims[1] != int64_t(3) * p * p)
        throw usage_error("unpatchify: channel count does not match the patch size");
    int64_t fcount = latent.dims[0], ph = latent.dims[2], pw = latent.dims[3];
    int64_t cz = latent.dims[1];
    std::vector<image3f> frames;
    frames.reserve(size_t(fcount));
    for (int64_t f = 0; f < fcount; ++f) {
        image3f img(int(pw * p), int(ph * p));
        const S* src = latent.v.data() + f * cz * ph * pw;
        for (int ch = 0; ch < 3; ++ch)
            for (int py = 0; py < p; ++py)
                for (int px = 0; px < p; ++px) {
                    int64_t c = (int64_t(ch) * p + py) * p + px;
                    for (int64_t i = 0; i < ph; ++i)
                        for (int64_t j = 0; j < pw; ++j) {
                            S v = src[(c * ph + i) * pw + j];
                            img.at(int(i * p + py), int(j * p + px))[ch] =
                                float(v * S(0.5) + S(0.5));
                        }
                }
        frames.push_back(std::move(img));
    }
    return frames;
}

// ---------------------------------------------------------------------------
// batched v-prediction loss

template <typename S>
struct train_sample_t {
    nd<S> x0, cond;       // [F, Cz, h, w]
    std::vector<S> mask;  // per frame, 1 where cond carries ground truth
    nd<S> ctx;            // [M, d]
    S t{};
    nd<S> eps;
    cond_mode mode = cond_mode::none;
};

// Grand mean of squared v residuals over every element in the batch.
// Parameter gradients accumulate into the model; the caller zeroes them.
// Per-sample context gradients land in *gctx when requested.
template <typename S>
inline S loss_and_gradients(denoiser_t<S>& model, const std::vector<train_sample_t<S>>& batch,
                            std::vector<nd<S>>* gctx = nullptr) {
    if (batch.empty()) throw usage_error("loss_and_gradients: empty batch");
    int64_t total = 0;
    for (const auto& s : batch) total += int64_t(s.x0.v.size());
    if (gctx) gctx->assign(batch.size(), nd<S>());
    double loss = 0.0;
    for (size_t b = 0; b < batch.size(); ++b) {
        const train_sample_t<S>& s = batch[b];
        nd<S> xt = add_noise(s.x0, s.t, s.eps);
        nd<S> v = v_target(s.x0, s.eps, s.t);
        nd<S> vhat = model.forward(xt, s.cond, s.mask, s.t, s.ctx);
        nd<S> gv(vhat.dims);
        S scale = S(2) / S(double(total));
        for (size_t i = 0; i < vhat.v.size(); ++i) {
            double resid = double(vhat.v[i]) - double(v.v[i]);
            loss += resid * resid;
            gv.v[i] = S(resid) * scale;
        }
        model.backward(gv, gctx ? &(*gctx)[b] : nullptr);
    }
    return S(loss / double(total));
}

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay; moments stay aligned with the registry

template <typename S = float>
struct adamw_t {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
    int64_t step_count = 0;
    std::vector<std::vector<S>> m, v;

    void reset(const param_list<S>& ps) {
        m.clear();
        v.clear();
        for (const auto* p : ps) {
            m.emplace_back(p->w.v.size(), S(0));
            v.emplace_back(p->w.v.size(), S(0));
        }
        step_count = 0;
    }

    void step(const param_list<S>& ps, bool temporal_only = false) {
        if (m.empty() && v.empty()) reset(ps);
        if (m.size() != ps.size() || v.size() != ps.size())
            throw usage_error("adamw: optimizer state does not match the parameter list");
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, double(step_count));
        double bc2 = 1.0 - std::pow(beta2, double(step_count));
        for (size_t i = 0; i < ps.size(); ++i) {
            param_t<S>& p = *ps[i];
            if (temporal_only && !p.temporal) continue;
            if (m[i].size() != p.w.v.size())
                throw usage_error("adamw: moment shape does not match parameter '" + p.name + "'");
            for (size_t j = 0; j < p.w.v.size(); ++j) {
                double g = double(p.g.v[j]);
                double mj = beta1 * double(m[i][j]) + (1.0 - beta1) * g;
                double vj = beta2 * double(v[i][j]) + (1.0 - beta2) * g * g;
                m[i][j] = S(mj);
                v[i][j] = S(vj);
                double update = (mj / bc1) / (std::sqrt(vj / bc2) + eps);
                double w = double(p.w.v[j]);
                p.w.v[j] = S(w - lr * (update + weight_decay * w));
            }
        }
    }
};

// ---------------------------------------------------------------------------
// model bundle: denoiser plus its conditioner, one parameter registry

struct video_model {
    denoiser_config dcfg;
    conditioner_config ccfg;
    denoiser_t<float> net;
    conditioner_t<float> cond;
    param_list<float> params;

    video_model() = default;
    video_model(const video_model&) = delete;
    video_model& operator=(const video_model&) = delete;

    void build(const denoiser_config& dc, const conditioner_config& cc) {
        if (dc.context_dim != cc.d)
            throw usage_error("video_model: denoiser context_dim disagrees with conditioner d");
        dcfg = dc;
        ccfg = cc;
        net.configure(dcfg);
        cond.configure(ccfg);
        params.clear();
        net.collect(params);
        cond.collect(params);
    }

    void init(uint64_t seed) {
        rng r(mix_seed(0x11717ull, seed));
        net.init(r);
        cond.init(r);
    }
};

inline nlohmann::json denoiser_config_json(const denoiser_config& c) {
    return {{"latent_channels", c.latent_channels}, {"c0", c.c0},       {"c1", c.c1},
            {"context_dim", c.context_dim},         {"attn_dim", c.attn_dim},
            {"temb_dim", c.temb_dim}};
}

inline denoiser_config denoiser_config_from_json(const nlohmann::json& j) {
    denoiser_config c;
    c.latent_channels = j.at("latent_channels").get<int>();
    c.c0 = j.at("c0").get<int>();
    c.c1 = j.at("c1").get<int>();
    c.context_dim = j.at("context_dim").get<int>();
    c.attn_dim = j.at("attn_dim").get<int>();
    c.temb_dim = j.at("temb_dim").get<int>();
    return c;
}

inline nlohmann::json conditioner_config_json(const conditioner_config& c) {
    return {{"n_lights", c.n_lights},   {"pe_freqs", c.pe_freqs}, {"d", c.d},
            {"mlp_hidden", c.mlp_hidden}, {"ref_grid", c.ref_grid}, {"ref_c1", c.ref_c1},
            {"ref_c2", c.ref_c2},       {"log1p_tokens", c.log1p_tokens}};
}

inline conditioner_config conditioner_config_from_json(const nlohmann::json& j) {
    conditioner_config c;
    c.n_lights = j.at("n_lights").get<int>();
    c.pe_freqs = j.at("pe_freqs").get<int>();
    c.d = j.at("d").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.ref_grid = j.at("ref_grid").get<int>();
    c.ref_c1 = j.at("ref_c1").get<int>();
    c.ref_c2 = j.at("ref_c2").get<int>();
    c.log1p_tokens = j.at("log1p_tokens").get<bool>();
    return c;
}

// ---------------------------------------------------------------------------
// checkpoints: every parameter by name, optional optimizer moments, meta

inline void save_checkpoint(const std::string& bin_path, const std::string& manifest_path,
                            const param_list<float>& ps, const adamw_t<float>* opt,
                            nlohmann::json meta = nlohmann::json::object()) {
    if (opt && !opt->m.empty() && opt->m.size() != ps.size())
        throw usage_error("save_checkpoint: optimizer state does not match the parameter list");
    std::vector<lxpf_entry> entries;
    for (const auto* p : ps) {
        lxpf_entry e;
        e.name = p->name;
        e.dtype = lxpf_dtype::f32;
        e.t.dims = p->w.dims;
        e.t.data.assign(p->w.v.begin(), p->w.v.end());
        entries.push_back(std::move(e));
    }
    if (opt && !opt->m.empty()) {
        for (size_t i = 0; i < ps.size(); ++i) {
            lxpf_entry em, ev;
            em.name = ps[i]->name + ".adam_m";
            ev.name = ps[i]->name + ".adam_v";
            em.dtype = ev.dtype = lxpf_dtype::f32;
            em.t.dims = ev.t.dims = ps[i]->w.dims;
            em.t.data.assign(opt->m[i].begin(), opt->m[i].end());
            ev.t.data.assign(opt->v[i].begin(), opt->v[i].end());
            entries.push_back(std::move(em));
            entries.push_back(std::move(ev));
        }
        meta["optimizer"] = {{"step_count", opt->step_count},
                             {"lr", opt->lr},
                             {"beta1", opt->beta1},
                             {"beta2", opt->beta2},
                             {"eps", opt->eps},
                             {"weight_decay", opt->weight_decay}};
    }
    write_lxpf(bin_path, manifest_path, entries, meta);
}

// Loads parameters (and moments when `opt` is given and the file carries
// them) into an already-built registry. Returns the stored meta block.
inline nlohmann::json load_checkpoint(const std::string& bin_path,
                                      const std::string& manifest_path, const param_list<float>& ps,
                                      adamw_t<float>* opt = nullptr) {
    lxpf_file file = read_lxpf(bin_path, manifest_path);
    for (auto* p : ps) {
        if (!file.has(p->name))
            throw data_error("checkpoint/architecture mismatch: missing tensor '" + p->name + "'");
        const lxpf_entry& e = file.at(p->name);
        if (e.t.dims != p->w.dims)
            throw data_error("checkpoint/architecture mismatch: shape of '" + p->name +
                             "' disagrees");
        std::copy(e.t.data.begin(), e.t.data.end(), p->w.v.begin());
    }
    nlohmann::json meta = file.manifest.value("meta", nlohmann::json::object());
    if (opt) {
        if (meta.contains("optimizer")) {
            opt->reset(ps);
            const nlohmann::json& jo = meta["optimizer"];
            opt->step_count = jo.at("step_count").get<int64_t>();
            opt->lr = jo.at("lr").get<double>();
            opt->beta1 = jo.at("beta1").get<double>();
            opt->beta2 = jo.at("beta2").get<double>();
            opt->eps = jo.at("eps").get<double>();
            opt->weight_decay = jo.at("weight_decay").get<double>();
            for (size_t i = 0; i < ps.size(); ++i) {
                const std::string mn = ps[i]->name + ".adam_m";
                const std::string vn = ps[i]->name + ".adam_v";
                if (!file.has(mn) || !file.has(vn))
                    throw data_error("checkpoint/architecture mismatch: missing moments for '" +
                                     ps[i]->name + "'");
                const auto& em = file.at(mn);
                const auto& ev = file.at(vn);
                if (em.t.dims != ps[i]->w.dims || ev.t.dims != ps[i]->w.dims)
                    throw data_error("checkpoint/architecture mismatch: moment shape for '" +
                                     ps[i]->name + "' disagrees");
                std::copy(em.t.data.begin(), em.t.data.end(), opt->m[i].begin());
                std::copy(ev.t.data.begin(), ev.t.data.end(), opt->v[i].begin());
            }
        } else {
            opt->reset(ps);
        }
    }
    return meta;
}

inline void save_model(const std::string& bin_path, const std::string& manifest_path,
                       const video_model& model, const adamw_t<float>* opt,
                       nlohmann::json meta = nlohmann::json::object()) {
    meta["denoiser"] = denoiser_config_json(model.dcfg);
    meta["conditioner"] = conditioner_config_json(model.ccfg);
    save_checkpoint(bin_path, manifest_path, model.params, opt, std::move(meta));
}

inline nlohmann::json load_model(const std::string& bin_path, const std::string& manifest_path,
                                 video_model& model, adamw_t<float>* opt = nullptr) {
    lxpf_file file = read_lxpf(bin_path, manifest_path);
    nlohmann::json meta = file.manifest.value("meta", nlohmann::json::object());
    if (!meta.contains("denoiser") || !meta.contains("conditioner"))
        throw data_error("checkpoint/architecture mismatch: config block missing");
    model.build(denoiser_config_from_json(meta["denoiser"]),
                conditioner_config_from_json(meta["conditioner"]));
    return load_checkpoint(bin_path, manifest_path, model.params, opt);
}

// ---------------------------------------------------------------------------
// two-stage trainer

enum class model_role { delight, relight };

struct train_config {
    int stage1_steps = 200;
    int stage2_steps = 50;
    int batch = 4;
    int stage1_frames = 2;
    int stage2_frames = 8;
    int patch = 4;
    double lr = 2e-3;
    double weight_decay = 1e-4;
    uint64_t seed = 1;
    int log_every = 0;
    int limit_steps = 0;  // stop after this many steps in one call; 0 = run out
};

inline nlohmann::json train_config_json(const train_config& c) {
    return {{"stage1_steps", c.stage1_steps},
            {"stage2_steps", c.stage2_steps},
            {"batch", c.batch},
            {"stage1_frames", c.stage1_frames},
            {"stage2_frames", c.stage2_frames},
            {"patch", c.patch},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"seed", c.seed},
            {"log_every", c.log_every},
            {"limit_steps", c.limit_steps}};
}

// Absent keys keep their defaults, so config files can stay minimal.
inline train_config train_config_from_json(const nlohmann::json& j) {
    train_config c;
    c.stage1_steps = j.value("stage1_steps", c.stage1_steps);
    c.stage2_steps = j.value("stage2_steps", c.stage2_steps);
    c.batch = j.value("batch", c.batch);
    c.stage1_frames = j.value("stage1_frames", c.stage1_frames);
    c.stage2_frames = j.value("stage2_frames", c.stage2_frames);
    c.patch = j.value("patch", c.patch);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.log_every = j.value("log_every", c.log_every);
    c.limit_steps = j.value("limit_steps", c.limit_steps);
    return c;
}

struct train_report {
    std::vector<double> losses;  // one entry per optimizer step taken here
    int steps_done = 0;
};

namespace diffusion_detail {

inline std::vector<image3f> frame_window(const std::vector<image3f>& frames, int begin,
                                         int count) {
    return std::vector<image3f>(frames.begin() + begin, frames.begin() + begin + count);
}

}  // namespace diffusion_detail

// Draws clips, frame windows, condition modes, overlap substitutions and
// noise from per-(step, item) rng streams, so a run resumes bit-exactly
// from opt.step_count.
using progress_fn = std::function<void(int, double)>;

inline train_report train_model(video_model& model, const std::vector<clip_record>& records,
                                const light_rig* rig, model_role role, const train_config& cfg,
                                adamw_t<float>& opt, const progress_fn& progress = {}) {
    if (records.empty()) throw usage_error("train_model: empty dataset");
    if (cfg.batch < 1) throw usage_error("train_model: batch must be positive");
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    if (opt.m.empty()) opt.reset(model.params);

    int64_t total_steps = cfg.stage1_steps + cfg.stage2_steps;
    int64_t end_step = total_steps;
    if (cfg.limit_steps > 0)
        end_step = std::min<int64_t>(total_steps, opt.step_count + cfg.limit_steps);
    train_report report;
    for (int64_t step = opt.step_count; step < end_step; ++step) {
        bool stage2 = step >= cfg.stage1_steps;
        int fcount = stage2 ? cfg.stage2_frames : cfg.stage1_frames;

        std::vector<size_t> eligible;
        for (size_t i = 0; i < records.size(); ++i)
            if (int(records[i].v_l.size()) >= fcount) eligible.push_back(i);
        if (eligible.empty())
            throw usage_error("train_model: no clip has at least " + std::to_string(fcount) +
                              " frames");

        zero_grads(model.params);
        std::vector<train_sample_t<float>> batch;
        batch.reserve(size_t(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b) {
            rng r(mix_seed(cfg.seed, 0x57e9ull + uint64_t(step), uint64_t(b)));
            const clip_record& rec = records[eligible[r.uniform_index(eligible.size())]];
            int start = 0;
            if (int(rec.v_l.size()) > fcount)
                start = int(r.uniform_index(size_t(int(rec.v_l.size()) - fcount) + 1));

            // Delight trains the inverse mapping on D_l; D_m records train
            // appearance copy for both models, which carries the temporal
            // consistency signal.
            bool copy_task = rec.source == clip_source::motion_rich;
            bool inverse = role == model_role::delight && !copy_task;
            const std::vector<image3f>& tgt_frames = inverse ? rec.v_a : rec.v_l;
            const std::vector<image3f>& src_frames = inverse ? rec.v_l : rec.v_a;
            train_sample_t<float> s;
            s.mode = role == model_role::delight
                         ? (copy_task ? cond_mode::ref : cond_mode::none)
                         : sample_condition_mode(rec.source, r);
            s.x0 = patchify<float>(diffusion_detail::frame_window(tgt_frames, start, fcount),
                                   cfg.patch);
            s.cond = patchify<float>(diffusion_detail::frame_window(src_frames, start, fcount),
                                     cfg.patch);
            s.mask.assign(size_t(fcount), 0.0f);

            int overlap = std::min(sample_overlap_T(r), fcount - 1);
            int64_t per = s.x0.dims[1] * s.x0.dims[2] * s.x0.dims[3];
            for (int f = 0; f < overlap; ++f) {
                std::copy(s.x0.v.begin() + f * per, s.x0.v.begin() + (f + 1) * per,
                          s.cond.v.begin() + f * per);
                s.mask[size_t(f)] = 1.0f;
            }

            std::optional<nd<float>> le, lref;
            if (mode_uses_hdr(s.mode)) {
                if (!rig) throw usage_error("train_model: hdr conditioning needs a light rig");
                if (!rec.e_l)
                    throw data_error("train_model: record '" + rec.id +
                                     "' lacks an environment for hdr conditioning");
                le = model.cond.embed_tokens(tokens_from_env(*rig, *rec.e_l));
            }
            if (mode_uses_ref(s.mode)) {
                if (rec.ref_pool.empty())
                    throw data_error("train_model: record '" + rec.id +
                                     "' has an empty reference pool");
                int idx = rec.ref_pool[r.uniform_index(rec.ref_pool.size())];
                if (idx < 0 || idx >= int(rec.v_l.size()))
                    throw data_error("train_model: reference index out of range in '" + rec.id +
                                     "'");
                lref = model.cond.encode_reference(nd_from_image<float>(rec.v_l[size_t(idx)]));
            }
            s.ctx = model.cond.assemble(le ? &*le : nullptr, lref ? &*lref : nullptr, s.mode);

            s.t = float(r.uniform());
            s.eps = randn<float>(r, s.x0.dims);
            batch.push_back(std::move(s));
        }

        std::vector<nd<float>> gctx;
        double loss = double(loss_and_gradients(model.net, batch, &gctx));
        for (size_t b = 0; b < batch.size(); ++b)
            model.cond.backward(gctx[b], batch[b].mode);
        opt.step(model.params, stage2);

        report.losses.push_back(loss);
        ++report.steps_done;
        if (progress && cfg.log_every > 0 && (step + 1) % cfg.log_every == 0)
            progress(int(step + 1), loss);
    }
    return report;
}

// ---------------------------------------------------------------------------
// DDIM sampler over the cosine schedule, descending t grid

template <typename S>
using v_fn = std::function<nd<S>(const nd<S>&, S)>;

template <typename S>
inline nd<S> ddim_sample_fn(const v_fn<S>& f, nd<S> x, int steps) {
    if (steps < 1) throw usage_error("ddim: steps must be positive");
    for (int i = 0; i < steps; ++i) {
        S t = S(steps - i) / S(steps);
        S tn = S(steps - i - 1) / S(steps);
        noise_level<S> now = schedule_at(t);
        noise_level<S> nxt = schedule_at(tn);
        nd<S> v = f(x, t);
        if (v.dims != x.dims) throw data_error("ddim: model changed the latent shape");
        for (size_t j = 0; j < x.v.size(); ++j) {
            S x0 = now.alpha * x.v[j] - now.sigma * v.v[j];
            S eps = now.sigma * x.v[j] + now.alpha * v.v[j];
            x.v[j] = nxt.alpha * x0 + nxt.sigma * eps;
        }
    }
    return x;
}

template <typename S>
inline nd<S> ddim_sample(denoiser_t<S>& model, const nd<S>& cond, const std::vector<S>& mask,
                         const nd<S>& ctx, int steps, rng& noise_rng) {
    nd<S> x = randn<S>(noise_rng, cond.dims);
    return ddim_sample_fn<S>(
        [&](const nd<S>& xt, S t) { return model.forward(xt, cond, mask, t, ctx); }, std::move(x),
        steps);
}

}  // namespace relight
