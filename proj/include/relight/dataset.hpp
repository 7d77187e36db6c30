// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relight/container.hpp"
#include "relight/equirect.hpp"
#include "relight/errors.hpp"
#include "relight/light_rig.hpp"
#include "relight/render.hpp"
#include "relight/rng.hpp"

namespace relight {

// Relights an OLAT stack under per-light weights. Each OLAT image was
// rendered with intensity equal to its cell solid angle, so scaling by
// w_i / omega_i makes the sum equal a render under intensity w_i per light.
// Ascending light index, f64 accumulation.
inline image3f compose_relight(const olat_stack& stack, const light_weights& weights) {
    if (stack.light_images.empty()) throw usage_error("compose_relight: empty stack");
    if (weights.size() != stack.light_images.size())
        throw data_error("compose_relight: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(stack.light_images.size()) + " lights");
    if (stack.solid_angles.size() != stack.light_images.size())
        throw data_error("compose_relight: stack missing per-light solid angles");

    const image3f& first = stack.light_images[0];
    std::vector<double> acc(first.pixels.size(), 0.0);
    for (size_t i = 0; i < weights.size(); ++i) {
        const image3f& img = stack.light_images[i];
        if (!img.same_dims(first)) throw data_error("compose_relight: stack image dims disagree");
        vec3d s = weights[i] / stack.solid_angles[i];
        for (size_t p = 0; p < acc.size(); p += 3) {
            acc[p + 0] += s.x * double(img.pixels[p + 0]);
            acc[p + 1] += s.y * double(img.pixels[p + 1]);
            acc[p + 2] += s.z * double(img.pixels[p + 2]);
        }
    }
    image3f out(first.width, first.height);
    for (size_t p = 0; p < acc.size(); ++p) out.pixels[p] = float(acc[p]);
    return out;
}

// Per-frame camera window over a source image: pan in source pixels,
// zoom as an absolute magnification of the output crop.
struct motion_track {
    std::vector<double> pan_x, pan_y, zoom;

    int frames() const { return int(pan_x.size()); }

    void validate() const {
        if (pan_x.size() != pan_y.size() || pan_x.size() != zoom.size())
            throw usage_error("motion_track: channel lengths disagree");
        if (pan_x.empty()) throw usage_error("motion_track: empty");
        for (double z : zoom)
            if (!(z > 0.0)) throw data_error("motion_track: zoom must be positive");
    }

    static motion_track still(int frames) {
        motion_track t;
        t.pan_x.assign(size_t(frames), 0.0);
        t.pan_y.assign(size_t(frames), 0.0);
        t.zoom.assign(size_t(frames), 1.0);
        return t;
    }
};

struct augmented_clip {
    std::vector<image3f> frames;
    std::vector<parametric_flow> flows;  // frames.size() - 1
};

namespace dataset_detail {

// Sampling map for frame f: out pixel x reads source coordinate
// src_c + pan + (x - out_c) / zoom, pixel-center convention.
inline void window_extent(const motion_track& t, int f, int out_w, int out_h, int src_w, int src_h,
                          double* u0, double* u1, double* v0, double* v1) {
    double out_cx = (out_w - 1) / 2.0, out_cy = (out_h - 1) / 2.0;
    double src_cx = (src_w - 1) / 2.0, src_cy = (src_h - 1) / 2.0;
    double z = t.zoom[size_t(f)];
    *u0 = src_cx + t.pan_x[size_t(f)] + (0 - out_cx) / z;
    *u1 = src_cx + t.pan_x[size_t(f)] + (out_w - 1 - out_cx) / z;
    *v0 = src_cy + t.pan_y[size_t(f)] + (0 - out_cy) / z;
    *v1 = src_cy + t.pan_y[size_t(f)] + (out_h - 1 - out_cy) / z;
}

}  // namespace dataset_detail

inline augmented_clip camera_motion_augment(const std::vector<image3f>& sources,
                                            const motion_track& track, int out_w, int out_h) {
    track.validate();
    if (out_w < 1 || out_h < 1) throw usage_error("camera_motion_augment: bad output dims");
    int F = track.frames();
    if (sources.empty()) throw usage_error("camera_motion_augment: no source frames");
    if (sources.size() != 1 && int(sources.size()) != F)
        throw data_error("camera_motion_augment: " + std::to_string(sources.size()) +
                         " source frames for a " + std::to_string(F) + "-frame track");

    augmented_clip clip;
    for (int f = 0; f < F; ++f) {
        const image3f& src = sources[sources.size() == 1 ? 0 : size_t(f)];
        double u0, u1, v0, v1;
        dataset_detail::window_extent(track, f, out_w, out_h, src.width, src.height, &u0, &u1, &v0,
                                      &v1);
        if (u0 < 0.0 || v0 < 0.0 || u1 > src.width - 1.0 || v1 > src.height - 1.0)
            throw data_error("camera_motion_augment: window escapes source bounds at frame " +
                             std::to_string(f));

        image3f out(out_w, out_h);
        double out_cx = (out_w - 1) / 2.0, out_cy = (out_h - 1) / 2.0;
        double src_cx = (src.width - 1) / 2.0, src_cy = (src.height - 1) / 2.0;
        double z = track.zoom[size_t(f)];
        for (int y = 0; y < out_h; ++y) {
            double v = src_cy + track.pan_y[size_t(f)] + (y - out_cy) / z;
            for (int x = 0; x < out_w; ++x) {
                double u = src_cx + track.pan_x[size_t(f)] + (x - out_cx) / z;
                out.set(y, x, sample_bilinear_clamp(src, float(u), float(v)));
            }
        }
        clip.frames.push_back(std::move(out));
    }
    for (int f = 0; f + 1 < F; ++f) {
        parametric_flow fl;
        fl.scale = track.zoom[size_t(f)] / track.zoom[size_t(f) + 1];
        fl.dx = track.zoom[size_t(f)] * (track.pan_x[size_t(f) + 1] - track.pan_x[size_t(f)]);
        fl.dy = track.zoom[size_t(f)] * (track.pan_y[size_t(f) + 1] - track.pan_y[size_t(f)]);
        clip.flows.push_back(fl);
    }
    return clip;
}

inline augmented_clip camera_motion_augment(const image3f& source, const motion_track& track,
                                            int out_w, int out_h) {
    return camera_motion_augment(std::vector<image3f>{source}, track, out_w, out_h);
}

// Linear pan ramp + linear zoom ramp from 1 to a sampled end factor, with
// the pan rate capped so the window provably stays inside the source.
inline motion_track make_random_track(rng& r, int frames, int src_w, int src_h, int out_w,
                                      int out_h, double max_pan_rate = 2.0, double zoom_lo = 0.9,
                                      double zoom_hi = 1.1) {
    if (frames < 1) throw usage_error("make_random_track: need at least one frame");
    double z_end = r.uniform(zoom_lo, zoom_hi);
    double z_min = std::min(1.0, z_end);
    double margin_x = (src_w - 1) / 2.0 - (out_w - 1) / 2.0 / z_min;
    double margin_y = (src_h - 1) / 2.0 - (out_h - 1) / 2.0 / z_min;
    if (margin_x < 0.0 || margin_y < 0.0)
        throw usage_error("make_random_track: source too small for output window");
    double steps = std::max(1, frames - 1);
    double cap_x = std::min(max_pan_rate, margin_x / steps);
    double cap_y = std::min(max_pan_rate, margin_y / steps);
    double rate_x = r.uniform(-cap_x, cap_x);
    double rate_y = r.uniform(-cap_y, cap_y);

    motion_track t;
    for (int f = 0; f < frames; ++f) {
        double a = frames > 1 ? double(f) / double(frames - 1) : 0.0;
        t.pan_x.push_back(rate_x * f);
        t.pan_y.push_back(rate_y * f);
        t.zoom.push_back(1.0 + (z_end - 1.0) * a);
    }
    return t;
}

enum class clip_source { lighting_rich, motion_rich };

inline const char* to_string(clip_source s) {
    return s == clip_source::lighting_rich ? "lighting_rich" : "motion_rich";
}

inline clip_source clip_source_from_string(const std::string& s) {
    if (s == "lighting_rich") return clip_source::lighting_rich;
    if (s == "motion_rich") return clip_source::motion_rich;
    throw data_error("dataset: unknown clip source '" + s + "'");
}

struct clip_record {
    std::string id;
    clip_source source = clip_source::lighting_rich;
    std::vector<image3f> v_l;            // lit frames
    std::vector<image3f> v_a;            // albedo frames, exact or pseudo
    std::optional<radiance_map> e_l;     // present iff lighting-rich
    std::vector<int> ref_pool;           // indices into v_l
    std::vector<parametric_flow> flows;  // optional ground truth, v_l.size()-1 when present
};

inline void validate_record(const clip_record& rec) {
    if (rec.v_l.empty()) throw data_error("clip '" + rec.id + "': no frames");
    if (rec.v_l.size() != rec.v_a.size())
        throw data_error("clip '" + rec.id + "': V_l and V_a frame counts disagree");
    for (size_t f = 0; f < rec.v_l.size(); ++f)
        if (!rec.v_l[f].same_dims(rec.v_l[0]) || !rec.v_a[f].same_dims(rec.v_l[0]))
            throw data_error("clip '" + rec.id + "': frame dims disagree");
    bool lighting = rec.source == clip_source::lighting_rich;
    if (lighting != rec.e_l.has_value())
        throw data_error("clip '" + rec.id + "': E_l present iff lighting-rich violated");
    if (!rec.flows.empty() && rec.flows.size() != rec.v_l.size() - 1)
        throw data_error("clip '" + rec.id + "': flow count disagrees with frames");
    for (int idx : rec.ref_pool)
        if (idx < 0 || idx >= int(rec.v_l.size()))
            throw data_error("clip '" + rec.id + "': reference index out of range");
    for (const auto& img : rec.v_l) check_finite_nonnegative(img, ("clip '" + rec.id + "' V_l").c_str());
    for (const auto& img : rec.v_a) check_finite_nonnegative(img, ("clip '" + rec.id + "' V_a").c_str());
}

struct lighting_rich_config {
    int frames = 8;
    int out_w = 64, out_h = 64;
    double max_pan_rate = 2.0;
    double zoom_lo = 0.9, zoom_hi = 1.1;
};

// D_l: each record pairs one OLAT stack with a yaw-rotated env map, relit
// by composition, then pushed through a shared camera-motion track. The rng
// is forked per record, and env content never feeds the rng, so two builds
// over same-length env lists share tracks record for record.
inline std::vector<clip_record> build_lighting_rich(const std::vector<olat_stack>& stacks,
                                                    const light_rig& rig,
                                                    const std::vector<radiance_map>& envs,
                                                    int pairs_per_stack, uint64_t seed,
                                                    const lighting_rich_config& cfg = {}) {
    if (stacks.empty()) throw usage_error("build_lighting_rich: empty stack set");
    if (envs.empty()) throw usage_error("build_lighting_rich: no env maps");
    if (pairs_per_stack < 1) throw usage_error("build_lighting_rich: pairs_per_stack < 1");

    rng base(mix_seed(0xd1ull, seed));
    std::vector<clip_record> records;
    for (size_t s = 0; s < stacks.size(); ++s) {
        for (int j = 0; j < pairs_per_stack; ++j) {
            rng r = base.fork(uint64_t(s) * uint64_t(pairs_per_stack) + uint64_t(j));
            size_t env_idx = size_t(r.uniform_index(envs.size()));
            double yaw = r.uniform(0.0, kTwoPi);
            radiance_map rotated = rotate_env(envs[env_idx], yaw);
            light_weights w = project_env_to_weights(rig, rotated);
            image3f base_img = compose_relight(stacks[s], w);
            motion_track track = make_random_track(r, cfg.frames, base_img.width, base_img.height,
                                                   cfg.out_w, cfg.out_h, cfg.max_pan_rate,
                                                   cfg.zoom_lo, cfg.zoom_hi);

            clip_record rec;
            rec.id = stacks[s].scene_id + "/dl" + std::to_string(j);
            rec.source = clip_source::lighting_rich;
            augmented_clip lit = camera_motion_augment(base_img, track, cfg.out_w, cfg.out_h);
            augmented_clip alb = camera_motion_augment(stacks[s].albedo, track, cfg.out_w, cfg.out_h);
            rec.v_l = std::move(lit.frames);
            rec.v_a = std::move(alb.frames);
            rec.flows = std::move(lit.flows);
            rec.e_l = std::move(rotated);
            for (int f = 0; f < cfg.frames; ++f) rec.ref_pool.push_back(f);
            validate_record(rec);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

// Frame-level pseudo-albedo predictor: (clip, clip index, frame index) -> image.
using delighter_fn = std::function<image3f(const motion_clip&, int, int)>;

// Oracle delighter: exact albedo times per-frame multiplicative noise
// u_f ~ Uniform(1-delta, 1+delta). delta=0 gives the exact albedo.
inline delighter_fn make_flicker_oracle(double delta, uint64_t seed) {
    if (delta < 0.0 || delta >= 1.0) throw usage_error("flicker oracle: delta outside [0, 1)");
    return [delta, seed](const motion_clip& clip, int clip_idx, int frame) {
        rng r(mix_seed(seed, uint64_t(clip_idx), uint64_t(frame)));
        float u = float(r.uniform(1.0 - delta, 1.0 + delta));
        image3f out = clip.albedo[size_t(frame)];
        for (float& v : out.pixels) v *= u;
        return out;
    };
}

// D_m: lit frames pass through unchanged; pseudo-albedo comes from the
// delighter applied independently per frame. No E_l.
inline std::vector<clip_record> build_motion_rich(const std::vector<motion_clip>& clips,
                                                  const delighter_fn& delighter, uint64_t seed) {
    if (clips.empty()) throw usage_error("build_motion_rich: empty clip set");
    (void)seed;  // reserved for future subsampling; the oracle carries its own
    std::vector<clip_record> records;
    for (size_t c = 0; c < clips.size(); ++c) {
        const motion_clip& clip = clips[c];
        if (clip.frames.empty()) throw data_error("build_motion_rich: clip with no frames");
        clip_record rec;
        rec.id = "dm" + std::to_string(c);
        rec.source = clip_source::motion_rich;
        rec.v_l = clip.frames;
        for (size_t f = 0; f < clip.frames.size(); ++f) {
            image3f pseudo = delighter(clip, int(c), int(f));
            if (!pseudo.same_dims(clip.frames[f]))
                throw data_error("build_motion_rich: delighter output dims mismatch at clip " +
                                 std::to_string(c) + " frame " + std::to_string(f));
            rec.v_a.push_back(std::move(pseudo));
        }
        rec.flows = clip.flows;
        for (size_t f = 0; f < clip.frames.size(); ++f) rec.ref_pool.push_back(int(f));
        validate_record(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

// Procedural HDR environment: uniform tinted base plus 1..4 blobs of the
// form A * exp(kappa * (dot(d, mu) - 1)), a vMF-like lobe peaking at mu.
inline radiance_map make_procedural_env(uint64_t seed, int width, int height) {
    if (width < 1 || height < 1) throw usage_error("make_procedural_env: bad dims");
    rng r(mix_seed(0xe41ull, seed));
    double base = r.uniform(0.02, 0.2);
    vec3d tint{r.uniform(0.7, 1.0), r.uniform(0.7, 1.0), r.uniform(0.7, 1.0)};
    int blobs = 1 + int(r.uniform_index(4));
    std::vector<vec3d> mu(size_t(blobs), vec3d{});
    std::vector<double> kappa(size_t(blobs), 0.0);
    std::vector<vec3d> amp(size_t(blobs), vec3d{});
    for (int b = 0; b < blobs; ++b) {
        double z = r.uniform(-1.0, 1.0);
        double phi = r.uniform(0.0, kTwoPi);
        double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        mu[size_t(b)] = {s * std::cos(phi), s * std::sin(phi), z};
        kappa[size_t(b)] = r.uniform(5.0, 50.0);
        amp[size_t(b)] = {r.uniform(0.5, 5.0), r.uniform(0.5, 5.0), r.uniform(0.5, 5.0)};
    }

    radiance_map map(width, height);
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            vec3d d = pixel_to_dir(width, height, row, col);
            vec3d c = tint * base;
            for (int b = 0; b < blobs; ++b) {
                double lobe = std::exp(kappa[size_t(b)] * (dot(d, mu[size_t(b)]) - 1.0));
                c += amp[size_t(b)] * lobe;
            }
            map.set(row, col, {float(c.x), float(c.y), float(c.z)});
        }
    }
    return map;
}

inline std::vector<radiance_map> make_procedural_envs(uint64_t seed, int count, int width,
                                                      int height) {
    std::vector<radiance_map> envs;
    for (int i = 0; i < count; ++i)
        envs.push_back(make_procedural_env(mix_seed(seed, uint64_t(i)), width, height));
    return envs;
}

// ---- container bridge ----

struct dataset {
    std::vector<clip_record> records;
    std::vector<std::string> split;  // "train" / "test", aligned with records
    nlohmann::json meta;
};

namespace dataset_detail {

inline tensor tensor_from_frames(const std::vector<image3f>& frames) {
    int F = int(frames.size());
    tensor t({F, frames[0].height, frames[0].width, 3});
    size_t per = frames[0].pixels.size();
    for (int f = 0; f < F; ++f)
        std::copy(frames[size_t(f)].pixels.begin(), frames[size_t(f)].pixels.end(),
                  t.data.begin() + size_t(f) * per);
    return t;
}

inline std::vector<image3f> frames_from_tensor(const tensor& t) {
    if (t.rank() != 4 || t.dims[3] != 3) throw data_error("dataset: frames tensor is not F x H x W x 3");
    std::vector<image3f> frames;
    size_t per = size_t(t.dims[1]) * size_t(t.dims[2]) * 3;
    for (int64_t f = 0; f < t.dims[0]; ++f) {
        image3f img(int(t.dims[2]), int(t.dims[1]));
        std::copy(t.data.begin() + size_t(f) * per, t.data.begin() + size_t(f + 1) * per,
                  img.pixels.begin());
        frames.push_back(std::move(img));
    }
    return frames;
}

}  // namespace dataset_detail

// Train/test assignment: per-record fork of the split seed, train with
// probability train_frac (default 78%, mirroring the paper's 600/769).
inline std::vector<std::string> assign_split(size_t n_records, uint64_t seed,
                                             double train_frac = 0.78) {
    rng base(mix_seed(0x5b117ull, seed));
    std::vector<std::string> split;
    for (size_t k = 0; k < n_records; ++k)
        split.push_back(base.fork(k).uniform() < train_frac ? "train" : "test");
    return split;
}

inline void write_dataset(const std::string& bin_path, const std::string& manifest_path,
                          const std::vector<clip_record>& records,
                          const std::vector<std::string>& split,
                          const nlohmann::json& extra_meta = nlohmann::json::object()) {
    if (split.size() != records.size())
        throw usage_error("write_dataset: split size disagrees with record count");
    std::vector<lxpf_entry> entries;
    nlohmann::json record_meta = nlohmann::json::array();
    for (size_t k = 0; k < records.size(); ++k) {
        const clip_record& rec = records[k];
        validate_record(rec);
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "r%04zu", k);
        std::string p(prefix);
        entries.push_back({p + "/v_l", lxpf_dtype::f32, dataset_detail::tensor_from_frames(rec.v_l)});
        entries.push_back({p + "/v_a", lxpf_dtype::f32, dataset_detail::tensor_from_frames(rec.v_a)});
        if (rec.e_l) entries.push_back({p + "/e_l", lxpf_dtype::f32, tensor_from_image(*rec.e_l)});
        if (!rec.flows.empty()) {
            tensor ft({int64_t(rec.flows.size()), 3});
            for (size_t f = 0; f < rec.flows.size(); ++f) {
                ft.data[f * 3 + 0] = float(rec.flows[f].scale);
                ft.data[f * 3 + 1] = float(rec.flows[f].dx);
                ft.data[f * 3 + 2] = float(rec.flows[f].dy);
            }
            entries.push_back({p + "/flow", lxpf_dtype::f32, std::move(ft)});
        }
        tensor pool({int64_t(rec.ref_pool.size())});
        for (size_t i = 0; i < rec.ref_pool.size(); ++i) pool.data[i] = float(rec.ref_pool[i]);
        entries.push_back({p + "/ref_pool", lxpf_dtype::f32, std::move(pool)});
        record_meta.push_back({{"prefix", p},
                               {"id", rec.id},
                               {"source", to_string(rec.source)},
                               {"split", split[k]},
                               {"has_e_l", rec.e_l.has_value()},
                               {"has_flow", !rec.flows.empty()}});
    }
    nlohmann::json meta = extra_meta;
    meta["records"] = record_meta;
    write_lxpf(bin_path, manifest_path, entries, meta);
}

inline dataset read_dataset(const std::string& bin_path, const std::string& manifest_path) {
    lxpf_file file = read_lxpf(bin_path, manifest_path);
    const nlohmann::json& meta = file.manifest.at("meta");
    if (!meta.contains("records")) throw data_error("dataset: manifest lacks record metadata");

    dataset out;
    out.meta = meta;
    for (const auto& jr : meta.at("records")) {
        std::string p = jr.at("prefix").get<std::string>();
        clip_record rec;
        rec.id = jr.at("id").get<std::string>();
        rec.source = clip_source_from_string(jr.at("source").get<std::string>());
        rec.v_l = dataset_detail::frames_from_tensor(file.at(p + "/v_l").t);
        rec.v_a = dataset_detail::frames_from_tensor(file.at(p + "/v_a").t);
        if (jr.at("has_e_l").get<bool>()) rec.e_l = image_from_tensor(file.at(p + "/e_l").t);
        if (jr.at("has_flow").get<bool>()) {
            const tensor& ft = file.at(p + "/flow").t;
            if (ft.rank() != 2 || ft.dims[1] != 3) throw data_error("dataset: bad flow tensor");
            for (int64_t f = 0; f < ft.dims[0]; ++f)
                rec.flows.push_back({double(ft.data[size_t(f) * 3 + 0]),
                                     double(ft.data[size_t(f) * 3 + 1]),
                                     double(ft.data[size_t(f) * 3 + 2])});
        }
        const tensor& pool = file.at(p + "/ref_pool").t;
        for (float v : pool.data) rec.ref_pool.push_back(int(std::lround(v)));
        validate_record(rec);
        out.records.push_back(std::move(rec));
        out.split.push_back(jr.at("split").get<std::string>());
    }
    return out;
}

}  // namespace relight
