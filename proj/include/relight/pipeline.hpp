// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relight/dataset.hpp"
#include "relight/diffusion.hpp"
#include "relight/errors.hpp"
#include "relight/io.hpp"
#include "relight/light_rig.hpp"
#include "relight/metrics.hpp"
#include "relight/pfm.hpp"
#include "relight/png_io.hpp"
#include "relight/rgbe.hpp"
#include "relight/sequencer.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// small file plumbing shared by the pipeline and the CLI

inline nlohmann::json json_from_file(const std::string& path) {
    std::vector<uint8_t> bytes = read_file(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("'" + path + "': " + e.what());
    }
}

inline void json_to_file(const std::string& path, const nlohmann::json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string path_ext(const std::string& path) {
    std::string e = std::filesystem::path(path).extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

inline image3f read_image_any(const std::string& path) {
    std::string ext = path_ext(path);
    if (ext == ".pfm") return decode_pfm(read_file(path));
    if (ext == ".hdr") return decode_rgbe(read_file(path));
    throw usage_error("unsupported image format '" + ext + "' for '" + path + "'");
}

inline void write_image_any(const std::string& path, const image3f& img, double stops = 0.0) {
    std::string ext = path_ext(path);
    if (ext == ".pfm")
        write_file_atomic(path, encode_pfm(img));
    else if (ext == ".hdr")
        write_file_atomic(path, encode_rgbe(img));
    else if (ext == ".png")
        write_file_atomic(path, encode_png(img, stops));
    else
        throw usage_error("unsupported image format '" + ext + "' for '" + path + "'");
}

// Frame sequences on disk: <dir>/<stem>_NNNN.pfm, zero padded so the
// lexicographic listing is the frame order.
inline void write_frames_pfm(const std::string& dir, const std::vector<image3f>& frames,
                             const std::string& stem = "frame") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw data_error("cannot create directory '" + dir + "': " + ec.message());
    for (size_t f = 0; f < frames.size(); ++f) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_%04zu.pfm", stem.c_str(), f);
        write_file_atomic((std::filesystem::path(dir) / name).string(), encode_pfm(frames[f]));
    }
}

inline std::vector<image3f> read_frames_pfm(const std::string& dir) {
    std::error_code ec;
    std::vector<std::string> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        std::string p = entry.path().string();
        if (path_ext(p) == ".pfm") paths.push_back(p);
    }
    if (ec) throw data_error("cannot list directory '" + dir + "': " + ec.message());
    if (paths.empty()) throw data_error("no .pfm frames in '" + dir + "'");
    std::sort(paths.begin(), paths.end());
    std::vector<image3f> frames;
    for (const std::string& p : paths) frames.push_back(decode_pfm(read_file(p)));
    return frames;
}

// ---------------------------------------------------------------------------
// OLAT stack container bridge

inline void write_olat_stack(const std::string& bin_path, const std::string& manifest_path,
                             const olat_stack& stack) {
    if (stack.light_images.empty()) throw usage_error("write_olat_stack: empty stack");
    std::vector<lxpf_entry> entries;
    for (size_t i = 0; i < stack.light_images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "light_%04zu", i);
        entries.push_back({name, lxpf_dtype::f32, tensor_from_image(stack.light_images[i])});
    }
    entries.push_back({"albedo", lxpf_dtype::f32, tensor_from_image(stack.albedo)});
    tensor mask({stack.hit_mask.height, stack.hit_mask.width});
    std::copy(stack.hit_mask.pixels.begin(), stack.hit_mask.pixels.end(), mask.data.begin());
    entries.push_back({"hit_mask", lxpf_dtype::f32, std::move(mask)});
    nlohmann::json meta = {{"kind", "olat_stack"},
                           {"scene_id", stack.scene_id},
                           {"n_lights", stack.light_images.size()},
                           {"solid_angles", stack.solid_angles}};
    write_lxpf(bin_path, manifest_path, entries, meta);
}

inline olat_stack read_olat_stack(const std::string& bin_path, const std::string& manifest_path) {
    lxpf_file file = read_lxpf(bin_path, manifest_path);
    const nlohmann::json& meta = file.manifest.at("meta");
    if (meta.value("kind", "") != "olat_stack")
        throw data_error("'" + manifest_path + "' is not an OLAT stack manifest");
    olat_stack stack;
    stack.scene_id = meta.value("scene_id", "");
    size_t n = meta.at("n_lights").get<size_t>();
    stack.solid_angles = meta.at("solid_angles").get<std::vector<double>>();
    if (stack.solid_angles.size() != n)
        throw data_error("olat stack: solid angle count disagrees with n_lights");
    for (size_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "light_%04zu", i);
        stack.light_images.push_back(image_from_tensor(file.at(name).t));
    }
    stack.albedo = image_from_tensor(file.at("albedo").t);
    const tensor& mask = file.at("hit_mask").t;
    if (mask.rank() != 2) throw data_error("olat stack: hit mask is not H x W");
    stack.hit_mask = image1f(int(mask.dims[1]), int(mask.dims[0]));
    std::copy(mask.data.begin(), mask.data.end(), stack.hit_mask.pixels.begin());
    return stack;
}

// ---------------------------------------------------------------------------
// experiment configuration

struct pipeline_config {
    std::string rig = "desk";  // preset name or rig manifest path
    std::string dataset_bin, dataset_manifest;
    std::string delight_bin, delight_manifest;  // model D
    std::string relight_bin, relight_manifest;  // model R
    int sampler_steps = 30;
    int window_length = 30;
    int window_overlap = 4;
    uint64_t seed = 1;
    std::vector<std::string> metrics = {"psnr", "ssim", "warp_error", "flicker_index"};
    std::string stage_dir;  // when set, full_relight persists the albedo stage
};

inline nlohmann::json pipeline_config_json(const pipeline_config& c) {
    return {{"rig", c.rig},
            {"dataset_bin", c.dataset_bin},
            {"dataset_manifest", c.dataset_manifest},
            {"delight_bin", c.delight_bin},
            {"delight_manifest", c.delight_manifest},
            {"relight_bin", c.relight_bin},
            {"relight_manifest", c.relight_manifest},
            {"sampler_steps", c.sampler_steps},
            {"window_length", c.window_length},
            {"window_overlap", c.window_overlap},
            {"seed", c.seed},
            {"metrics", c.metrics},
            {"stage_dir", c.stage_dir}};
}

inline pipeline_config pipeline_config_from_json(const nlohmann::json& j) {
    pipeline_config c;
    c.rig = j.value("rig", c.rig);
    c.dataset_bin = j.value("dataset_bin", c.dataset_bin);
    c.dataset_manifest = j.value("dataset_manifest", c.dataset_manifest);
    c.delight_bin = j.value("delight_bin", c.delight_bin);
    c.delight_manifest = j.value("delight_manifest", c.delight_manifest);
    c.relight_bin = j.value("relight_bin", c.relight_bin);
    c.relight_manifest = j.value("relight_manifest", c.relight_manifest);
    c.sampler_steps = j.value("sampler_steps", c.sampler_steps);
    c.window_length = j.value("window_length", c.window_length);
    c.window_overlap = j.value("window_overlap", c.window_overlap);
    c.seed = j.value("seed", c.seed);
    c.metrics = j.value("metrics", c.metrics);
    c.stage_dir = j.value("stage_dir", c.stage_dir);
    return c;
}

inline std::string config_hash(const pipeline_config& c) {
    return hex64(fnv1a64(pipeline_config_json(c).dump()));
}

inline light_rig rig_from_preset(const std::string& name) {
    if (name == "desk") return desk_rig();
    return rig_from_json(json_from_file(name));
}

// Patch size implied by the checkpoint: latent channels = 3 p^2.
inline int patch_from_config(const denoiser_config& c) {
    for (int p = 1; 3 * p * p <= c.latent_channels; ++p)
        if (3 * p * p == c.latent_channels) return p;
    throw data_error("checkpoint/architecture mismatch: latent channels " +
                     std::to_string(c.latent_channels) + " is not 3 p^2");
}

// ---------------------------------------------------------------------------
// windowed sampling

// Shared driver: patchify, plan windows, sample each autoregressively with
// `fn`, stitch, decode. The window length clamps to the clip length and the
// overlap to length - 1, so clips shorter than the configured window run as
// a single window instead of being rejected.
inline std::vector<image3f> windowed_video(const std::vector<image3f>& frames, int patch,
                                           int window_length, int window_overlap,
                                           const window_model& fn) {
    if (frames.empty()) throw usage_error("windowed_video: no frames");
    nd<float> cond = patchify<float>(frames, patch);
    int total = int(frames.size());
    int length = std::min(window_length, total);
    int overlap = std::min(window_overlap, length - 1);
    window_plan plan = plan_windows(total, length, overlap);
    nd<float> latent = autoregressive_generate(fn, cond, plan);
    std::vector<image3f> out = unpatchify<float>(latent, patch);
    // sampled frames are linear radiance; clip the sampler's negative
    // excursions here so the in-memory video and its PFM copy agree
    for (image3f& img : out)
        for (float& v : img.pixels)
            if (v < 0.0f) v = 0.0f;
    return out;
}

namespace pipeline_detail {

// Per-window noise streams derive from (seed, window index) so the result
// does not depend on how many windows ran before.
inline window_model model_window_fn(video_model& model, nd<float> ctx,
                                    const pipeline_config& cfg) {
    int steps = cfg.sampler_steps;
    uint64_t seed = cfg.seed;
    return [&model, ctx = std::move(ctx), steps, seed](const nd<float>& wcond,
                                                       const std::vector<float>& mask, int widx) {
        rng noise(mix_seed(seed, 0x91bdull, uint64_t(widx)));
        return ddim_sample(model.net, wcond, mask, ctx, steps, noise);
    };
}

}  // namespace pipeline_detail

inline std::vector<image3f> delight_video(const std::vector<image3f>& frames, video_model& d,
                                          const pipeline_config& cfg) {
    nd<float> ctx = d.cond.assemble(nullptr, nullptr, cond_mode::none);
    return windowed_video(frames, patch_from_config(d.dcfg), cfg.window_length,
                          cfg.window_overlap, pipeline_detail::model_window_fn(d, ctx, cfg));
}

inline std::vector<image3f> relight_video(const std::vector<image3f>& albedo,
                                          const radiance_map& env, video_model& r,
                                          const light_rig& rig, const pipeline_config& cfg) {
    nd<float> le = r.cond.embed_tokens(tokens_from_env(rig, env));
    nd<float> ctx = r.cond.assemble(&le, nullptr, cond_mode::hdr);
    return windowed_video(albedo, patch_from_config(r.dcfg), cfg.window_length,
                          cfg.window_overlap, pipeline_detail::model_window_fn(r, ctx, cfg));
}

inline std::vector<image3f> relight_video(const std::vector<image3f>& albedo,
                                          const radiance_map& env, video_model& r,
                                          const pipeline_config& cfg) {
    light_rig rig = rig_from_preset(cfg.rig);
    return relight_video(albedo, env, r, rig, cfg);
}

inline std::vector<image3f> appearance_copy(const std::vector<image3f>& albedo,
                                            const image3f& reference, video_model& r,
                                            const pipeline_config& cfg) {
    nd<float> rf = nd_from_image<float>(reference);
    nd<float> lr = r.cond.encode_reference(rf);
    nd<float> ctx = r.cond.assemble(nullptr, &lr, cond_mode::ref);
    return windowed_video(albedo, patch_from_config(r.dcfg), cfg.window_length,
                          cfg.window_overlap, pipeline_detail::model_window_fn(r, ctx, cfg));
}

inline std::vector<image3f> full_relight(const std::vector<image3f>& frames,
                                         const radiance_map& env, video_model& d, video_model& r,
                                         const light_rig& rig, const pipeline_config& cfg) {
    std::vector<image3f> albedo = delight_video(frames, d, cfg);
    if (!cfg.stage_dir.empty()) write_frames_pfm(cfg.stage_dir, albedo, "albedo");
    return relight_video(albedo, env, r, rig, cfg);
}

inline std::vector<image3f> full_relight(const std::vector<image3f>& frames,
                                         const radiance_map& env, video_model& d, video_model& r,
                                         const pipeline_config& cfg) {
    light_rig rig = rig_from_preset(cfg.rig);
    return full_relight(frames, env, d, r, rig, cfg);
}

// ---------------------------------------------------------------------------
// evaluation

struct metric_selection {
    bool psnr = false, ssim = false, warp = false, flicker = false;
};

inline metric_selection selection_from_names(const std::vector<std::string>& names) {
    metric_selection s;
    for (const std::string& n : names) {
        if (n == "psnr")
            s.psnr = true;
        else if (n == "ssim")
            s.ssim = true;
        else if (n == "warp_error")
            s.warp = true;
        else if (n == "flicker_index")
            s.flicker = true;
        else
            throw usage_error("unknown metric '" + n + "'");
    }
    return s;
}

// Runs whichever stages have models over each record and scores the result
// against the record's ground truth. With both models: V_l -> albedo ->
// relit, scored against V_l. With only R: exact albedo in, scored against
// V_l. With only D: predicted albedo scored against V_a. Lighting-rich
// records relight under their stored E_l; motion-rich records run
// appearance copy against their first pooled reference.
inline nlohmann::json evaluate_records(const std::vector<clip_record>& records, video_model* d,
                                       video_model* r, const light_rig& rig,
                                       const pipeline_config& cfg) {
    if (!d && !r) throw usage_error("evaluate_records: no model to evaluate");
    if (records.empty()) throw usage_error("evaluate_records: no records");
    metric_selection sel = selection_from_names(cfg.metrics);

    nlohmann::json clips = nlohmann::json::array();
    double sum_psnr = 0, sum_ssim = 0, sum_warp = 0, sum_flicker = 0;
    int64_t n_psnr = 0, n_ssim = 0, n_warp = 0, n_flicker = 0;
    for (const clip_record& rec : records) {
        std::vector<image3f> albedo = d ? delight_video(rec.v_l, *d, cfg) : rec.v_a;
        std::vector<image3f> pred;
        const std::vector<image3f>* target = nullptr;
        if (r) {
            if (rec.e_l) {
                pred = relight_video(albedo, *rec.e_l, *r, rig, cfg);
            } else {
                if (rec.ref_pool.empty())
                    throw data_error("record '" + rec.id + "' has an empty reference pool");
                pred = appearance_copy(albedo, rec.v_l[size_t(rec.ref_pool.front())], *r, cfg);
            }
            target = &rec.v_l;
        } else {
            pred = std::move(albedo);
            target = &rec.v_a;
        }

        nlohmann::json row = {{"id", rec.id}, {"source", to_string(rec.source)}};
        if (sel.psnr) {
            double v = psnr(pred, *target);
            row["psnr"] = v;
            sum_psnr += v;
            ++n_psnr;
        }
        if (sel.ssim) {
            double v = ssim(pred, *target);
            row["ssim"] = v;
            sum_ssim += v;
            ++n_ssim;
        }
        if (sel.warp && !rec.flows.empty()) {
            double v = temporal_warp_error(pred, rec.flows);
            row["warp_error"] = v;
            sum_warp += v;
            ++n_warp;
        }
        if (sel.flicker) {
            double v = flicker_index(pred);
            row["flicker_index"] = v;
            sum_flicker += v;
            ++n_flicker;
        }
        clips.push_back(std::move(row));
    }

    nlohmann::json aggregate = {{"clips", records.size()}};
    if (n_psnr) aggregate["psnr"] = sum_psnr / double(n_psnr);
    if (n_ssim) aggregate["ssim"] = sum_ssim / double(n_ssim);
    if (n_warp) aggregate["warp_error"] = sum_warp / double(n_warp);
    if (n_flicker) aggregate["flicker_index"] = sum_flicker / double(n_flicker);
    return {{"provenance", {{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}}},
            {"clips", std::move(clips)},
            {"aggregate", std::move(aggregate)}};
}

}  // namespace relight
