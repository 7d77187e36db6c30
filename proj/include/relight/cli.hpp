// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "relight/dataset.hpp"
#include "relight/diffusion.hpp"
#include "relight/pipeline.hpp"
#include "relight/render.hpp"
#include "relight/scene.hpp"

namespace relight {
namespace cli_detail {

// Every subcommand takes --config <json file> and --seed; the flag wins
// over whatever seed the config carries.
struct command_ctx {
    std::string config;
    uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    bool has_seed() const { return seed_opt && seed_opt->count() > 0; }
    uint64_t pick_seed(uint64_t from_config) const { return has_seed() ? seed : from_config; }
    nlohmann::json cfg() const {
        return config.empty() ? nlohmann::json::object() : json_from_file(config);
    }
};

inline void add_common(CLI::App* sub, command_ctx& c) {
    sub->add_option("--config", c.config, "JSON config file");
    c.seed_opt = sub->add_option("--seed", c.seed, "override the configured seed");
}

// "scenes": [paths...] or "random_scenes": N with scene_width/scene_height.
inline std::vector<scene_spec> scenes_from_config(const nlohmann::json& j, uint64_t seed) {
    std::vector<scene_spec> scenes;
    if (j.contains("scenes")) {
        for (const auto& p : j.at("scenes"))
            scenes.push_back(scene_from_json(json_from_file(p.get<std::string>())));
    } else {
        int count = j.value("random_scenes", 0);
        if (count < 1) throw usage_error("dataset config: need \"scenes\" or \"random_scenes\"");
        int w = j.value("scene_width", 64), h = j.value("scene_height", 64);
        for (int i = 0; i < count; ++i)
            scenes.push_back(make_random_scene(mix_seed(seed, 0x5c1ull, uint64_t(i)), w, h));
    }
    if (scenes.empty()) throw usage_error("dataset config: no scenes");
    return scenes;
}

// "envs": [paths...] or {"count": N, "width": W, "height": H}.
inline std::vector<radiance_map> envs_from_config(const nlohmann::json& j, uint64_t seed) {
    if (!j.contains("envs")) throw usage_error("dataset config: missing \"envs\"");
    const nlohmann::json& je = j.at("envs");
    std::vector<radiance_map> envs;
    if (je.is_array()) {
        for (const auto& p : je) envs.push_back(read_image_any(p.get<std::string>()));
        if (envs.empty()) throw usage_error("dataset config: empty env list");
    } else {
        int count = je.value("count", 0);
        if (count < 1) throw usage_error("dataset config: envs.count must be positive");
        envs = make_procedural_envs(mix_seed(seed, 0xe9ull), count, je.value("width", 32),
                                    je.value("height", 16));
    }
    return envs;
}

// Random scene plus gentle pan/zoom camera tracks over [0, frames-1] and a
// slow slide of the first sphere, so motion-rich clips actually move.
inline scene_spec make_motion_scene(uint64_t seed, int width, int height, int frames) {
    scene_spec scene = make_random_scene(seed, width, height);
    scene.id = "motion-" + std::to_string(seed);
    rng r(mix_seed(0x3a7ull, seed));
    double last = std::max(1, frames - 1);

    anim_track pan;
    pan.target = anim_track::target_kind::camera_pan;
    pan.key_frames = {0.0, last};
    pan.key_values = {{0, 0, 0}, {r.uniform(-3.0, 3.0), r.uniform(-2.0, 2.0), 0.0}};
    scene.tracks.push_back(pan);

    anim_track zoom;
    zoom.target = anim_track::target_kind::camera_zoom;
    zoom.key_frames = {0.0, last};
    zoom.key_values = {{1.0, 0, 0}, {r.uniform(0.92, 1.08), 0, 0}};
    scene.tracks.push_back(zoom);

    anim_track slide;
    slide.target = anim_track::target_kind::translate;
    slide.object = 0;
    slide.key_frames = {0.0, last};
    slide.key_values = {{0, 0, 0}, {r.uniform(-0.2, 0.2), 0.0, r.uniform(-0.2, 0.2)}};
    scene.tracks.push_back(slide);

    validate_scene(scene);
    return scene;
}

inline std::vector<clip_record> filter_split(dataset&& ds, const std::string& split) {
    std::vector<clip_record> records;
    for (size_t k = 0; k < ds.records.size(); ++k)
        if (split.empty() || ds.split[k] == split) records.push_back(std::move(ds.records[k]));
    return records;
}

inline void run_rig_build(const command_ctx& ctx, const std::string& out) {
    nlohmann::json j = ctx.cfg();
    light_rig rig;
    if (j.contains("preset")) {
        rig = rig_from_preset(j.at("preset").get<std::string>());
    } else {
        std::string layout = j.value("layout", "fibonacci");
        std::string cov = j.value("coverage", "full-sphere");
        rig_layout lay;
        if (layout == "fibonacci")
            lay = rig_layout::fibonacci;
        else if (layout == "cylindrical")
            lay = rig_layout::cylindrical;
        else
            throw usage_error("rig config: unknown layout '" + layout + "'");
        rig_coverage rc;
        if (cov == "full-sphere")
            rc = rig_coverage::full_sphere;
        else if (cov == "frontal-hemisphere")
            rc = rig_coverage::frontal_hemisphere;
        else
            throw usage_error("rig config: unknown coverage '" + cov + "'");
        rig = build_rig(j.value("lights", 16), lay, rc, j.value("map_width", 32),
                        j.value("map_height", 16), j.value("rows", 0),
                        j.value("lights_per_row", 0));
    }
    json_to_file(out, rig_to_json(rig));
    std::printf("wrote %d-light rig to %s\n", rig.n(), out.c_str());
}

inline void run_render_olat(const command_ctx& ctx, const std::string& out_bin,
                            const std::string& out_man) {
    nlohmann::json j = ctx.cfg();
    uint64_t seed = ctx.pick_seed(j.value("seed", uint64_t(1)));
    scene_spec scene =
        j.contains("scene")
            ? scene_from_json(json_from_file(j.at("scene").get<std::string>()))
            : make_random_scene(seed, j.value("scene_width", 64), j.value("scene_height", 64));
    light_rig rig = rig_from_preset(j.value("rig", "desk"));
    olat_stack stack = render_olat(scene, j.value("frame", 0.0), rig);
    write_olat_stack(out_bin, out_man, stack);
    std::printf("wrote %zu OLAT images for scene '%s' to %s\n", stack.light_images.size(),
                stack.scene_id.c_str(), out_bin.c_str());
}

inline void run_build_dl(const command_ctx& ctx, const std::string& out_bin,
                         const std::string& out_man) {
    nlohmann::json j = ctx.cfg();
    uint64_t seed = ctx.pick_seed(j.value("seed", uint64_t(1)));
    light_rig rig = rig_from_preset(j.value("rig", "desk"));
    std::vector<olat_stack> stacks;
    for (const scene_spec& s : scenes_from_config(j, seed))
        stacks.push_back(render_olat(s, j.value("frame", 0.0), rig));
    std::vector<radiance_map> envs = envs_from_config(j, seed);

    lighting_rich_config lcfg;
    lcfg.frames = j.value("frames", lcfg.frames);
    lcfg.out_w = j.value("out_width", 48);
    lcfg.out_h = j.value("out_height", 48);
    lcfg.max_pan_rate = j.value("max_pan_rate", lcfg.max_pan_rate);
    lcfg.zoom_lo = j.value("zoom_lo", lcfg.zoom_lo);
    lcfg.zoom_hi = j.value("zoom_hi", lcfg.zoom_hi);
    std::vector<clip_record> records =
        build_lighting_rich(stacks, rig, envs, j.value("pairs_per_stack", 1), seed, lcfg);
    std::vector<std::string> split =
        assign_split(records.size(), seed, j.value("train_frac", 0.78));
    write_dataset(out_bin, out_man, records, split,
                  {{"kind", "d_l"}, {"rig", rig_to_json(rig)}, {"seed", seed}});
    std::printf("wrote %zu lighting-rich records to %s\n", records.size(), out_bin.c_str());
}

inline void run_build_dm(const command_ctx& ctx, const std::string& out_bin,
                         const std::string& out_man) {
    nlohmann::json j = ctx.cfg();
    uint64_t seed = ctx.pick_seed(j.value("seed", uint64_t(1)));
    light_rig rig = rig_from_preset(j.value("rig", "desk"));
    std::vector<radiance_map> envs = envs_from_config(j, seed);
    int frames = j.value("frames", 8);
    int begin = j.value("frame_begin", 0);

    std::vector<motion_clip> clips;
    if (j.contains("scenes")) {
        std::vector<scene_spec> scenes = scenes_from_config(j, seed);
        for (size_t i = 0; i < scenes.size(); ++i)
            clips.push_back(synth_motion_clip(scenes[i], begin, frames, envs[i % envs.size()],
                                              &rig));
    } else {
        int count = j.value("random_scenes", 0);
        if (count < 1) throw usage_error("dataset config: need \"scenes\" or \"random_scenes\"");
        int w = j.value("scene_width", 64), h = j.value("scene_height", 64);
        for (int i = 0; i < count; ++i) {
            scene_spec scene = make_motion_scene(mix_seed(seed, 0x5c1ull, uint64_t(i)), w, h,
                                                 begin + frames);
            clips.push_back(synth_motion_clip(scene, begin, frames, envs[size_t(i) % envs.size()],
                                              &rig));
        }
    }
    delighter_fn delighter =
        make_flicker_oracle(j.value("delight_delta", 0.05), mix_seed(seed, 0xf11ull));
    std::vector<clip_record> records = build_motion_rich(clips, delighter, seed);
    std::vector<std::string> split =
        assign_split(records.size(), seed, j.value("train_frac", 0.78));
    write_dataset(out_bin, out_man, records, split, {{"kind", "d_m"}, {"seed", seed}});
    std::printf("wrote %zu motion-rich records to %s\n", records.size(), out_bin.c_str());
}

inline void run_train(const command_ctx& ctx, model_role role, const std::string& out_bin,
                      const std::string& out_man, bool resume) {
    if (ctx.config.empty()) throw usage_error("train: --config is required");
    nlohmann::json j = ctx.cfg();
    if (!j.contains("dataset")) throw usage_error("train config: missing \"dataset\"");
    dataset ds = read_dataset(j.at("dataset").at("bin").get<std::string>(),
                              j.at("dataset").at("manifest").get<std::string>());
    std::string split = j.value("split", "");
    std::vector<clip_record> records = filter_split(std::move(ds), split);
    if (records.empty()) throw data_error("train: no records in split '" + split + "'");

    train_config tc = train_config_from_json(j.value("train", nlohmann::json::object()));
    if (ctx.has_seed()) tc.seed = ctx.seed;

    video_model model;
    adamw_t<float> opt;
    if (resume) {
        load_model(out_bin, out_man, model, &opt);
    } else {
        nlohmann::json dj = denoiser_config_json(denoiser_config{});
        if (j.contains("denoiser")) dj.update(j.at("denoiser"));
        nlohmann::json cj = conditioner_config_json(conditioner_config{});
        if (j.contains("conditioner")) cj.update(j.at("conditioner"));
        model.build(denoiser_config_from_json(dj), conditioner_config_from_json(cj));
        model.init(tc.seed);
    }
    if (3 * tc.patch * tc.patch != model.dcfg.latent_channels)
        throw usage_error("train: patch " + std::to_string(tc.patch) +
                          " disagrees with latent_channels " +
                          std::to_string(model.dcfg.latent_channels));

    light_rig rig;
    bool have_rig = false;
    if (j.contains("rig")) {
        rig = rig_from_preset(j.at("rig").get<std::string>());
        have_rig = true;
    } else if (role == model_role::relight) {
        rig = rig_from_preset("desk");
        have_rig = true;
    }

    progress_fn progress;
    if (tc.log_every > 0)
        progress = [&tc](int step, double loss) {
            if (step % tc.log_every == 0) std::printf("step %d loss %.6f\n", step, loss);
        };
    train_report rep =
        train_model(model, records, have_rig ? &rig : nullptr, role, tc, opt, progress);
    nlohmann::json meta = {{"role", role == model_role::delight ? "delight" : "relight"},
                           {"train", train_config_json(tc)}};
    save_model(out_bin, out_man, model, &opt, meta);
    if (!rep.losses.empty())
        std::printf("trained %d steps, loss %.6f -> %.6f, checkpoint %s\n", rep.steps_done,
                    rep.losses.front(), rep.losses.back(), out_bin.c_str());
    else
        std::printf("nothing to train (checkpoint already at step %lld)\n",
                    static_cast<long long>(opt.step_count));
}

struct infer_opts {
    std::string in_dir, out_dir, env_path, ref_path, stage_dir;
};

inline void run_infer(const command_ctx& ctx, const std::string& kind, const infer_opts& io) {
    pipeline_config pc = pipeline_config_from_json(ctx.cfg());
    if (ctx.has_seed()) pc.seed = ctx.seed;
    if (!io.stage_dir.empty()) pc.stage_dir = io.stage_dir;

    std::vector<image3f> frames = read_frames_pfm(io.in_dir);
    video_model d, r;
    bool need_d = kind == "delight" || kind == "full";
    bool need_r = kind != "delight";
    if (need_d) {
        if (pc.delight_bin.empty() || pc.delight_manifest.empty())
            throw usage_error("infer " + kind + ": config lacks delight checkpoint paths");
        load_model(pc.delight_bin, pc.delight_manifest, d);
    }
    if (need_r) {
        if (pc.relight_bin.empty() || pc.relight_manifest.empty())
            throw usage_error("infer " + kind + ": config lacks relight checkpoint paths");
        load_model(pc.relight_bin, pc.relight_manifest, r);
    }

    std::vector<image3f> out;
    if (kind == "delight")
        out = delight_video(frames, d, pc);
    else if (kind == "relight")
        out = relight_video(frames, read_image_any(io.env_path), r, pc);
    else if (kind == "copy")
        out = appearance_copy(frames, read_image_any(io.ref_path), r, pc);
    else
        out = full_relight(frames, read_image_any(io.env_path), d, r, pc);
    write_frames_pfm(io.out_dir, out);
    std::printf("wrote %zu frames to %s\n", out.size(), io.out_dir.c_str());
}

inline void run_eval(const command_ctx& ctx, const std::string& out, const std::string& split) {
    pipeline_config pc = pipeline_config_from_json(ctx.cfg());
    if (ctx.has_seed()) pc.seed = ctx.seed;
    if (pc.dataset_bin.empty() || pc.dataset_manifest.empty())
        throw usage_error("eval: config lacks dataset paths");
    std::vector<clip_record> records =
        filter_split(read_dataset(pc.dataset_bin, pc.dataset_manifest), split);
    if (records.empty()) throw data_error("eval: no records in split '" + split + "'");

    video_model d, r;
    video_model* dp = nullptr;
    video_model* rp = nullptr;
    if (!pc.delight_bin.empty()) {
        load_model(pc.delight_bin, pc.delight_manifest, d);
        dp = &d;
    }
    if (!pc.relight_bin.empty()) {
        load_model(pc.relight_bin, pc.relight_manifest, r);
        rp = &r;
    }
    if (!dp && !rp) throw usage_error("eval: config names no model checkpoints");
    light_rig rig = rig_from_preset(pc.rig);
    nlohmann::json report = evaluate_records(records, dp, rp, rig, pc);
    json_to_file(out, report);
    std::string line = "aggregate over " + std::to_string(records.size()) + " clips:";
    for (const auto& [key, value] : report.at("aggregate").items())
        if (key != "clips") line += " " + key + "=" + value.dump();
    std::printf("%s\nreport written to %s\n", line.c_str(), out.c_str());
}

}  // namespace cli_detail

inline int cli_main(int argc, char** argv) {
    using namespace cli_detail;
    CLI::App app{"desk-scale video relighting toolkit"};
    app.require_subcommand(1);

    command_ctx rig_ctx;
    std::string rig_out;
    CLI::App* rig_cmd = app.add_subcommand("rig", "light rig tools");
    rig_cmd->require_subcommand(1);
    CLI::App* rig_build_cmd = rig_cmd->add_subcommand("build", "write a rig manifest");
    add_common(rig_build_cmd, rig_ctx);
    rig_build_cmd->add_option("--out", rig_out, "rig manifest path")->required();
    rig_build_cmd->callback([&] { run_rig_build(rig_ctx, rig_out); });

    command_ctx olat_ctx;
    std::string olat_bin, olat_man;
    CLI::App* render_cmd = app.add_subcommand("render", "synthetic capture");
    render_cmd->require_subcommand(1);
    CLI::App* olat_cmd = render_cmd->add_subcommand("olat", "render an OLAT stack");
    add_common(olat_cmd, olat_ctx);
    olat_cmd->add_option("--out-bin", olat_bin, "LXPF payload path")->required();
    olat_cmd->add_option("--out-manifest", olat_man, "LXPF manifest path")->required();
    olat_cmd->callback([&] { run_render_olat(olat_ctx, olat_bin, olat_man); });

    CLI::App* dataset_cmd = app.add_subcommand("dataset", "hybrid dataset builders");
    dataset_cmd->require_subcommand(1);
    command_ctx dl_ctx;
    std::string dl_bin, dl_man;
    CLI::App* dl_cmd = dataset_cmd->add_subcommand("build-dl", "build the lighting-rich set");
    add_common(dl_cmd, dl_ctx);
    dl_cmd->add_option("--out-bin", dl_bin)->required();
    dl_cmd->add_option("--out-manifest", dl_man)->required();
    dl_cmd->callback([&] { run_build_dl(dl_ctx, dl_bin, dl_man); });
    command_ctx dm_ctx;
    std::string dm_bin, dm_man;
    CLI::App* dm_cmd = dataset_cmd->add_subcommand("build-dm", "build the motion-rich set");
    add_common(dm_cmd, dm_ctx);
    dm_cmd->add_option("--out-bin", dm_bin)->required();
    dm_cmd->add_option("--out-manifest", dm_man)->required();
    dm_cmd->callback([&] { run_build_dm(dm_ctx, dm_bin, dm_man); });

    CLI::App* train_cmd = app.add_subcommand("train", "two-stage trainer");
    train_cmd->require_subcommand(1);
    command_ctx train_ctx[2];
    std::string train_bin[2], train_man[2];
    bool train_resume[2] = {false, false};
    const char* role_names[2] = {"delight", "relight"};
    model_role roles[2] = {model_role::delight, model_role::relight};
    for (int k = 0; k < 2; ++k) {
        CLI::App* sub = train_cmd->add_subcommand(role_names[k]);
        add_common(sub, train_ctx[k]);
        sub->add_option("--out-bin", train_bin[k], "checkpoint payload path")->required();
        sub->add_option("--out-manifest", train_man[k], "checkpoint manifest path")->required();
        sub->add_flag("--resume", train_resume[k], "continue from the output checkpoint");
        model_role role = roles[k];
        sub->callback([&, k, role] {
            run_train(train_ctx[k], role, train_bin[k], train_man[k], train_resume[k]);
        });
    }

    CLI::App* infer_cmd = app.add_subcommand("infer", "run trained models");
    infer_cmd->require_subcommand(1);
    command_ctx infer_ctx[4];
    infer_opts infer_io[4];
    const char* infer_kinds[4] = {"delight", "relight", "copy", "full"};
    for (int k = 0; k < 4; ++k) {
        CLI::App* sub = infer_cmd->add_subcommand(infer_kinds[k]);
        add_common(sub, infer_ctx[k]);
        sub->add_option("--in-dir", infer_io[k].in_dir, "input PFM frame directory")->required();
        sub->add_option("--out-dir", infer_io[k].out_dir, "output frame directory")->required();
        std::string kind = infer_kinds[k];
        if (kind == "relight" || kind == "full")
            sub->add_option("--env", infer_io[k].env_path, "HDR environment (.hdr/.pfm)")
                ->required();
        if (kind == "copy")
            sub->add_option("--ref", infer_io[k].ref_path, "lit reference frame")->required();
        if (kind == "full")
            sub->add_option("--stage-dir", infer_io[k].stage_dir,
                            "persist the albedo stage here");
        sub->callback([&, k, kind] { run_infer(infer_ctx[k], kind, infer_io[k]); });
    }

    command_ctx eval_ctx;
    std::string eval_out, eval_split;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score models over a dataset");
    add_common(eval_cmd, eval_ctx);
    eval_cmd->add_option("--out", eval_out, "metric report path")->required();
    eval_cmd->add_option("--split", eval_split, "restrict to a split (train/test)");
    eval_cmd->callback([&] { run_eval(eval_ctx, eval_out, eval_split); });

    CLI::App* env_cmd = app.add_subcommand("env", "environment map tools");
    env_cmd->require_subcommand(1);
    command_ctx prev_ctx;
    std::string prev_in, prev_out;
    double prev_stops = 0.0;
    CLI::App* prev_cmd = env_cmd->add_subcommand("preview", "tonemapped preview");
    add_common(prev_cmd, prev_ctx);
    prev_cmd->add_option("--in", prev_in, "environment map (.hdr/.pfm)")->required();
    prev_cmd->add_option("--out", prev_out, "preview path (.png)")->required();
    CLI::Option* stops_opt = prev_cmd->add_option("--stops", prev_stops, "exposure in stops");
    prev_cmd->callback([&] {
        double stops = stops_opt->count() ? prev_stops : prev_ctx.cfg().value("stops", 0.0);
        write_image_any(prev_out, read_image_any(prev_in), stops);
        std::printf("wrote %s\n", prev_out.c_str());
    });
    command_ctx rot_ctx;
    std::string rot_in, rot_out;
    double rot_yaw = 0.0;
    CLI::App* rot_cmd = env_cmd->add_subcommand("rotate", "rotate about the vertical axis");
    add_common(rot_cmd, rot_ctx);
    rot_cmd->add_option("--in", rot_in, "environment map (.hdr/.pfm)")->required();
    rot_cmd->add_option("--out", rot_out, "output map (.hdr/.pfm)")->required();
    CLI::Option* yaw_opt = rot_cmd->add_option("--yaw", rot_yaw, "yaw in radians");
    rot_cmd->callback([&] {
        nlohmann::json j = rot_ctx.cfg();
        if (!yaw_opt->count() && !j.contains("yaw"))
            throw usage_error("env rotate: --yaw (or a config \"yaw\") is required");
        double yaw = yaw_opt->count() ? rot_yaw : j.at("yaw").get<double>();
        write_image_any(rot_out, rotate_env(read_image_any(rot_in), yaw));
        std::printf("wrote %s\n", rot_out.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const usage_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const data_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

}  // namespace relight
