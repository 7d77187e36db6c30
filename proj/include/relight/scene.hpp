// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// Analytic scene description for the synthetic OLAT studio: spheres over an
// optional ground plane, a pinhole camera, and keyframed animation tracks.
// Camera pan/zoom acts on the sensor window (2D, like a crop), so the flow
// between frames stays exactly affine; object tracks move geometry in 3D.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relight/errors.hpp"
#include "relight/rng.hpp"
#include "relight/vec.hpp"

namespace relight {

struct sphere_spec {
    vec3d center{};
    double radius = 1.0;
    vec3f albedo{1, 1, 1};
    float specular = 0.0f;
    float shininess = 1.0f;
};

struct plane_spec {
    double height = 0.0;
    vec3f albedo{1, 1, 1};
    float specular = 0.0f;
    float shininess = 1.0f;
};

struct camera_spec {
    vec3d position{0, 1.0, 2.5};
    vec3d look_at{0, 0.5, 0};
    double fov = 0.9;  // vertical, radians
    int width = 64;
    int height = 64;
};

struct anim_track {
    enum class target_kind { camera_pan, camera_zoom, translate, orbit };
    target_kind target = target_kind::camera_pan;
    int object = -1;    // translate/orbit
    vec3d pivot{};      // orbit: rotation about the y axis through this point
    std::vector<double> key_frames;  // strictly increasing
    std::vector<vec3d> key_values;   // pan: (x,y,-); zoom/orbit: (v,-,-)

    vec3d eval(double frame) const {
        if (frame <= key_frames.front()) return key_values.front();
        if (frame >= key_frames.back()) return key_values.back();
        size_t hi = 1;
        while (key_frames[hi] < frame) ++hi;
        double f0 = key_frames[hi - 1], f1 = key_frames[hi];
        double t = (frame - f0) / (f1 - f0);
        return key_values[hi - 1] * (1.0 - t) + key_values[hi] * t;
    }
};

struct scene_spec {
    std::string id = "scene";
    std::vector<sphere_spec> spheres;
    std::optional<plane_spec> ground;
    camera_spec camera;
    std::vector<anim_track> tracks;
};

// Resolved per-frame state: animated sphere centers plus the sensor window.
struct frame_state {
    std::vector<vec3d> centers;
    double pan_x = 0.0;
    double pan_y = 0.0;
    double zoom = 1.0;
};

inline void validate_scene(const scene_spec& scene) {
    if (scene.spheres.empty() && !scene.ground)
        throw data_error("scene '" + scene.id + "': needs at least one object");
    for (const sphere_spec& s : scene.spheres) {
        if (!(s.radius > 0)) throw data_error("scene: sphere radius must be > 0");
        for (int c = 0; c < 3; ++c)
            if (!(s.albedo[c] >= 0 && s.albedo[c] <= 1))
                throw data_error("scene: sphere albedo must be in [0,1]");
        if (!(s.specular >= 0)) throw data_error("scene: specular must be >= 0");
        if (!(s.shininess >= 1)) throw data_error("scene: shininess must be >= 1");
    }
    if (!(scene.camera.fov > 0 && scene.camera.fov < std::numbers::pi))
        throw data_error("scene: fov must lie in (0, pi)");
    if (scene.camera.width < 1 || scene.camera.height < 1)
        throw data_error("scene: image dims must be positive");
    for (const anim_track& t : scene.tracks) {
        if (t.key_frames.empty() || t.key_frames.size() != t.key_values.size())
            throw data_error("scene: track needs matching keyframe/value lists");
        for (size_t i = 1; i < t.key_frames.size(); ++i)
            if (!(t.key_frames[i] > t.key_frames[i - 1]))
                throw data_error("scene: track frames must be strictly increasing");
        bool needs_object = t.target == anim_track::target_kind::translate ||
                            t.target == anim_track::target_kind::orbit;
        if (needs_object && (t.object < 0 || t.object >= int(scene.spheres.size())))
            throw data_error("scene: track object index out of range");
    }
}

inline frame_state eval_tracks(const scene_spec& scene, double frame) {
    frame_state st;
    st.centers.reserve(scene.spheres.size());
    for (const sphere_spec& s : scene.spheres) st.centers.push_back(s.center);
    for (const anim_track& t : scene.tracks) {
        vec3d v = t.eval(frame);
        switch (t.target) {
            case anim_track::target_kind::camera_pan:
                st.pan_x += v.x;
                st.pan_y += v.y;
                break;
            case anim_track::target_kind::camera_zoom:
                st.zoom *= v.x;
                break;
            case anim_track::target_kind::translate:
                st.centers[size_t(t.object)] += v;
                break;
            case anim_track::target_kind::orbit: {
                double a = v.x;
                vec3d rel = scene.spheres[size_t(t.object)].center - t.pivot;
                vec3d rot{rel.x * std::cos(a) + rel.z * std::sin(a), rel.y,
                          -rel.x * std::sin(a) + rel.z * std::cos(a)};
                st.centers[size_t(t.object)] = t.pivot + rot;
                break;
            }
        }
    }
    if (!(st.zoom > 0)) throw data_error("scene: zoom track reached a non-positive value");
    return st;
}

// True when every track's keyframe span contains [begin, end].
inline bool frames_within_tracks(const scene_spec& scene, double begin, double end) {
    for (const anim_track& t : scene.tracks)
        if (begin < t.key_frames.front() || end > t.key_frames.back()) return false;
    return true;
}

namespace scene_detail {

inline vec3d json_vec3(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.size() != 3)
        throw data_error(std::string("scene: ") + what + " must be a 3-array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace scene_detail

inline scene_spec scene_from_json(const nlohmann::json& j) {
    using scene_detail::json_vec3;
    scene_spec scene;
    scene.id = j.value("id", std::string("scene"));
    for (const auto& o : j.value("objects", nlohmann::json::array())) {
        sphere_spec s;
        s.center = json_vec3(o.at("center"), "sphere center");
        s.radius = o.at("radius").get<double>();
        s.albedo = to_float(json_vec3(o.at("albedo"), "sphere albedo"));
        s.specular = o.value("specular", 0.0f);
        s.shininess = o.value("shininess", 1.0f);
        scene.spheres.push_back(s);
    }
    if (j.contains("ground")) {
        plane_spec p;
        p.height = j["ground"].at("height").get<double>();
        p.albedo = to_float(json_vec3(j["ground"].at("albedo"), "ground albedo"));
        p.specular = j["ground"].value("specular", 0.0f);
        p.shininess = j["ground"].value("shininess", 1.0f);
        scene.ground = p;
    }
    if (j.contains("camera")) {
        const auto& c = j["camera"];
        if (c.contains("position")) scene.camera.position = json_vec3(c["position"], "camera position");
        if (c.contains("look_at")) scene.camera.look_at = json_vec3(c["look_at"], "camera look_at");
        scene.camera.fov = c.value("fov", scene.camera.fov);
        scene.camera.width = c.value("width", scene.camera.width);
        scene.camera.height = c.value("height", scene.camera.height);
    }
    for (const auto& tj : j.value("tracks", nlohmann::json::array())) {
        anim_track t;
        std::string target = tj.at("target").get<std::string>();
        if (target == "camera_pan")
            t.target = anim_track::target_kind::camera_pan;
        else if (target == "camera_zoom")
            t.target = anim_track::target_kind::camera_zoom;
        else if (target == "translate")
            t.target = anim_track::target_kind::translate;
        else if (target == "orbit")
            t.target = anim_track::target_kind::orbit;
        else
            throw data_error("scene: unknown track target '" + target + "'");
        t.object = tj.value("object", -1);
        if (tj.contains("pivot")) t.pivot = json_vec3(tj["pivot"], "track pivot");
        for (const auto& k : tj.at("keys")) {
            if (!k.is_array() || k.size() != 2)
                throw data_error("scene: track key must be [frame, value]");
            t.key_frames.push_back(k[0].get<double>());
            if (k[1].is_array())
                t.key_values.push_back(json_vec3(k[1], "track value"));
            else
                t.key_values.push_back({k[1].get<double>(), 0.0, 0.0});
        }
        scene.tracks.push_back(t);
    }
    validate_scene(scene);
    return scene;
}

inline nlohmann::json scene_to_json(const scene_spec& scene) {
    nlohmann::json j;
    j["id"] = scene.id;
    nlohmann::json objs = nlohmann::json::array();
    for (const sphere_spec& s : scene.spheres) {
        objs.push_back({{"center", {s.center.x, s.center.y, s.center.z}},
                        {"radius", s.radius},
                        {"albedo", {s.albedo.x, s.albedo.y, s.albedo.z}},
                        {"specular", s.specular},
                        {"shininess", s.shininess}});
    }
    j["objects"] = objs;
    if (scene.ground)
        j["ground"] = {{"height", scene.ground->height},
                       {"albedo", {scene.ground->albedo.x, scene.ground->albedo.y,
                                   scene.ground->albedo.z}},
                       {"specular", scene.ground->specular},
                       {"shininess", scene.ground->shininess}};
    j["camera"] = {{"position", {scene.camera.position.x, scene.camera.position.y,
                                 scene.camera.position.z}},
                   {"look_at", {scene.camera.look_at.x, scene.camera.look_at.y,
                                scene.camera.look_at.z}},
                   {"fov", scene.camera.fov},
                   {"width", scene.camera.width},
                   {"height", scene.camera.height}};
    nlohmann::json tracks = nlohmann::json::array();
    for (const anim_track& t : scene.tracks) {
        nlohmann::json tj;
        switch (t.target) {
            case anim_track::target_kind::camera_pan: tj["target"] = "camera_pan"; break;
            case anim_track::target_kind::camera_zoom: tj["target"] = "camera_zoom"; break;
            case anim_track::target_kind::translate: tj["target"] = "translate"; break;
            case anim_track::target_kind::orbit: tj["target"] = "orbit"; break;
        }
        if (t.object >= 0) tj["object"] = t.object;
        if (t.target == anim_track::target_kind::orbit)
            tj["pivot"] = {t.pivot.x, t.pivot.y, t.pivot.z};
        nlohmann::json keys = nlohmann::json::array();
        for (size_t i = 0; i < t.key_frames.size(); ++i) {
            const vec3d& v = t.key_values[i];
            if (t.target == anim_track::target_kind::camera_pan ||
                t.target == anim_track::target_kind::translate)
                keys.push_back({t.key_frames[i], {v.x, v.y, v.z}});
            else
                keys.push_back({t.key_frames[i], v.x});
        }
        tj["keys"] = keys;
        tracks.push_back(tj);
    }
    j["tracks"] = tracks;
    return j;
}

// Deterministic random scene used by property tests and the linearity oracle:
// one to three spheres in view, sometimes over a ground plane.
inline scene_spec make_random_scene(uint64_t seed, int width = 64, int height = 64) {
    rng r(mix_seed(0x5ce9eull, seed));
    scene_spec scene;
    scene.id = "random-" + std::to_string(seed);
    scene.camera.width = width;
    scene.camera.height = height;
    int count = 1 + int(r.uniform_index(3));
    for (int i = 0; i < count; ++i) {
        sphere_spec s;
        s.center = {r.uniform(-0.8, 0.8), r.uniform(0.2, 0.9), r.uniform(-0.5, 0.5)};
        s.radius = r.uniform(0.15, 0.4);
        s.albedo = {float(r.uniform(0.1, 1.0)), float(r.uniform(0.1, 1.0)),
                    float(r.uniform(0.1, 1.0))};
        s.specular = float(r.uniform(0.0, 0.5));
        s.shininess = float(r.uniform(2.0, 64.0));
        scene.spheres.push_back(s);
    }
    if (r.uniform() < 0.7) {
        plane_spec p;
        p.height = 0.0;
        p.albedo = {float(r.uniform(0.2, 0.9)), float(r.uniform(0.2, 0.9)),
                    float(r.uniform(0.2, 0.9))};
        scene.ground = p;
    }
    validate_scene(scene);
    return scene;
}

}  // namespace relight
