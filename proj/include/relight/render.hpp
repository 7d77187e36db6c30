// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// Analytic ray tracer for the OLAT studio. Blinn-Phong shading under
// directional lights with binary shadows; no indirect light. The shading
// coefficient is computed per (pixel, light direction) in f64, cast to f32
// once, and multiplied by the f32 intensity, which keeps the renderer
// exactly linear in intensity for power-of-two scalings and within float
// rounding otherwise. light_dir points from the surface toward the light.

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "relight/equirect.hpp"
#include "relight/errors.hpp"
#include "relight/image.hpp"
#include "relight/light_rig.hpp"
#include "relight/scene.hpp"

namespace relight {

namespace render_detail {

constexpr double kRayMin = 1e-6;
constexpr double kShadowOffset = 1e-4;

struct hit_record {
    bool hit = false;
    double t = std::numeric_limits<double>::infinity();
    vec3d point{};
    vec3d normal{};
    vec3d view{};  // unit vector toward the eye
    vec3f albedo{};
    float specular = 0.0f;
    float shininess = 1.0f;
};

inline bool sphere_hit(const vec3d& center, double radius, const vec3d& o, const vec3d& d,
                       double t_max, double* t_out) {
    vec3d oc = o - center;
    double b = dot(oc, d);
    double c = dot(oc, oc) - radius * radius;
    double disc = b * b - c;
    if (disc < 0) return false;
    double s = std::sqrt(disc);
    double t = -b - s;
    if (t < kRayMin) t = -b + s;
    if (t < kRayMin || t >= t_max) return false;
    *t_out = t;
    return true;
}

inline hit_record intersect(const scene_spec& scene, const frame_state& st, const vec3d& o,
                            const vec3d& d) {
    hit_record best;
    for (size_t i = 0; i < scene.spheres.size(); ++i) {
        double t;
        if (sphere_hit(st.centers[i], scene.spheres[i].radius, o, d, best.t, &t)) {
            const sphere_spec& s = scene.spheres[i];
            best.hit = true;
            best.t = t;
            best.point = o + d * t;
            best.normal = normalize(best.point - st.centers[i]);
            best.albedo = s.albedo;
            best.specular = s.specular;
            best.shininess = s.shininess;
        }
    }
    if (scene.ground && std::abs(d.y) > 1e-12) {
        double t = (scene.ground->height - o.y) / d.y;
        if (t >= kRayMin && t < best.t) {
            best.hit = true;
            best.t = t;
            best.point = o + d * t;
            best.normal = {0, 1, 0};
            best.albedo = scene.ground->albedo;
            best.specular = scene.ground->specular;
            best.shininess = scene.ground->shininess;
        }
    }
    if (best.hit) best.view = -d;
    return best;
}

inline bool occluded(const scene_spec& scene, const frame_state& st, const vec3d& o,
                     const vec3d& d) {
    for (size_t i = 0; i < scene.spheres.size(); ++i) {
        double t;
        if (sphere_hit(st.centers[i], scene.spheres[i].radius, o, d,
                       std::numeric_limits<double>::infinity(), &t))
            return true;
    }
    if (scene.ground && std::abs(d.y) > 1e-12) {
        double t = (scene.ground->height - o.y) / d.y;
        if (t >= kRayMin) return true;
    }
    return false;
}

// f32 Blinn-Phong coefficient: albedo*max(0,n.l) + spec*max(0,n.h)^shininess,
// times the binary shadow term. Multiply by intensity to get radiance.
inline vec3f shade_coefficient(const scene_spec& scene, const frame_state& st,
                               const hit_record& h, const vec3d& l) {
    if (!h.hit) return {0, 0, 0};
    if (occluded(scene, st, h.point + l * kShadowOffset, l)) return {0, 0, 0};
    double ndl = std::max(0.0, dot(h.normal, l));
    double spec_term = 0.0;
    if (h.specular > 0) {
        vec3d half = normalize(l + h.view);
        double ndh = std::max(0.0, dot(h.normal, half));
        spec_term = double(h.specular) * std::pow(ndh, double(h.shininess));
    }
    return {float(double(h.albedo.x) * ndl + spec_term),
            float(double(h.albedo.y) * ndl + spec_term),
            float(double(h.albedo.z) * ndl + spec_term)};
}

struct camera_rays {
    vec3d origin, right, up, forward;
    double pixel_scale;  // sensor pixels to tangent units
    int width, height;
    double pan_x, pan_y, zoom;

    vec3d dir(int x, int y) const {
        double sx = (x + 0.5 - width / 2.0) / zoom + pan_x;
        double sy = (y + 0.5 - height / 2.0) / zoom + pan_y;
        return normalize(forward + right * (sx * pixel_scale) - up * (sy * pixel_scale));
    }
};

inline camera_rays make_camera(const scene_spec& scene, const frame_state& st) {
    const camera_spec& c = scene.camera;
    vec3d fwd = c.look_at - c.position;
    if (length(fwd) <= 0) throw data_error("camera: position equals look_at");
    fwd = normalize(fwd);
    vec3d right = cross(fwd, vec3d{0, 1, 0});
    if (length(right) < 1e-9) throw data_error("camera: looking straight along the y axis");
    right = normalize(right);
    vec3d up = cross(right, fwd);
    camera_rays cam;
    cam.origin = c.position;
    cam.right = right;
    cam.up = up;
    cam.forward = fwd;
    cam.pixel_scale = 2.0 * std::tan(c.fov / 2.0) / c.height;
    cam.width = c.width;
    cam.height = c.height;
    cam.pan_x = st.pan_x;
    cam.pan_y = st.pan_y;
    cam.zoom = st.zoom;
    return cam;
}

inline std::vector<hit_record> primary_hits(const scene_spec& scene, const frame_state& st) {
    camera_rays cam = make_camera(scene, st);
    std::vector<hit_record> hits;
    hits.reserve(size_t(cam.width) * cam.height);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x)
            hits.push_back(intersect(scene, st, cam.origin, cam.dir(x, y)));
    return hits;
}

inline image3f shade_all(const scene_spec& scene, const frame_state& st,
                         const std::vector<hit_record>& hits, const vec3d& l, const vec3f& I) {
    image3f img(scene.camera.width, scene.camera.height, 0.0f);
    for (size_t p = 0; p < hits.size(); ++p) {
        vec3f c = shade_coefficient(scene, st, hits[p], l);
        img.pixels[p * 3 + 0] = c.x * I.x;
        img.pixels[p * 3 + 1] = c.y * I.y;
        img.pixels[p * 3 + 2] = c.z * I.z;
    }
    return img;
}

}  // namespace render_detail

inline image3f render_directional(const scene_spec& scene, double frame, const vec3d& light_dir,
                                  const vec3f& intensity) {
    frame_state st = eval_tracks(scene, frame);
    auto hits = render_detail::primary_hits(scene, st);
    return render_detail::shade_all(scene, st, hits, light_dir, intensity);
}

struct olat_stack {
    std::string scene_id;
    std::vector<image3f> light_images;   // ascending light index
    std::vector<double> solid_angles;    // per-light render-time scale
    image3f albedo;                      // exact flat-lit target
    image1f hit_mask;
};

inline olat_stack render_olat(const scene_spec& scene, double frame, const light_rig& rig) {
    frame_state st = eval_tracks(scene, frame);
    auto hits = render_detail::primary_hits(scene, st);
    olat_stack stack;
    stack.scene_id = scene.id;
    for (int i = 0; i < rig.n(); ++i) {
        float w = float(rig.cell_solid_angle[size_t(i)]);
        stack.light_images.push_back(
            render_detail::shade_all(scene, st, hits, rig.directions[size_t(i)], {w, w, w}));
        stack.solid_angles.push_back(rig.cell_solid_angle[size_t(i)]);
    }
    stack.albedo = image3f(scene.camera.width, scene.camera.height, 0.0f);
    stack.hit_mask = image1f(scene.camera.width, scene.camera.height, 0.0f);
    for (size_t p = 0; p < hits.size(); ++p) {
        if (!hits[p].hit) continue;
        stack.albedo.pixels[p * 3 + 0] = hits[p].albedo.x;
        stack.albedo.pixels[p * 3 + 1] = hits[p].albedo.y;
        stack.albedo.pixels[p * 3 + 2] = hits[p].albedo.z;
        stack.hit_mask.pixels[p] = 1.0f;
    }
    return stack;
}

// Brute-force ground truth: every covered map pixel is a directional light
// with intensity L(p)*solid_angle(p), summed per-env-pixel in f64, row-major.
// With a rig, env pixels use their cell's light direction (so the result is
// comparable to OLAT composition); without one, their own pixel direction.
inline image3f render_env_direct(const scene_spec& scene, double frame, const radiance_map& map,
                                 const light_rig* rig = nullptr) {
    using namespace render_detail;
    if (rig && (rig->map_width != map.width || rig->map_height != map.height))
        throw data_error("render_env_direct: rig dims do not match map");
    frame_state st = eval_tracks(scene, frame);
    auto hits = primary_hits(scene, st);
    int W = scene.camera.width, H = scene.camera.height;
    image3f out(W, H, 0.0f);

    std::vector<vec3f> cell_coef(rig ? size_t(rig->n()) : 0);
    std::vector<char> cell_seen(rig ? size_t(rig->n()) : 0);

    for (size_t p = 0; p < hits.size(); ++p) {
        if (!hits[p].hit) continue;
        vec3d acc{};
        if (rig) {
            std::fill(cell_seen.begin(), cell_seen.end(), 0);
            for (int r = 0; r < map.height; ++r) {
                double dw = pixel_solid_angle(map.width, map.height, r);
                for (int c = 0; c < map.width; ++c) {
                    int32_t cell = rig->cell_at(r, c);
                    if (cell < 0) continue;
                    if (!cell_seen[size_t(cell)]) {
                        cell_coef[size_t(cell)] = shade_coefficient(
                            scene, st, hits[p], rig->directions[size_t(cell)]);
                        cell_seen[size_t(cell)] = 1;
                    }
                    vec3f co = cell_coef[size_t(cell)];
                    vec3f L = map.get(r, c);
                    acc += vec3d{double(co.x) * (double(L.x) * dw),
                                 double(co.y) * (double(L.y) * dw),
                                 double(co.z) * (double(L.z) * dw)};
                }
            }
        } else {
            for (int r = 0; r < map.height; ++r) {
                double dw = pixel_solid_angle(map.width, map.height, r);
                for (int c = 0; c < map.width; ++c) {
                    vec3f L = map.get(r, c);
                    if (L.x == 0 && L.y == 0 && L.z == 0) continue;
                    vec3f co = shade_coefficient(scene, st, hits[p],
                                                 pixel_to_dir(map.width, map.height, r, c));
                    acc += vec3d{double(co.x) * (double(L.x) * dw),
                                 double(co.y) * (double(L.y) * dw),
                                 double(co.z) * (double(L.z) * dw)};
                }
            }
        }
        out.pixels[p * 3 + 0] = float(acc.x);
        out.pixels[p * 3 + 1] = float(acc.y);
        out.pixels[p * 3 + 2] = float(acc.z);
    }
    return out;
}

// Affine flow between consecutive frames induced by the sensor-window
// pan/zoom: source(x) = center + scale*(x - center) + (dx, dy) in
// pixel-center coordinates.
struct parametric_flow {
    double scale = 1.0;
    double dx = 0.0;
    double dy = 0.0;
};

inline parametric_flow flow_between(const frame_state& a, const frame_state& b) {
    parametric_flow f;
    f.scale = a.zoom / b.zoom;
    f.dx = a.zoom * (b.pan_x - a.pan_x);
    f.dy = a.zoom * (b.pan_y - a.pan_y);
    return f;
}

struct motion_clip {
    std::vector<image3f> frames;  // lit
    std::vector<image3f> albedo;  // exact flat-lit
    std::vector<image1f> hit_mask;
    std::vector<parametric_flow> flows;  // frames.size() - 1, frame t -> t+1
};

inline motion_clip synth_motion_clip(const scene_spec& scene, int frame_begin, int frame_count,
                                     const radiance_map& map, const light_rig* rig = nullptr) {
    if (frame_count < 1) throw usage_error("synth_motion_clip: need at least one frame");
    if (!frames_within_tracks(scene, frame_begin, frame_begin + frame_count - 1))
        throw data_error("synth_motion_clip: frame range outside animation tracks");
    motion_clip clip;
    frame_state prev{};
    for (int f = 0; f < frame_count; ++f) {
        double frame = frame_begin + f;
        clip.frames.push_back(render_env_direct(scene, frame, map, rig));
        frame_state st = eval_tracks(scene, frame);
        auto hits = render_detail::primary_hits(scene, st);
        image3f alb(scene.camera.width, scene.camera.height, 0.0f);
        image1f mask(scene.camera.width, scene.camera.height, 0.0f);
        for (size_t p = 0; p < hits.size(); ++p) {
            if (!hits[p].hit) continue;
            alb.pixels[p * 3 + 0] = hits[p].albedo.x;
            alb.pixels[p * 3 + 1] = hits[p].albedo.y;
            alb.pixels[p * 3 + 2] = hits[p].albedo.z;
            mask.pixels[p] = 1.0f;
        }
        clip.albedo.push_back(std::move(alb));
        clip.hit_mask.push_back(std::move(mask));
        if (f > 0) clip.flows.push_back(flow_between(prev, st));
        prev = st;
    }
    return clip;
}

}  // namespace relight
