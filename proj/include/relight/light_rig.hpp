// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// Virtual light stage. A rig is a set of light directions plus the
// nearest-direction Voronoi partition of an equirectangular pixel grid;
// projecting an HDR map onto the rig integrates radiance * solid angle
// per cell. The same weights drive image-based relighting and the light
// tokens fed to the denoiser.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relight/equirect.hpp"
#include "relight/errors.hpp"
#include "relight/image.hpp"
#include "relight/vec.hpp"

namespace relight {

enum class rig_layout { fibonacci, cylindrical };
enum class rig_coverage { full_sphere, frontal_hemisphere };

inline const char* to_string(rig_layout l) {
    return l == rig_layout::fibonacci ? "fibonacci" : "cylindrical";
}
inline const char* to_string(rig_coverage c) {
    return c == rig_coverage::full_sphere ? "full-sphere" : "frontal-hemisphere";
}

struct light_rig {
    rig_layout layout = rig_layout::fibonacci;
    rig_coverage coverage = rig_coverage::full_sphere;
    int map_width = 0;
    int map_height = 0;
    int cyl_rows = 0;
    int cyl_per_row = 0;

    std::vector<vec3d> directions;         // N unit vectors
    std::vector<int32_t> cell_of_pixel;    // H*W, -1 = unassigned
    std::vector<double> cell_solid_angle;  // N steradians
    std::vector<vec3d> cell_mean_dir;      // N unit vectors

    int n() const { return int(directions.size()); }
    int32_t cell_at(int row, int col) const {
        return cell_of_pixel[size_t(row) * map_width + col];
    }
};

using light_weights = std::vector<vec3d>;  // N RGB weights, radiance * steradian

namespace rig_detail {

// frontal hemisphere means camera-facing under our convention: d_z < 0
inline bool pixel_covered(rig_coverage cov, const vec3d& d) {
    return cov == rig_coverage::full_sphere || d.z < 0.0;
}

inline std::vector<vec3d> fibonacci_dirs(int n, rig_coverage cov) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    std::vector<vec3d> dirs;
    dirs.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        double a = golden * i;
        if (cov == rig_coverage::full_sphere) {
            // spiral down the y axis
            double y = 1.0 - (2.0 * i + 1.0) / n;
            double r = std::sqrt(std::max(0.0, 1.0 - y * y));
            dirs.push_back({r * std::sin(a), y, -r * std::cos(a)});
        } else {
            // spiral around the -z axis, covering d_z < 0
            double ca = 1.0 - (i + 0.5) / n;  // cos of angle from (0,0,-1)
            double sa = std::sqrt(std::max(0.0, 1.0 - ca * ca));
            dirs.push_back({sa * std::cos(a), sa * std::sin(a), -ca});
        }
    }
    return dirs;
}

inline std::vector<vec3d> cylindrical_dirs(int rows, int per_row, rig_coverage cov) {
    std::vector<vec3d> dirs;
    dirs.reserve(size_t(rows) * per_row);
    for (int j = 0; j < rows; ++j) {
        double theta = kPi * (j + 0.5) / rows;
        double st = std::sin(theta), ct = std::cos(theta);
        for (int k = 0; k < per_row; ++k) {
            double phi = cov == rig_coverage::full_sphere
                             ? kTwoPi * (k + 0.5) / per_row - kPi
                             : kPi * (k + 0.5) / per_row - kPi / 2.0;
            dirs.push_back({st * std::sin(phi), ct, -st * std::cos(phi)});
        }
    }
    return dirs;
}

}  // namespace rig_detail

// Assigns covered pixels to nearest lights and integrates cell geometry.
// Call after `directions`, coverage and map dims are in place.
inline void rebuild_rig_cells(light_rig& rig) {
    int w = rig.map_width, h = rig.map_height, n = rig.n();
    if (w < 1 || h < 1) throw usage_error("rig: map dims must be positive");
    if (n < 1) throw usage_error("rig: need at least one light");

    rig.cell_of_pixel.assign(size_t(w) * h, -1);
    rig.cell_solid_angle.assign(size_t(n), 0.0);
    std::vector<vec3d> mean(size_t(n), vec3d{});

    size_t covered_count = 0;
    for (int r = 0; r < h; ++r) {
        double dw = pixel_solid_angle(w, h, r);
        for (int c = 0; c < w; ++c) {
            vec3d d = pixel_to_dir(w, h, r, c);
            if (!rig_detail::pixel_covered(rig.coverage, d)) continue;
            ++covered_count;
            int best = 0;
            double best_dot = dot(d, rig.directions[0]);
            for (int i = 1; i < n; ++i) {
                double di = dot(d, rig.directions[i]);
                if (di > best_dot) {  // ties keep the lowest index
                    best_dot = di;
                    best = i;
                }
            }
            rig.cell_of_pixel[size_t(r) * w + c] = best;
            rig.cell_solid_angle[size_t(best)] += dw;
            mean[size_t(best)] += d * dw;
        }
    }
    if (covered_count < size_t(n))
        throw usage_error("rig: more lights than covered pixels");

    rig.cell_mean_dir.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        double len = length(mean[size_t(i)]);
        // empty cell keeps its nominal light direction
        rig.cell_mean_dir[size_t(i)] = len > 0 ? mean[size_t(i)] / len : rig.directions[size_t(i)];
    }
}

inline light_rig build_rig(int n_lights, rig_layout layout, rig_coverage coverage,
                           int map_width, int map_height, int cyl_rows = 0,
                           int cyl_per_row = 0) {
    if (n_lights < 1) throw usage_error("build_rig: n_lights must be >= 1");
    light_rig rig;
    rig.layout = layout;
    rig.coverage = coverage;
    rig.map_width = map_width;
    rig.map_height = map_height;
    if (layout == rig_layout::fibonacci) {
        rig.directions = rig_detail::fibonacci_dirs(n_lights, coverage);
    } else {
        if (cyl_rows < 1 || cyl_per_row < 1 || cyl_rows * cyl_per_row != n_lights)
            throw usage_error("build_rig: cylindrical layout needs rows*lights_per_row == n_lights");
        rig.cyl_rows = cyl_rows;
        rig.cyl_per_row = cyl_per_row;
        rig.directions = rig_detail::cylindrical_dirs(cyl_rows, cyl_per_row, coverage);
    }
    rebuild_rig_cells(rig);
    return rig;
}

// The 16-light desk rig used throughout the tests.
inline light_rig desk_rig(int map_width = 32, int map_height = 16) {
    return build_rig(16, rig_layout::fibonacci, rig_coverage::full_sphere, map_width, map_height);
}

// w_i = sum over cell pixels of L(p) * solid_angle(p), f64 per channel.
inline light_weights project_env_to_weights(const light_rig& rig, const radiance_map& map) {
    if (map.width != rig.map_width || map.height != rig.map_height)
        throw data_error("project_env_to_weights: map dims do not match rig");
    light_weights w(size_t(rig.n()), vec3d{});
    for (int r = 0; r < map.height; ++r) {
        double dw = pixel_solid_angle(map.width, map.height, r);
        for (int c = 0; c < map.width; ++c) {
            int32_t cell = rig.cell_at(r, c);
            if (cell < 0) continue;
            vec3f L = map.get(r, c);
            w[size_t(cell)] += vec3d{L.x * dw, L.y * dw, L.z * dw};
        }
    }
    return w;
}

// Environment concentrated in one cell: radiance intensity/omega_i over the
// cell, zero elsewhere, so the projection returns ~intensity * e_i.
inline radiance_map delta_env(const light_rig& rig, int light, const vec3f& intensity) {
    if (light < 0 || light >= rig.n()) throw usage_error("delta_env: light index out of range");
    double omega = rig.cell_solid_angle[size_t(light)];
    if (omega <= 0.0) throw usage_error("delta_env: cell has no pixels");
    vec3f value = intensity * float(1.0 / omega);
    radiance_map map(rig.map_width, rig.map_height, 0.0f);
    for (int r = 0; r < rig.map_height; ++r)
        for (int c = 0; c < rig.map_width; ++c)
            if (rig.cell_at(r, c) == light) map.set(r, c, value);
    return map;
}

// Each covered pixel takes its cell's radiance; unassigned pixels stay zero.
inline radiance_map cellwise_constant_env(const light_rig& rig,
                                          const std::vector<vec3f>& per_cell) {
    if (int(per_cell.size()) != rig.n())
        throw usage_error("cellwise_constant_env: need one radiance per cell");
    radiance_map map(rig.map_width, rig.map_height, 0.0f);
    for (int r = 0; r < rig.map_height; ++r)
        for (int c = 0; c < rig.map_width; ++c) {
            int32_t cell = rig.cell_at(r, c);
            if (cell >= 0) map.set(r, c, per_cell[size_t(cell)]);
        }
    return map;
}

// JSON manifest: enough to rebuild the rig deterministically.
inline nlohmann::json rig_to_json(const light_rig& rig) {
    nlohmann::json j;
    j["layout"] = to_string(rig.layout);
    j["coverage"] = to_string(rig.coverage);
    j["map_width"] = rig.map_width;
    j["map_height"] = rig.map_height;
    if (rig.layout == rig_layout::cylindrical) {
        j["rows"] = rig.cyl_rows;
        j["lights_per_row"] = rig.cyl_per_row;
    }
    nlohmann::json dirs = nlohmann::json::array();
    for (const vec3d& d : rig.directions) dirs.push_back({d.x, d.y, d.z});
    j["directions"] = dirs;
    return j;
}

inline light_rig rig_from_json(const nlohmann::json& j) {
    light_rig rig;
    std::string layout = j.at("layout").get<std::string>();
    if (layout == "fibonacci")
        rig.layout = rig_layout::fibonacci;
    else if (layout == "cylindrical")
        rig.layout = rig_layout::cylindrical;
    else
        throw data_error("rig manifest: unknown layout '" + layout + "'");
    std::string cov = j.at("coverage").get<std::string>();
    if (cov == "full-sphere")
        rig.coverage = rig_coverage::full_sphere;
    else if (cov == "frontal-hemisphere")
        rig.coverage = rig_coverage::frontal_hemisphere;
    else
        throw data_error("rig manifest: unknown coverage '" + cov + "'");
    rig.map_width = j.at("map_width").get<int>();
    rig.map_height = j.at("map_height").get<int>();
    rig.cyl_rows = j.value("rows", 0);
    rig.cyl_per_row = j.value("lights_per_row", 0);
    for (const auto& d : j.at("directions")) {
        if (!d.is_array() || d.size() != 3)
            throw data_error("rig manifest: direction must be a 3-array");
        rig.directions.push_back({d[0].get<double>(), d[1].get<double>(), d[2].get<double>()});
    }
    rebuild_rig_cells(rig);
    return rig;
}

}  // namespace relight
