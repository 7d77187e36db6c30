// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// light_stage module tests: rig construction, Voronoi partition, HDR
// projection, delta/cellwise fixtures, manifest round-trip.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "relight/equirect.hpp"
#include "relight/light_rig.hpp"
#include "relight/rng.hpp"

using namespace relight;

namespace {

image3f random_map(rng& r, int w, int h, double lo, double hi) {
    image3f img(w, h);
    for (auto& v : img.pixels) v = float(r.uniform(lo, hi));
    return img;
}

}  // namespace

TEST_CASE("single-light rig owns the whole sphere", "[rig]") {
    light_rig rig = build_rig(1, rig_layout::fibonacci, rig_coverage::full_sphere, 16, 8);
    for (int32_t cell : rig.cell_of_pixel) REQUIRE(cell == 0);
    REQUIRE(rig.cell_solid_angle[0] == Catch::Approx(4.0 * kPi).epsilon(1e-12));
}

TEST_CASE("antipodal lights split at the equator", "[rig]") {
    light_rig rig;
    rig.coverage = rig_coverage::full_sphere;
    rig.map_width = 64;
    rig.map_height = 32;
    rig.directions = {{0, 1, 0}, {0, -1, 0}};
    rebuild_rig_cells(rig);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 64; ++c)
            REQUIRE(rig.cell_at(r, c) == (r < 16 ? 0 : 1));
    REQUIRE(rig.cell_solid_angle[0] == Catch::Approx(2.0 * kPi).epsilon(1e-12));
    REQUIRE(rig.cell_solid_angle[1] == Catch::Approx(2.0 * kPi).epsilon(1e-12));
    REQUIRE(rig.cell_mean_dir[0].y > 0.0);
    REQUIRE(rig.cell_mean_dir[1].y < 0.0);
}

TEST_CASE("110-light fibonacci rig partitions the sphere without holes", "[rig]") {
    light_rig rig =
        build_rig(110, rig_layout::fibonacci, rig_coverage::full_sphere, 256, 128);
    double total = 0;
    for (int i = 0; i < rig.n(); ++i) {
        REQUIRE(rig.cell_solid_angle[size_t(i)] > 0.0);  // no empty cells
        total += rig.cell_solid_angle[size_t(i)];
    }
    REQUIRE(std::abs(total - 4.0 * kPi) <= 1e-9 * 4.0 * kPi);
    for (const vec3d& d : rig.directions) REQUIRE(std::abs(length(d) - 1.0) < 1e-6);
}

TEST_CASE("frontal coverage assigns only camera-facing pixels", "[rig]") {
    light_rig rig =
        build_rig(8, rig_layout::fibonacci, rig_coverage::frontal_hemisphere, 32, 16);
    double covered = 0;
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 32; ++c) {
            vec3d d = pixel_to_dir(32, 16, r, c);
            if (rig.cell_at(r, c) >= 0) {
                REQUIRE(d.z < 0.0);
                covered += pixel_solid_angle(32, 16, r);
            } else {
                REQUIRE(d.z >= 0.0);
            }
        }
    REQUIRE(covered == Catch::Approx(2.0 * kPi).epsilon(1e-9));
    double cells = 0;
    for (double a : rig.cell_solid_angle) cells += a;
    REQUIRE(cells == Catch::Approx(covered).epsilon(1e-12));
    for (const vec3d& d : rig.directions) REQUIRE(d.z < 0.0);
}

TEST_CASE("every pixel is assigned to its nearest light", "[rig][property]") {
    light_rig rig = desk_rig();
    for (int r = 0; r < rig.map_height; ++r)
        for (int c = 0; c < rig.map_width; ++c) {
            int32_t cell = rig.cell_at(r, c);
            vec3d d = pixel_to_dir(rig.map_width, rig.map_height, r, c);
            double assigned = dot(d, rig.directions[size_t(cell)]);
            for (int j = 0; j < rig.n(); ++j) {
                double dj = dot(d, rig.directions[size_t(j)]);
                REQUIRE(assigned >= dj);
                if (dj == assigned) REQUIRE(cell <= j);  // ties go to the lowest index
            }
        }
}

TEST_CASE("cell mean directions are the weighted means of their pixels", "[rig]") {
    light_rig rig = desk_rig();
    std::vector<vec3d> acc(size_t(rig.n()), vec3d{});
    for (int r = 0; r < rig.map_height; ++r) {
        double dw = pixel_solid_angle(rig.map_width, rig.map_height, r);
        for (int c = 0; c < rig.map_width; ++c) {
            int32_t cell = rig.cell_at(r, c);
            if (cell >= 0) acc[size_t(cell)] += pixel_to_dir(rig.map_width, rig.map_height, r, c) * dw;
        }
    }
    for (int i = 0; i < rig.n(); ++i) {
        vec3d want = normalize(acc[size_t(i)]);
        REQUIRE(std::abs(length(rig.cell_mean_dir[size_t(i)]) - 1.0) < 1e-9);
        REQUIRE(length(want - rig.cell_mean_dir[size_t(i)]) < 1e-12);
    }
}

TEST_CASE("rig construction rejects bad configurations", "[rig][errors]") {
    REQUIRE_THROWS_AS(build_rig(0, rig_layout::fibonacci, rig_coverage::full_sphere, 8, 4),
                      usage_error);
    REQUIRE_THROWS_AS(
        build_rig(16, rig_layout::cylindrical, rig_coverage::full_sphere, 8, 4, 3, 4),
        usage_error);
    // more lights than covered pixels
    REQUIRE_THROWS_AS(build_rig(10, rig_layout::fibonacci, rig_coverage::full_sphere, 2, 1),
                      usage_error);
}

TEST_CASE("uniform map projects to the cell solid angles", "[project]") {
    light_rig rig = desk_rig();
    image3f uniform(rig.map_width, rig.map_height, 1.0f);
    light_weights w = project_env_to_weights(rig, uniform);
    double total = 0;
    for (int i = 0; i < rig.n(); ++i) {
        REQUIRE(w[size_t(i)].x == Catch::Approx(rig.cell_solid_angle[size_t(i)]).epsilon(1e-12));
        REQUIRE(w[size_t(i)].y == w[size_t(i)].x);
        total += w[size_t(i)].x;
    }
    REQUIRE(total == Catch::Approx(4.0 * kPi).epsilon(1e-12));
}

TEST_CASE("single-pixel delta map projects onto one light", "[project]") {
    light_rig rig = desk_rig();
    image3f map(rig.map_width, rig.map_height, 0.0f);
    int r = 5, c = 11;
    map.set(r, c, {3.0f, 0.5f, 0.0f});
    int32_t k = rig.cell_at(r, c);
    double dw = pixel_solid_angle(rig.map_width, rig.map_height, r);
    light_weights w = project_env_to_weights(rig, map);
    for (int i = 0; i < rig.n(); ++i) {
        if (i == k) {
            REQUIRE(w[size_t(i)].x == 3.0f * dw);
            REQUIRE(w[size_t(i)].y == 0.5f * dw);
            REQUIRE(w[size_t(i)].z == 0.0);
        } else {
            REQUIRE(w[size_t(i)] == vec3d{});
        }
    }
}

TEST_CASE("weights conserve the full-map energy on random maps", "[project][property]") {
    light_rig rig = desk_rig();
    for (uint64_t seed = 0; seed < 20; ++seed) {
        rng rr(mix_seed(77, seed));
        image3f map = random_map(rr, rig.map_width, rig.map_height, 0.0, 10.0);
        light_weights w = project_env_to_weights(rig, map);
        vec3d sum{};
        for (const vec3d& wi : w) sum += wi;
        vec3d direct = env_total_energy(map);
        for (int ch = 0; ch < 3; ++ch)
            REQUIRE(std::abs(sum[ch] - direct[ch]) <= 1e-12 * std::abs(direct[ch]));
    }
}

TEST_CASE("projection is linear in the map", "[project][property]") {
    light_rig rig = desk_rig();
    rng rr(99);
    image3f a = random_map(rr, rig.map_width, rig.map_height, 0.0, 5.0);
    image3f b = random_map(rr, rig.map_width, rig.map_height, 0.0, 5.0);
    float alpha = 0.75f, beta = 1.5f;
    image3f mix(rig.map_width, rig.map_height);
    for (size_t i = 0; i < mix.pixels.size(); ++i)
        mix.pixels[i] = alpha * a.pixels[i] + beta * b.pixels[i];
    light_weights wa = project_env_to_weights(rig, a);
    light_weights wb = project_env_to_weights(rig, b);
    light_weights wm = project_env_to_weights(rig, mix);
    for (int i = 0; i < rig.n(); ++i) {
        vec3d want = wa[size_t(i)] * double(alpha) + wb[size_t(i)] * double(beta);
        for (int ch = 0; ch < 3; ++ch)
            REQUIRE(std::abs(wm[size_t(i)][ch] - want[ch]) <=
                    1e-6 * (1.0 + std::abs(want[ch])));
    }

    image3f wrong(rig.map_width + 1, rig.map_height);
    REQUIRE_THROWS_AS(project_env_to_weights(rig, wrong), data_error);
}

TEST_CASE("delta_env round-trips through projection", "[delta]") {
    light_rig rig = desk_rig();
    for (int i = 0; i < rig.n(); ++i) {
        light_weights w = project_env_to_weights(rig, delta_env(rig, i, {1, 1, 1}));
        for (int j = 0; j < rig.n(); ++j) {
            if (j == i) {
                REQUIRE(std::abs(w[size_t(j)].x - 1.0) < 1e-6);
                REQUIRE(std::abs(w[size_t(j)].y - 1.0) < 1e-6);
            } else {
                REQUIRE(w[size_t(j)] == vec3d{});
            }
        }
    }

    // two deltas act linearly
    image3f d2 = delta_env(rig, 2, {2, 2, 2});
    image3f d9 = delta_env(rig, 9, {1, 3, 0});
    image3f both(rig.map_width, rig.map_height);
    for (size_t p = 0; p < both.pixels.size(); ++p)
        both.pixels[p] = d2.pixels[p] + d9.pixels[p];
    light_weights w = project_env_to_weights(rig, both);
    REQUIRE(std::abs(w[2].x - 2.0) < 1e-6);
    REQUIRE(std::abs(w[9].y - 3.0) < 1e-6);
    REQUIRE(std::abs(w[9].z) < 1e-12);

    REQUIRE_THROWS_AS(delta_env(rig, 16, {1, 1, 1}), usage_error);
    REQUIRE_THROWS_AS(delta_env(rig, -1, {1, 1, 1}), usage_error);
}

TEST_CASE("cellwise constant environments behave like per-cell scalars", "[cellwise]") {
    light_rig rig = desk_rig();
    std::vector<vec3f> ones(size_t(rig.n()), vec3f{1, 1, 1});
    image3f uni = cellwise_constant_env(rig, ones);
    for (float v : uni.pixels) REQUIRE(v == 1.0f);

    rng rr(123);
    std::vector<vec3f> vals;
    for (int i = 0; i < rig.n(); ++i)
        vals.push_back({float(rr.uniform(0, 4)), float(rr.uniform(0, 4)), float(rr.uniform(0, 4))});
    light_weights w = project_env_to_weights(rig, cellwise_constant_env(rig, vals));
    for (int i = 0; i < rig.n(); ++i)
        for (int ch = 0; ch < 3; ++ch)
            REQUIRE(w[size_t(i)][ch] ==
                    Catch::Approx(double(vals[size_t(i)][ch]) * rig.cell_solid_angle[size_t(i)])
                        .epsilon(1e-12));
}

TEST_CASE("cell-permuting yaw permutes cylindrical weights", "[cellwise]") {
    // 2 rows x 8 lights on a 32-wide map: one light step = exactly 4 columns
    light_rig rig =
        build_rig(16, rig_layout::cylindrical, rig_coverage::full_sphere, 32, 16, 2, 8);
    rng rr(5);
    std::vector<vec3f> vals;
    for (int i = 0; i < 16; ++i)
        vals.push_back({float(rr.uniform(0, 4)), float(rr.uniform(0, 4)), float(rr.uniform(0, 4))});
    image3f env = cellwise_constant_env(rig, vals);
    light_weights w0 = project_env_to_weights(rig, env);
    light_weights w1 = project_env_to_weights(rig, rotate_env(env, kTwoPi / 8.0));
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 8; ++k)
            REQUIRE(w1[size_t(j * 8 + k)] == w0[size_t(j * 8 + (k + 7) % 8)]);
}

TEST_CASE("rig manifest rebuilds the identical rig", "[manifest]") {
    light_rig rig = build_rig(12, rig_layout::fibonacci, rig_coverage::frontal_hemisphere, 32, 16);
    std::string text = rig_to_json(rig).dump();
    light_rig back = rig_from_json(nlohmann::json::parse(text));
    REQUIRE(back.directions == rig.directions);  // shortest round-trip doubles
    REQUIRE(back.cell_of_pixel == rig.cell_of_pixel);
    REQUIRE(back.cell_solid_angle == rig.cell_solid_angle);
    REQUIRE(back.coverage == rig.coverage);
    REQUIRE(back.layout == rig.layout);

    nlohmann::json bad = rig_to_json(rig);
    bad["layout"] = "icosahedral";
    REQUIRE_THROWS_AS(rig_from_json(bad), data_error);
}
