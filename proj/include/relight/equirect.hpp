// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "relight/errors.hpp"
#include "relight/image.hpp"
#include "relight/vec.hpp"

namespace relight {

// Equirectangular direction convention (y up, -z forward):
//   v = (row+0.5)/H, u = (col+0.5)/W
//   theta = pi*v measured from +Y, phi = 2*pi*(u-0.5)
//   d = (sin(theta)*sin(phi), cos(theta), -sin(theta)*cos(phi))
// The map center therefore looks down -Z and the top row toward +Y.

inline constexpr double kPi = std::numbers::pi_v<double>;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi_v<double>;

inline vec3d pixel_to_dir(int width, int height, int row, int col) {
    if (row < 0 || row >= height || col < 0 || col >= width)
        throw data_error("pixel_to_dir: index out of range");
    double v = (row + 0.5) / height;
    double u = (col + 0.5) / width;
    double theta = kPi * v;
    double phi = kTwoPi * (u - 0.5);
    double st = std::sin(theta);
    return {st * std::sin(phi), std::cos(theta), -st * std::cos(phi)};
}

inline std::pair<int, int> dir_to_pixel(int width, int height, const vec3d& d) {
    double y = std::clamp(d.y, -1.0, 1.0);
    double theta = std::acos(y);
    double phi = std::atan2(d.x, -d.z);  // sin(phi)=x/st, cos(phi)=-z/st
    double v = theta / kPi;
    double u = phi / kTwoPi + 0.5;
    int row = std::clamp(int(std::floor(v * height)), 0, height - 1);
    int col = int(std::floor(u * width)) % width;
    if (col < 0) col += width;
    return {row, col};
}

// Solid angle of one pixel in row `row`; constant across the row.
inline double pixel_solid_angle(int width, int height, int row) {
    return (kTwoPi / width) *
           (std::cos(kPi * row / height) - std::cos(kPi * (row + 1) / height));
}

// Total radiance * solid-angle integral over the map. Each row is reduced
// in sorted order so the result is invariant under column permutations;
// integer-pixel rolls therefore conserve the reported energy bit for bit.
inline vec3d env_total_energy(const image3f& map) {
    vec3d total{};
    std::vector<float> row(map.width);
    for (int r = 0; r < map.height; ++r) {
        double dw = pixel_solid_angle(map.width, map.height, r);
        for (int ch = 0; ch < 3; ++ch) {
            for (int c = 0; c < map.width; ++c) row[size_t(c)] = map.at(r, c)[ch];
            std::sort(row.begin(), row.end());
            double sum = 0;
            for (float v : row) sum += v;
            total[ch] += sum * dw;
        }
    }
    return total;
}

// Horizontal rotation of an environment map. Positive yaw shifts content
// toward increasing azimuth (increasing column). Yaw that is an exact
// multiple of one pixel becomes an integer roll; fractional yaw is resampled
// bilinearly with wrap-around.
inline image3f rotate_env(const image3f& map, double yaw) {
    double turns = yaw / kTwoPi;
    turns -= std::floor(turns);
    double shift = turns * map.width;  // pixels of content displacement
    image3f out(map.width, map.height);

    double nearest = std::round(shift);
    if (std::abs(shift - nearest) < 1e-9) {
        int k = int(nearest) % map.width;
        for (int r = 0; r < map.height; ++r)
            for (int c = 0; c < map.width; ++c)
                out.set(r, c, map.get(r, (c - k + map.width) % map.width));
        return out;
    }

    int base = int(std::floor(shift));
    float frac = float(shift - base);
    for (int r = 0; r < map.height; ++r) {
        for (int c = 0; c < map.width; ++c) {
            int c0 = (c - base - 1 + 4 * map.width) % map.width;
            int c1 = (c0 + 1) % map.width;
            // source column c - shift = (c - base) - frac, between c0 and c1
            vec3f a = map.get(r, c1);
            vec3f b = map.get(r, c0);
            out.set(r, c, a * (1.0f - frac) + b * frac);
        }
    }
    return out;
}

}  // namespace relight
