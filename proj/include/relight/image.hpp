// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "relight/errors.hpp"
#include "relight/vec.hpp"

namespace relight {

// Linear-RGB float image, row-major, 3 interleaved channels.
// Doubles as the equirectangular radiance map type (unitless relative
// radiance; components finite and >= 0 when used as one).
struct image3f {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;  // width*height*3

    image3f() = default;
    image3f(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(size_t(w) * h * 3, fill) {}

    size_t pixel_count() const { return size_t(width) * height; }

    float* at(int row, int col) { return pixels.data() + (size_t(row) * width + col) * 3; }
    const float* at(int row, int col) const {
        return pixels.data() + (size_t(row) * width + col) * 3;
    }

    vec3f get(int row, int col) const {
        const float* p = at(row, col);
        return {p[0], p[1], p[2]};
    }
    void set(int row, int col, const vec3f& v) {
        float* p = at(row, col);
        p[0] = v.x;
        p[1] = v.y;
        p[2] = v.z;
    }

    bool same_dims(const image3f& o) const { return width == o.width && height == o.height; }
};

using radiance_map = image3f;

// Single-channel float image (hit masks and similar).
struct image1f {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    image1f() = default;
    image1f(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(size_t(w) * h, fill) {}

    float& at(int row, int col) { return pixels[size_t(row) * width + col]; }
    float at(int row, int col) const { return pixels[size_t(row) * width + col]; }
};

// 8-bit sRGB-encoded image.
struct ldr_image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // width*height*3

    ldr_image() = default;
    ldr_image(int w, int h) : width(w), height(h), pixels(size_t(w) * h * 3, 0) {}
};

inline void check_finite_nonnegative(const image3f& img, const char* what) {
    for (float v : img.pixels) {
        if (!std::isfinite(v)) throw data_error(std::string(what) + ": non-finite component");
        if (v < 0.0f) throw data_error(std::string(what) + ": negative component");
    }
}

// Bilinear sample at continuous pixel coordinates (x right, y down; integer
// coordinates land on pixel centers). Out-of-bounds coordinates clamp.
inline vec3f sample_bilinear_clamp(const image3f& img, float x, float y) {
    float cx = std::clamp(x, 0.0f, float(img.width - 1));
    float cy = std::clamp(y, 0.0f, float(img.height - 1));
    int x0 = std::min(int(cx), img.width - 2 >= 0 ? img.width - 2 : 0);
    int y0 = std::min(int(cy), img.height - 2 >= 0 ? img.height - 2 : 0);
    if (img.width == 1) x0 = 0;
    if (img.height == 1) y0 = 0;
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    float fx = cx - x0;
    float fy = cy - y0;
    vec3f a = img.get(y0, x0), b = img.get(y0, x1);
    vec3f c = img.get(y1, x0), d = img.get(y1, x1);
    vec3f top = a * (1 - fx) + b * fx;
    vec3f bot = c * (1 - fx) + d * fx;
    return top * (1 - fy) + bot * fy;
}

inline float sample_bilinear_clamp(const image1f& img, float x, float y) {
    float cx = std::clamp(x, 0.0f, float(img.width - 1));
    float cy = std::clamp(y, 0.0f, float(img.height - 1));
    int x0 = img.width > 1 ? std::min(int(cx), img.width - 2) : 0;
    int y0 = img.height > 1 ? std::min(int(cy), img.height - 2) : 0;
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    float fx = cx - x0;
    float fy = cy - y0;
    float top = img.at(y0, x0) * (1 - fx) + img.at(y0, x1) * fx;
    float bot = img.at(y1, x0) * (1 - fx) + img.at(y1, x1) * fx;
    return top * (1 - fy) + bot * fy;
}

// Mean of the three channel means; the luminance proxy used by the
// flicker metric.
inline double mean_luminance(const image3f& img) {
    double acc = 0;
    for (float v : img.pixels) acc += v;
    return img.pixels.empty() ? 0.0 : acc / double(img.pixels.size());
}

}  // namespace relight
