// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "relight/errors.hpp"

namespace relight {

// Dense row-major f32 tensor. All in-memory math is f32/f64; f16 exists
// only as a container storage dtype.
struct tensor {
    std::vector<int64_t> dims;
    std::vector<float> data;

    tensor() = default;
    explicit tensor(std::vector<int64_t> d, float fill = 0.0f) : dims(std::move(d)) {
        data.assign(size_t(numel_of(dims)), fill);
    }

    static int64_t numel_of(const std::vector<int64_t>& d) {
        int64_t n = 1;
        for (int64_t v : d) {
            if (v < 0) throw usage_error("tensor: negative dimension");
            n *= v;
        }
        return n;
    }

    int64_t numel() const { return int64_t(data.size()); }
    int rank() const { return int(dims.size()); }

    bool same_shape(const tensor& o) const { return dims == o.dims; }
};

inline void check_finite(const tensor& t, const char* what) {
    for (float v : t.data)
        if (!std::isfinite(v)) throw numeric_error(std::string(what) + ": non-finite value");
}

// IEEE binary16 conversions, round to nearest even.
inline uint16_t float_to_half(float f) {
    uint32_t x;
    std::memcpy(&x, &f, 4);
    uint16_t sign = uint16_t((x >> 16) & 0x8000u);
    uint32_t mant = x & 0x7fffffu;
    uint32_t exp8 = (x >> 23) & 0xffu;
    if (exp8 == 0xffu) return uint16_t(sign | 0x7c00u | (mant ? 0x200u : 0));
    int exp = int(exp8) - 127 + 15;
    if (exp >= 31) return uint16_t(sign | 0x7c00u);
    if (exp <= 0) {
        if (exp < -10) return sign;
        mant |= 0x800000u;
        int shift = 14 - exp;  // bring a 24-bit mantissa down to <= 10 bits
        uint32_t sub = mant >> shift;
        uint32_t rem = mant & ((1u << shift) - 1);
        uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (sub & 1))) ++sub;
        return uint16_t(sign | sub);
    }
    uint16_t out = uint16_t(sign | (uint32_t(exp) << 10) | (mant >> 13));
    uint32_t rem = mant & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (out & 1))) ++out;  // carry may reach inf
    return out;
}

inline float half_to_float(uint16_t h) {
    int exp = (h >> 10) & 0x1f;
    uint32_t mant = h & 0x3ffu;
    float v;
    if (exp == 0)
        v = std::ldexp(float(mant), -24);
    else if (exp == 31)
        v = mant ? std::numeric_limits<float>::quiet_NaN()
                 : std::numeric_limits<float>::infinity();
    else
        v = std::ldexp(float(mant + 1024u), exp - 25);
    return (h & 0x8000u) ? -v : v;
}

}  // namespace relight
