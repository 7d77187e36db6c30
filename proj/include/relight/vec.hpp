// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace relight {

// Minimal 3-vector used for directions, positions and RGB triples.
template <typename T>
struct vec3 {
    T x = 0, y = 0, z = 0;

    constexpr vec3() = default;
    constexpr vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
    constexpr explicit vec3(T s) : x(s), y(s), z(s) {}

    constexpr T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr vec3 operator+(const vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr vec3 operator-(const vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr vec3 operator*(const vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
    constexpr vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
    constexpr vec3 operator/(T s) const { return {x / s, y / s, z / s}; }
    constexpr vec3 operator-() const { return {-x, -y, -z}; }
    vec3& operator+=(const vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    vec3& operator*=(T s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
    constexpr bool operator==(const vec3&) const = default;
};

template <typename T>
constexpr vec3<T> operator*(T s, const vec3<T>& v) {
    return v * s;
}

template <typename T>
constexpr T dot(const vec3<T>& a, const vec3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
constexpr vec3<T> cross(const vec3<T>& a, const vec3<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
T length(const vec3<T>& v) {
    return std::sqrt(dot(v, v));
}

template <typename T>
vec3<T> normalize(const vec3<T>& v) {
    T len = length(v);
    return len > 0 ? v / len : v;
}

using vec3f = vec3<float>;
using vec3d = vec3<double>;

inline vec3d to_double(const vec3f& v) { return {v.x, v.y, v.z}; }
inline vec3f to_float(const vec3d& v) {
    return {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
}

}  // namespace relight
