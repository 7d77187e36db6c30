// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// Tonemapped LDR previews and a minimal 8-bit RGB PNG writer on top of
// zlib (filter type 0 everywhere, single IDAT chunk).

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "relight/errors.hpp"
#include "relight/image.hpp"

namespace relight {

// c' = clamp(c * 2^stops, 0, 1)^(1/gamma), quantized with round-half-up.
inline ldr_image tonemap_preview(const image3f& img, double stops = 0.0, double gamma = 2.2) {
    if (!(gamma > 0.0)) throw usage_error("tonemap_preview: gamma must be positive");
    check_finite_nonnegative(img, "tonemap_preview");
    ldr_image out(img.width, img.height);
    double gain = std::exp2(stops);
    double inv_gamma = 1.0 / gamma;
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        double c = double(img.pixels[i]) * gain;
        if (c < 0.0) c = 0.0;
        if (c > 1.0) c = 1.0;
        double v = std::pow(c, inv_gamma) * 255.0;
        long q = std::lround(v);
        out.pixels[i] = uint8_t(q < 0 ? 0 : (q > 255 ? 255 : q));
    }
    return out;
}

namespace png_detail {

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

inline void put_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& payload) {
    put_u32_be(out, uint32_t(payload.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = uint32_t(
        ::crc32(0, out.data() + crc_start, uInt(out.size() - crc_start)));
    put_u32_be(out, crc);
}

}  // namespace png_detail

inline std::vector<uint8_t> encode_png(const ldr_image& img) {
    using namespace png_detail;
    if (img.width < 1 || img.height < 1) throw data_error("encode_png: empty image");

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, uint32_t(img.width));
    put_u32_be(ihdr, uint32_t(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);

    // filter byte 0 in front of every raw row
    size_t stride = size_t(img.width) * 3;
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * size_t(img.height));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const uint8_t* row = &img.pixels[size_t(y) * stride];
        raw.insert(raw.end(), row, row + stride);
    }

    uLongf bound = ::compressBound(uLong(raw.size()));
    std::vector<uint8_t> idat(bound);
    if (::compress2(idat.data(), &bound, raw.data(), uLong(raw.size()), 9) != Z_OK)
        throw data_error("encode_png: deflate failed");
    idat.resize(bound);
    put_chunk(out, "IDAT", idat);
    put_chunk(out, "IEND", {});
    return out;
}

inline std::vector<uint8_t> encode_png(const image3f& img, double stops = 0.0,
                                       double gamma = 2.2) {
    return encode_png(tonemap_preview(img, stops, gamma));
}

}  // namespace relight
