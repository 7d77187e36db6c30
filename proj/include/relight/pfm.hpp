// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// PFM float images, color variant only ("PF"). Rows are stored bottom to
// top. The scale line's sign selects endianness; its magnitude is ignored
// on read and written as 1.0.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "relight/errors.hpp"
#include "relight/image.hpp"

namespace relight {

namespace pfm_detail {

inline std::string token(const std::vector<uint8_t>& bytes, size_t& pos) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    if (start == pos) throw data_error("pfm: truncated header", start);
    return std::string(bytes.begin() + long(start), bytes.begin() + long(pos));
}

inline uint32_t bswap32(uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace pfm_detail

inline image3f decode_pfm(const std::vector<uint8_t>& bytes) {
    using namespace pfm_detail;
    size_t pos = 0;
    std::string magic = token(bytes, pos);
    if (magic == "Pf") throw data_error("pfm: grayscale 'Pf' not supported", 0);
    if (magic != "PF") throw data_error("pfm: bad magic '" + magic + "'", 0);

    size_t at = pos;
    int w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stoi(token(bytes, pos));
        at = pos;
        h = std::stoi(token(bytes, pos));
        at = pos;
        scale = std::stod(token(bytes, pos));
    } catch (const std::exception&) {
        throw data_error("pfm: malformed header field", at);
    }
    if (w < 1 || h < 1) throw data_error("pfm: bad dimensions", at);
    if (scale == 0.0) throw data_error("pfm: zero scale", at);
    bool little = scale < 0.0;

    // Exactly one whitespace byte separates the header from the payload.
    if (pos >= bytes.size() || !std::isspace(bytes[pos]))
        throw data_error("pfm: missing header terminator", pos);
    ++pos;

    size_t count = size_t(w) * size_t(h) * 3;
    if (bytes.size() - pos < count * 4)
        throw data_error("pfm: truncated payload", bytes.size());

    image3f img(w, h);
    bool host_little = (std::endian::native == std::endian::little);
    for (int y = 0; y < h; ++y) {
        int row = h - 1 - y;  // payload is bottom to top
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                uint32_t u;
                std::memcpy(&u, bytes.data() + pos, 4);
                pos += 4;
                if (little != host_little) u = bswap32(u);
                float f;
                std::memcpy(&f, &u, 4);
                if (std::isnan(f))
                    throw data_error("pfm: NaN sample", pos - 4);
                if (f < 0.0f || std::isinf(f))
                    throw data_error("pfm: negative or non-finite sample", pos - 4);
                img.at(row, x)[c] = f;
            }
        }
    }
    return img;
}

inline std::vector<uint8_t> encode_pfm(const image3f& img) {
    using namespace pfm_detail;
    check_finite_nonnegative(img, "encode_pfm");
    if (img.width < 1 || img.height < 1) throw data_error("encode_pfm: empty image");

    bool host_little = (std::endian::native == std::endian::little);
    std::string header = "PF\n" + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n" +
                         (host_little ? "-1.0" : "1.0") + "\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + size_t(img.width) * size_t(img.height) * 12);
    for (int y = img.height - 1; y >= 0; --y) {
        const float* row = img.at(y, 0);
        const uint8_t* raw = reinterpret_cast<const uint8_t*>(row);
        out.insert(out.end(), raw, raw + size_t(img.width) * 12);
    }
    return out;
}

}  // namespace relight
