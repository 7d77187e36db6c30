// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// Radiance RGBE (.hdr) codec. Shared-exponent 8-bit format: a pixel is
// (r,g,b,e) with component value (m + 0.5)/256 * 2^(e-128) and e == 0
// meaning black. New-style RLE scanlines are used for widths in
// [8, 32767], flat scanlines otherwise.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "relight/errors.hpp"
#include "relight/image.hpp"

namespace relight {

namespace rgbe_detail {

inline constexpr int kRleMinWidth = 8;
inline constexpr int kRleMaxWidth = 32767;

struct reader {
    const uint8_t* data;
    size_t size;
    size_t pos = 0;

    uint8_t byte() {
        if (pos >= size) throw data_error("rgbe: truncated stream", pos);
        return data[pos++];
    }

    // Reads a LF-terminated header line (CR tolerated before LF).
    std::string line() {
        std::string out;
        while (true) {
            if (pos >= size) throw data_error("rgbe: truncated header", pos);
            char c = char(data[pos++]);
            if (c == '\n') break;
            if (c != '\r') out.push_back(c);
            if (out.size() > 4096) throw data_error("rgbe: header line too long", pos);
        }
        return out;
    }
};

inline void decode_quad(const uint8_t q[4], float* rgb) {
    if (q[3] == 0) {
        rgb[0] = rgb[1] = rgb[2] = 0.0f;
        return;
    }
    // (m + 0.5)/256 * 2^(e-128)
    float scale = std::ldexp(1.0f, int(q[3]) - 136);
    rgb[0] = (float(q[0]) + 0.5f) * scale;
    rgb[1] = (float(q[1]) + 0.5f) * scale;
    rgb[2] = (float(q[2]) + 0.5f) * scale;
}

inline void encode_quad(const float* rgb, uint8_t q[4]) {
    float m = rgb[0];
    if (rgb[1] > m) m = rgb[1];
    if (rgb[2] > m) m = rgb[2];
    if (!(m >= 1e-38f)) {
        q[0] = q[1] = q[2] = q[3] = 0;
        return;
    }
    int k = 0;
    std::frexp(m, &k);  // m = f * 2^k, f in [0.5, 1)
    if (k > 127) k = 127;
    float scale = std::ldexp(1.0f, 8 - k);  // 256 / 2^k
    for (int c = 0; c < 3; ++c) {
        int v = int(std::floor(rgb[c] * scale));
        q[c] = uint8_t(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
    q[3] = uint8_t(k + 128);
}

// One RLE channel: runs of >= kMinRun repeated bytes, literal chunks otherwise.
inline void encode_rle_channel(const uint8_t* vals, int n, std::vector<uint8_t>& out) {
    constexpr int kMinRun = 4;
    int i = 0;
    while (i < n) {
        int run_start = i;
        int run_len = 0;
        while (run_start < n) {
            run_len = 1;
            while (run_len < 127 && run_start + run_len < n &&
                   vals[run_start + run_len] == vals[run_start])
                ++run_len;
            if (run_len >= kMinRun) break;
            run_start += run_len;
        }
        if (run_start >= n) run_len = 0;

        // Literals up to the start of the next worthwhile run.
        int lit = run_start - i;
        while (lit > 0) {
            int chunk = lit > 128 ? 128 : lit;
            out.push_back(uint8_t(chunk));
            out.insert(out.end(), vals + i, vals + i + chunk);
            i += chunk;
            lit -= chunk;
        }
        if (run_len >= kMinRun) {
            out.push_back(uint8_t(128 + run_len));
            out.push_back(vals[run_start]);
            i = run_start + run_len;
        }
    }
}

}  // namespace rgbe_detail

inline image3f decode_rgbe(const std::vector<uint8_t>& bytes) {
    using namespace rgbe_detail;
    reader rd{bytes.data(), bytes.size()};

    std::string magic = rd.line();
    if (magic.rfind("#?RADIANCE", 0) != 0 && magic.rfind("#?RGBE", 0) != 0)
        throw data_error("rgbe: missing #?RADIANCE/#?RGBE magic", 0);

    bool format_seen = false;
    while (true) {
        size_t at = rd.pos;
        std::string ln = rd.line();
        if (ln.empty()) break;  // blank line ends the header
        if (ln.rfind("FORMAT=", 0) == 0) {
            if (ln != "FORMAT=32-bit_rle_rgbe")
                throw data_error("rgbe: unsupported FORMAT '" + ln + "'", at);
            format_seen = true;
        }
        // other header variables (EXPOSURE, comments, ...) are ignored
    }
    if (!format_seen) throw data_error("rgbe: FORMAT=32-bit_rle_rgbe not declared", rd.pos);

    size_t res_at = rd.pos;
    std::string res = rd.line();
    int w = 0, h = 0;
    if (std::sscanf(res.c_str(), "-Y %d +X %d", &h, &w) != 2) {
        int dummy_a = 0, dummy_b = 0;
        if (std::sscanf(res.c_str(), "%*[-+]%*c %d %*[-+]%*c %d", &dummy_a, &dummy_b) == 2)
            throw data_error("rgbe: unsupported orientation '" + res + "'", res_at);
        throw data_error("rgbe: malformed resolution line '" + res + "'", res_at);
    }
    if (w < 1 || h < 1) throw data_error("rgbe: bad dimensions", res_at);

    image3f img(w, h);
    std::vector<uint8_t> scan(size_t(w) * 4);
    for (int y = 0; y < h; ++y) {
        size_t scan_at = rd.pos;
        uint8_t head[4];
        for (auto& b : head) b = rd.byte();
        bool rle = w >= kRleMinWidth && w <= kRleMaxWidth && head[0] == 2 && head[1] == 2 &&
                   ((int(head[2]) << 8) | head[3]) == w;
        if (rle) {
            for (int ch = 0; ch < 4; ++ch) {
                int i = 0;
                while (i < w) {
                    uint8_t code = rd.byte();
                    if (code > 128) {
                        int count = code - 128;
                        uint8_t value = rd.byte();
                        if (i + count > w)
                            throw data_error("rgbe: RLE run overflow in scanline " +
                                                 std::to_string(y),
                                             rd.pos);
                        for (int j = 0; j < count; ++j) scan[size_t(i++) * 4 + ch] = value;
                    } else if (code > 0) {
                        if (i + code > w)
                            throw data_error("rgbe: RLE literal overflow in scanline " +
                                                 std::to_string(y),
                                             rd.pos);
                        for (int j = 0; j < code; ++j) scan[size_t(i++) * 4 + ch] = rd.byte();
                    } else {
                        throw data_error("rgbe: zero RLE code in scanline " + std::to_string(y),
                                         rd.pos);
                    }
                }
            }
        } else {
            scan[0] = head[0];
            scan[1] = head[1];
            scan[2] = head[2];
            scan[3] = head[3];
            for (size_t i = 4; i < scan.size(); ++i) scan[i] = rd.byte();
            (void)scan_at;
        }
        for (int x = 0; x < w; ++x) decode_quad(&scan[size_t(x) * 4], img.at(y, x));
    }
    return img;
}

inline std::vector<uint8_t> encode_rgbe(const image3f& map) {
    using namespace rgbe_detail;
    check_finite_nonnegative(map, "encode_rgbe");
    if (map.width < 1 || map.height < 1) throw data_error("encode_rgbe: empty image");

    std::string header = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " +
                         std::to_string(map.height) + " +X " + std::to_string(map.width) + "\n";
    std::vector<uint8_t> out(header.begin(), header.end());

    int w = map.width;
    bool rle = w >= kRleMinWidth && w <= kRleMaxWidth;
    std::vector<uint8_t> chan(size_t(w), 0);
    std::vector<uint8_t> quads(size_t(w) * 4, 0);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < w; ++x) encode_quad(map.at(y, x), &quads[size_t(x) * 4]);
        if (rle) {
            out.push_back(2);
            out.push_back(2);
            out.push_back(uint8_t(w >> 8));
            out.push_back(uint8_t(w & 0xff));
            for (int ch = 0; ch < 4; ++ch) {
                for (int x = 0; x < w; ++x) chan[size_t(x)] = quads[size_t(x) * 4 + ch];
                encode_rle_channel(chan.data(), w, out);
            }
        } else {
            out.insert(out.end(), quads.begin(), quads.end());
        }
    }
    return out;
}

}  // namespace relight
