// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "relight/errors.hpp"
#include "relight/image.hpp"
#include "relight/render.hpp"

namespace relight {

// All metrics assume linear frames nominally in [0, 1] (MAX = 1) and
// accumulate in f64.

inline constexpr double kPsnrCap = 99.0;

namespace metric_detail {

inline void check_pair(const image3f& a, const image3f& b, const char* what) {
    if (!a.same_dims(b)) throw usage_error(std::string(what) + ": image dims disagree");
    if (a.pixel_count() == 0) throw usage_error(std::string(what) + ": empty image");
}

inline double sum_sq_diff(const image3f& a, const image3f& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        double d = double(a.pixels[i]) - double(b.pixels[i]);
        acc += d * d;
    }
    return acc;
}

}  // namespace metric_detail

inline double psnr_from_mse(double mse) {
    if (!(mse > 0.0)) return kPsnrCap;
    double db = -10.0 * std::log10(mse);
    return db > kPsnrCap ? kPsnrCap : db;
}

inline double psnr(const image3f& a, const image3f& b) {
    metric_detail::check_pair(a, b, "psnr");
    return psnr_from_mse(metric_detail::sum_sq_diff(a, b) / double(a.pixels.size()));
}

// Clip PSNR pools squared error across every frame before the log, so a
// uniform offset scores the same as it does on a single frame.
inline double psnr(const std::vector<image3f>& a, const std::vector<image3f>& b) {
    if (a.size() != b.size()) throw usage_error("psnr: clip lengths disagree");
    if (a.empty()) throw usage_error("psnr: empty clip");
    double acc = 0.0;
    size_t n = 0;
    for (size_t f = 0; f < a.size(); ++f) {
        metric_detail::check_pair(a[f], b[f], "psnr");
        acc += metric_detail::sum_sq_diff(a[f], b[f]);
        n += a[f].pixels.size();
    }
    return psnr_from_mse(acc / double(n));
}

// SSIM with the standard 11x11 Gaussian window (sigma 1.5, K1 0.01,
// K2 0.03), per channel over window centers where the window fits, then
// averaged across channels. Images smaller than the window in either
// direction fall back to a single uniform full-image window so tiny
// hand-checked fixtures stay meaningful.
inline double ssim(const image3f& a, const image3f& b) {
    metric_detail::check_pair(a, b, "ssim");
    constexpr double kC1 = 1e-4;  // (0.01 * MAX)^2
    constexpr double kC2 = 9e-4;  // (0.03 * MAX)^2
    const int W = a.width, H = a.height;

    // the metric is symmetric; fix a canonical operand order so both call
    // orders run the exact same instruction stream and return the same bits
    const image3f* pa = &a;
    const image3f* pb = &b;
    if (std::memcmp(a.pixels.data(), b.pixels.data(),
                    a.pixels.size() * sizeof(float)) > 0)
        std::swap(pa, pb);

    // raw window weights plus one trailing division per moment: constant
    // images then hit exactly-zero variances instead of 1/n rounding dust
    int wh, ww;
    double wsum;
    std::vector<double> wts;
    if (W < 11 || H < 11) {
        wh = H;
        ww = W;
        wts.assign(size_t(H) * size_t(W), 1.0);
        wsum = double(H) * double(W);
    } else {
        wh = ww = 11;
        wts.resize(121);
        wsum = 0.0;
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 11; ++x) {
                double dy = y - 5, dx = x - 5;
                double w = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
                wts[size_t(y) * 11 + size_t(x)] = w;
                wsum += w;
            }
    }

    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        double chacc = 0.0;
        int64_t windows = 0;
        for (int y0 = 0; y0 + wh <= H; ++y0) {
            for (int x0 = 0; x0 + ww <= W; ++x0) {
                double wa = 0, wb = 0, waa = 0, wbb = 0, wab = 0;
                size_t k = 0;
                for (int y = 0; y < wh; ++y) {
                    for (int x = 0; x < ww; ++x, ++k) {
                        double w = wts[k];
                        double va = pa->at(y0 + y, x0 + x)[ch];
                        double vb = pb->at(y0 + y, x0 + x)[ch];
                        wa += w * va;
                        wb += w * vb;
                        waa += w * va * va;
                        wbb += w * vb * vb;
                        wab += w * va * vb;
                    }
                }
                double ma = wa / wsum, mb = wb / wsum;
                double ca = waa / wsum - ma * ma;
                double cb = wbb / wsum - mb * mb;
                double cab = wab / wsum - ma * mb;
                chacc += ((2.0 * ma * mb + kC1) * (2.0 * cab + kC2)) /
                         ((ma * ma + mb * mb + kC1) * (ca + cb + kC2));
                ++windows;
            }
        }
        total += chacc / double(windows);
    }
    return total / 3.0;
}

inline double ssim(const std::vector<image3f>& a, const std::vector<image3f>& b) {
    if (a.size() != b.size()) throw usage_error("ssim: clip lengths disagree");
    if (a.empty()) throw usage_error("ssim: empty clip");
    double acc = 0.0;
    for (size_t f = 0; f < a.size(); ++f) acc += ssim(a[f], b[f]);
    return acc / double(a.size());
}

// Backward warp by the parametric flow: output pixel x samples the source
// at center + scale * (x - center) + (dx, dy), pixel-center convention.
// `valid`, when given, marks outputs whose source coordinate stays inside
// the frame.
inline image3f warp_by_flow(const image3f& src, const parametric_flow& f,
                            image1f* valid = nullptr) {
    image3f out(src.width, src.height, 0.0f);
    if (valid) *valid = image1f(src.width, src.height, 0.0f);
    double cx = (src.width - 1) / 2.0, cy = (src.height - 1) / 2.0;
    for (int y = 0; y < src.height; ++y) {
        double sy = cy + f.scale * (y - cy) + f.dy;
        for (int x = 0; x < src.width; ++x) {
            double sx = cx + f.scale * (x - cx) + f.dx;
            out.set(y, x, sample_bilinear_clamp(src, float(sx), float(sy)));
            if (valid && sx >= 0.0 && sx <= src.width - 1.0 && sy >= 0.0 &&
                sy <= src.height - 1.0)
                valid->at(y, x) = 1.0f;
        }
    }
    return out;
}

// Mean absolute difference between each frame and its warped predecessor,
// averaged over consecutive pairs. Only pixels whose warped coordinate
// lands inside the previous frame count, so exact integer pans score zero
// instead of charging for content that just entered the view.
inline double temporal_warp_error(const std::vector<image3f>& frames,
                                  const std::vector<parametric_flow>& flows) {
    if (frames.empty()) throw usage_error("temporal_warp_error: no frames");
    if (frames.size() == 1) return 0.0;
    if (flows.size() + 1 != frames.size())
        throw usage_error("temporal_warp_error: need one flow per consecutive pair");
    double total = 0.0;
    for (size_t t = 0; t + 1 < frames.size(); ++t) {
        metric_detail::check_pair(frames[t], frames[t + 1], "temporal_warp_error");
        image1f valid;
        image3f warped = warp_by_flow(frames[t], flows[t], &valid);
        double acc = 0.0;
        int64_t n = 0;
        for (size_t p = 0; p < valid.pixels.size(); ++p) {
            if (valid.pixels[p] == 0.0f) continue;
            for (size_t c = 0; c < 3; ++c)
                acc += std::abs(double(frames[t + 1].pixels[p * 3 + c]) -
                                double(warped.pixels[p * 3 + c]));
            n += 3;
        }
        if (n == 0)
            throw data_error("temporal_warp_error: flow leaves no overlap at pair " +
                             std::to_string(t));
        total += acc / double(n);
    }
    return total / double(frames.size() - 1);
}

// Mean absolute mean-luminance difference between consecutive frames.
inline double flicker_index(const std::vector<image3f>& frames) {
    if (frames.empty()) throw usage_error("flicker_index: no frames");
    if (frames.size() == 1) return 0.0;
    double total = 0.0;
    for (size_t t = 0; t + 1 < frames.size(); ++t)
        total += std::abs(mean_luminance(frames[t + 1]) - mean_luminance(frames[t]));
    return total / double(frames.size() - 1);
}

}  // namespace relight
