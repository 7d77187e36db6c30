// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relight/errors.hpp"
#include "relight/nn.hpp"
#include "relight/rng.hpp"

namespace relight {

// One autoregressive window: absolute start frame, the 0/1 overlap mask
// over its local frames, and the absolute range it contributes to the
// stitched output (each output frame comes from exactly one window).
struct plan_window {
    int start = 0;
    bool is_first = false;
    std::vector<int> mask;  // length L; 1 where previous predictions are fed
    int emit_begin = 0, emit_end = 0;
};

struct window_plan {
    int total = 0, length = 0, overlap = 0;
    std::vector<plan_window> windows;
};

// Greedy cover: starts step by L - T; the last window shifts left to end
// exactly at `total`, growing its realized overlap.
inline window_plan plan_windows(int total, int length = 30, int overlap = 4) {
    if (length < 1) throw usage_error("plan_windows: window length must be positive");
    if (overlap < 0 || overlap >= length) throw usage_error("plan_windows: need 0 <= T < L");
    if (total < length) throw usage_error("plan_windows: total shorter than one window");

    window_plan plan;
    plan.total = total;
    plan.length = length;
    plan.overlap = overlap;

    std::vector<int> starts{0};
    while (starts.back() + length < total) starts.push_back(starts.back() + (length - overlap));
    if (starts.back() + length > total) starts.back() = total - length;

    int prev_end = 0;
    for (size_t k = 0; k < starts.size(); ++k) {
        plan_window w;
        w.start = starts[k];
        w.is_first = k == 0;
        w.mask.assign(size_t(length), 0);
        if (!w.is_first)
            for (int i = 0; i < overlap; ++i) w.mask[size_t(i)] = 1;
        w.emit_begin = k == 0 ? 0 : std::max(w.start + overlap, prev_end);
        w.emit_end = w.start + length;
        prev_end = w.emit_end;
        plan.windows.push_back(std::move(w));
    }
    return plan;
}

inline nlohmann::json plan_to_json(const window_plan& plan) {
    nlohmann::json jw = nlohmann::json::array();
    for (const auto& w : plan.windows)
        jw.push_back({{"start", w.start},
                      {"is_first", w.is_first},
                      {"mask", w.mask},
                      {"emit", {w.emit_begin, w.emit_end}}});
    return {{"total", plan.total}, {"length", plan.length}, {"overlap", plan.overlap},
            {"windows", jw}};
}

// Training-time overlap distribution: T=0 with p=0.5, 1..4 with p=0.125
// each. A single uniform draw carves the exact subranges.
inline int sample_overlap_T(rng& r) {
    double u = r.uniform();
    if (u < 0.5) return 0;
    int t = 1 + int((u - 0.5) / 0.125);
    return t > 4 ? 4 : t;
}

// Model callback: (window input latents [L, C, h, w], mask per frame,
// window index) -> predicted latents of the same shape.
using window_model =
    std::function<nd<float>(const nd<float>&, const std::vector<float>&, int)>;

// Runs the plan: window 0 sees raw inputs; later windows see their first T
// input frames replaced by the previous window's predictions at the same
// absolute indices. Emit ranges stitch the output.
inline nd<float> autoregressive_generate(const window_model& model, const nd<float>& input,
                                         const window_plan& plan) {
    if (input.dims.size() != 4) throw usage_error("autoregressive_generate: need [T, C, h, w]");
    if (input.dims[0] != plan.total)
        throw data_error("autoregressive_generate: plan covers " + std::to_string(plan.total) +
                         " frames, input has " + std::to_string(input.dims[0]));
    int64_t per = input.dims[1] * input.dims[2] * input.dims[3];
    int L = plan.length;

    nd<float> out(input.dims);
    nd<float> prev_pred;
    int prev_start = 0;
    for (size_t k = 0; k < plan.windows.size(); ++k) {
        const plan_window& w = plan.windows[k];
        nd<float> win({int64_t(L), input.dims[1], input.dims[2], input.dims[3]});
        std::copy(input.v.begin() + w.start * per, input.v.begin() + (w.start + L) * per,
                  win.v.begin());
        std::vector<float> mask(size_t(L), 0.0f);
        if (!w.is_first) {
            for (int i = 0; i < plan.overlap; ++i) {
                int abs_frame = w.start + i;
                int src = abs_frame - prev_start;
                std::copy(prev_pred.v.begin() + src * per, prev_pred.v.begin() + (src + 1) * per,
                          win.v.begin() + i * per);
                mask[size_t(i)] = 1.0f;
            }
        }
        nd<float> pred = model(win, mask, int(k));
        if (pred.dims != win.dims)
            throw data_error("autoregressive_generate: model changed the window shape");
        std::copy(pred.v.begin() + (w.emit_begin - w.start) * per,
                  pred.v.begin() + (w.emit_end - w.start) * per,
                  out.v.begin() + w.emit_begin * per);
        prev_pred = std::move(pred);
        prev_start = w.start;
    }
    return out;
}

}  // namespace relight
