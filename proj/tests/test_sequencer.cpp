// Copyright (c) 2026 the relight authors.
// SPDX-License-Identifier: Apache-2.0
//
// sequencer module tests: window planning, overlap masks, stitched
// coverage, the overlap-length distribution, and autoregressive
// generation against a copy-through oracle.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "relight/rng.hpp"
#include "relight/sequencer.hpp"

using namespace relight;

namespace {

nd<float> random_latents(rng& r, int total) {
    nd<float> x({int64_t(total), 3, 2, 2});
    for (auto& v : x.v) v = float(r.normal());
    return x;
}

void check_plan_invariants(const window_plan& plan) {
    REQUIRE_FALSE(plan.windows.empty());
    int prev_start = -1, prev_end = 0;
    int64_t covered = 0;
    for (size_t k = 0; k < plan.windows.size(); ++k) {
        const plan_window& w = plan.windows[k];
        REQUIRE(w.start >= 0);
        REQUIRE(w.start + plan.length <= plan.total);
        REQUIRE(w.start > prev_start);
        REQUIRE(int(w.mask.size()) == plan.length);
        if (k == 0) {
            REQUIRE(w.is_first);
            for (int m : w.mask) REQUIRE(m == 0);
            REQUIRE(w.emit_begin == 0);
        } else {
            REQUIRE_FALSE(w.is_first);
            for (int i = 0; i < plan.length; ++i)
                REQUIRE(w.mask[size_t(i)] == (i < plan.overlap ? 1 : 0));
            // realized overlap with the previous window is at least T
            REQUIRE(prev_end - w.start >= plan.overlap);
            // emits resume exactly where the previous window stopped
            REQUIRE(w.emit_begin == prev_end);
            REQUIRE(w.emit_begin >= w.start + plan.overlap);
        }
        REQUIRE(w.emit_end > w.emit_begin);
        REQUIRE(w.emit_end <= w.start + plan.length);
        covered += w.emit_end - w.emit_begin;
        prev_start = w.start;
        prev_end = w.emit_end;
    }
    REQUIRE(plan.windows.back().emit_end == plan.total);
    REQUIRE(covered == plan.total);  // each frame emitted exactly once
}

}  // namespace

TEST_CASE("plan_windows covers 108 frames with the canonical stride") {
    window_plan plan = plan_windows(108, 30, 4);
    REQUIRE(plan.windows.size() == 4);
    std::vector<int> starts;
    for (const auto& w : plan.windows) starts.push_back(w.start);
    REQUIRE(starts == std::vector<int>{0, 26, 52, 78});
    check_plan_invariants(plan);
}

TEST_CASE("plan_windows shifts the last window left to end at total") {
    window_plan plan = plan_windows(31, 30, 4);
    REQUIRE(plan.windows.size() == 2);
    REQUIRE(plan.windows[0].start == 0);
    REQUIRE(plan.windows[1].start == 1);
    // realized overlap grows to 29 but the mask keeps T ones
    REQUIRE(plan.windows[1].mask[3] == 1);
    REQUIRE(plan.windows[1].mask[4] == 0);
    REQUIRE(plan.windows[1].emit_begin == 30);
    REQUIRE(plan.windows[1].emit_end == 31);
    check_plan_invariants(plan);
}

TEST_CASE("plan_windows with total == length is a single window") {
    window_plan plan = plan_windows(30, 30, 4);
    REQUIRE(plan.windows.size() == 1);
    REQUIRE(plan.windows[0].is_first);
    REQUIRE(plan.windows[0].emit_begin == 0);
    REQUIRE(plan.windows[0].emit_end == 30);
    check_plan_invariants(plan);
}

TEST_CASE("plan_windows rejects degenerate arguments") {
    REQUIRE_THROWS_AS(plan_windows(10, 0, 0), usage_error);
    REQUIRE_THROWS_AS(plan_windows(10, 5, 5), usage_error);
    REQUIRE_THROWS_AS(plan_windows(10, 5, -1), usage_error);
    REQUIRE_THROWS_AS(plan_windows(4, 5, 1), usage_error);
}

TEST_CASE("plan invariants hold across a parameter sweep") {
    for (int L = 2; L <= 64; ++L) {
        std::vector<int> overlaps{0, 1, L / 2, L - 1};
        for (int T : overlaps) {
            if (T < 0 || T >= L) continue;
            for (int total = L; total <= 8 * L; ++total)
                check_plan_invariants(plan_windows(total, L, T));
        }
    }
}

TEST_CASE("plan serializes to json with masks and emit ranges") {
    window_plan plan = plan_windows(31, 30, 4);
    nlohmann::json j = plan_to_json(plan);
    REQUIRE(j["total"] == 31);
    REQUIRE(j["length"] == 30);
    REQUIRE(j["overlap"] == 4);
    REQUIRE(j["windows"].size() == 2);
    REQUIRE(j["windows"][1]["start"] == 1);
    REQUIRE(j["windows"][1]["mask"].size() == 30);
    REQUIRE(j["windows"][1]["emit"][0] == 30);
    REQUIRE(j["windows"][1]["emit"][1] == 31);
}

TEST_CASE("overlap length distribution is 0.5 at zero, 0.125 at 1..4") {
    rng r(mix_seed(0x5e9ull, 1));
    const int n = 100000;
    int counts[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < n; ++i) {
        int t = sample_overlap_T(r);
        REQUIRE(t >= 0);
        REQUIRE(t <= 4);
        ++counts[t];
    }
    REQUIRE(std::fabs(double(counts[0]) / n - 0.5) < 0.01);
    for (int t = 1; t <= 4; ++t) REQUIRE(std::fabs(double(counts[t]) / n - 0.125) < 0.01);
}

TEST_CASE("autoregressive_generate with a copy-through model reproduces input") {
    rng r(mix_seed(0x5e9ull, 2));
    window_model copy_through = [](const nd<float>& x, const std::vector<float>&, int) {
        return x;
    };
    for (auto [total, L, T] : {std::tuple{108, 30, 4}, {31, 30, 4}, {30, 30, 4}, {17, 5, 2}}) {
        nd<float> input = random_latents(r, total);
        nd<float> out = autoregressive_generate(copy_through, input, plan_windows(total, L, T));
        REQUIRE(out.dims == input.dims);
        REQUIRE(out.v == input.v);
    }
}

TEST_CASE("autoregressive_generate feeds previous predictions into the overlap") {
    rng r(mix_seed(0x5e9ull, 3));
    const int total = 23, L = 10, T = 3;
    window_plan plan = plan_windows(total, L, T);
    REQUIRE(plan.windows.size() >= 3);
    nd<float> input = random_latents(r, total);
    int64_t per = input.dims[1] * input.dims[2] * input.dims[3];

    // model adds one; overlap frames must already carry the previous
    // window's +1 while the rest are raw input
    int calls = 0;
    window_model add_one = [&](const nd<float>& x, const std::vector<float>& mask, int k) {
        const plan_window& w = plan.windows[size_t(k)];
        REQUIRE(int(mask.size()) == L);
        for (int i = 0; i < L; ++i) {
            REQUIRE(mask[size_t(i)] == float(w.mask[size_t(i)]));
            for (int64_t j = 0; j < per; ++j) {
                float raw = input.v[size_t((w.start + i) * per + j)];
                float expect = w.mask[size_t(i)] ? raw + 1.0f : raw;
                REQUIRE(x.v[size_t(i * per + j)] == expect);
            }
        }
        ++calls;
        nd<float> y = x;
        for (auto& v : y.v) v += 1.0f;
        return y;
    };
    nd<float> out = autoregressive_generate(add_one, input, plan);
    REQUIRE(calls == int(plan.windows.size()));
    for (size_t i = 0; i < out.v.size(); ++i) REQUIRE(out.v[i] == input.v[i] + 1.0f);
}

TEST_CASE("autoregressive_generate validates the input shape") {
    window_plan plan = plan_windows(12, 6, 2);
    nd<float> flat({12, 4});
    REQUIRE_THROWS_AS(autoregressive_generate(
                          [](const nd<float>& x, const std::vector<float>&, int) { return x; },
                          flat, plan),
                      usage_error);
    rng r(mix_seed(0x5e9ull, 4));
    nd<float> wrong = random_latents(r, 13);
    REQUIRE_THROWS_AS(autoregressive_generate(
                          [](const nd<float>& x, const std::vector<float>&, int) { return x; },
                          wrong, plan),
                      data_error);
}
