// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsattn/harness.hpp"
#include "tsattn/modulation.hpp"
#include "tsattn/tensor.hpp"

namespace tsattn {

struct BenchReport {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t d = 0;
  std::size_t reps = 0;
  VideoGrid grid;
  std::size_t masked_tokens = 0;
  double vanilla_ms = 0.0;  // medians
  double fused_ms = 0.0;
  std::optional<double> dense_ms;  // absent when N*M exceeds the oracle guard

  double fused_over_vanilla() const { return fused_ms / vanilla_ms; }
  std::optional<double> dense_over_fused() const {
    return dense_ms ? std::optional<double>(*dense_ms / fused_ms) : std::nullopt;
  }
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

template <class F>
double time_ms(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

/// Frame-major grid with N tokens: up to 16 frames, near-square frames.
inline VideoGrid bench_grid(std::size_t n) {
  std::size_t frames = 1;
  for (std::size_t f = 16; f >= 1; --f) {
    if (n % f == 0) {
      frames = f;
      break;
    }
  }
  const std::size_t plane = n / frames;
  std::size_t height = 1;
  for (std::size_t h = 1; h * h <= plane; ++h) {
    if (plane % h == 0) height = h;
  }
  return {frames, height, plane / height};
}

}  // namespace detail

/// Synthetic single-head instance of the requested size.
inline SynthSpec bench_spec(std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.grid = detail::bench_grid(n);
  s.num_tokens = m;
  s.dim = d;
  s.heads = 1;
  s.subject_width = std::min<std::size_t>(2, std::max<std::size_t>(1, m / 4));
  s.events = std::max<std::size_t>(1, std::min<std::size_t>({3, s.grid.frames, m - s.subject_width}));
  s.event_width = std::max<std::size_t>(1, std::min<std::size_t>(4, (m - s.subject_width) / s.events));
  return s;
}

/// Median wall time of vanilla attention, the fused kernel (motion masks
/// included) and the dense oracle.
inline BenchReport run_bench(std::size_t n, std::size_t m, std::size_t d, std::size_t reps, std::uint64_t seed = 0) {
  if (n == 0 || m < 2 || d == 0 || reps == 0) throw ShapeError("bench needs n >= 1, m >= 2, d >= 1, reps >= 1");
  const SynthSpec spec = bench_spec(n, m, d, seed);
  const SynthInputs in = synth_inputs(spec);
  const Tensor2& q = in.queries.front();
  const Tensor2& k = in.keys.front();
  const Layout& layout = in.layout;

  BenchReport r;
  r.n = n;
  r.m = m;
  r.d = d;
  r.reps = reps;
  r.grid = spec.grid;
  r.masked_tokens = layout_masks(q, k, layout).front().count();
  const bool with_dense = n * m <= kDenseOracleMaxEntries;
  std::vector<double> vanilla, fused, dense;
  float sink = 0.0f;
  for (std::size_t i = 0; i < reps; ++i) {
    // Alternate the order so neither path always runs on a cold cache.
    auto time_vanilla = [&] { vanilla.push_back(detail::time_ms([&] { sink += vanilla_attention(q, k)(0, 0); })); };
    auto time_fused = [&] { fused.push_back(detail::time_ms([&] { sink += ts_attention(q, k, layout)(0, 0); })); };
    if (i % 2 == 0) {
      time_vanilla();
      time_fused();
    } else {
      time_fused();
      time_vanilla();
    }
    if (with_dense) dense.push_back(detail::time_ms([&] { sink += dense_oracle(q, k, layout)(0, 0); }));
  }
  if (!(sink >= 0.0f)) throw Error("bench produced a non-finite attention value");
  r.vanilla_ms = detail::median(vanilla);
  r.fused_ms = detail::median(fused);
  if (with_dense) r.dense_ms = detail::median(dense);
  return r;
}

inline nlohmann::json bench_to_json(const BenchReport& r) {
  nlohmann::json j = {{"n", r.n},
                      {"m", r.m},
                      {"d", r.d},
                      {"reps", r.reps},
                      {"grid", {{"frames", r.grid.frames}, {"height", r.grid.height}, {"width", r.grid.width}}},
                      {"masked_tokens", r.masked_tokens},
                      {"vanilla_ms", r.vanilla_ms},
                      {"fused_ms", r.fused_ms},
                      {"dense_ms", nullptr},
                      {"fused_over_vanilla", r.fused_over_vanilla()},
                      {"dense_over_fused", nullptr}};
  if (r.dense_ms) {
    j["dense_ms"] = *r.dense_ms;
    j["dense_over_fused"] = *r.dense_over_fused();
  }
  return j;
}

inline std::string bench_table(const BenchReport& r) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "N=%zu M=%zu d=%zu reps=%zu grid=%zux%zux%zu masked=%zu\n", r.n, r.m, r.d, r.reps,
                r.grid.frames, r.grid.height, r.grid.width, r.masked_tokens);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-10s %12s %10s\n%-10s %12.3f %10s\n%-10s %12.3f %10.3f\n", "path", "median_ms",
                "ratio", "vanilla", r.vanilla_ms, "1.000", "fused", r.fused_ms, r.fused_over_vanilla());
  out += buf;
  if (r.dense_ms) {
    std::snprintf(buf, sizeof buf, "%-10s %12.3f %10.3f  (dense/fused)\n", "dense", *r.dense_ms, *r.dense_over_fused());
  } else {
    std::snprintf(buf, sizeof buf, "%-10s %12s %10s\n", "dense", "skipped", "-");
  }
  out += buf;
  return out;
}

}  // namespace tsattn
