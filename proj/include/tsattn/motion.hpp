// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// Motion-region extraction: the subject's semantic map is thresholded at its
// own mean and then eroded frame by frame.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tsattn/errors.hpp"
#include "tsattn/layout.hpp"
#include "tsattn/tensor.hpp"

namespace tsattn {

struct SemanticMap {
  std::vector<double> values;
  VideoGrid grid;
};

struct MotionMask {
  std::vector<std::uint8_t> bits;  // 0 or 1 per video token
  VideoGrid grid;

  bool operator[](std::size_t token) const noexcept { return bits[token] != 0; }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }

  static MotionMask filled(const VideoGrid& grid, bool on) {
    return {std::vector<std::uint8_t>(grid.tokens(), on ? 1 : 0), grid};
  }

  std::vector<float> as_floats() const { return {bits.begin(), bits.end()}; }

  friend bool operator==(const MotionMask&, const MotionMask&) = default;
};

/// Mean over the subject's text columns of QK^T / sqrt(d). Only the subject
/// columns are touched.
inline SemanticMap subject_semantic_map(const Tensor2& q, const Tensor2& k, TextSpan subject,
                                        const VideoGrid& grid) {
  if (subject.empty()) throw SpanError("subject span is empty");
  if (subject.end > k.rows()) throw SpanError("subject span exceeds the text token count");
  if (q.cols() != k.cols()) throw ShapeError("semantic map: Q and K widths differ");
  if (q.rows() != grid.tokens()) throw ShapeError("semantic map: Q rows do not match the video grid");

  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const double width = static_cast<double>(subject.size());
  SemanticMap out{std::vector<double>(q.rows()), grid};
  for (std::size_t x = 0; x < q.rows(); ++x) {
    const auto qrow = q.row(x);
    double sum = 0.0;
    for (std::size_t y = subject.begin; y < subject.end; ++y) {
      const auto krow = k.row(y);
      double dot = 0.0;
      for (std::size_t c = 0; c < qrow.size(); ++c) dot += static_cast<double>(qrow[c]) * krow[c];
      sum += dot * scale;
    }
    out.values[x] = sum / width;
  }
  return out;
}

/// bit = A_s >= mean(A_s).
inline MotionMask adaptive_threshold(const SemanticMap& map) {
  MotionMask out{std::vector<std::uint8_t>(map.values.size(), 0), map.grid};
  if (map.values.empty()) return out;
  double sum = 0.0;
  for (double v : map.values) sum += v;
  // Rounding in the sum can push the mean past the largest entry; the true
  // mean never does.
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const double mean = std::clamp(sum / static_cast<double>(map.values.size()), *lo, *hi);
  for (std::size_t i = 0; i < map.values.size(); ++i) out.bits[i] = map.values[i] >= mean ? 1 : 0;
  return out;
}

/// Per-frame binary erosion by a k x k square, zero padded at the frame
/// border. Separable: a horizontal run test followed by a vertical one.
inline MotionMask erode_mask(const MotionMask& mask, std::size_t kernel) {
  if (kernel == 0 || kernel % 2 == 0) throw ShapeError("erosion kernel must be odd and >= 1");
  const VideoGrid& g = mask.grid;
  if (mask.bits.size() != g.tokens()) throw ShapeError("mask length does not match its grid");
  if (kernel == 1) return mask;

  const std::size_t r = kernel / 2;
  const std::size_t H = g.height;
  const std::size_t W = g.width;
  MotionMask out{std::vector<std::uint8_t>(mask.bits.size(), 0), g};
  std::vector<std::uint8_t> horiz(H * W);
  for (std::size_t f = 0; f < g.frames; ++f) {
    const std::uint8_t* in = mask.bits.data() + f * H * W;
    std::uint8_t* dst = out.bits.data() + f * H * W;
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        bool keep = w >= r && w + r < W;
        for (std::size_t c = w >= r ? w - r : 0; keep && c <= w + r; ++c) keep = in[h * W + c] != 0;
        horiz[h * W + w] = keep ? 1 : 0;
      }
    }
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        bool keep = h >= r && h + r < H;
        for (std::size_t c = h >= r ? h - r : 0; keep && c <= h + r; ++c) keep = horiz[c * W + w] != 0;
        dst[h * W + w] = keep ? 1 : 0;
      }
    }
  }
  return out;
}

inline MotionMask motion_mask(const Tensor2& q, const Tensor2& k, TextSpan subject,
                              const VideoGrid& grid, std::size_t kernel) {
  return erode_mask(adaptive_threshold(subject_semantic_map(q, k, subject, grid)), kernel);
}

/// One mask per head. Under kHeadAveraged the semantic maps are averaged
/// across heads first and the single resulting mask is shared by all heads.
inline std::vector<MotionMask> head_motion_masks(std::span<const Tensor2> qs, std::span<const Tensor2> ks,
                                                 TextSpan subject, const VideoGrid& grid,
                                                 std::size_t kernel, HeadMaskPolicy policy) {
  if (qs.size() != ks.size() || qs.empty()) throw ShapeError("need matching, non-empty Q/K head lists");
  std::vector<MotionMask> out;
  if (policy == HeadMaskPolicy::kPerHead) {
    for (std::size_t h = 0; h < qs.size(); ++h) out.push_back(motion_mask(qs[h], ks[h], subject, grid, kernel));
    return out;
  }
  SemanticMap avg{std::vector<double>(grid.tokens(), 0.0), grid};
  for (std::size_t h = 0; h < qs.size(); ++h) {
    const SemanticMap m = subject_semantic_map(qs[h], ks[h], subject, grid);
    for (std::size_t i = 0; i < avg.values.size(); ++i) avg.values[i] += m.values[i];
  }
  for (double& v : avg.values) v /= static_cast<double>(qs.size());
  out.assign(qs.size(), erode_mask(adaptive_threshold(avg), kernel));
  return out;
}

}  // namespace tsattn
