// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// Test-only reference implementations. Nothing here calls into the library's
// numeric kernels; each routine is the plainest loop that computes the
// quantity, in long double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tsattn/layout.hpp"
#include "tsattn/motion.hpp"
#include "tsattn/tensor.hpp"

namespace tsattn::testing {

using Real = long double;
using RealMatrix = std::vector<std::vector<Real>>;

inline RealMatrix naive_qk(const Tensor2& q, const Tensor2& k) {
  RealMatrix out(q.rows(), std::vector<Real>(k.rows(), 0.0L));
  for (std::size_t x = 0; x < q.rows(); ++x)
    for (std::size_t y = 0; y < k.rows(); ++y)
      for (std::size_t c = 0; c < q.cols(); ++c) out[x][y] += static_cast<Real>(q(x, c)) * static_cast<Real>(k(y, c));
  return out;
}

inline std::vector<Real> scalar_softmax(const std::vector<Real>& z) {
  Real peak = z[0];
  for (Real v : z) peak = std::max(peak, v);
  Real total = 0.0L;
  for (Real v : z) total += std::exp(v - peak);
  std::vector<Real> out;
  for (Real v : z) out.push_back(std::exp(v - peak) / total);
  return out;
}

inline std::vector<Real> semantic_map_reference(const Tensor2& q, const Tensor2& k, TextSpan subject) {
  const RealMatrix l = naive_qk(q, k);
  const Real sqrt_d = std::sqrt(static_cast<Real>(q.cols()));
  std::vector<Real> out(q.rows(), 0.0L);
  for (std::size_t x = 0; x < q.rows(); ++x) {
    for (std::size_t y = subject.begin; y < subject.end; ++y) out[x] += l[x][y] / sqrt_d;
    out[x] /= static_cast<Real>(subject.size());
  }
  return out;
}

inline std::vector<std::uint8_t> threshold_reference(const std::vector<Real>& a) {
  Real mean = 0.0L;
  for (Real v : a) mean += v;
  mean /= static_cast<Real>(a.size());
  std::vector<std::uint8_t> out;
  for (Real v : a) out.push_back(v >= mean ? 1 : 0);
  return out;
}

/// Pixel loop over the full k x k neighbourhood; out-of-frame counts as 0.
inline std::vector<std::uint8_t> erode_reference(const std::vector<std::uint8_t>& bits, const VideoGrid& g,
                                                 std::size_t k) {
  const long r = static_cast<long>(k / 2);
  std::vector<std::uint8_t> out(bits.size(), 0);
  for (std::size_t f = 0; f < g.frames; ++f) {
    for (long h = 0; h < static_cast<long>(g.height); ++h) {
      for (long w = 0; w < static_cast<long>(g.width); ++w) {
        bool all = true;
        for (long dh = -r; dh <= r; ++dh) {
          for (long dw = -r; dw <= r; ++dw) {
            const long hh = h + dh;
            const long ww = w + dw;
            if (hh < 0 || ww < 0 || hh >= static_cast<long>(g.height) || ww >= static_cast<long>(g.width)) {
              all = false;
            } else if (!bits[g.token_index(f, hh, ww)]) {
              all = false;
            }
          }
        }
        out[g.token_index(f, h, w)] = all ? 1 : 0;
      }
    }
  }
  return out;
}

/// Literal per-token transcription of the modulated attention for any
/// number of subjects, including the dense B and R it builds on the way.
struct ReferenceResult {
  RealMatrix attention;
  std::vector<RealMatrix> bias;           // per subject, N x M
  std::vector<RealMatrix> reinforcement;  // per subject, N x M
};

inline ReferenceResult modulation_reference(const Tensor2& q, const Tensor2& k, const Layout& layout,
                                            const std::vector<MotionMask>& masks) {
  const std::size_t n = q.rows();
  const std::size_t m = k.rows();
  const RealMatrix l = naive_qk(q, k);
  // Round logits to float exactly as the storage type would.
  RealMatrix lf(n, std::vector<Real>(m));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < m; ++y) lf[x][y] = static_cast<float>(l[x][y]);
  const Real sqrt_d = std::sqrt(static_cast<Real>(q.cols()));
  const Real r_min = layout.params.r_min;
  const Real r_max = layout.params.r_max;
  const Real eps = layout.params.epsilon;

  ReferenceResult res;
  RealMatrix added(n, std::vector<Real>(m, 0.0L));
  for (std::size_t s = 0; s < layout.subjects.size(); ++s) {
    const auto& subj = layout.subjects[s];
    RealMatrix b(n, std::vector<Real>(m, 0.0L));
    RealMatrix r(n, std::vector<Real>(m, 0.0L));
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t frame = layout.video.coord(x).frame;
      std::size_t seg = 0;
      while (!subj.events[seg].frames.contains(frame)) ++seg;
      Real mx = lf[x][0], mn = lf[x][0], mean = 0.0L;
      for (Real v : lf[x]) {
        mx = std::max(mx, v);
        mn = std::min(mn, v);
        mean += v;
      }
      mean /= static_cast<Real>(m);
      std::vector<Real> z;
      for (Real v : lf[x]) z.push_back(v / sqrt_d);
      const std::vector<Real> p = scalar_softmax(z);
      const Real pmax = *std::max_element(p.begin(), p.end());
      const Real pmin = *std::min_element(p.begin(), p.end());
      for (std::size_t j = 0; j < subj.events.size(); ++j) {
        for (std::size_t y = subj.events[j].span.begin; y < subj.events[j].span.end; ++y) {
          const Real pn = (p[y] - pmin) / (pmax - pmin + eps);
          if (j == seg) {
            b[x][y] = mx - mean;
            r[x][y] = r_min + (1.0L - pn) * (r_max - r_min);
          } else {
            b[x][y] = mn - mean;
            r[x][y] = r_min + pn * (r_max - r_min);
          }
        }
      }
      if (masks[s][x]) {
        for (std::size_t y = 0; y < m; ++y) added[x][y] += r[x][y] * b[x][y];
      }
    }
    res.bias.push_back(std::move(b));
    res.reinforcement.push_back(std::move(r));
  }
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<Real> z;
    for (std::size_t y = 0; y < m; ++y) z.push_back((lf[x][y] + added[x][y]) / sqrt_d);
    res.attention.push_back(scalar_softmax(z));
  }
  return res;
}

template <class T>
double max_abs_diff(const Matrix<T>& a, const RealMatrix& b) {
  double worst = 0.0;
  for (std::size_t x = 0; x < a.rows(); ++x)
    for (std::size_t y = 0; y < a.cols(); ++y)
      worst = std::max(worst, static_cast<double>(std::fabs(static_cast<Real>(a(x, y)) - b[x][y])));
  return worst;
}

// ---------------------------------------------------------------------------
// Seeded random instances

inline Tensor2 random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor2 t(rows, cols);
  for (float& v : t.data()) v = static_cast<float>(normal(rng));
  return t;
}

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random partition of [0, frames) into `parts` non-empty intervals.
inline std::vector<FrameInterval> random_partition(std::mt19937_64& rng, std::size_t frames, std::size_t parts) {
  std::vector<std::size_t> cuts(frames - 1);
  for (std::size_t i = 0; i < cuts.size(); ++i) cuts[i] = i + 1;
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(parts - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<FrameInterval> out;
  std::size_t at = 0;
  for (std::size_t c : cuts) {
    out.push_back({at, c});
    at = c;
  }
  out.push_back({at, frames});
  return out;
}

struct InstanceOptions {
  std::size_t min_subjects = 1;
  std::size_t max_subjects = 3;
  std::size_t max_events = 4;
  bool random_masks = true;  // otherwise masks come from motion_mask()
};

struct Instance {
  Tensor2 q;
  Tensor2 k;
  Layout layout;
  std::vector<MotionMask> masks;
};

/// N <= 256, M <= 64, d <= 32; spans of all subjects are pairwise disjoint.
inline Instance random_instance(std::uint64_t seed, InstanceOptions opt = {}) {
  std::mt19937_64 rng(seed);
  Instance in;
  Layout& l = in.layout;
  l.video = {uniform_int(rng, opt.max_events, 8), uniform_int(rng, 1, 6), uniform_int(rng, 1, 5)};
  const std::size_t subjects = uniform_int(rng, opt.min_subjects, opt.max_subjects);

  // Widths of every span, laid out left to right with random context gaps.
  std::size_t at = uniform_int(rng, 0, 2);
  for (std::size_t s = 0; s < subjects; ++s) {
    SubjectSpec subj;
    subj.name = "s" + std::to_string(s);
    const std::size_t w = uniform_int(rng, 1, 2);
    subj.subject_span = {at, at + w};
    at += w + uniform_int(rng, 0, 1);
    const std::size_t events = uniform_int(rng, 1, opt.max_events);
    const auto intervals = random_partition(rng, l.video.frames, events);
    for (std::size_t e = 0; e < events; ++e) {
      const std::size_t ew = uniform_int(rng, 1, 3);
      subj.events.push_back({{at, at + ew}, intervals[e], ""});
      at += ew + uniform_int(rng, 0, 1);
    }
    l.subjects.push_back(std::move(subj));
  }
  l.num_tokens = std::min<std::size_t>(64, at + uniform_int(rng, 1, 6));
  const std::size_t d = uniform_int(rng, 2, 32);
  const double scale = std::uniform_real_distribution<double>(0.5, 2.5)(rng);
  in.q = random_tensor(rng, l.video.tokens(), d, scale);
  in.k = random_tensor(rng, l.num_tokens, d, scale);

  for (std::size_t s = 0; s < subjects; ++s) {
    if (opt.random_masks) {
      MotionMask mask = MotionMask::filled(l.video, false);
      std::bernoulli_distribution coin(0.5);
      for (auto& b : mask.bits) b = coin(rng) ? 1 : 0;
      in.masks.push_back(std::move(mask));
    } else {
      in.masks.push_back(motion_mask(in.q, in.k, l.subjects[s].subject_span, l.video, 1));
    }
  }
  return in;
}

}  // namespace tsattn::testing
