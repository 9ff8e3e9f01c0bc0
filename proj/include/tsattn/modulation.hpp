// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// Event-aware cross-attention modulation.
//
// For a video token x in temporal segment i of a subject, with unscaled
// logits l = Q[x] K^T over all M text tokens:
//
//   b+ = max(l) - mean(l)            b- = min(l) - mean(l)
//   p  = softmax(l / sqrt(d))        p' = (p - min p) / (max p - min p + eps)
//   r+ = r_min + (1 - p') (r_max - r_min)
//   r- = r_min + p' (r_max - r_min)
//
// and the logit delta is r+ b+ on the columns of event i, r- b- on the
// columns of every other event of that subject, and 0 elsewhere. Deltas are
// gated by the subject's motion mask, summed over subjects, added to the raw
// logits, and the sum is divided by sqrt(d) before the final softmax.
//
// Two routes compute this. `fused_attention` keeps one pass over the logits
// and touches only event columns of masked rows. The dense route
// (`segment_bias` ... `dense_oracle`) materializes every N x M term and is
// the reference the fused path is checked against.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tsattn/errors.hpp"
#include "tsattn/layout.hpp"
#include "tsattn/motion.hpp"
#include "tsattn/tensor.hpp"

namespace tsattn {

/// Everything the kernels need to know about one subject.
struct SubjectPlan {
  MotionMask mask;
  std::vector<TextSpan> events;      // e_0 .. e_{m-1}
  std::vector<TokenRange> segments;  // query rows aligned to each event
};

inline void check_token_partition(std::span<const TokenRange> segments, std::size_t tokens) {
  std::size_t at = 0;
  for (const auto& s : segments) {
    if (s.begin != at || s.empty()) {
      throw PlanError(PlanError::Kind::kInvalid, "query segments do not partition the video tokens");
    }
    at = s.end;
  }
  if (segments.empty() || at != tokens) {
    throw PlanError(PlanError::Kind::kInvalid, "query segments do not cover all video tokens");
  }
}

inline SubjectPlan make_subject_plan(const Layout& layout, std::size_t subject, MotionMask mask) {
  if (subject >= layout.subjects.size()) throw LayoutError("subject index out of range");
  const auto& s = layout.subjects[subject];
  SubjectPlan plan;
  plan.mask = std::move(mask);
  std::vector<FrameInterval> intervals;
  for (const auto& e : s.events) {
    plan.events.push_back(e.span);
    intervals.push_back(e.frames);
  }
  if (!is_partition(intervals, layout.video.frames)) {
    throw PlanError(PlanError::Kind::kInvalid, "subject \"" + s.name + "\" frame intervals are not a partition");
  }
  plan.segments = frames_to_token_ranges(intervals, layout.video);
  return plan;
}

/// Motion masks for every subject of the layout from one (Q, K) pair.
inline std::vector<MotionMask> layout_masks(const Tensor2& q, const Tensor2& k, const Layout& layout) {
  std::vector<MotionMask> out;
  for (const auto& s : layout.subjects) {
    out.push_back(motion_mask(q, k, s.subject_span, layout.video, layout.params.kernel));
  }
  return out;
}

inline std::vector<SubjectPlan> make_subject_plans(const Layout& layout, std::span<const MotionMask> masks) {
  if (masks.size() != layout.subjects.size()) throw LayoutError("one motion mask per subject is required");
  std::vector<SubjectPlan> out;
  for (std::size_t s = 0; s < masks.size(); ++s) out.push_back(make_subject_plan(layout, s, masks[s]));
  return out;
}

namespace detail {

inline void check_plan_shapes(const SubjectPlan& s, std::size_t n, std::size_t m) {
  if (s.mask.bits.size() != n) throw ShapeError("motion mask length does not match the query count");
  if (s.events.size() != s.segments.size()) {
    throw ShapeError("subject has " + std::to_string(s.events.size()) + " events but " +
                     std::to_string(s.segments.size()) + " query segments");
  }
  for (const auto& e : s.events) {
    if (e.empty() || e.end > m) throw SpanError("event span outside the text tokens");
  }
  check_token_partition(s.segments, n);
}

inline void check_events(std::span<const TextSpan> events, std::size_t aligned, std::size_t m) {
  if (aligned >= events.size()) throw IndexError("aligned event index out of range");
  for (const auto& e : events) {
    if (e.empty() || e.end > m) throw SpanError("event span outside the text tokens");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fused route

/// Modulated attention for any number of subjects. Row statistics are
/// computed once per masked row and shared by all subjects; only event
/// columns receive a delta. Unmasked rows take exactly the vanilla path.
template <class Out = float>
Matrix<Out> fused_attention(const Tensor2& q, const Tensor2& k, std::span<const SubjectPlan> subjects,
                            const ModulationParams& params) {
  const Tensor2 logits = matmul_qk(q, k);
  const std::size_t n = logits.rows();
  const std::size_t m = logits.cols();
  if (m == 0) throw ShapeError("attention over zero text tokens");
  for (const auto& s : subjects) detail::check_plan_shapes(s, n, m);

  const double sqrt_d = std::sqrt(static_cast<double>(q.cols()));
  const double r_span = params.r_max - params.r_min;
  Matrix<Out> out(n, m);
  std::vector<double> z(m);
  std::vector<double> delta(m, 0.0);
  std::vector<std::size_t> cursor(subjects.size(), 0);

  for (std::size_t x = 0; x < n; ++x) {
    const auto row = logits.row(x);
    bool masked = false;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      while (!subjects[s].segments[cursor[s]].contains(x)) ++cursor[s];
      masked = masked || subjects[s].mask[x];
    }
    if (!masked) {
      for (std::size_t y = 0; y < m; ++y) z[y] = static_cast<double>(row[y]) / sqrt_d;
      detail::softmax_row<double, Out>(z, out.row(x));
      continue;
    }

    double lmax = row[0];
    double lmin = row[0];
    double sum = 0.0;
    for (float v : row) {
      lmax = std::max(lmax, static_cast<double>(v));
      lmin = std::min(lmin, static_cast<double>(v));
      sum += v;
    }
    const double mean = sum / static_cast<double>(m);
    const double b_plus = lmax - mean;
    const double b_minus = lmin - mean;
    double partition = 0.0;
    for (float v : row) partition += std::exp((v - lmax) / sqrt_d);
    const double p_max = 1.0 / partition;
    const double p_min = std::exp((lmin - lmax) / sqrt_d) / partition;
    const double denom = p_max - p_min + params.epsilon;

    for (std::size_t s = 0; s < subjects.size(); ++s) {
      const SubjectPlan& subj = subjects[s];
      if (!subj.mask[x]) continue;
      const std::size_t aligned = cursor[s];
      for (std::size_t j = 0; j < subj.events.size(); ++j) {
        for (std::size_t y = subj.events[j].begin; y < subj.events[j].end; ++y) {
          const double p = std::exp((row[y] - lmax) / sqrt_d) / partition;
          const double pn = std::clamp((p - p_min) / denom, 0.0, 1.0);
          if (j == aligned) {
            delta[y] += (params.r_min + (1.0 - pn) * r_span) * b_plus;
          } else {
            delta[y] += (params.r_min + pn * r_span) * b_minus;
          }
        }
      }
    }
    for (std::size_t y = 0; y < m; ++y) z[y] = (static_cast<double>(row[y]) + delta[y]) / sqrt_d;
    detail::softmax_row<double, Out>(z, out.row(x));
    for (const auto& subj : subjects) {
      for (const auto& e : subj.events) std::fill(delta.begin() + e.begin, delta.begin() + e.end, 0.0);
    }
  }
  return out;
}

template <class Out = float>
Matrix<Out> fused_attention(const Tensor2& q, const Tensor2& k, const SubjectPlan& subject,
                            const ModulationParams& params) {
  return fused_attention<Out>(q, k, std::span<const SubjectPlan>(&subject, 1), params);
}

/// Masks from the layout's subject spans, then the fused kernel.
template <class Out = float>
Matrix<Out> ts_attention(const Tensor2& q, const Tensor2& k, const Layout& layout) {
  const auto masks = layout_masks(q, k, layout);
  const auto plans = make_subject_plans(layout, masks);
  return fused_attention<Out>(q, k, plans, layout.params);
}

// ---------------------------------------------------------------------------
// Dense route

/// Bias rows for the queries of segment `aligned`: b+ on the aligned event's
/// columns, b- on other events' columns, 0 on context columns. Reductions
/// are per row over all M columns of the unscaled Q_i K^T.
inline Matrix<double> segment_bias(const Tensor2& q_segment, const Tensor2& k,
                                   std::span<const TextSpan> events, std::size_t aligned) {
  detail::check_events(events, aligned, k.rows());
  const Tensor2 logits = matmul_qk(q_segment, k);
  const auto hi = row_reduce(logits, Reduce::kMax);
  const auto lo = row_reduce(logits, Reduce::kMin);
  const auto avg = row_reduce(logits, Reduce::kMean);
  Matrix<double> bias(logits.rows(), logits.cols());
  for (std::size_t x = 0; x < logits.rows(); ++x) {
    for (std::size_t j = 0; j < events.size(); ++j) {
      const double b = j == aligned ? hi[x] - avg[x] : lo[x] - avg[x];
      for (std::size_t y = events[j].begin; y < events[j].end; ++y) bias(x, y) = b;
    }
  }
  return bias;
}

/// p' = (p - row min p) / (row max p - row min p + eps) with
/// p = softmax(Q_i K^T / sqrt(d)).
inline Matrix<double> normalized_intensity(const Tensor2& q_segment, const Tensor2& k, double epsilon) {
  const Tensor2 logits = matmul_qk(q_segment, k);
  const double sqrt_d = std::sqrt(static_cast<double>(q_segment.cols()));
  Matrix<double> scaled(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled.data()[i] = logits.data()[i] / sqrt_d;
  const Matrix<double> p = row_softmax(scaled);
  const auto p_max = row_reduce(p, Reduce::kMax);
  const auto p_min = row_reduce(p, Reduce::kMin);
  Matrix<double> out(p.rows(), p.cols());
  for (std::size_t x = 0; x < p.rows(); ++x) {
    for (std::size_t y = 0; y < p.cols(); ++y) {
      out(x, y) = (p(x, y) - p_min[x]) / (p_max[x] - p_min[x] + epsilon);
    }
  }
  return out;
}

/// Reinforcement rows for segment `aligned`: r+ on the aligned event's
/// columns, r- on other events' columns, 0 elsewhere.
inline Matrix<double> segment_reinforcement(const Tensor2& q_segment, const Tensor2& k,
                                            std::span<const TextSpan> events, std::size_t aligned,
                                            double r_min, double r_max, double epsilon) {
  detail::check_events(events, aligned, k.rows());
  const Matrix<double> pn = normalized_intensity(q_segment, k, epsilon);
  Matrix<double> r(pn.rows(), pn.cols());
  for (std::size_t x = 0; x < pn.rows(); ++x) {
    for (std::size_t j = 0; j < events.size(); ++j) {
      for (std::size_t y = events[j].begin; y < events[j].end; ++y) {
        r(x, y) = j == aligned ? r_min + (1.0 - pn(x, y)) * (r_max - r_min)
                               : r_min + pn(x, y) * (r_max - r_min);
      }
    }
  }
  return r;
}

/// Stacks per-segment rows into the full N x M matrix.
inline Matrix<double> assemble_rows(std::span<const Matrix<double>> per_segment,
                                    std::span<const TokenRange> segments, std::size_t tokens) {
  if (per_segment.size() != segments.size()) throw PlanError(PlanError::Kind::kInvalid, "segment count mismatch");
  check_token_partition(segments, tokens);
  const std::size_t m = per_segment.front().cols();
  Matrix<double> out(tokens, m);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& block = per_segment[i];
    if (block.rows() != segments[i].size() || block.cols() != m) {
      throw ShapeError("segment " + std::to_string(i) + " block does not match its token range");
    }
    std::copy(block.data().begin(), block.data().end(), out.row(segments[i].begin).begin());
  }
  return out;
}

inline Matrix<double> assemble_bias(std::span<const Matrix<double>> per_segment,
                                    std::span<const TokenRange> segments, std::size_t tokens) {
  return assemble_rows(per_segment, segments, tokens);
}

inline Matrix<double> assemble_reinforcement(std::span<const Matrix<double>> per_segment,
                                             std::span<const TokenRange> segments, std::size_t tokens) {
  return assemble_rows(per_segment, segments, tokens);
}

/// Dense additive terms for one subject.
struct DenseTerms {
  MotionMask mask;
  Matrix<double> bias;
  Matrix<double> reinforcement;
};

inline DenseTerms dense_terms(const Tensor2& q, const Tensor2& k, const SubjectPlan& subject,
                              const ModulationParams& params) {
  detail::check_plan_shapes(subject, q.rows(), k.rows());
  std::vector<Matrix<double>> b;
  std::vector<Matrix<double>> r;
  for (std::size_t i = 0; i < subject.segments.size(); ++i) {
    const Tensor2 qi = q.row_block(subject.segments[i].begin, subject.segments[i].end);
    b.push_back(segment_bias(qi, k, subject.events, i));
    r.push_back(segment_reinforcement(qi, k, subject.events, i, params.r_min, params.r_max, params.epsilon));
  }
  return {subject.mask, assemble_bias(b, subject.segments, q.rows()),
          assemble_reinforcement(r, subject.segments, q.rows())};
}

/// softmax((QK^T + sum_s M_s * R_s * B_s) / sqrt(d)) from dense terms.
template <class Out = float>
Matrix<Out> modulated_attention_multi(const Tensor2& q, const Tensor2& k, std::span<const DenseTerms> terms) {
  const Tensor2 logits = matmul_qk(q, k);
  const std::size_t n = logits.rows();
  const std::size_t m = logits.cols();
  for (const auto& t : terms) {
    if (t.mask.bits.size() != n || t.bias.rows() != n || t.bias.cols() != m ||
        t.reinforcement.rows() != n || t.reinforcement.cols() != m) {
      throw ShapeError("modulation terms do not match the N x M attention shape");
    }
  }
  Matrix<double> added(n, m, 0.0);
  for (const auto& t : terms) {
    for (std::size_t x = 0; x < n; ++x) {
      const double gate = t.mask[x] ? 1.0 : 0.0;
      for (std::size_t y = 0; y < m; ++y) added(x, y) += gate * t.reinforcement(x, y) * t.bias(x, y);
    }
  }
  const double sqrt_d = std::sqrt(static_cast<double>(q.cols()));
  Matrix<double> z(n, m);
  for (std::size_t i = 0; i < z.size(); ++i) {
    z.data()[i] = (static_cast<double>(logits.data()[i]) + added.data()[i]) / sqrt_d;
  }
  return row_softmax(z).template cast<Out>();
}

template <class Out = float>
Matrix<Out> modulated_attention(const Tensor2& q, const Tensor2& k, const MotionMask& mask,
                                const Matrix<double>& bias, const Matrix<double>& reinforcement) {
  const DenseTerms t{mask, bias, reinforcement};
  return modulated_attention_multi<Out>(q, k, std::span<const DenseTerms>(&t, 1));
}

inline constexpr std::size_t kDenseOracleMaxEntries = std::size_t{1} << 22;

/// Reference path: full N x M bias and reinforcement per subject.
template <class Out = float>
Matrix<Out> dense_oracle(const Tensor2& q, const Tensor2& k, const Layout& layout,
                         std::span<const MotionMask> masks) {
  if (q.rows() * k.rows() > kDenseOracleMaxEntries) {
    throw OracleSizeError("dense oracle refuses N*M = " + std::to_string(q.rows() * k.rows()) +
                          " > " + std::to_string(kDenseOracleMaxEntries));
  }
  const auto plans = make_subject_plans(layout, masks);
  std::vector<DenseTerms> terms;
  for (const auto& p : plans) terms.push_back(dense_terms(q, k, p, layout.params));
  return modulated_attention_multi<Out>(q, k, terms);
}

template <class Out = float>
Matrix<Out> dense_oracle(const Tensor2& q, const Tensor2& k, const Layout& layout) {
  const auto masks = layout_masks(q, k, layout);
  return dense_oracle<Out>(q, k, layout, masks);
}

}  // namespace tsattn
