// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tsattn/errors.hpp"

namespace tsattn {

/// Half-open index range [begin, end). The tag keeps text spans, frame
/// intervals and video-token ranges from being mixed up.
template <class Tag>
struct HalfOpen {
  std::size_t begin = 0;
  std::size_t end = 0;

  constexpr std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  constexpr bool empty() const noexcept { return end <= begin; }
  constexpr bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  constexpr bool overlaps(const HalfOpen& o) const noexcept {
    return begin < o.end && o.begin < end;
  }
  friend constexpr bool operator==(const HalfOpen&, const HalfOpen&) = default;
};

using TextSpan = HalfOpen<struct TextSpanTag>;
using FrameInterval = HalfOpen<struct FrameIntervalTag>;
using TokenRange = HalfOpen<struct TokenRangeTag>;

struct GridCoord {
  std::size_t frame = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

/// Frame-major latent token grid: token = f*H*W + h*W + w.
struct VideoGrid {
  std::size_t frames = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t frame_tokens() const noexcept { return height * width; }
  std::size_t tokens() const noexcept { return frames * height * width; }

  std::size_t token_index(std::size_t f, std::size_t h, std::size_t w) const {
    if (f >= frames || h >= height || w >= width) {
      throw IndexError("grid coordinate (" + std::to_string(f) + "," + std::to_string(h) + "," +
                       std::to_string(w) + ") outside " + std::to_string(frames) + "x" +
                       std::to_string(height) + "x" + std::to_string(width));
    }
    return f * height * width + h * width + w;
  }

  GridCoord coord(std::size_t token) const {
    if (token >= tokens()) throw IndexError("token " + std::to_string(token) + " outside grid");
    const std::size_t plane = frame_tokens();
    return {token / plane, (token % plane) / width, token % width};
  }

  friend bool operator==(const VideoGrid&, const VideoGrid&) = default;
};

struct EventSpec {
  TextSpan span;
  FrameInterval frames;
  std::string text;  // optional; used only when asking a planner
};

struct SubjectSpec {
  std::string name;
  TextSpan subject_span;
  std::vector<EventSpec> events;
};

enum class HeadMaskPolicy { kPerHead, kHeadAveraged };

struct ModulationParams {
  double r_min = 1.0;
  double r_max = 1.5;
  std::size_t kernel = 3;
  double epsilon = 1e-6;
  double apply_fraction = 0.2;
  HeadMaskPolicy head_mask_policy = HeadMaskPolicy::kPerHead;

  static ModulationParams text_to_video() { return {}; }
  static ModulationParams image_to_video() {
    ModulationParams p;
    p.apply_fraction = 0.4;
    return p;
  }
};

struct Layout {
  VideoGrid video;
  std::size_t num_tokens = 0;
  std::vector<SubjectSpec> subjects;
  ModulationParams params;
};

/// Per subject, one frame interval per event, in event order.
using SegmentationPlan = std::vector<std::vector<FrameInterval>>;

/// Splits [0, frames) into `parts` contiguous intervals whose sizes differ by
/// at most one; the remainder goes to the earliest intervals.
inline std::vector<FrameInterval> uniform_segmentation(std::size_t frames, std::size_t parts) {
  if (parts == 0) throw PlanError(PlanError::Kind::kInfeasible, "cannot segment into zero events");
  if (parts > frames) {
    throw PlanError(PlanError::Kind::kInfeasible, std::to_string(parts) + " events do not fit in " +
                                                      std::to_string(frames) + " frames");
  }
  const std::size_t base = frames / parts;
  const std::size_t extra = frames % parts;
  std::vector<FrameInterval> out;
  out.reserve(parts);
  std::size_t at = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    out.push_back({at, at + len});
    at += len;
  }
  return out;
}

inline bool is_partition(std::span<const FrameInterval> intervals, std::size_t frames) {
  std::size_t at = 0;
  for (const auto& iv : intervals) {
    if (iv.begin != at || iv.empty()) return false;
    at = iv.end;
  }
  return !intervals.empty() && at == frames;
}

/// Turns start-ordered intervals covering [0, frames) into an exact
/// partition. Overlap between neighbours is split at floor((a+b)/2), the
/// earlier event keeping the first half. An interval nested inside its
/// predecessor (or swallowing it) has no frames of its own and is rejected.
inline std::vector<FrameInterval> resolve_overlaps(std::vector<FrameInterval> intervals,
                                                   std::size_t frames) {
  using K = PlanError::Kind;
  if (intervals.empty()) throw PlanError(K::kInvalid, "empty plan");
  for (const auto& iv : intervals) {
    if (iv.empty() || iv.end > frames) {
      throw PlanError(K::kInvalid, "interval [" + std::to_string(iv.begin) + "," +
                                       std::to_string(iv.end) + ") is empty or exceeds " +
                                       std::to_string(frames) + " frames");
    }
  }
  if (intervals.front().begin != 0) throw PlanError(K::kInvalid, "plan does not start at frame 0");
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    FrameInterval& prev = intervals[i - 1];
    FrameInterval& cur = intervals[i];
    if (cur.begin < prev.begin) throw PlanError(K::kInvalid, "intervals are not ordered by start");
    if (cur.begin > prev.end) {
      throw PlanError(K::kInvalid, "coverage gap [" + std::to_string(prev.end) + "," +
                                       std::to_string(cur.begin) + ")");
    }
    if (cur.begin == prev.end) continue;
    if (cur.begin == prev.begin || cur.end <= prev.end) {
      throw PlanError(K::kInvalid, "interval " + std::to_string(i) +
                                       " is nested in its neighbour and has no exclusive frames");
    }
    const std::size_t mid = (cur.begin + prev.end) / 2;
    prev.end = mid;
    cur.begin = mid;
  }
  if (intervals.back().end != frames) {
    throw PlanError(K::kInvalid, "plan ends at frame " + std::to_string(intervals.back().end) +
                                     ", expected " + std::to_string(frames));
  }
  return intervals;
}

inline std::vector<TokenRange> frames_to_token_ranges(std::span<const FrameInterval> intervals,
                                                      const VideoGrid& grid) {
  const std::size_t plane = grid.frame_tokens();
  std::vector<TokenRange> out;
  out.reserve(intervals.size());
  for (const auto& iv : intervals) out.push_back({iv.begin * plane, iv.end * plane});
  return out;
}

inline SegmentationPlan plan_of(const Layout& layout) {
  SegmentationPlan plan;
  for (const auto& s : layout.subjects) {
    auto& intervals = plan.emplace_back();
    for (const auto& e : s.events) intervals.push_back(e.frames);
  }
  return plan;
}

inline Layout with_plan(Layout layout, const SegmentationPlan& plan) {
  if (plan.size() != layout.subjects.size()) {
    throw PlanError(PlanError::Kind::kInvalid, "plan has " + std::to_string(plan.size()) +
                                                   " subjects, layout has " +
                                                   std::to_string(layout.subjects.size()));
  }
  for (std::size_t s = 0; s < plan.size(); ++s) {
    auto& events = layout.subjects[s].events;
    if (plan[s].size() != events.size()) {
      throw PlanError(PlanError::Kind::kInvalid, "plan event count mismatch for subject " + std::to_string(s));
    }
    for (std::size_t e = 0; e < events.size(); ++e) events[e].frames = plan[s][e];
  }
  return layout;
}

enum class DiagCode {
  kGrid,
  kSpanBounds,
  kSpanOverlap,
  kNoEvents,
  kFrameBounds,
  kCoverageGap,
  kIntervalOverlap,
  kCountMismatch,
  kParamOrder,
  kParamRange,
};

inline const char* to_string(DiagCode c) {
  switch (c) {
    case DiagCode::kGrid: return "grid";
    case DiagCode::kSpanBounds: return "span-bounds";
    case DiagCode::kSpanOverlap: return "span-overlap";
    case DiagCode::kNoEvents: return "no-events";
    case DiagCode::kFrameBounds: return "frame-bounds";
    case DiagCode::kCoverageGap: return "coverage-gap";
    case DiagCode::kIntervalOverlap: return "interval-overlap";
    case DiagCode::kCountMismatch: return "count-mismatch";
    case DiagCode::kParamOrder: return "param-order";
    case DiagCode::kParamRange: return "param-range";
  }
  return "unknown";
}

struct Diagnostic {
  DiagCode code;
  std::string message;
};

inline bool has_code(std::span<const Diagnostic> diags, DiagCode code) {
  return std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) { return d.code == code; });
}

/// Partition diagnostics for one subject's intervals over [0, frames).
inline void check_partition(std::span<const FrameInterval> intervals, std::size_t frames,
                            const std::string& where, std::vector<Diagnostic>& out) {
  std::size_t at = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    const std::string tag = where + " interval " + std::to_string(i);
    if (iv.empty() || iv.end > frames) {
      out.push_back({DiagCode::kFrameBounds, tag + " is empty or exceeds " + std::to_string(frames) + " frames"});
    }
    if (iv.begin > at) {
      out.push_back({DiagCode::kCoverageGap, tag + ": frames [" + std::to_string(at) + "," +
                                                 std::to_string(iv.begin) + ") are not covered"});
    } else if (iv.begin < at) {
      out.push_back({DiagCode::kIntervalOverlap, tag + " overlaps its predecessor"});
    }
    at = std::max(at, iv.end);
  }
  if (at < frames) {
    out.push_back({DiagCode::kCoverageGap, where + ": frames [" + std::to_string(at) + "," +
                                               std::to_string(frames) + ") are not covered"});
  }
}

inline std::vector<Diagnostic> validate_params(const ModulationParams& p) {
  std::vector<Diagnostic> out;
  if (!(p.r_min >= 1.0)) out.push_back({DiagCode::kParamRange, "r_min must be >= 1"});
  if (!(p.r_min <= p.r_max)) out.push_back({DiagCode::kParamOrder, "r_min must not exceed r_max"});
  if (p.kernel == 0 || p.kernel % 2 == 0) out.push_back({DiagCode::kParamRange, "kernel must be odd and >= 1"});
  if (!(p.epsilon > 0.0)) out.push_back({DiagCode::kParamRange, "epsilon must be positive"});
  if (!(p.apply_fraction > 0.0 && p.apply_fraction <= 1.0)) {
    out.push_back({DiagCode::kParamRange, "apply_fraction must lie in (0, 1]"});
  }
  return out;
}

/// Collects every violation instead of stopping at the first.
inline std::vector<Diagnostic> validate_layout(const Layout& layout) {
  std::vector<Diagnostic> out;
  const auto& g = layout.video;
  if (g.frames == 0 || g.height == 0 || g.width == 0) {
    out.push_back({DiagCode::kGrid, "video grid dimensions must be >= 1"});
  }
  if (layout.num_tokens == 0) out.push_back({DiagCode::kSpanBounds, "num_tokens must be >= 1"});
  const std::size_t m = layout.num_tokens;
  auto check_span = [&](const TextSpan& s, const std::string& what) {
    if (s.empty() || s.end > m) {
      out.push_back({DiagCode::kSpanBounds, what + " [" + std::to_string(s.begin) + "," +
                                                std::to_string(s.end) + ") is empty or exceeds " +
                                                std::to_string(m) + " tokens"});
    }
  };

  for (std::size_t si = 0; si < layout.subjects.size(); ++si) {
    const auto& subj = layout.subjects[si];
    const std::string where = "subject " + std::to_string(si) + " (" + subj.name + ")";
    check_span(subj.subject_span, where + " span");
    if (subj.events.empty()) {
      out.push_back({DiagCode::kNoEvents, where + " has no events"});
      continue;
    }
    std::vector<FrameInterval> intervals;
    for (std::size_t ei = 0; ei < subj.events.size(); ++ei) {
      const auto& ev = subj.events[ei];
      const std::string etag = where + " event " + std::to_string(ei);
      check_span(ev.span, etag + " span");
      if (ev.span.overlaps(subj.subject_span)) {
        out.push_back({DiagCode::kSpanOverlap, etag + " span overlaps the subject span"});
      }
      for (std::size_t ej = 0; ej < ei; ++ej) {
        if (ev.span.overlaps(subj.events[ej].span)) {
          out.push_back({DiagCode::kSpanOverlap, etag + " span overlaps event " + std::to_string(ej)});
        }
      }
      intervals.push_back(ev.frames);
    }
    check_partition(intervals, g.frames, where, out);
  }
  auto params = validate_params(layout.params);
  out.insert(out.end(), params.begin(), params.end());
  return out;
}

}  // namespace tsattn
