// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// Synthetic inputs, the denoising-step gate and alignment metrics. The
// simulation loop stands in for a diffusion sampler: it never denoises
// anything, it only re-draws query noise every step and measures where the
// cross-attention mass goes with and without modulation.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsattn/errors.hpp"
#include "tsattn/layout.hpp"
#include "tsattn/layout_json.hpp"
#include "tsattn/modulation.hpp"
#include "tsattn/motion.hpp"
#include "tsattn/tensor.hpp"

namespace tsattn {

struct SynthSpec {
  std::uint64_t seed = 0;
  VideoGrid grid{6, 8, 8};
  std::size_t num_tokens = 16;
  std::size_t dim = 16;
  std::size_t heads = 2;
  double alpha = 0.5;  // pull of segment queries toward their event direction
  double sigma = 1.0;  // query noise
  std::size_t events = 3;
  std::size_t event_width = 2;
  std::size_t subject_width = 2;
  double subject_strength = 1.0;  // pull of foreground queries toward the subject
  ModulationParams params;
};

struct ScheduleSpec {
  std::size_t total_steps = 50;
  double apply_fraction = 0.2;
};

inline void validate_synth_spec(const SynthSpec& s) {
  if (!(s.alpha >= 0.0) || !(s.sigma >= 0.0) || !(s.subject_strength >= 0.0)) {
    throw LayoutError("alpha, sigma and subject_strength must be non-negative");
  }
  if (s.heads == 0 || s.dim == 0 || s.events == 0 || s.event_width == 0 || s.subject_width == 0) {
    throw LayoutError("heads, dim, events and span widths must be >= 1");
  }
  if (s.grid.frames == 0 || s.grid.height == 0 || s.grid.width == 0) throw LayoutError("grid dimensions must be >= 1");
  if (s.subject_width + s.events * s.event_width > s.num_tokens) {
    throw LayoutError("subject and event spans do not fit in num_tokens");
  }
  if (s.events > s.grid.frames) throw PlanError(PlanError::Kind::kInfeasible, "more events than frames");
}

inline void validate_schedule(const ScheduleSpec& s) {
  if (s.total_steps == 0) throw LayoutError("schedule needs at least one step");
  if (!(s.apply_fraction > 0.0 && s.apply_fraction <= 1.0)) throw LayoutError("apply_fraction must lie in (0, 1]");
}

/// True iff `step` is among the first ceil(fraction * total) steps.
inline bool schedule_gate(std::size_t step, const ScheduleSpec& schedule) {
  // The epsilon keeps products such as 0.7 * 10 = 7.000000000000001 from
  // rounding up to an extra step.
  const auto active = static_cast<std::size_t>(
      std::ceil(schedule.apply_fraction * static_cast<double>(schedule.total_steps) - 1e-9));
  return step < active;
}

/// One subject: span [0, subject_width), then `events` consecutive event
/// spans, remaining tokens are context. Uniform frame segmentation.
inline Layout synth_layout(const SynthSpec& spec) {
  Layout l;
  l.video = spec.grid;
  l.num_tokens = spec.num_tokens;
  l.params = spec.params;
  SubjectSpec s;
  s.name = "subject";
  s.subject_span = {0, spec.subject_width};
  const auto intervals = uniform_segmentation(spec.grid.frames, spec.events);
  for (std::size_t j = 0; j < spec.events; ++j) {
    const std::size_t b = spec.subject_width + j * spec.event_width;
    s.events.push_back({{b, b + spec.event_width}, intervals[j], "event " + std::to_string(j)});
  }
  l.subjects.push_back(std::move(s));
  return l;
}

/// Fixed per-head directions: one per event plus one for the subject.
struct SynthHead {
  std::vector<std::vector<double>> event_dirs;
  std::vector<double> subject_dir;
  Tensor2 keys;
};

struct SynthInputs {
  std::vector<Tensor2> queries;  // per head
  std::vector<Tensor2> keys;     // per head
  Layout layout;
  std::vector<SynthHead> heads;
};

namespace detail {

inline std::vector<double> gaussian_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Foreground box of the subject in frame f: half the frame in each
/// direction, drifting right by one column every frame.
inline bool in_foreground(const VideoGrid& g, std::size_t f, std::size_t h, std::size_t w) {
  const std::size_t bh = std::max<std::size_t>(1, g.height / 2);
  const std::size_t bw = std::max<std::size_t>(1, g.width / 2);
  const std::size_t top = (g.height - bh) / 2;
  const std::size_t left = g.width > bw ? f % (g.width - bw + 1) : 0;
  return h >= top && h < top + bh && w >= left && w < left + bw;
}

}  // namespace detail

/// Queries for one head: alpha * u_i + sigma * noise on segment i, plus the
/// subject direction on foreground tokens.
inline Tensor2 synth_queries(const SynthSpec& spec, const Layout& layout, const SynthHead& head,
                             std::mt19937_64& rng) {
  const VideoGrid& g = spec.grid;
  const auto& intervals = layout.subjects.front().events;
  Tensor2 q(g.tokens(), spec.dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t seg = 0;
  for (std::size_t f = 0; f < g.frames; ++f) {
    while (!intervals[seg].frames.contains(f)) ++seg;
    for (std::size_t h = 0; h < g.height; ++h) {
      for (std::size_t w = 0; w < g.width; ++w) {
        const bool fg = detail::in_foreground(g, f, h, w);
        auto row = q.row(g.token_index(f, h, w));
        for (std::size_t c = 0; c < spec.dim; ++c) {
          double v = spec.alpha * head.event_dirs[seg][c] + spec.sigma * normal(rng);
          if (fg) v += spec.subject_strength * head.subject_dir[c];
          row[c] = static_cast<float>(v);
        }
      }
    }
  }
  return q;
}

/// Deterministic in the seed. Query noise comes from the stream seeded with
/// `seed`; directions and keys from a separate stream.
inline SynthInputs synth_inputs(const SynthSpec& spec) {
  validate_synth_spec(spec);
  SynthInputs out;
  out.layout = synth_layout(spec);
  std::mt19937_64 fixed(spec.seed * 2 + 1);
  const auto& subj = out.layout.subjects.front();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t h = 0; h < spec.heads; ++h) {
    SynthHead head;
    for (std::size_t j = 0; j < spec.events; ++j) head.event_dirs.push_back(detail::gaussian_vector(fixed, spec.dim));
    head.subject_dir = detail::gaussian_vector(fixed, spec.dim);
    head.keys = Tensor2(spec.num_tokens, spec.dim);
    for (std::size_t y = 0; y < spec.num_tokens; ++y) {
      const std::vector<double>* dir = nullptr;
      if (subj.subject_span.contains(y)) dir = &head.subject_dir;
      for (std::size_t j = 0; j < spec.events; ++j) {
        if (subj.events[j].span.contains(y)) dir = &head.event_dirs[j];
      }
      for (std::size_t c = 0; c < spec.dim; ++c) {
        const double noise = normal(fixed);
        head.keys(y, c) = static_cast<float>(dir ? (*dir)[c] + 0.1 * noise : noise);
      }
    }
    out.keys.push_back(head.keys);
    out.heads.push_back(std::move(head));
  }
  std::mt19937_64 stream(spec.seed);
  for (std::size_t h = 0; h < spec.heads; ++h) {
    out.queries.push_back(synth_queries(spec, out.layout, out.heads[h], stream));
  }
  return out;
}

struct MassTriple {
  double aligned = 0.0;
  double other = 0.0;
  double context = 0.0;
};

/// Per segment of one subject, attention mass averaged over the segment's
/// masked tokens. A segment with no masked tokens yields nullopt.
template <class T>
std::vector<std::optional<MassTriple>> alignment_score(const Matrix<T>& attn, const SubjectPlan& subject) {
  if (subject.mask.bits.size() != attn.rows()) throw ShapeError("alignment_score: mask length mismatch");
  std::vector<char> owner(attn.cols(), -1);
  for (std::size_t j = 0; j < subject.events.size(); ++j) {
    for (std::size_t y = subject.events[j].begin; y < subject.events[j].end; ++y) owner[y] = static_cast<char>(j);
  }
  std::vector<std::optional<MassTriple>> out;
  for (std::size_t i = 0; i < subject.segments.size(); ++i) {
    MassTriple sum;
    std::size_t count = 0;
    for (std::size_t x = subject.segments[i].begin; x < subject.segments[i].end; ++x) {
      if (!subject.mask[x]) continue;
      ++count;
      const auto row = attn.row(x);
      for (std::size_t y = 0; y < row.size(); ++y) {
        const double v = static_cast<double>(row[y]);
        if (owner[y] < 0) sum.context += v;
        else if (static_cast<std::size_t>(owner[y]) == i) sum.aligned += v;
        else sum.other += v;
      }
    }
    if (count == 0) {
      out.emplace_back(std::nullopt);
      continue;
    }
    const double c = static_cast<double>(count);
    out.push_back(MassTriple{sum.aligned / c, sum.other / c, sum.context / c});
  }
  return out;
}

struct SimRow {
  std::size_t step = 0;
  std::optional<std::size_t> head;  // nullopt: mean over heads
  std::size_t segment = 0;
  bool gated = false;
  std::optional<MassTriple> vanilla;
  std::optional<MassTriple> modulated;
};

struct SimOptions {
  bool parallel_heads = true;
};

struct HeadStepResult {
  std::vector<std::optional<MassTriple>> vanilla;
  std::vector<std::optional<MassTriple>> modulated;
};

inline HeadStepResult simulate_head(const Tensor2& q, const Tensor2& k, const Layout& layout, const MotionMask& mask,
                                    bool gated) {
  const SubjectPlan plan = make_subject_plan(layout, 0, mask);
  const auto vanilla = vanilla_attention<double>(q, k);
  HeadStepResult r;
  r.vanilla = alignment_score(vanilla, plan);
  r.modulated = gated ? alignment_score(fused_attention<double>(q, k, plan, layout.params), plan) : r.vanilla;
  return r;
}

/// Runs the mock sampling loop. Steps are sequential; heads within a step
/// may run concurrently without changing the output.
inline std::vector<SimRow> run_sim(const SynthSpec& spec, const ScheduleSpec& schedule, SimOptions options = {}) {
  validate_schedule(schedule);
  SynthInputs inputs = synth_inputs(spec);
  const Layout& layout = inputs.layout;
  const TextSpan subject = layout.subjects.front().subject_span;
  const std::size_t segments = layout.subjects.front().events.size();
  std::mt19937_64 stream(spec.seed);

  std::vector<SimRow> rows;
  for (std::size_t step = 0; step < schedule.total_steps; ++step) {
    const bool gated = schedule_gate(step, schedule);
    std::vector<Tensor2> qs;
    for (std::size_t h = 0; h < spec.heads; ++h) qs.push_back(synth_queries(spec, layout, inputs.heads[h], stream));
    const auto masks = head_motion_masks(qs, inputs.keys, subject, layout.video, layout.params.kernel,
                                         layout.params.head_mask_policy);

    std::vector<HeadStepResult> results(spec.heads);
    if (options.parallel_heads && spec.heads > 1) {
      std::vector<std::future<HeadStepResult>> jobs;
      for (std::size_t h = 0; h < spec.heads; ++h) {
        jobs.push_back(std::async(std::launch::async, [&, h] {
          return simulate_head(qs[h], inputs.keys[h], layout, masks[h], gated);
        }));
      }
      for (std::size_t h = 0; h < spec.heads; ++h) results[h] = jobs[h].get();
    } else {
      for (std::size_t h = 0; h < spec.heads; ++h) results[h] = simulate_head(qs[h], inputs.keys[h], layout, masks[h], gated);
    }

    for (std::size_t h = 0; h < spec.heads; ++h) {
      for (std::size_t i = 0; i < segments; ++i) {
        rows.push_back({step, h, i, gated, results[h].vanilla[i], results[h].modulated[i]});
      }
    }
    for (std::size_t i = 0; i < segments; ++i) {
      MassTriple van;
      MassTriple mod;
      std::size_t n = 0;
      for (const auto& r : results) {
        if (!r.vanilla[i]) continue;
        ++n;
        van.aligned += r.vanilla[i]->aligned;
        van.other += r.vanilla[i]->other;
        van.context += r.vanilla[i]->context;
        mod.aligned += r.modulated[i]->aligned;
        mod.other += r.modulated[i]->other;
        mod.context += r.modulated[i]->context;
      }
      SimRow avg{step, std::nullopt, i, gated, std::nullopt, std::nullopt};
      if (n > 0) {
        const double c = static_cast<double>(n);
        avg.vanilla = MassTriple{van.aligned / c, van.other / c, van.context / c};
        avg.modulated = MassTriple{mod.aligned / c, mod.other / c, mod.context / c};
      }
      rows.push_back(avg);
    }
  }
  return rows;
}

inline std::string sim_csv(const std::vector<SimRow>& rows) {
  std::string out =
      "step,head,segment,gated,aligned_mass_vanilla,aligned_mass_mod,other_mass_vanilla,other_mass_mod,"
      "context_mass_vanilla,context_mass_mod\n";
  auto num = [](const std::optional<MassTriple>& t, double MassTriple::*field) {
    if (!t) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9f", (*t).*field);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + (r.head ? std::to_string(*r.head) : std::string("mean")) + "," +
           std::to_string(r.segment) + "," + (r.gated ? "1" : "0") + "," + num(r.vanilla, &MassTriple::aligned) +
           "," + num(r.modulated, &MassTriple::aligned) + "," + num(r.vanilla, &MassTriple::other) + "," +
           num(r.modulated, &MassTriple::other) + "," + num(r.vanilla, &MassTriple::context) + "," +
           num(r.modulated, &MassTriple::context) + "\n";
  }
  return out;
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.seed = j.value("seed", s.seed);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      s.grid = {g.at("frames").get<std::size_t>(), g.at("height").get<std::size_t>(), g.at("width").get<std::size_t>()};
    }
    s.num_tokens = j.value("num_tokens", s.num_tokens);
    s.dim = j.value("dim", s.dim);
    s.heads = j.value("heads", s.heads);
    s.alpha = j.value("alpha", s.alpha);
    s.sigma = j.value("sigma", s.sigma);
    s.events = j.value("events", s.events);
    s.event_width = j.value("event_width", s.event_width);
    s.subject_width = j.value("subject_width", s.subject_width);
    s.subject_strength = j.value("subject_strength", s.subject_strength);
    if (j.contains("params")) s.params = params_from_json(j.at("params"));
  } catch (const nlohmann::json::exception& e) {
    throw LayoutError(std::string("malformed synthetic spec: ") + e.what());
  }
  return s;
}

/// "steps=50,fraction=0.2"; a missing fraction keeps `fallback_fraction`.
inline ScheduleSpec parse_schedule(const std::string& text, double fallback_fraction) {
  ScheduleSpec s;
  s.apply_fraction = fallback_fraction;
  std::size_t at = 0;
  while (at <= text.size()) {
    const std::size_t comma = std::min(text.find(',', at), text.size());
    const std::string item = text.substr(at, comma - at);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw LayoutError("schedule item \"" + item + "\" is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      if (key == "steps") {
        s.total_steps = std::stoul(value, &used);
      } else if (key == "fraction") {
        s.apply_fraction = std::stod(value, &used);
      } else {
        throw LayoutError("unknown schedule key \"" + key + "\"");
      }
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw LayoutError("bad schedule value \"" + value + "\" for " + key);
    }
    at = comma + 1;
  }
  validate_schedule(s);
  return s;
}

}  // namespace tsattn
