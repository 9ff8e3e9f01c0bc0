// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mock_llm.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "tsattn/bench.hpp"
#include "tsattn/harness.hpp"
#include "tsattn/modulation.hpp"
#include "tsattn/planner.hpp"

namespace {

using namespace tsattn;
using testing::Instance;

struct Verdict {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // 0: no limit
  std::function<Verdict()> check;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

constexpr std::size_t kInstances = 100;

const std::vector<Instance>& instances() {
  static const std::vector<Instance> all = [] {
    std::vector<Instance> v;
    for (std::size_t seed = 0; seed < kInstances; ++seed) v.push_back(testing::random_instance(seed));
    return v;
  }();
  return all;
}

Verdict vanilla_reduction() {
  double worst = 0.0;
  for (std::size_t seed = 0; seed < kInstances; ++seed) {
    Instance in = testing::random_instance(seed);
    for (auto& m : in.masks) m = MotionMask::filled(in.layout.video, false);
    const auto plans = make_subject_plans(in.layout, in.masks);
    const Tensor2 a = fused_attention(in.q, in.k, plans, in.layout.params);
    const auto l = testing::naive_qk(in.q, in.k);
    const testing::Real sqrt_d = std::sqrt(static_cast<testing::Real>(in.q.cols()));
    testing::RealMatrix want;
    for (const auto& row : l) {
      std::vector<testing::Real> z;
      for (auto v : row) z.push_back(v / sqrt_d);
      want.push_back(testing::scalar_softmax(z));
    }
    worst = std::max(worst, testing::max_abs_diff(a, want));
  }
  return {worst <= 1e-6, "max_abs=" + fmt("%.3g", worst) + " tol=1e-6 over 100 instances"};
}

Verdict oracle_equivalence() {
  double worst = 0.0;
  double reference = 0.0;
  std::size_t subjects = 0;
  for (const auto& in : instances()) {
    const auto plans = make_subject_plans(in.layout, in.masks);
    const Tensor2 fused = fused_attention(in.q, in.k, plans, in.layout.params);
    const Tensor2 dense = dense_oracle(in.q, in.k, in.layout, in.masks);
    worst = std::max(worst, max_abs_diff(fused, dense));
    reference = std::max(reference, testing::max_abs_diff(
                                        fused, testing::modulation_reference(in.q, in.k, in.layout, in.masks).attention));
    subjects += plans.size();
  }
  return {worst <= 1e-6 && reference <= 1e-6,
          "max_abs=" + fmt("%.3g", worst) + " tol=1e-6 over 100 instances, " + std::to_string(subjects) +
              " subjects; long-double transcription max_abs=" + fmt("%.3g", reference)};
}

Verdict mass_monotonicity() {
  std::size_t violations = 0;
  std::string first;
  for (const auto& in : instances()) {
    const auto plans = make_subject_plans(in.layout, in.masks);
    const auto v = testing::mass_monotonicity(in.q, in.k, plans, vanilla_attention<double>(in.q, in.k),
                                              fused_attention<double>(in.q, in.k, plans, in.layout.params));
    if (!v.empty() && first.empty()) first = v.front();
    violations += v.size();
  }
  return {violations == 0, std::to_string(violations) + " violations (tol 1e-9)" + (first.empty() ? "" : ": " + first)};
}

Verdict sign_and_bounds() {
  const ModulationParams defaults;
  if (defaults.r_min != 1.0 || defaults.r_max != 1.5) {
    return {false, "default reinforcement bounds are not [1, 1.5]"};
  }
  std::size_t violations = 0;
  std::string first;
  for (const auto& in : instances()) {
    for (const auto& p : make_subject_plans(in.layout, in.masks)) {
      const auto v = testing::sign_and_bounds(in.q, in.k, p, in.layout.params);
      if (!v.empty() && first.empty()) first = v.front();
      violations += v.size();
    }
  }
  return {violations == 0, std::to_string(violations) + " violations; R bounds [1, 1.5]" +
                               (first.empty() ? "" : ": " + first)};
}

Verdict unmasked_rows() {
  double worst = 0.0;
  std::size_t rows = 0;
  for (const auto& in : instances()) {
    const auto plans = make_subject_plans(in.layout, in.masks);
    worst = std::max(worst, testing::unmasked_row_gap(plans, vanilla_attention<double>(in.q, in.k),
                                                      fused_attention<double>(in.q, in.k, plans, in.layout.params)));
    for (std::size_t x = 0; x < in.q.rows(); ++x) {
      bool masked = false;
      for (const auto& m : in.masks) masked = masked || m[x];
      rows += masked ? 0 : 1;
    }
  }
  return {worst <= 1e-7, "max_abs=" + fmt("%.3g", worst) + " tol=1e-7 over " + std::to_string(rows) + " rows"};
}

Verdict morphology() {
  std::mt19937_64 rng(2026);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const VideoGrid g{testing::uniform_int(rng, 1, 3), testing::uniform_int(rng, 1, 10),
                      testing::uniform_int(rng, 1, 10)};
    const std::size_t k = 2 * testing::uniform_int(rng, 0, 2) + 1;
    std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0.2, 0.95)(rng));
    MotionMask m = MotionMask::filled(g, false);
    for (auto& b : m.bits) b = coin(rng);
    const MotionMask e = erode_mask(m, k);
    if (e.bits != testing::erode_reference(m.bits, g, k)) ++bad;
    for (std::size_t i = 0; i < m.bits.size(); ++i) bad += e.bits[i] > m.bits[i] ? 1 : 0;
    if (erode_mask(m, 1) != m) ++bad;
  }
  const VideoGrid five{1, 5, 5};
  const MotionMask interior = erode_mask(MotionMask::filled(five, true), 3);
  bool interior_ok = interior.count() == 9;
  for (std::size_t h = 1; h <= 3; ++h)
    for (std::size_t w = 1; w <= 3; ++w) interior_ok = interior_ok && interior[five.token_index(0, h, w)];
  const VideoGrid four{1, 4, 4};
  MotionMask checker = MotionMask::filled(four, false);
  for (std::size_t t = 0; t < 16; ++t) checker.bits[t] = (t / 4 + t % 4) % 2;
  const bool checker_ok = erode_mask(checker, 3).count() == 0 &&
                          erode_mask(checker, 3).bits == testing::erode_reference(checker.bits, four, 3);
  return {bad == 0 && interior_ok && checker_ok, std::to_string(bad) + " bad of 1000 random masks; 5x5 interior " +
                                                     (interior_ok ? "ok" : "WRONG") + "; checkerboard " +
                                                     (checker_ok ? "ok" : "WRONG")};
}

Verdict multi_subject_degeneration() {
  double worst = 0.0;
  for (std::size_t seed = 0; seed < 50; ++seed) {
    const Instance in = testing::random_instance(5000 + seed, {.min_subjects = 1, .max_subjects = 1});
    const auto plans = make_subject_plans(in.layout, in.masks);
    const auto multi = fused_attention<double>(in.q, in.k, plans, in.layout.params);
    const auto single = fused_attention<double>(in.q, in.k, plans[0], in.layout.params);
    worst = std::max(worst, max_abs_diff(multi, single));
    const DenseTerms t = dense_terms(in.q, in.k, plans[0], in.layout.params);
    const auto dense_multi = modulated_attention_multi<double>(in.q, in.k, std::span<const DenseTerms>(&t, 1));
    const auto dense_single = modulated_attention<double>(in.q, in.k, t.mask, t.bias, t.reinforcement);
    worst = std::max(worst, max_abs_diff(dense_multi, dense_single));
  }
  return {worst <= 1e-12, "max_abs=" + fmt("%.3g", worst) + " tol=1e-12 over 50 instances"};
}

Verdict schedule_gate_check() {
  auto active = [](std::size_t total, double f) {
    std::vector<std::size_t> on;
    for (std::size_t s = 0; s < total; ++s) {
      if (schedule_gate(s, {total, f})) on.push_back(s);
    }
    return on;
  };
  auto first_n = [](std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
  };
  const bool t2v = active(50, ModulationParams::text_to_video().apply_fraction) == first_n(10);
  const bool i2v = active(50, ModulationParams::image_to_video().apply_fraction) == first_n(20);
  return {t2v && i2v, std::string("(50, 0.2) -> steps 0-9 ") + (t2v ? "ok" : "WRONG") + "; (50, 0.4) -> steps 0-19 " +
                          (i2v ? "ok" : "WRONG")};
}

Layout planner_skeleton() {
  Layout l;
  l.video = {21, 2, 2};
  l.num_tokens = 10;
  l.subjects.push_back({"man", {0, 1}, {{{1, 3}, {0, 21}, "walks"}, {{3, 5}, {0, 21}, "sits"}, {{5, 7}, {0, 21}, "waves"}}});
  l.subjects.push_back({"dog", {7, 8}, {{{8, 9}, {0, 12}, "runs"}, {{9, 10}, {8, 21}, "sleeps"}}});
  return l;
}

Verdict segmentation() {
  using I = std::vector<FrameInterval>;
  std::vector<std::string> failures;
  if (uniform_segmentation(21, 3) != I{{0, 7}, {7, 14}, {14, 21}}) failures.push_back("uniform(21,3)");
  if (uniform_segmentation(10, 3) != I{{0, 4}, {4, 7}, {7, 10}}) failures.push_back("uniform(10,3)");
  if (resolve_overlaps({{0, 12}, {8, 21}}, 21) != I{{0, 10}, {10, 21}}) failures.push_back("overlap resolution");

  const Layout l = planner_skeleton();
  testing::MockLlmServer server([](const testing::RecordedRequest& req) {
    const bool three = req.body.find("2: waves") != std::string::npos;
    return testing::MockReply{
        200,
        testing::chat_body(three ? R"({"segments": [{"event": 0, "frames": [0, 9]}, {"event": 1, "frames": [6, 15]}, {"event": 2, "frames": [15, 21]}]})"
                                 : "I would split this evenly."),
        {}};
  });
  PlannerConfig llm;
  llm.mode = PlannerMode::kLlm;
  llm.endpoint = server.url();
  llm.model = "mock";
  llm.max_retries = 0;
  PlannerConfig user;
  user.mode = PlannerMode::kUser;
  Layout user_layout = l;
  user_layout.subjects[0].events[0].frames = {0, 8};
  user_layout.subjects[0].events[1].frames = {5, 16};
  user_layout.subjects[0].events[2].frames = {16, 21};
  std::size_t plans = 0;
  for (const auto& [layout, cfg] : std::vector<std::pair<Layout, PlannerConfig>>{
           {l, PlannerConfig{}}, {user_layout, user}, {l, llm}}) {
    const auto planned = plan_layout("prompt", layout, cfg);
    ++plans;
    if (!validate_plan(planned.plan, layout).empty()) failures.push_back("planner output failed validate_plan");
  }
  std::string detail = "uniform(21,3), uniform(10,3), overlap [0,12),[8,21)->[0,10),[10,21); " +
                       std::to_string(plans) + " planner modes validated";
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

Verdict llm_client() {
  const std::vector<std::string> events{"walks in", "picks up a cup", "sits down"};
  std::vector<std::string> failures;
  auto config = [](const std::string& url, double timeout) {
    PlannerConfig c;
    c.mode = PlannerMode::kLlm;
    c.endpoint = url;
    c.model = "mock";
    c.timeout_seconds = timeout;
    c.max_retries = 0;
    return c;
  };
  {
    testing::MockLlmServer server(testing::fixed_reply(
        R"({"segments": [{"event": 0, "frames": [0, 5]}, {"event": 1, "frames": [5, 15]}, {"event": 2, "frames": [15, 21]}]})"));
    const auto a = plan_llm("p", "man", events, 21, config(server.url(), 5.0));
    const auto b = plan_llm("p", "man", events, 21, config(server.url(), 5.0));
    if (a.fallback_reason || a.intervals != std::vector<FrameInterval>{{0, 5}, {5, 15}, {15, 21}}) {
      failures.push_back("valid reply not parsed exactly");
    }
    if (a.intervals != b.intervals || a.raw_response != b.raw_response) failures.push_back("not deterministic");
  }
  {
    testing::MockLlmServer server(testing::fixed_reply("First he walks in, then he picks up a cup."));
    const auto r = plan_llm("p", "man", events, 21, config(server.url(), 5.0));
    if (r.fallback_reason.value_or("") != "parse-failure" || r.intervals != uniform_segmentation(21, 3) ||
        r.log.empty()) {
      failures.push_back("prose reply did not fall back with reason parse-failure");
    }
  }
  {
    testing::MockLlmServer server([](const testing::RecordedRequest&) {
      return testing::MockReply{200, testing::chat_body("{}"), std::chrono::milliseconds(1500)};
    });
    const auto r = plan_llm("p", "man", events, 21, config(server.url(), 0.3));
    if (r.fallback_reason.value_or("") != "timeout" || r.intervals != uniform_segmentation(21, 3) || r.log.empty()) {
      failures.push_back("timeout did not fall back with reason timeout (got " + r.fallback_reason.value_or("none") +
                         ")");
    }
  }
  std::string detail = "valid, prose, timeout and determinism cases against a loopback mock";
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

Verdict overhead() {
  const BenchReport r = run_bench(4096, 128, 64, 20, 0);
  const double ratio = r.fused_over_vanilla();
  return {ratio <= 2.0, "fused/vanilla=" + fmt("%.3f", ratio) + " (vanilla " + fmt("%.2f", r.vanilla_ms) +
                            " ms, fused " + fmt("%.2f", r.fused_ms) + " ms, 20 reps) bound 2.0"};
}

Verdict harness_alignment() {
  SynthSpec spec;
  spec.seed = 0;
  spec.alpha = 0.5;
  spec.sigma = 1.0;
  spec.params.head_mask_policy = HeadMaskPolicy::kHeadAveraged;
  const ScheduleSpec schedule{50, spec.params.apply_fraction};
  const auto rows = run_sim(spec, schedule);
  std::size_t checked = 0;
  std::size_t failures = 0;
  double smallest_gain = 1.0;
  for (const auto& r : rows) {
    if (r.head || !r.gated) continue;
    ++checked;
    if (!r.vanilla || !r.modulated || !(r.modulated->aligned > r.vanilla->aligned)) {
      ++failures;
      continue;
    }
    smallest_gain = std::min(smallest_gain, r.modulated->aligned - r.vanilla->aligned);
  }
  const bool identical = sim_csv(rows) == sim_csv(run_sim(spec, schedule));
  return {failures == 0 && checked > 0 && identical,
          std::to_string(checked) + " gated (step, segment) pairs, " + std::to_string(failures) +
              " without strict gain, smallest gain " + fmt("%.4f", smallest_gain) + "; CSV " +
              (identical ? "byte-identical" : "DIFFERS") + " across runs"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "vanilla reduction", 10.0, vanilla_reduction},
      {2, "oracle equivalence", 60.0, oracle_equivalence},
      {3, "mass monotonicity", 0.0, mass_monotonicity},
      {4, "sign and bound checks", 0.0, sign_and_bounds},
      {5, "unmasked-row identity", 0.0, unmasked_rows},
      {6, "morphology", 0.0, morphology},
      {7, "multi-subject degeneration", 0.0, multi_subject_degeneration},
      {8, "schedule gate", 0.0, schedule_gate_check},
      {9, "segmentation", 0.0, segmentation},
      {10, "LLM client", 0.0, llm_client},
      {11, "overhead proxy", 60.0, overhead},
      {12, "harness alignment effect", 0.0, harness_alignment},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0.0 && secs >= c.time_limit_s) {
      v.pass = false;
      v.detail += "; runtime " + fmt("%.2f", secs) + " s exceeds " + fmt("%.0f", c.time_limit_s) + " s";
    }
    std::printf("%s C%d %s: %s [%.2f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
