// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// Command-line front end. Exit codes: 0 success (planner fallback
// included), 1 usage error, 2 data or format error.

#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsattn/bench.hpp"
#include "tsattn/harness.hpp"
#include "tsattn/layout.hpp"
#include "tsattn/layout_json.hpp"
#include "tsattn/modulation.hpp"
#include "tsattn/motion.hpp"
#include "tsattn/planner.hpp"
#include "tsattn/tensor_io.hpp"
#include "tsattn/viz.hpp"

namespace tsattn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Raised for usage problems detected after parsing (e.g. a flag that may
/// also come from the config file).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

/// Copies `key` from the config section unless the flag was given.
template <class T>
void from_config(const json& section, const CLI::App* sub, const std::string& key, T& value) {
  if (sub->count("--" + key) == 0 && section.contains(key)) value = section.at(key).get<T>();
}

inline bool given(const json& section, const CLI::App* sub, const std::string& key) {
  return sub->count("--" + key) > 0 || section.contains(key);
}

inline void require_file(const std::string& path, const std::string& flag) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ParseError(ParseError::Kind::kIo, flag + ": no such file " + path);
  }
}

inline void check_layout(const Layout& layout) {
  const auto diags = validate_layout(layout);
  if (diags.empty()) return;
  std::string msg = "invalid layout:";
  for (const auto& d : diags) msg += std::string("\n  [") + to_string(d.code) + "] " + d.message;
  throw LayoutError(msg);
}

inline void check_qk(const Tensor2& q, const Tensor2& k, const Layout& layout) {
  if (q.rows() != layout.video.tokens()) {
    throw LayoutError("Q has " + std::to_string(q.rows()) + " rows, layout grid has " +
                      std::to_string(layout.video.tokens()) + " tokens");
  }
  if (k.rows() != layout.num_tokens) {
    throw LayoutError("K has " + std::to_string(k.rows()) + " rows, layout has " + std::to_string(layout.num_tokens) +
                      " text tokens");
  }
  if (q.cols() != k.cols()) throw ShapeError("Q and K head dimensions differ");
}

/// Events document: the layout "text" object, optionally with "video" and
/// "params" alongside.
inline Layout skeleton_from_events(const json& doc) {
  json wrapped = json::object();
  wrapped["text"] = doc.contains("text") ? doc.at("text") : doc;
  json video = doc.contains("video") ? doc.at("video") : json::object();
  wrapped["video"] = {{"frames", video.value("frames", std::size_t{1})},
                      {"height", video.value("height", std::size_t{1})},
                      {"width", video.value("width", std::size_t{1})}};
  if (doc.contains("params")) wrapped["params"] = doc.at("params");
  return layout_from_json(wrapped);
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using detail::json;
  CLI::App app{"Temporal-wise separable cross-attention toolkit", "tsattn"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with per-subcommand defaults; flags override it");

  // modulate
  auto* modulate = app.add_subcommand("modulate", "Apply event-aware modulation to one (Q, K) pair");
  std::string q_path, k_path, layout_path, out_path, emit_bias, emit_reinforcement, emit_mask;
  bool use_oracle = false;
  std::size_t subject_index = 0;
  modulate->add_option("--q", q_path, "Video-token queries, N x d TSA1")->required();
  modulate->add_option("--k", k_path, "Text-token keys, M x d TSA1")->required();
  modulate->add_option("--layout", layout_path, "Layout JSON")->required();
  modulate->add_option("--out", out_path, "Output attention, N x M TSA1")->required();
  modulate->add_flag("--oracle", use_oracle, "Use the dense reference path");
  modulate->add_option("--emit-bias", emit_bias, "Write the dense bias matrix of --subject");
  modulate->add_option("--emit-reinforcement", emit_reinforcement, "Write the dense reinforcement matrix of --subject");
  modulate->add_option("--emit-mask", emit_mask, "Write the motion mask of --subject (1-D)");
  modulate->add_option("--subject", subject_index, "Subject whose terms are emitted");

  // mask
  auto* mask = app.add_subcommand("mask", "Extract a subject's motion-region mask");
  std::string pgm_dir;
  mask->add_option("--q", q_path, "Video-token queries, N x d TSA1")->required();
  mask->add_option("--k", k_path, "Text-token keys, M x d TSA1")->required();
  mask->add_option("--layout", layout_path, "Layout JSON")->required();
  mask->add_option("--out", out_path, "Output mask, 1-D TSA1 of 0/1")->required();
  mask->add_option("--pgm-dir", pgm_dir, "Also write one PGM per frame here");
  mask->add_option("--subject", subject_index, "Subject index");

  // segment
  auto* segment = app.add_subcommand("segment", "Plan event frame intervals and write a layout");
  std::string prompt, prompt_file, events_path, mode = "uniform", endpoint, model, auth_env = "OPENAI_API_KEY";
  std::size_t frames = 0, height = 0, width = 0;
  double timeout = 10.0;
  int retries = 1;
  segment->add_option("--prompt", prompt, "Prompt text");
  segment->add_option("--prompt-file", prompt_file, "Read the prompt from a file");
  segment->add_option("--events", events_path, "Events JSON (subjects, spans, optional event text)")->required();
  segment->add_option("--frames", frames, "Latent frame count");
  segment->add_option("--height", height, "Latent height (default from the events file, else 1)");
  segment->add_option("--width", width, "Latent width (default from the events file, else 1)");
  segment->add_option("--mode", mode, "uniform, user or llm")->check(CLI::IsMember({"uniform", "user", "llm"}));
  segment->add_option("--endpoint", endpoint, "Chat-completion URL");
  segment->add_option("--model", model, "Model name");
  segment->add_option("--timeout", timeout, "Request timeout in seconds");
  segment->add_option("--retries", retries, "Retries after a failed request");
  segment->add_option("--auth-env", auth_env, "Environment variable holding the bearer token");
  segment->add_option("--out", out_path, "Output layout JSON")->required();

  // viz
  auto* viz = app.add_subcommand("viz", "Export per-event attention heatmaps as PGM");
  std::string attn_path, out_dir;
  viz->add_option("--attn", attn_path, "Attention, N x M TSA1")->required();
  viz->add_option("--layout", layout_path, "Layout JSON")->required();
  viz->add_option("--out-dir", out_dir, "Output directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Time vanilla, fused and dense attention");
  std::size_t bn = 0, bm = 0, bd = 0, reps = 20;
  std::uint64_t seed = 0;
  bool as_json = false;
  bench->add_option("--n", bn, "Video tokens");
  bench->add_option("--m", bm, "Text tokens");
  bench->add_option("--d", bd, "Head dimension");
  bench->add_option("--reps", reps, "Repetitions");
  bench->add_option("--seed", seed, "Seed for the synthetic instance");
  bench->add_flag("--json", as_json, "Print JSON instead of a table");

  // denoise-sim
  auto* sim = app.add_subcommand("denoise-sim", "Run the mock sampling loop and write alignment metrics");
  std::string spec_path, schedule_text = "steps=50";
  bool serial = false;
  sim->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  sim->add_option("--schedule", schedule_text, "steps=S,fraction=F");
  sim->add_option("--out", out_path, "Output CSV")->required();
  sim->add_flag("--serial", serial, "Process heads one after another");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failed->help();
    return kExitUsage;
  }

  try {
    json config = json::object();
    if (!config_path.empty()) config = read_json_file(config_path);
    const CLI::App* sub = app.get_subcommands().front();
    const json section = config.value(sub->get_name(), json::object());

    if (sub == modulate || sub == mask) {
      detail::from_config(section, sub, "subject", subject_index);
      detail::require_file(q_path, "--q");
      detail::require_file(k_path, "--k");
      detail::require_file(layout_path, "--layout");
      const Layout layout = read_layout(layout_path);
      detail::check_layout(layout);
      const Tensor2 q = read_tensor(q_path);
      const Tensor2 k = read_tensor(k_path);
      detail::check_qk(q, k, layout);
      if (!layout.subjects.empty() && subject_index >= layout.subjects.size()) {
        throw UsageError("--subject " + std::to_string(subject_index) + " out of range");
      }
      const auto masks = layout_masks(q, k, layout);

      if (sub == mask) {
        if (layout.subjects.empty()) throw LayoutError("layout has no subjects");
        write_vector(out_path, masks[subject_index].as_floats());
        if (!pgm_dir.empty()) write_mask_images(masks[subject_index], pgm_dir);
        return kExitOk;
      }

      const auto plans = make_subject_plans(layout, masks);
      const Tensor2 attn = use_oracle ? dense_oracle(q, k, layout, masks) : fused_attention(q, k, plans, layout.params);
      write_tensor(out_path, attn);
      if (!emit_bias.empty() || !emit_reinforcement.empty() || !emit_mask.empty()) {
        if (layout.subjects.empty()) throw LayoutError("layout has no subjects to emit terms for");
        if (!emit_mask.empty()) write_vector(emit_mask, masks[subject_index].as_floats());
        if (!emit_bias.empty() || !emit_reinforcement.empty()) {
          const DenseTerms terms = dense_terms(q, k, plans[subject_index], layout.params);
          if (!emit_bias.empty()) write_tensor(emit_bias, terms.bias.cast<float>());
          if (!emit_reinforcement.empty()) write_tensor(emit_reinforcement, terms.reinforcement.cast<float>());
        }
      }
      return kExitOk;
    }

    if (sub == segment) {
      detail::from_config(section, sub, "frames", frames);
      detail::from_config(section, sub, "height", height);
      detail::from_config(section, sub, "width", width);
      detail::from_config(section, sub, "mode", mode);
      detail::from_config(section, sub, "endpoint", endpoint);
      detail::from_config(section, sub, "model", model);
      detail::from_config(section, sub, "timeout", timeout);
      detail::from_config(section, sub, "retries", retries);
      detail::from_config(section, sub, "auth-env", auth_env);
      if (section.contains("auth_env") && sub->count("--auth-env") == 0) auth_env = section.at("auth_env").get<std::string>();

      PlannerConfig pc;
      pc.mode = planner_mode_from_string(mode);
      pc.endpoint = endpoint;
      pc.model = model;
      pc.auth_env = auth_env;
      pc.timeout_seconds = timeout;
      pc.max_retries = retries;
      if (pc.mode == PlannerMode::kLlm) {
        if (endpoint.empty()) throw UsageError("--endpoint is required with --mode llm");
        if (model.empty()) throw UsageError("--model is required with --mode llm");
      }
      if (!(timeout > 0.0)) throw UsageError("--timeout must be positive");

      detail::require_file(events_path, "--events");
      if (!prompt_file.empty()) {
        detail::require_file(prompt_file, "--prompt-file");
        prompt = read_file(prompt_file);
      }
      const json events_doc = read_json_file(events_path);
      Layout skeleton = detail::skeleton_from_events(events_doc);
      if (frames > 0) skeleton.video.frames = frames;
      else if (!(events_doc.contains("video") && events_doc["video"].contains("frames"))) {
        throw UsageError("--frames is required");
      }
      if (height > 0) skeleton.video.height = height;
      if (width > 0) skeleton.video.width = width;

      const LayoutPlan planned = plan_layout(prompt, skeleton, pc);
      for (std::size_t s = 0; s < planned.outcomes.size(); ++s) {
        for (const auto& line : planned.outcomes[s].log) err << "segment: subject " << s << ": " << line << "\n";
        if (planned.outcomes[s].fallback_reason) {
          err << "segment: subject " << s << ": fallback reason: " << *planned.outcomes[s].fallback_reason << "\n";
        }
      }
      const auto diags = validate_plan(planned.plan, skeleton);
      if (!diags.empty()) throw PlanError(PlanError::Kind::kInvalid, "planner produced an invalid plan: " + diags.front().message);
      const Layout result = with_plan(skeleton, planned.plan);
      detail::check_layout(result);
      write_layout(out_path, result);
      return kExitOk;
    }

    if (sub == viz) {
      detail::require_file(attn_path, "--attn");
      detail::require_file(layout_path, "--layout");
      const Layout layout = read_layout(layout_path);
      detail::check_layout(layout);
      const Tensor2 attn = read_tensor(attn_path);
      const auto written = write_heatmaps(attn, layout, out_dir);
      out << "wrote " << written.size() << " images to " << out_dir << "\n";
      return kExitOk;
    }

    if (sub == bench) {
      detail::from_config(section, sub, "n", bn);
      detail::from_config(section, sub, "m", bm);
      detail::from_config(section, sub, "d", bd);
      detail::from_config(section, sub, "reps", reps);
      detail::from_config(section, sub, "seed", seed);
      if (!detail::given(section, sub, "n")) throw UsageError("--n is required");
      if (!detail::given(section, sub, "m")) throw UsageError("--m is required");
      if (!detail::given(section, sub, "d")) throw UsageError("--d is required");
      if (bn == 0 || bm < 2 || bd == 0 || reps == 0) throw UsageError("bench needs --n >= 1, --m >= 2, --d >= 1, --reps >= 1");
      const BenchReport report = run_bench(bn, bm, bd, reps, seed);
      out << (as_json ? bench_to_json(report).dump(2) + "\n" : bench_table(report));
      return kExitOk;
    }

    if (sub == sim) {
      detail::from_config(section, sub, "schedule", schedule_text);
      detail::require_file(spec_path, "--spec");
      const SynthSpec spec = synth_spec_from_json(read_json_file(spec_path));
      const ScheduleSpec schedule = parse_schedule(schedule_text, spec.params.apply_fraction);
      const auto rows = run_sim(spec, schedule, {.parallel_heads = !serial});
      write_file_atomic(out_path, sim_csv(rows));
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"tsattn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tsattn::cli
