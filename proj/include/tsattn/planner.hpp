// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// Temporal segmentation planning: uniform splits, user-supplied intervals,
// or an OpenAI-compatible chat-completion endpoint. The LLM route never
// returns an invalid plan; every failure falls back to the uniform plan and
// records why.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tsattn/errors.hpp"
#include "tsattn/layout.hpp"
#include "tsattn/prompt_template.hpp"

namespace tsattn {

enum class PlannerMode { kUniform, kUser, kLlm };

inline PlannerMode planner_mode_from_string(std::string_view s) {
  if (s == "uniform") return PlannerMode::kUniform;
  if (s == "user") return PlannerMode::kUser;
  if (s == "llm") return PlannerMode::kLlm;
  throw LayoutError("unknown planner mode \"" + std::string(s) + "\"");
}

struct PlannerConfig {
  PlannerMode mode = PlannerMode::kUniform;
  std::string endpoint;  // full URL, e.g. https://api.openai.com/v1/chat/completions
  std::string model;
  std::string auth_env = "OPENAI_API_KEY";
  double timeout_seconds = 10.0;
  int max_retries = 1;
};

/// Result of planning one subject.
struct PlanOutcome {
  std::vector<FrameInterval> intervals;
  std::optional<std::string> fallback_reason;
  std::string raw_response;  // last reply body, kept for audit
  std::vector<std::string> log;
  int attempts = 0;
};

/// Uniform split of every subject's events.
inline SegmentationPlan plan_uniform(const Layout& skeleton) {
  SegmentationPlan plan;
  for (const auto& s : skeleton.subjects) {
    if (s.events.empty()) throw PlanError(PlanError::Kind::kInfeasible, "subject \"" + s.name + "\" has no events");
    plan.push_back(uniform_segmentation(skeleton.video.frames, s.events.size()));
  }
  return plan;
}

/// Partition, event-count and frame-bound checks of a plan against a layout.
inline std::vector<Diagnostic> validate_plan(const SegmentationPlan& plan, const Layout& layout) {
  std::vector<Diagnostic> out;
  if (plan.size() != layout.subjects.size()) {
    out.push_back({DiagCode::kCountMismatch, "plan covers " + std::to_string(plan.size()) + " subjects, layout has " +
                                                 std::to_string(layout.subjects.size())});
  }
  for (std::size_t s = 0; s < plan.size(); ++s) {
    const std::string where = "subject " + std::to_string(s);
    if (s < layout.subjects.size() && plan[s].size() != layout.subjects[s].events.size()) {
      out.push_back({DiagCode::kCountMismatch, where + ": " + std::to_string(plan[s].size()) + " intervals for " +
                                                   std::to_string(layout.subjects[s].events.size()) + " events"});
    }
    check_partition(plan[s], layout.video.frames, where, out);
  }
  return out;
}

inline std::string build_segmentation_prompt(std::string_view prompt, std::string_view subject,
                                             std::span<const std::string> events, std::size_t frames) {
  std::string events_text;
  for (std::size_t i = 0; i < events.size(); ++i) {
    events_text += std::to_string(i) + ": " + events[i] + "\n";
  }
  std::string out(kSegmentationPromptTemplate);
  auto replace_all = [&out](std::string_view key, std::string_view value) {
    for (std::size_t at = out.find(key); at != std::string::npos; at = out.find(key, at + value.size())) {
      out.replace(at, key.size(), value);
    }
  };
  replace_all("{prompt}", prompt);
  replace_all("{subject}", subject);
  replace_all("{frames}", std::to_string(frames));
  replace_all("{last_frame}", std::to_string(frames == 0 ? 0 : frames - 1));
  replace_all("{count}", std::to_string(events.size()));
  replace_all("{events}", events_text);
  return out;
}

/// Chat-completion request body: one user message, temperature 0.
inline nlohmann::json build_chat_request(std::string_view model, std::string_view user_message) {
  return {{"model", model},
          {"temperature", 0},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", user_message}}})}};
}

/// First balanced {...} block in free text, ignoring braces inside strings.
inline std::optional<std::string> extract_json_object(std::string_view text) {
  const std::size_t start = text.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return std::string(text.substr(start, i - start + 1));
  }
  return std::nullopt;
}

struct ReplyParse {
  std::vector<FrameInterval> intervals;
  std::string failure;  // empty on success
  std::string detail;

  bool ok() const noexcept { return failure.empty(); }
};

/// Turns the model's reply text into a resolved partition of [0, frames).
inline ReplyParse parse_plan_reply(std::string_view content, std::size_t events, std::size_t frames) {
  using nlohmann::json;
  ReplyParse r;
  auto fail = [&r](std::string reason, std::string detail) {
    r.failure = std::move(reason);
    r.detail = std::move(detail);
    r.intervals.clear();
    return r;
  };

  json doc = json::parse(content, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    const auto block = extract_json_object(content);
    if (!block) return fail("parse-failure", "reply contains no JSON object");
    doc = json::parse(*block, nullptr, false);
    if (doc.is_discarded()) return fail("parse-failure", "embedded JSON block does not parse");
  }
  if (!doc.contains("segments") || !doc["segments"].is_array()) {
    return fail("parse-failure", "reply has no \"segments\" array");
  }
  const auto& segs = doc["segments"];
  if (segs.size() != events) {
    return fail("event-count-mismatch",
                "expected " + std::to_string(events) + " segments, got " + std::to_string(segs.size()));
  }

  std::vector<std::optional<FrameInterval>> by_event(events);
  auto as_frame = [frames](const json& v) -> std::optional<std::size_t> {
    if (v.is_number_integer()) {
      const auto i = v.get<long long>();
      return static_cast<std::size_t>(std::clamp<long long>(i, 0, static_cast<long long>(frames)));
    }
    if (v.is_number_float()) {
      const double f = v.get<double>();
      if (f != std::floor(f)) return std::nullopt;
      return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(frames)));
    }
    return std::nullopt;
  };
  for (const auto& s : segs) {
    if (!s.is_object() || !s.contains("event") || !s["event"].is_number_integer() || !s.contains("frames") ||
        !s["frames"].is_array() || s["frames"].size() != 2) {
      return fail("invalid-intervals", "malformed segment entry " + s.dump());
    }
    const auto idx = s["event"].get<long long>();
    if (idx < 0 || idx >= static_cast<long long>(events) || by_event[idx]) {
      return fail("invalid-intervals", "bad or repeated event index " + std::to_string(idx));
    }
    const auto f0 = as_frame(s["frames"][0]);
    const auto f1 = as_frame(s["frames"][1]);
    if (!f0 || !f1 || *f0 >= *f1) return fail("invalid-intervals", "unusable frame pair " + s["frames"].dump());
    by_event[idx] = FrameInterval{*f0, *f1};
  }
  for (const auto& iv : by_event) r.intervals.push_back(*iv);
  try {
    r.intervals = resolve_overlaps(std::move(r.intervals), frames);
  } catch (const PlanError& e) {
    return fail("invalid-plan", e.what());
  }
  return r;
}

struct EndpointUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline std::optional<EndpointUrl> split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) return std::nullopt;
  return EndpointUrl{m[1].str(), m[2].matched ? m[2].str() : std::string("/v1/chat/completions")};
}

/// Asks the chat endpoint to place one subject's events on the frame axis.
inline PlanOutcome plan_llm(std::string_view prompt, std::string_view subject, std::span<const std::string> events,
                            std::size_t frames, const PlannerConfig& config) {
  PlanOutcome out;
  auto fallback = [&](const std::string& reason) {
    out.fallback_reason = reason;
    out.log.push_back("falling back to uniform segmentation (" + reason + ")");
    out.intervals = uniform_segmentation(frames, events.size());
    return out;
  };
  if (events.empty() || events.size() > frames) {
    throw PlanError(PlanError::Kind::kInfeasible, std::to_string(events.size()) + " events cannot be placed on " +
                                                      std::to_string(frames) + " frames");
  }
  const auto url = split_endpoint(config.endpoint);
  if (config.mode != PlannerMode::kLlm || !url || config.model.empty() || !(config.timeout_seconds > 0.0)) {
    out.log.push_back("planner is not configured for LLM use (mode, endpoint, model or timeout)");
    return fallback("config-error");
  }

  const std::string body = build_chat_request(config.model, build_segmentation_prompt(prompt, subject, events, frames)).dump();
  httplib::Headers headers;
  if (const char* token = std::getenv(config.auth_env.c_str()); token != nullptr && *token != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const auto timeout = std::chrono::microseconds(static_cast<long long>(config.timeout_seconds * 1e6));

  std::string reason;
  for (int attempt = 0; attempt <= std::max(0, config.max_retries); ++attempt) {
    out.attempts = attempt + 1;
    httplib::Client client(url->origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(url->path, headers, body, "application/json");
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    const std::string tag = "attempt " + std::to_string(attempt + 1) + ": ";

    if (!res) {
      const bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                             (res.error() == httplib::Error::Read && elapsed.count() >= 0.9 * config.timeout_seconds);
      reason = timed_out ? "timeout" : "network-error";
      out.log.push_back(tag + reason + " (" + httplib::to_string(res.error()) + ")");
      continue;
    }
    out.raw_response = res->body;
    if (res->status != 200) {
      reason = "http-error";
      out.log.push_back(tag + "HTTP status " + std::to_string(res->status));
      continue;
    }
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    std::string content;
    if (!reply.is_discarded() && reply.contains("choices") && reply["choices"].is_array() &&
        !reply["choices"].empty() && reply["choices"][0].contains("message") &&
        reply["choices"][0]["message"].contains("content") &&
        reply["choices"][0]["message"]["content"].is_string()) {
      content = reply["choices"][0]["message"]["content"].get<std::string>();
    } else {
      reason = "parse-failure";
      out.log.push_back(tag + "response is not a chat completion");
      continue;
    }
    ReplyParse parsed = parse_plan_reply(content, events.size(), frames);
    if (!parsed.ok()) {
      reason = parsed.failure;
      out.log.push_back(tag + parsed.failure + " (" + parsed.detail + ")");
      continue;
    }
    out.intervals = std::move(parsed.intervals);
    return out;
  }
  return fallback(reason);
}

struct LayoutPlan {
  SegmentationPlan plan;
  std::vector<PlanOutcome> outcomes;  // one per subject; empty unless the LLM was used
};

/// Plans every subject of a layout skeleton according to `config.mode`.
/// kUser keeps the intervals already in the layout after overlap resolution.
inline LayoutPlan plan_layout(std::string_view prompt, const Layout& skeleton, const PlannerConfig& config) {
  LayoutPlan out;
  switch (config.mode) {
    case PlannerMode::kUniform:
      out.plan = plan_uniform(skeleton);
      break;
    case PlannerMode::kUser:
      for (const auto& s : skeleton.subjects) {
        std::vector<FrameInterval> intervals;
        for (const auto& e : s.events) intervals.push_back(e.frames);
        out.plan.push_back(resolve_overlaps(std::move(intervals), skeleton.video.frames));
      }
      break;
    case PlannerMode::kLlm:
      for (const auto& s : skeleton.subjects) {
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < s.events.size(); ++i) {
          texts.push_back(s.events[i].text.empty() ? "event " + std::to_string(i) : s.events[i].text);
        }
        out.outcomes.push_back(plan_llm(prompt, s.name, texts, skeleton.video.frames, config));
        out.plan.push_back(out.outcomes.back().intervals);
      }
      break;
  }
  return out;
}

}  // namespace tsattn
