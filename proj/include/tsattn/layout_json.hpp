// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tsattn/errors.hpp"
#include "tsattn/io.hpp"
#include "tsattn/layout.hpp"

namespace tsattn {

using nlohmann::json;

namespace detail {

template <class Range>
Range range_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
    throw LayoutError(std::string(what) + " must be a pair of non-negative integers");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

template <class Range>
json range_to_json(const Range& r) {
  return json::array({r.begin, r.end});
}

}  // namespace detail

inline const char* to_string(HeadMaskPolicy p) {
  return p == HeadMaskPolicy::kPerHead ? "per-head" : "head-averaged";
}

inline HeadMaskPolicy head_mask_policy_from_string(const std::string& s) {
  if (s == "per-head") return HeadMaskPolicy::kPerHead;
  if (s == "head-averaged") return HeadMaskPolicy::kHeadAveraged;
  throw LayoutError("unknown head_mask_policy \"" + s + "\"");
}

/// Missing fields keep their defaults.
inline ModulationParams params_from_json(const json& j, ModulationParams p = {}) {
  if (!j.is_object()) throw LayoutError("\"params\" must be an object");
  p.r_min = j.value("r_min", p.r_min);
  p.r_max = j.value("r_max", p.r_max);
  p.kernel = j.value("kernel", p.kernel);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.apply_fraction = j.value("apply_fraction", p.apply_fraction);
  if (j.contains("head_mask_policy")) {
    p.head_mask_policy = head_mask_policy_from_string(j.at("head_mask_policy").get<std::string>());
  }
  return p;
}

inline json params_to_json(const ModulationParams& p) {
  return {{"r_min", p.r_min},
          {"r_max", p.r_max},
          {"kernel", p.kernel},
          {"epsilon", p.epsilon},
          {"apply_fraction", p.apply_fraction},
          {"head_mask_policy", to_string(p.head_mask_policy)}};
}

inline SubjectSpec subject_from_json(const json& js) {
  SubjectSpec s;
  s.name = js.value("name", std::string{});
  s.subject_span = detail::range_from_json<TextSpan>(js.at("subject_span"), "subject_span");
  for (const auto& je : js.at("events")) {
    EventSpec e;
    e.span = detail::range_from_json<TextSpan>(je.at("span"), "event span");
    if (je.contains("frames")) e.frames = detail::range_from_json<FrameInterval>(je.at("frames"), "event frames");
    e.text = je.value("text", std::string{});
    s.events.push_back(std::move(e));
  }
  return s;
}

inline Layout layout_from_json(const json& j) {
  try {
    Layout l;
    const auto& v = j.at("video");
    l.video = {v.at("frames").get<std::size_t>(), v.at("height").get<std::size_t>(),
               v.at("width").get<std::size_t>()};
    const auto& t = j.at("text");
    l.num_tokens = t.at("num_tokens").get<std::size_t>();
    for (const auto& js : t.at("subjects")) l.subjects.push_back(subject_from_json(js));
    if (j.contains("params")) l.params = params_from_json(j.at("params"));
    return l;
  } catch (const json::exception& e) {
    throw LayoutError(std::string("malformed layout: ") + e.what());
  }
}

inline json layout_to_json(const Layout& l) {
  json subjects = json::array();
  for (const auto& s : l.subjects) {
    json events = json::array();
    for (const auto& e : s.events) {
      json je = {{"span", detail::range_to_json(e.span)}, {"frames", detail::range_to_json(e.frames)}};
      if (!e.text.empty()) je["text"] = e.text;
      events.push_back(std::move(je));
    }
    subjects.push_back({{"name", s.name},
                        {"subject_span", detail::range_to_json(s.subject_span)},
                        {"events", std::move(events)}});
  }
  return {{"video", {{"frames", l.video.frames}, {"height", l.video.height}, {"width", l.video.width}}},
          {"text", {{"num_tokens", l.num_tokens}, {"subjects", std::move(subjects)}}},
          {"params", params_to_json(l.params)}};
}

inline json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseError::Kind::kFormat, path.string() + ": " + e.what());
  }
}

inline Layout read_layout(const std::filesystem::path& path) {
  return layout_from_json(read_json_file(path));
}

inline void write_layout(const std::filesystem::path& path, const Layout& l) {
  write_file_atomic(path, layout_to_json(l).dump(2) + "\n");
}

}  // namespace tsattn
