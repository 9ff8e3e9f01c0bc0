// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#pragma once

#include <string_view>

namespace tsattn {

/// Bumped whenever the wording below changes so logged replies can be
/// matched to the template that produced them.
inline constexpr std::string_view kSegmentationPromptVersion = "tsattn-segment/1";

/// Placeholders: {prompt}, {subject}, {frames}, {last_frame}, {count}, {events}.
inline constexpr std::string_view kSegmentationPromptTemplate =
    R"(You plan the timeline of a short video generated from a text prompt.

Prompt: "{prompt}"

The video has {frames} frames, numbered 0 to {last_frame}. The subject "{subject}" performs the following {count} events, in this order:
{events}
Assign every event one contiguous frame interval [start, end), where start is inclusive and end is exclusive. Keep the events in the given order, let each interval start where the previous one ends, start the first interval at frame 0 and end the last one at frame {frames}. Give longer intervals to events that take longer to perform.

Reply with JSON only, no prose and no code fences, exactly in this form:
{"segments": [{"event": 0, "frames": [start, end]}, {"event": 1, "frames": [start, end]}]}
)";

}  // namespace tsattn
