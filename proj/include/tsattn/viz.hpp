// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsattn/errors.hpp"
#include "tsattn/io.hpp"
#include "tsattn/layout.hpp"
#include "tsattn/motion.hpp"
#include "tsattn/tensor.hpp"

namespace tsattn {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PGM (P5, maxval 255).
inline std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

inline GrayImage decode_pgm(std::string_view bytes) {
  using K = ParseError::Kind;
  std::size_t at = 0;
  auto next_token = [&]() {
    while (at < bytes.size()) {
      if (bytes[at] == '#') {
        while (at < bytes.size() && bytes[at] != '\n') ++at;
      } else if (std::isspace(static_cast<unsigned char>(bytes[at]))) {
        ++at;
      } else {
        break;
      }
    }
    const std::size_t start = at;
    while (at < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[at]))) ++at;
    return std::string(bytes.substr(start, at - start));
  };
  if (next_token() != "P5") throw ParseError(K::kBadMagic, "not a binary PGM");
  GrayImage img;
  try {
    img.width = std::stoul(next_token());
    img.height = std::stoul(next_token());
    if (std::stoul(next_token()) != 255) throw ParseError(K::kFormat, "PGM maxval must be 255");
  } catch (const std::logic_error&) {
    throw ParseError(K::kFormat, "malformed PGM header");
  }
  ++at;  // single whitespace before the raster
  if (bytes.size() < at + img.width * img.height) throw ParseError(K::kTruncated, "PGM raster truncated");
  img.pixels.assign(bytes.begin() + at, bytes.begin() + at + img.width * img.height);
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  write_file_atomic(path, encode_pgm(img));
}

inline GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

/// round(255 * (v - min) / (max - min)); a constant field maps to 0.
inline std::vector<std::uint8_t> quantize_min_max(const std::vector<double>& values) {
  std::vector<std::uint8_t> out(values.size(), 0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 1e-12)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (values[i] - *lo) / range));
  }
  return out;
}

/// Quantized heatmap for one event over every video token.
struct EventHeatmap {
  std::size_t subject = 0;
  std::size_t event = 0;        // index within the subject
  std::size_t global_event = 0;  // index across all subjects, used in file names
  std::vector<std::uint8_t> pixels;  // one per token, frame-major
};

/// Mean attention of every token over each event's columns, min-max
/// normalized per event across all frames.
template <class T>
std::vector<EventHeatmap> event_heatmaps(const Matrix<T>& attn, const Layout& layout) {
  if (attn.rows() != layout.video.tokens() || attn.cols() != layout.num_tokens) {
    throw LayoutError("attention is " + std::to_string(attn.rows()) + "x" + std::to_string(attn.cols()) +
                      ", layout expects " + std::to_string(layout.video.tokens()) + "x" +
                      std::to_string(layout.num_tokens));
  }
  std::vector<EventHeatmap> out;
  std::size_t global = 0;
  for (std::size_t s = 0; s < layout.subjects.size(); ++s) {
    const auto& events = layout.subjects[s].events;
    for (std::size_t e = 0; e < events.size(); ++e, ++global) {
      const TextSpan span = events[e].span;
      if (span.empty() || span.end > attn.cols()) throw LayoutError("event span outside the attention columns");
      std::vector<double> field(attn.rows());
      for (std::size_t x = 0; x < attn.rows(); ++x) {
        double sum = 0.0;
        for (std::size_t y = span.begin; y < span.end; ++y) sum += static_cast<double>(attn(x, y));
        field[x] = sum / static_cast<double>(span.size());
      }
      out.push_back({s, e, global, quantize_min_max(field)});
    }
  }
  return out;
}

inline GrayImage frame_image(const std::vector<std::uint8_t>& per_token, const VideoGrid& grid, std::size_t frame) {
  const std::size_t plane = grid.frame_tokens();
  GrayImage img{grid.width, grid.height, {}};
  img.pixels.assign(per_token.begin() + frame * plane, per_token.begin() + (frame + 1) * plane);
  return img;
}

/// Writes event{i}_frame{f}.pgm for every event and frame; returns the paths.
template <class T>
std::vector<std::filesystem::path> write_heatmaps(const Matrix<T>& attn, const Layout& layout,
                                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& map : event_heatmaps(attn, layout)) {
    for (std::size_t f = 0; f < layout.video.frames; ++f) {
      auto path = dir / ("event" + std::to_string(map.global_event) + "_frame" + std::to_string(f) + ".pgm");
      write_pgm(path, frame_image(map.pixels, layout.video, f));
      written.push_back(std::move(path));
    }
  }
  return written;
}

/// Motion mask as per-frame images, 255 = motion region.
inline std::vector<std::filesystem::path> write_mask_images(const MotionMask& mask, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> px(mask.bits.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.bits[i] ? 255 : 0;
  std::vector<std::filesystem::path> written;
  for (std::size_t f = 0; f < mask.grid.frames; ++f) {
    auto path = dir / ("mask_frame" + std::to_string(f) + ".pgm");
    write_pgm(path, frame_image(px, mask.grid, f));
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace tsattn
