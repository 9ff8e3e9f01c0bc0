// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

// TSA1 tensor files.
//
//   offset 0  "TSA1"
//   offset 4  dtype code (0x01 = f32 little-endian)
//   offset 5  ndim (1 or 2)
//   offset 6  two zero bytes
//   offset 8  ndim x u32 little-endian dims
//   then      row-major f32 little-endian payload

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsattn/errors.hpp"
#include "tsattn/io.hpp"
#include "tsattn/tensor.hpp"

namespace tsattn {

inline constexpr std::string_view kTsaMagic = "TSA1";
inline constexpr std::uint8_t kTsaDtypeF32 = 0x01;

struct TsaTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline std::string encode_tsa(std::span<const std::uint32_t> dims, std::span<const float> data) {
  if (dims.empty() || dims.size() > 2) throw ShapeError("TSA1 supports rank 1 or 2");
  std::size_t expect = 1;
  for (auto d : dims) expect *= d;
  if (expect != data.size()) throw ShapeError("TSA1 payload length does not match dims");
  for (float v : data) {
    if (!std::isfinite(v)) throw ParseError(ParseError::Kind::kNonFinite, "refusing to write non-finite value");
  }
  std::string out;
  out.reserve(8 + 4 * dims.size() + 4 * data.size());
  out.append(kTsaMagic);
  out.push_back(static_cast<char>(kTsaDtypeF32));
  out.push_back(static_cast<char>(dims.size()));
  out.push_back('\0');
  out.push_back('\0');
  for (auto d : dims) detail::put_u32(out, d);
  for (float v : data) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline TsaTensor decode_tsa(std::string_view bytes) {
  using K = ParseError::Kind;
  if (bytes.size() < 8) throw ParseError(K::kTruncated, "TSA1 header truncated");
  if (bytes.substr(0, 4) != kTsaMagic) throw ParseError(K::kBadMagic, "bad TSA1 magic");
  const auto dtype = static_cast<std::uint8_t>(bytes[4]);
  if (dtype != kTsaDtypeF32) {
    throw ParseError(K::kBadDtype, "unsupported TSA1 dtype code " + std::to_string(dtype));
  }
  const auto ndim = static_cast<std::uint8_t>(bytes[5]);
  if (ndim != 1 && ndim != 2) throw ParseError(K::kBadRank, "unsupported TSA1 rank " + std::to_string(ndim));
  if (bytes[6] != '\0' || bytes[7] != '\0') throw ParseError(K::kFormat, "nonzero TSA1 header padding");

  const std::size_t header = 8 + 4 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) throw ParseError(K::kTruncated, "TSA1 dims truncated");
  TsaTensor t;
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    t.dims.push_back(detail::get_u32(bytes, 8 + 4 * i));
    count *= t.dims.back();
  }
  const std::size_t payload = bytes.size() - header;
  if (payload < 4 * count) {
    throw ParseError(K::kTruncated, "TSA1 payload truncated: expected " + std::to_string(count) +
                                        " floats, found " + std::to_string(payload / 4));
  }
  if (payload > 4 * count) throw ParseError(K::kFormat, "trailing bytes after TSA1 payload");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.data[i] = std::bit_cast<float>(detail::get_u32(bytes, header + 4 * i));
    if (!std::isfinite(t.data[i])) throw ParseError(K::kNonFinite, "non-finite value in TSA1 payload");
  }
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const Tensor2& t) {
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(t.rows()),
                                 static_cast<std::uint32_t>(t.cols())};
  write_file_atomic(path, encode_tsa(dims, t.data()));
}

inline void write_vector(const std::filesystem::path& path, std::span<const float> v) {
  const std::uint32_t dims[1] = {static_cast<std::uint32_t>(v.size())};
  write_file_atomic(path, encode_tsa(dims, v));
}

inline Tensor2 read_tensor(const std::filesystem::path& path) {
  TsaTensor t = decode_tsa(read_file(path));
  if (t.dims.size() != 2) throw ParseError(ParseError::Kind::kBadRank, path.string() + " is not a 2-D tensor");
  return Tensor2(t.dims[0], t.dims[1], std::move(t.data));
}

inline std::vector<float> read_vector(const std::filesystem::path& path) {
  TsaTensor t = decode_tsa(read_file(path));
  if (t.dims.size() != 1) throw ParseError(ParseError::Kind::kBadRank, path.string() + " is not a 1-D tensor");
  return std::move(t.data);
}

}  // namespace tsattn
