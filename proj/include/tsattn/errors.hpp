// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#pragma once

#include <stdexcept>
#include <string>

namespace tsattn {

/// Base class for every error raised by the library. The CLI maps these to
/// the data/format exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class SpanError : public Error {
 public:
  using Error::Error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Segmentation plan could not be built or is not a partition.
class PlanError : public Error {
 public:
  enum class Kind { kInfeasible, kInvalid };

  PlanError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class OracleSizeError : public Error {
 public:
  using Error::Error;
};

/// Malformed TSA1 / PGM input.
class ParseError : public Error {
 public:
  enum class Kind { kBadMagic, kBadDtype, kBadRank, kTruncated, kNonFinite, kIo, kFormat };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace tsattn
