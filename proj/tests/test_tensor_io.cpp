// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include <unistd.h>

#include "oracles.hpp"
#include "tsattn/tensor_io.hpp"

namespace tsattn {
namespace {

namespace fs = std::filesystem;

class TensorIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tsattn_io_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

TEST_F(TensorIoTest, RoundTripIsBitExact) {
  const auto t = Tensor2::from_rows({{1.5f, -0.0f}, {std::numeric_limits<float>::denorm_min(), 3.0e38f}});
  write_tensor(dir_ / "t.tsa", t);
  const Tensor2 back = read_tensor(dir_ / "t.tsa");
  ASSERT_EQ(back.rows(), 2u);
  ASSERT_EQ(back.cols(), 2u);
  EXPECT_EQ(std::memcmp(back.data().data(), t.data().data(), 4 * t.size()), 0);
}

TEST_F(TensorIoTest, RandomRoundTrips) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const Tensor2 t = testing::random_tensor(rng, testing::uniform_int(rng, 0, 9), testing::uniform_int(rng, 1, 9), 100.0);
    write_tensor(dir_ / "r.tsa", t);
    const Tensor2 back = read_tensor(dir_ / "r.tsa");
    ASSERT_EQ(back.rows(), t.rows());
    ASSERT_EQ(back.cols(), t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back.data()[i]), std::bit_cast<std::uint32_t>(t.data()[i]));
    }
  }
}

TEST(TsaFormat, GoldenBytes) {
  const std::uint32_t dims[2] = {1, 2};
  const float data[2] = {1.0f, -2.0f};
  const std::string bytes = encode_tsa(dims, data);
  const std::string want("TSA1\x01\x02\x00\x00"
                         "\x01\x00\x00\x00\x02\x00\x00\x00"
                         "\x00\x00\x80\x3f\x00\x00\x00\xc0",
                         24);
  EXPECT_EQ(bytes, want);
}

TEST(TsaFormat, OneDimensionalVariant) {
  const std::uint32_t dims[1] = {3};
  const float data[3] = {0.0f, 1.0f, 0.0f};
  const TsaTensor t = decode_tsa(encode_tsa(dims, data));
  ASSERT_EQ(t.dims, std::vector<std::uint32_t>{3});
  EXPECT_EQ(t.data, (std::vector<float>{0.0f, 1.0f, 0.0f}));
}

ParseError::Kind parse_kind(const std::string& bytes) {
  try {
    decode_tsa(bytes);
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a parse error";
  return ParseError::Kind::kFormat;
}

TEST(TsaFormat, BadMagic) {
  std::string bytes = encode_tsa(std::vector<std::uint32_t>{1}, std::vector<float>{1.0f});
  bytes.replace(0, 4, "XXXX");
  EXPECT_EQ(parse_kind(bytes), ParseError::Kind::kBadMagic);
}

TEST(TsaFormat, UnsupportedDtype) {
  std::string bytes = encode_tsa(std::vector<std::uint32_t>{1}, std::vector<float>{1.0f});
  bytes[4] = '\x02';
  EXPECT_EQ(parse_kind(bytes), ParseError::Kind::kBadDtype);
}

TEST(TsaFormat, TruncatedPayload) {
  std::string bytes = encode_tsa(std::vector<std::uint32_t>{3, 3}, std::vector<float>(9, 1.0f));
  bytes.resize(bytes.size() - 4);  // 8 floats left
  EXPECT_EQ(parse_kind(bytes), ParseError::Kind::kTruncated);
  EXPECT_EQ(parse_kind("TSA"), ParseError::Kind::kTruncated);
}

TEST(TsaFormat, NonFiniteValuesRejected) {
  std::string bytes = encode_tsa(std::vector<std::uint32_t>{2}, std::vector<float>{1.0f, 2.0f});
  const std::uint32_t nan_bits = 0x7fc00000u;
  for (int i = 0; i < 4; ++i) bytes[12 + 4 + i] = static_cast<char>((nan_bits >> (8 * i)) & 0xff);
  EXPECT_EQ(parse_kind(bytes), ParseError::Kind::kNonFinite);
  EXPECT_THROW(encode_tsa(std::vector<std::uint32_t>{1}, std::vector<float>{INFINITY}), ParseError);
}

TEST(TsaFormat, RankMismatchOnRead) {
  const auto dir = fs::temp_directory_path() / ("tsattn_rank_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  write_vector(dir / "v.tsa", std::vector<float>{1.0f, 2.0f});
  EXPECT_THROW(read_tensor(dir / "v.tsa"), ParseError);
  EXPECT_EQ(read_vector(dir / "v.tsa"), (std::vector<float>{1.0f, 2.0f}));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace tsattn
