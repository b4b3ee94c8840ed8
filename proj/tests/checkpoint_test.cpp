// tests/checkpoint_test.cpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "specfact/checkpoint.hpp"
#include "test_util.hpp"

using namespace specfact;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(),
                     static_cast<size_t>(a.numel()) * sizeof(double)) == 0;
}

}  // namespace

TEST(Checkpoint, BitExactRoundTrip) {
  Rng rng(404);
  std::map<std::string, Tensor> tensors;
  tensors.emplace("scalar", Tensor::scalar(-0.0));
  tensors.emplace("vec", Tensor({5}, {1.0, -2.5, 3e-300, 0.1, 7.0}));
  tensors.emplace("mat", Tensor::uniform({3, 7}, rng, -1.0, 1.0));
  tensors.emplace("deep/name/with/slashes", Tensor::uniform({2, 2, 2}, rng, -1.0, 1.0));

  auto dir = specfact::testing::temp_dir("ckpt");
  auto path = dir / "model.fctm";
  save_tensors(tensors, path);
  auto loaded = load_tensors(path);
  ASSERT_EQ(loaded.size(), tensors.size());
  for (const auto& [name, t] : tensors) {
    ASSERT_TRUE(loaded.count(name)) << name;
    EXPECT_TRUE(bitwise_equal(t, loaded.at(name))) << name;
  }
  // Atomic write leaves no temp file behind.
  EXPECT_FALSE(std::filesystem::exists(dir / "model.fctm.tmp"));
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsBadMagicAndVersion) {
  auto dir = specfact::testing::temp_dir("ckpt_bad");
  auto path = dir / "bad.fctm";
  {
    std::ofstream os(path, std::ios::binary);
    os.write("NOPE", 4);
    uint32_t v = 1;
    os.write(reinterpret_cast<const char*>(&v), 4);
  }
  EXPECT_THROW(load_tensors(path), ValidationError);
  {
    std::ofstream os(path, std::ios::binary);
    os.write("FCTM", 4);
    uint32_t v = 99;
    os.write(reinterpret_cast<const char*>(&v), 4);
  }
  EXPECT_THROW(load_tensors(path), ValidationError);
  EXPECT_THROW(load_tensors(dir / "missing.fctm"), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, TruncatedPayloadRejected) {
  auto dir = specfact::testing::temp_dir("ckpt_trunc");
  auto path = dir / "t.fctm";
  std::map<std::string, Tensor> tensors;
  tensors.emplace("w", Tensor({4}, {1.0, 2.0, 3.0, 4.0}));
  save_tensors(tensors, path);
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 9);
  EXPECT_THROW(load_tensors(path), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, StringPayloadRoundTrip) {
  EXPECT_EQ(tensor_to_string(string_to_tensor("")), "");
  std::string s = "{\"seed\": 3, \"note\": \"config json\"}";
  EXPECT_EQ(tensor_to_string(string_to_tensor(s)), s);
}
