// tests/test_util.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPECFACT_TESTS_TEST_UTIL_HPP
#define SPECFACT_TESTS_TEST_UTIL_HPP

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "specfact/graph.hpp"
#include "specfact/rng.hpp"
#include "specfact/tensor.hpp"

namespace specfact::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  return Tensor::uniform(std::move(shape), rng, lo, hi);
}

// Smallest |x| feeding any relu in the graph. Central differences are only
// valid away from the kink; instances that land within `margin` of it get
// resampled by the caller.
inline double relu_kink_margin(const Graph& g) {
  double margin = 1e300;
  for (NodeId id = 0; id < static_cast<NodeId>(g.num_nodes()); ++id) {
    if (g.op_of(id) != Op::kRelu) continue;
    const Tensor& in = g.value(g.args_of(id)[0]);
    for (int64_t i = 0; i < in.numel(); ++i) margin = std::min(margin, std::abs(in[i]));
  }
  return margin;
}

// Scalar objective with non-uniform weights so every output element of the
// node under test receives a distinct adjoint.
inline NodeId weighted_scalar_loss(Graph& g, NodeId node, Rng& rng) {
  Tensor w = random_tensor(g.value(node).shape(), rng, -1.0, 1.0);
  return g.sum(g.mul(node, g.constant(std::move(w))));
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("specfact_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace specfact::testing

#endif  // SPECFACT_TESTS_TEST_UTIL_HPP
