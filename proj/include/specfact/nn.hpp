// specfact/nn.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small shared building blocks: linear layers and ReLU MLPs over graph nodes.

#ifndef SPECFACT_NN_HPP
#define SPECFACT_NN_HPP

#include <cmath>
#include <string>
#include <vector>

#include "specfact/graph.hpp"
#include "specfact/rng.hpp"

namespace specfact {

struct BuildOptions {
  bool training = false;
  double dropout = 0.0;  // applied after hidden activations when training
  Rng* rng = nullptr;    // required when training with dropout > 0
};

inline void init_linear(ParamStore& store, const std::string& prefix, int64_t in, int64_t out,
                        Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(in + out));
  store.add(prefix + "/w", Tensor::uniform({in, out}, rng, -a, a));
  store.add(prefix + "/b", Tensor::zeros({out}));
}

inline NodeId linear(Graph& g, NodeId x, const std::string& prefix) {
  return g.add(g.matmul(x, g.param(prefix + "/w")), g.param(prefix + "/b"));
}

// dims = {input, hidden..., output}; ReLU on hidden layers, linear output.
struct MlpSpec {
  std::vector<int64_t> dims;

  MlpSpec() = default;
  MlpSpec(int64_t in, int64_t hidden, int hidden_layers, int64_t out) {
    dims.push_back(in);
    for (int i = 0; i < hidden_layers; ++i) dims.push_back(hidden);
    dims.push_back(out);
  }
  int num_layers() const { return static_cast<int>(dims.size()) - 1; }
};

inline void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng) {
  if (spec.num_layers() < 1) throw_validation("mlp '", prefix, "': needs at least one layer");
  for (int l = 0; l < spec.num_layers(); ++l) {
    init_linear(store, prefix + "/l" + std::to_string(l), spec.dims[static_cast<size_t>(l)],
                spec.dims[static_cast<size_t>(l) + 1], rng);
  }
}

inline std::vector<std::string> mlp_param_names(const std::string& prefix, const MlpSpec& spec) {
  std::vector<std::string> names;
  for (int l = 0; l < spec.num_layers(); ++l) {
    names.push_back(prefix + "/l" + std::to_string(l) + "/w");
    names.push_back(prefix + "/l" + std::to_string(l) + "/b");
  }
  return names;
}

inline NodeId mlp_forward(Graph& g, NodeId x, const std::string& prefix, const MlpSpec& spec,
                          const BuildOptions& opts = {}) {
  bool use_dropout = opts.training && opts.dropout > 0.0;
  if (use_dropout && opts.rng == nullptr) {
    throw_validation("mlp '", prefix, "': dropout requires an rng");
  }
  NodeId h = x;
  for (int l = 0; l < spec.num_layers(); ++l) {
    h = linear(g, h, prefix + "/l" + std::to_string(l));
    if (l + 1 < spec.num_layers()) {
      h = g.relu(h);
      if (use_dropout) h = g.dropout(h, opts.dropout, *opts.rng);
    }
  }
  return h;
}

}  // namespace specfact

#endif  // SPECFACT_NN_HPP
