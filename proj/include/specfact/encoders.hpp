// specfact/encoders.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-centric speech encoders behind a common interface: a unidirectional
// gated recurrent encoder and a windowed MLP encoder. Both map [T, D] frames
// to [T, E] embeddings without subsampling.

#ifndef SPECFACT_ENCODERS_HPP
#define SPECFACT_ENCODERS_HPP

#include <memory>
#include <string>
#include <vector>

#include "specfact/graph.hpp"
#include "specfact/nn.hpp"

namespace specfact {

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual int64_t input_dim() const = 0;
  virtual int64_t embed_dim() const = 0;
  virtual void init_params(ParamStore& store, Rng& rng) const = 0;
  virtual std::vector<std::string> param_names() const = 0;
  virtual NodeId encode(Graph& g, NodeId frames, const BuildOptions& opts = {}) const = 0;
};

struct RecurrentEncoderConfig {
  int layers = 2;
  int64_t hidden = 64;
  int64_t embed = 64;
  int64_t input = 192;
};

// Gated recurrent cell (GRU-style): tanh candidate, logistic update/reset
// gates, plus a linear projection from the last layer's state to the
// embedding. Embedding at t depends only on frames <= t.
class RecurrentEncoder : public Encoder {
 public:
  explicit RecurrentEncoder(RecurrentEncoderConfig cfg, std::string prefix = "encoder")
      : cfg_(cfg), prefix_(std::move(prefix)) {
    if (cfg_.layers < 1 || cfg_.hidden < 1 || cfg_.embed < 1 || cfg_.input < 1) {
      throw_validation("recurrent encoder: layers/hidden/embed/input must be >= 1");
    }
  }

  int64_t input_dim() const override { return cfg_.input; }
  int64_t embed_dim() const override { return cfg_.embed; }

  void init_params(ParamStore& store, Rng& rng) const override {
    for (int l = 0; l < cfg_.layers; ++l) {
      int64_t in = l == 0 ? cfg_.input : cfg_.hidden;
      std::string lp = layer_prefix(l);
      for (const char* gate : {"z", "r", "c"}) {
        double ax = std::sqrt(6.0 / static_cast<double>(in + cfg_.hidden));
        double ah = std::sqrt(6.0 / static_cast<double>(2 * cfg_.hidden));
        store.add(lp + "/wx" + gate, Tensor::uniform({in, cfg_.hidden}, rng, -ax, ax));
        store.add(lp + "/wh" + gate, Tensor::uniform({cfg_.hidden, cfg_.hidden}, rng, -ah, ah));
        store.add(lp + "/b" + gate, Tensor::zeros({cfg_.hidden}));
      }
    }
    init_linear(store, prefix_ + "/proj", cfg_.hidden, cfg_.embed, rng);
  }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names;
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string lp = layer_prefix(l);
      for (const char* gate : {"z", "r", "c"}) {
        names.push_back(lp + "/wx" + gate);
        names.push_back(lp + "/wh" + gate);
        names.push_back(lp + "/b" + gate);
      }
    }
    names.push_back(prefix_ + "/proj/w");
    names.push_back(prefix_ + "/proj/b");
    return names;
  }

  NodeId encode(Graph& g, NodeId frames, const BuildOptions& opts = {}) const override {
    const Tensor& f = g.value(frames);
    if (f.rank() != 2 || f.dim(1) != cfg_.input) {
      throw_validation("recurrent encoder: expected [T,", cfg_.input, "] frames, got ",
                       shape_str(f.shape()));
    }
    int64_t t_len = f.dim(0);
    std::vector<NodeId> rows(static_cast<size_t>(t_len));
    for (int64_t t = 0; t < t_len; ++t) rows[static_cast<size_t>(t)] = g.slice(frames, 0, t, t + 1);
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string lp = layer_prefix(l);
      NodeId h = g.constant(Tensor::zeros({1, cfg_.hidden}));
      for (int64_t t = 0; t < t_len; ++t) {
        NodeId x = rows[static_cast<size_t>(t)];
        NodeId z = g.logistic(gate(g, lp, "z", x, h));
        NodeId r = g.logistic(gate(g, lp, "r", x, h));
        NodeId rh = g.mul(r, h);
        NodeId c = g.tanh(g.add(g.add(g.matmul(x, g.param(lp + "/wxc")),
                                      g.matmul(rh, g.param(lp + "/whc"))),
                                g.param(lp + "/bc")));
        // h' = z (.) h + (1 - z) (.) c
        NodeId one_minus_z = g.add(g.scale(z, -1.0), g.constant(Tensor::full({1, cfg_.hidden}, 1.0)));
        h = g.add(g.mul(z, h), g.mul(one_minus_z, c));
        rows[static_cast<size_t>(t)] = h;
      }
    }
    NodeId states = t_len == 1 ? rows[0] : g.concat(rows, 0);
    if (opts.training && opts.dropout > 0.0) {
      if (opts.rng == nullptr) throw_validation("recurrent encoder: dropout requires an rng");
      states = g.dropout(states, opts.dropout, *opts.rng);
    }
    return linear(g, states, prefix_ + "/proj");
  }

 private:
  std::string layer_prefix(int l) const { return prefix_ + "/l" + std::to_string(l); }

  NodeId gate(Graph& g, const std::string& lp, const char* name, NodeId x, NodeId h) const {
    return g.add(g.add(g.matmul(x, g.param(lp + "/wx" + name)),
                       g.matmul(h, g.param(lp + "/wh" + name))),
                 g.param(lp + std::string("/b") + name));
  }

  RecurrentEncoderConfig cfg_;
  std::string prefix_;
};

struct WindowMlpEncoderConfig {
  int radius = 1;  // frames of context on each side
  int64_t hidden = 64;
  int layers = 2;  // hidden layers
  int64_t embed = 64;
  int64_t input = 192;
};

// Embedding at t = MLP(concat(frames t-r .. t+r)), edges zero-padded.
class WindowMlpEncoder : public Encoder {
 public:
  explicit WindowMlpEncoder(WindowMlpEncoderConfig cfg, std::string prefix = "encoder")
      : cfg_(cfg), prefix_(std::move(prefix)) {
    if (cfg_.radius < 0) throw_validation("window mlp encoder: radius must be >= 0");
    if (cfg_.layers < 1 || cfg_.hidden < 1 || cfg_.embed < 1 || cfg_.input < 1) {
      throw_validation("window mlp encoder: layers/hidden/embed/input must be >= 1");
    }
    spec_ = MlpSpec((2 * cfg_.radius + 1) * cfg_.input, cfg_.hidden, cfg_.layers, cfg_.embed);
  }

  int64_t input_dim() const override { return cfg_.input; }
  int64_t embed_dim() const override { return cfg_.embed; }

  void init_params(ParamStore& store, Rng& rng) const override {
    init_mlp(store, prefix_ + "/mlp", spec_, rng);
  }

  std::vector<std::string> param_names() const override {
    return mlp_param_names(prefix_ + "/mlp", spec_);
  }

  NodeId encode(Graph& g, NodeId frames, const BuildOptions& opts = {}) const override {
    const Tensor& f = g.value(frames);
    if (f.rank() != 2 || f.dim(1) != cfg_.input) {
      throw_validation("window mlp encoder: expected [T,", cfg_.input, "] frames, got ",
                       shape_str(f.shape()));
    }
    int64_t t_len = f.dim(0);
    std::vector<NodeId> shifted;
    for (int o = -cfg_.radius; o <= cfg_.radius; ++o) {
      shifted.push_back(shift_rows(g, frames, t_len, o));
    }
    NodeId window = shifted.size() == 1 ? shifted[0] : g.concat(shifted, 1);
    return mlp_forward(g, window, prefix_ + "/mlp", spec_, opts);
  }

 private:
  // Rows shifted by `offset` with zero padding at the edges.
  NodeId shift_rows(Graph& g, NodeId frames, int64_t t_len, int offset) const {
    if (offset == 0) return frames;
    int64_t o = std::abs(offset);
    if (o >= t_len) return g.constant(Tensor::zeros({t_len, cfg_.input}));
    NodeId pad = g.constant(Tensor::zeros({o, cfg_.input}));
    if (offset < 0) {
      // row t sees frame t+offset: pad at the top.
      return g.concat({pad, g.slice(frames, 0, 0, t_len - o)}, 0);
    }
    return g.concat({g.slice(frames, 0, o, t_len), pad}, 0);
  }

  WindowMlpEncoderConfig cfg_;
  std::string prefix_;
  MlpSpec spec_;
};

}  // namespace specfact

#endif  // SPECFACT_ENCODERS_HPP
