// specfact/factorizer.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0
//
// Splits encoder embeddings into content and context factors and scores how
// separable they are: each factor tries to reconstruct the other through a
// gradient-reversal layer (so success is penalized in the projection being
// predicted), and both together reconstruct the original stacked frame.

#ifndef SPECFACT_FACTORIZER_HPP
#define SPECFACT_FACTORIZER_HPP

#include <string>
#include <utility>
#include <vector>

#include "specfact/graph.hpp"
#include "specfact/nn.hpp"

namespace specfact {

struct FactorizerConfig {
  int64_t embed_dim = 64;   // E, encoder output
  int64_t factor_dim = 32;  // F
  int64_t hidden = 64;
  int hidden_layers = 3;
  int64_t frame_dim = 192;  // reconstruction target dimension

  // Projection sizes from the reference experiments at full scale.
  static FactorizerConfig paper_scale() {
    FactorizerConfig cfg;
    cfg.factor_dim = 512;
    cfg.hidden = 512;
    cfg.hidden_layers = 3;
    return cfg;
  }

  static FactorizerConfig desk_scale() { return {}; }
};

struct FactorPair {
  NodeId z_content = -1;  // [T, F]
  NodeId z_context = -1;  // [T, F]
};

struct MiLossNodes {
  NodeId m_content = -1;
  NodeId m_context = -1;
  NodeId m_joint = -1;
  NodeId total = -1;
};

struct MiOptions {
  // Ablation switch for the reversal layers; gradients flip sign exactly
  // when this is turned off.
  bool grl_enabled = true;
};

// Mean over frames of the squared L2 distance between rows of a and b.
inline NodeId mean_frame_sqdist(Graph& g, NodeId a, NodeId b) {
  const Tensor& ta = g.value(a);
  if (ta.rank() != 2 || !ta.same_shape(g.value(b))) {
    throw_validation("mean_frame_sqdist: expected matching [T,D] inputs, got ",
                     shape_str(ta.shape()), " vs ", shape_str(g.value(b).shape()));
  }
  // (1/T) sum_t ||a_t - b_t||^2 == D * mse(a, b)
  return g.scale(g.mse(a, b), static_cast<double>(ta.dim(1)));
}

class Factorizer {
 public:
  explicit Factorizer(FactorizerConfig cfg, std::string prefix = "factorizer")
      : cfg_(cfg), prefix_(std::move(prefix)) {
    if (cfg_.embed_dim < 1 || cfg_.factor_dim < 1 || cfg_.hidden < 1 || cfg_.hidden_layers < 1 ||
        cfg_.frame_dim < 1) {
      throw_validation("factorizer: all dimensions must be >= 1");
    }
    pi_spec_ = MlpSpec(cfg_.embed_dim, cfg_.hidden, cfg_.hidden_layers, cfg_.factor_dim);
    phi_spec_ = MlpSpec(cfg_.factor_dim, cfg_.hidden, cfg_.hidden_layers, cfg_.factor_dim);
    joint_spec_ = MlpSpec(2 * cfg_.factor_dim, cfg_.hidden, cfg_.hidden_layers, cfg_.frame_dim);
  }

  const FactorizerConfig& config() const { return cfg_; }

  void init_params(ParamStore& store, Rng& rng) const {
    init_mlp(store, prefix_ + "/pi_content", pi_spec_, rng);
    init_mlp(store, prefix_ + "/pi_context", pi_spec_, rng);
    init_mlp(store, prefix_ + "/phi_content", phi_spec_, rng);
    init_mlp(store, prefix_ + "/phi_context", phi_spec_, rng);
    init_mlp(store, prefix_ + "/phi_joint", joint_spec_, rng);
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    for (const auto& [sub, spec] : subnets()) {
      for (auto& n : mlp_param_names(prefix_ + "/" + sub, spec)) names.push_back(n);
    }
    return names;
  }

  std::vector<std::string> pi_content_params() const {
    return mlp_param_names(prefix_ + "/pi_content", pi_spec_);
  }
  std::vector<std::string> pi_context_params() const {
    return mlp_param_names(prefix_ + "/pi_context", pi_spec_);
  }
  std::vector<std::string> phi_content_params() const {
    return mlp_param_names(prefix_ + "/phi_content", phi_spec_);
  }
  std::vector<std::string> phi_context_params() const {
    return mlp_param_names(prefix_ + "/phi_context", phi_spec_);
  }

  // Two independent MLPs over the same embedding matrix.
  FactorPair project(Graph& g, NodeId embeddings, const BuildOptions& opts = {}) const {
    const Tensor& e = g.value(embeddings);
    if (e.rank() != 2 || e.dim(1) != cfg_.embed_dim) {
      throw_validation("factorizer: expected [T,", cfg_.embed_dim, "] embeddings, got ",
                       shape_str(e.shape()));
    }
    FactorPair pair;
    pair.z_content = mlp_forward(g, embeddings, prefix_ + "/pi_content", pi_spec_, opts);
    pair.z_context = mlp_forward(g, embeddings, prefix_ + "/pi_context", pi_spec_, opts);
    return pair;
  }

  // The three cyclic-reconstruction terms over already-projected factors.
  // `frames` is the pre-masking stacked feature matrix the joint head
  // reconstructs. Each term is a mean over frames of a squared L2 distance.
  MiLossNodes mi_loss_terms(Graph& g, const FactorPair& pair, NodeId frames,
                            const BuildOptions& opts = {}, const MiOptions& mi = {}) const {
    const Tensor& f = g.value(frames);
    const Tensor& zc = g.value(pair.z_content);
    if (f.rank() != 2 || f.dim(1) != cfg_.frame_dim) {
      throw_validation("mi_loss: expected [T,", cfg_.frame_dim, "] frames, got ",
                       shape_str(f.shape()));
    }
    if (f.dim(0) != zc.dim(0)) {
      throw_validation("mi_loss: ", zc.dim(0), " embedding frames vs ", f.dim(0),
                       " target frames");
    }
    auto maybe_reverse = [&](NodeId x) { return mi.grl_enabled ? g.grad_reverse(x) : x; };
    MiLossNodes out;
    NodeId content_hat =
        mlp_forward(g, maybe_reverse(pair.z_context), prefix_ + "/phi_content", phi_spec_, opts);
    out.m_content = mean_frame_sqdist(g, pair.z_content, content_hat);
    NodeId context_hat =
        mlp_forward(g, maybe_reverse(pair.z_content), prefix_ + "/phi_context", phi_spec_, opts);
    out.m_context = mean_frame_sqdist(g, pair.z_context, context_hat);
    NodeId joint_in = g.concat({pair.z_content, pair.z_context}, 1);
    NodeId frames_hat = mlp_forward(g, joint_in, prefix_ + "/phi_joint", joint_spec_, opts);
    out.m_joint = mean_frame_sqdist(g, frames, frames_hat);
    out.total = g.add(g.add(out.m_content, out.m_context), out.m_joint);
    return out;
  }

  // Full operation: project then score.
  std::pair<FactorPair, MiLossNodes> mi_loss(Graph& g, NodeId embeddings, NodeId frames,
                                             const BuildOptions& opts = {},
                                             const MiOptions& mi = {}) const {
    FactorPair pair = project(g, embeddings, opts);
    return {pair, mi_loss_terms(g, pair, frames, opts, mi)};
  }

 private:
  std::vector<std::pair<std::string, MlpSpec>> subnets() const {
    return {{"pi_content", pi_spec_},
            {"pi_context", pi_spec_},
            {"phi_content", phi_spec_},
            {"phi_context", phi_spec_},
            {"phi_joint", joint_spec_}};
  }

  FactorizerConfig cfg_;
  std::string prefix_;
  MlpSpec pi_spec_;
  MlpSpec phi_spec_;
  MlpSpec joint_spec_;
};

}  // namespace specfact

#endif  // SPECFACT_FACTORIZER_HPP
