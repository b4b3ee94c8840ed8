// specfact/augment.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0
//
// SpecAugment-style time/frequency masking and frame-level masking. Every
// plan is a pure function of (seed, T, D, config).

#ifndef SPECFACT_AUGMENT_HPP
#define SPECFACT_AUGMENT_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "specfact/common.hpp"
#include "specfact/lfbe.hpp"
#include "specfact/rng.hpp"
#include "specfact/tensor.hpp"

namespace specfact {

struct SpecAugmentConfig {
  int num_freq_masks = 2;
  double freq_width_ratio = 27.0 / 80.0;  // of the feature dimension
  int max_time_masks = 20;
  double time_multiplicity = 0.04;  // time-mask count = min(max, ceil(mult*T))
  double time_width_ratio = 0.04;   // of the sequence length

  static SpecAugmentConfig disabled() {
    SpecAugmentConfig cfg;
    cfg.num_freq_masks = 0;
    cfg.max_time_masks = 0;
    return cfg;
  }

  bool is_noop() const { return num_freq_masks == 0 && max_time_masks == 0; }
};

struct MaskPlan {
  std::vector<uint8_t> frame_mask;                       // frame-level masking
  std::vector<std::pair<int64_t, int64_t>> time_masks;   // (start, width)
  std::vector<std::pair<int64_t, int64_t>> freq_masks;   // (start, width)
  uint64_t rng_seed = 0;

  int64_t masked_frame_count() const {
    int64_t n = 0;
    for (uint8_t m : frame_mask) n += m;
    return n;
  }
};

// Zeroes the selected time spans and frequency bands. Width is sampled
// uniformly in [0, max_width] per mask, start uniformly in [0, size - width];
// frequency masks are sampled before time masks.
inline std::pair<FrameSequence, MaskPlan> spec_augment(const FrameSequence& fs,
                                                       const SpecAugmentConfig& cfg,
                                                       uint64_t seed) {
  if (fs.stage != Stage::kStacked) {
    throw_validation("spec_augment: expected stacked stage, got ", stage_name(fs.stage));
  }
  if (cfg.num_freq_masks < 0 || cfg.max_time_masks < 0 || cfg.freq_width_ratio < 0.0 ||
      cfg.time_width_ratio < 0.0 || cfg.time_multiplicity < 0.0) {
    throw_validation("spec_augment: negative config value");
  }
  int64_t t = fs.num_frames();
  int64_t d = fs.dim();
  MaskPlan plan;
  plan.rng_seed = seed;
  Rng rng(seed);

  int64_t max_freq_width = static_cast<int64_t>(std::floor(cfg.freq_width_ratio * static_cast<double>(d)));
  for (int m = 0; m < cfg.num_freq_masks; ++m) {
    int64_t width = rng.uniform_int(max_freq_width + 1);
    int64_t start = rng.uniform_int(d - width + 1);
    plan.freq_masks.emplace_back(start, width);
  }
  int num_time_masks = static_cast<int>(
      std::min<int64_t>(cfg.max_time_masks,
                        static_cast<int64_t>(std::ceil(cfg.time_multiplicity * static_cast<double>(t)))));
  int64_t max_time_width = static_cast<int64_t>(std::floor(cfg.time_width_ratio * static_cast<double>(t)));
  for (int m = 0; m < num_time_masks; ++m) {
    int64_t width = rng.uniform_int(max_time_width + 1);
    int64_t start = rng.uniform_int(t - width + 1);
    plan.time_masks.emplace_back(start, width);
  }

  std::vector<double> out(fs.frames.data().begin(), fs.frames.data().end());
  for (const auto& [start, width] : plan.freq_masks) {
    for (int64_t r = 0; r < t; ++r) {
      for (int64_t c = start; c < start + width; ++c) out[static_cast<size_t>(r * d + c)] = 0.0;
    }
  }
  for (const auto& [start, width] : plan.time_masks) {
    for (int64_t r = start; r < start + width; ++r) {
      for (int64_t c = 0; c < d; ++c) out[static_cast<size_t>(r * d + c)] = 0.0;
    }
  }
  FrameSequence augmented;
  augmented.frames = Tensor({t, d}, std::move(out));
  augmented.frame_shift_ms = fs.frame_shift_ms;
  augmented.stage = Stage::kAugmented;
  return {std::move(augmented), std::move(plan)};
}

// Independent Bernoulli(pi_mask) indicator per frame.
inline std::vector<uint8_t> plan_frame_mask(int64_t t, double pi_mask, uint64_t seed) {
  if (!(pi_mask >= 0.0 && pi_mask < 1.0)) {
    throw_validation("frame mask: pi_mask must be in [0,1), got ", pi_mask);
  }
  std::vector<uint8_t> mask(static_cast<size_t>(t), 0);
  Rng rng(seed);
  for (int64_t i = 0; i < t; ++i) mask[static_cast<size_t>(i)] = rng.uniform() < pi_mask ? 1 : 0;
  return mask;
}

// Replaces each selected frame with the learned mask embedding. The embedding
// is read-only here; during training the substitution is rebuilt inside the
// graph so the embedding receives gradient.
inline std::pair<FrameSequence, MaskPlan> mask_frames(const FrameSequence& fs, double pi_mask,
                                                      uint64_t seed,
                                                      std::span<const double> mask_embedding) {
  if (fs.stage != Stage::kStacked && fs.stage != Stage::kAugmented) {
    throw_validation("mask_frames: expected stacked or augmented stage, got ",
                     stage_name(fs.stage));
  }
  int64_t d = fs.dim();
  if (static_cast<int64_t>(mask_embedding.size()) != d) {
    throw_validation("mask_frames: embedding dim ", mask_embedding.size(),
                     " does not match feature dim ", d);
  }
  int64_t t = fs.num_frames();
  MaskPlan plan;
  plan.rng_seed = seed;
  plan.frame_mask = plan_frame_mask(t, pi_mask, seed);
  std::vector<double> out(fs.frames.data().begin(), fs.frames.data().end());
  for (int64_t r = 0; r < t; ++r) {
    if (!plan.frame_mask[static_cast<size_t>(r)]) continue;
    for (int64_t c = 0; c < d; ++c) out[static_cast<size_t>(r * d + c)] = mask_embedding[static_cast<size_t>(c)];
  }
  FrameSequence masked;
  masked.frames = Tensor({t, d}, std::move(out));
  masked.frame_shift_ms = fs.frame_shift_ms;
  masked.stage = Stage::kMasked;
  return {std::move(masked), std::move(plan)};
}

}  // namespace specfact

#endif  // SPECFACT_AUGMENT_HPP
