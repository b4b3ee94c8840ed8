// specfact/audio.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPECFACT_AUDIO_HPP
#define SPECFACT_AUDIO_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "specfact/common.hpp"

namespace specfact {

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
  double duration_s() const { return static_cast<double>(size()) / sample_rate_hz; }
};

inline double waveform_mean(const Waveform& w) {
  double s = 0.0;
  for (double v : w.samples) s += v;
  return s / static_cast<double>(w.samples.size());
}

// Population standard deviation.
inline double waveform_std(const Waveform& w) {
  double mu = waveform_mean(w);
  double s = 0.0;
  for (double v : w.samples) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(w.samples.size()));
}

inline double waveform_rms(const Waveform& w) {
  double s = 0.0;
  for (double v : w.samples) s += v * v;
  return std::sqrt(s / static_cast<double>(w.samples.size()));
}

// Zero mean, unit standard deviation over the whole utterance.
inline Waveform normalize_global(const Waveform& w) {
  if (w.samples.empty()) throw_validation("normalize_global: empty waveform");
  double mu = waveform_mean(w);
  double sigma = waveform_std(w);
  if (sigma < 1e-12 * std::max(1.0, std::abs(mu))) {
    throw_validation("normalize_global: zero variance signal");
  }
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.resize(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) out.samples[i] = (w.samples[i] - mu) / sigma;
  return out;
}

// Magnitude normalization used by the mixing protocol: unit RMS, mean kept.
inline Waveform rms_normalize(const Waveform& w) {
  if (w.samples.empty()) throw_validation("rms_normalize: empty waveform");
  double r = waveform_rms(w);
  if (r < 1e-300) throw_validation("rms_normalize: silent signal");
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.resize(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) out.samples[i] = w.samples[i] / r;
  return out;
}

// Peak normalization, the configurable alternative to RMS.
inline Waveform peak_normalize(const Waveform& w) {
  if (w.samples.empty()) throw_validation("peak_normalize: empty waveform");
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak < 1e-300) throw_validation("peak_normalize: silent signal");
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.resize(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) out.samples[i] = w.samples[i] / peak;
  return out;
}

}  // namespace specfact

#endif  // SPECFACT_AUDIO_HPP
