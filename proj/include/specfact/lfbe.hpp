// specfact/lfbe.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0
//
// Log filterbank energy extraction and frame stacking.

#ifndef SPECFACT_LFBE_HPP
#define SPECFACT_LFBE_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "specfact/audio.hpp"
#include "specfact/common.hpp"
#include "specfact/tensor.hpp"

namespace specfact {

enum class Stage : uint8_t { kRawLfbe, kStacked, kAugmented, kMasked };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kRawLfbe: return "raw-lfbe";
    case Stage::kStacked: return "stacked";
    case Stage::kAugmented: return "augmented";
    case Stage::kMasked: return "masked";
  }
  return "?";
}

// T x D matrix of feature frames for one utterance. The stage tag only moves
// forward through the pipeline.
struct FrameSequence {
  Tensor frames;  // [T, D]
  double frame_shift_ms = 10.0;
  Stage stage = Stage::kRawLfbe;

  int64_t num_frames() const { return frames.dim(0); }
  int64_t dim() const { return frames.dim(1); }
};

struct LfbeConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int num_mel = 64;
  int fft_size = 512;
  double mel_low_hz = 20.0;
  double mel_high_hz = 7600.0;
  double log_floor = 1e-10;  // added per power-spectrum bin
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// In-place iterative radix-2 FFT; n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw_validation("fft: size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Triangular mel filters over FFT power bins. Filter b spans mel edges
// [b, b+2] with its peak at edge b+1; weights are triangles in mel space.
class MelFilterbank {
 public:
  MelFilterbank(const LfbeConfig& cfg, int sample_rate_hz) {
    if (cfg.num_mel < 1) throw_validation("mel filterbank: num_mel must be >= 1");
    if (cfg.mel_high_hz <= cfg.mel_low_hz) throw_validation("mel filterbank: bad frequency range");
    if (cfg.mel_high_hz > sample_rate_hz / 2.0) {
      throw_validation("mel filterbank: mel_high_hz above Nyquist");
    }
    int bins = cfg.fft_size / 2 + 1;
    double mel_low = hz_to_mel(cfg.mel_low_hz);
    double mel_high = hz_to_mel(cfg.mel_high_hz);
    edges_hz_.resize(static_cast<size_t>(cfg.num_mel) + 2);
    for (int e = 0; e < cfg.num_mel + 2; ++e) {
      double mel = mel_low + (mel_high - mel_low) * e / (cfg.num_mel + 1);
      edges_hz_[static_cast<size_t>(e)] = mel_to_hz(mel);
    }
    weights_.assign(static_cast<size_t>(cfg.num_mel),
                    std::vector<double>(static_cast<size_t>(bins), 0.0));
    weight_sums_.assign(static_cast<size_t>(cfg.num_mel), 0.0);
    for (int b = 0; b < cfg.num_mel; ++b) {
      double lo = hz_to_mel(edges_hz_[static_cast<size_t>(b)]);
      double mid = hz_to_mel(edges_hz_[static_cast<size_t>(b) + 1]);
      double hi = hz_to_mel(edges_hz_[static_cast<size_t>(b) + 2]);
      for (int k = 0; k < bins; ++k) {
        double f = static_cast<double>(k) * sample_rate_hz / cfg.fft_size;
        double mel = hz_to_mel(f);
        double w = 0.0;
        if (mel > lo && mel < hi) {
          w = mel <= mid ? (mel - lo) / (mid - lo) : (hi - mel) / (hi - mid);
        }
        weights_[static_cast<size_t>(b)][static_cast<size_t>(k)] = w;
        weight_sums_[static_cast<size_t>(b)] += w;
      }
      if (weight_sums_[static_cast<size_t>(b)] <= 0.0) {
        throw_validation("mel filterbank: band ", b,
                         " covers no FFT bins; increase fft_size or widen the range");
      }
    }
  }

  int num_bands() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& band_weights(int b) const {
    return weights_[static_cast<size_t>(b)];
  }
  double weight_sum(int b) const { return weight_sums_[static_cast<size_t>(b)]; }
  const std::vector<double>& edges_hz() const { return edges_hz_; }

  // Response of band b to a pure frequency, used by band-location tests.
  double response_at_hz(int b, double hz) const {
    double lo = hz_to_mel(edges_hz_[static_cast<size_t>(b)]);
    double mid = hz_to_mel(edges_hz_[static_cast<size_t>(b) + 1]);
    double hi = hz_to_mel(edges_hz_[static_cast<size_t>(b) + 2]);
    double mel = hz_to_mel(hz);
    if (mel <= lo || mel >= hi) return 0.0;
    return mel <= mid ? (mel - lo) / (mid - lo) : (hi - mel) / (hi - mid);
  }

 private:
  std::vector<std::vector<double>> weights_;
  std::vector<double> weight_sums_;
  std::vector<double> edges_hz_;
};

// 64-dim log mel filterbank energies over 25 ms Hann windows with a 10 ms
// hop. T = floor((len - window) / hop) + 1. Each coefficient is
// log(sum_k w_k * (|X_k|^2 + floor)).
inline FrameSequence extract_lfbe(const Waveform& w, const LfbeConfig& cfg = {}) {
  int64_t window = static_cast<int64_t>(std::lround(cfg.window_ms * w.sample_rate_hz / 1000.0));
  int64_t hop = static_cast<int64_t>(std::lround(cfg.hop_ms * w.sample_rate_hz / 1000.0));
  if (window <= 1 || hop < 1) throw_validation("extract_lfbe: degenerate window/hop");
  if (window > cfg.fft_size) throw_validation("extract_lfbe: window longer than fft_size");
  if (w.size() < window) {
    throw_validation("extract_lfbe: waveform of ", w.size(), " samples shorter than one window (",
                     window, ")");
  }
  MelFilterbank bank(cfg, w.sample_rate_hz);
  int64_t frames = (w.size() - window) / hop + 1;
  int bins = cfg.fft_size / 2 + 1;

  std::vector<double> hann(static_cast<size_t>(window));
  for (int64_t i = 0; i < window; ++i) {
    hann[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(window - 1));
  }

  std::vector<double> out(static_cast<size_t>(frames * cfg.num_mel));
  std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.fft_size));
  std::vector<double> power(static_cast<size_t>(bins));
  for (int64_t t = 0; t < frames; ++t) {
    int64_t begin = t * hop;
    for (int64_t i = 0; i < cfg.fft_size; ++i) {
      double v = i < window ? w.samples[static_cast<size_t>(begin + i)] * hann[static_cast<size_t>(i)]
                            : 0.0;
      buf[static_cast<size_t>(i)] = {v, 0.0};
    }
    fft_radix2(buf);
    for (int k = 0; k < bins; ++k) power[static_cast<size_t>(k)] = std::norm(buf[static_cast<size_t>(k)]);
    for (int b = 0; b < cfg.num_mel; ++b) {
      const auto& wts = bank.band_weights(b);
      double energy = cfg.log_floor * bank.weight_sum(b);
      for (int k = 0; k < bins; ++k) energy += wts[static_cast<size_t>(k)] * power[static_cast<size_t>(k)];
      out[static_cast<size_t>(t * cfg.num_mel + b)] = std::log(energy);
    }
  }
  FrameSequence fs;
  fs.frames = Tensor({frames, cfg.num_mel}, std::move(out));
  fs.frame_shift_ms = cfg.hop_ms;
  fs.stage = Stage::kRawLfbe;
  return fs;
}

// Concatenates k consecutive frames; trailing frames that do not fill a full
// stack are dropped.
inline FrameSequence stack_frames(const FrameSequence& fs, int k = 3) {
  if (fs.stage != Stage::kRawLfbe) {
    throw_validation("stack_frames: expected raw-lfbe stage, got ", stage_name(fs.stage));
  }
  if (k < 1) throw_validation("stack_frames: k must be >= 1");
  int64_t t_in = fs.num_frames();
  int64_t d = fs.dim();
  if (t_in < k) throw_validation("stack_frames: ", t_in, " frames < stack size ", k);
  int64_t t_out = t_in / k;
  std::vector<double> out(static_cast<size_t>(t_out * k * d));
  const auto src = fs.frames.data();
  for (int64_t t = 0; t < t_out; ++t) {
    for (int64_t j = 0; j < k * d; ++j) {
      out[static_cast<size_t>(t * k * d + j)] = src[static_cast<size_t>(t * k * d + j)];
    }
  }
  FrameSequence stacked;
  stacked.frames = Tensor({t_out, k * d}, std::move(out));
  stacked.frame_shift_ms = fs.frame_shift_ms * k;
  stacked.stage = Stage::kStacked;
  return stacked;
}

}  // namespace specfact

#endif  // SPECFACT_LFBE_HPP
