#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wuw/audio.hpp"
#include "wuw/exec.hpp"

namespace wuw {

// Parametric MFCC recipe.
struct FeatureConfig {
  std::uint8_t config_id = 0;
  int n_mfcc = 13;
  double window_ms = 100.0;
  double hop_ms = 50.0;
  int n_filters = 40;
  int fft_len = 2048;
  int sample_rate_hz = kCanonicalRate;

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  std::size_t n_bins() const { return static_cast<std::size_t>(fft_len) / 2 + 1; }

  // Throws Error{invalid_argument} when an invariant is broken.
  void validate() const;

  // 13 coeffs, 100 ms window, 50 ms hop (on-device detector).
  static FeatureConfig device();
  // 40 coeffs, 30 ms window, 10 ms hop (server-side verification).
  static FeatureConfig cloud();
  // Builds a config with the smallest power-of-two FFT that holds the window.
  static FeatureConfig make(std::uint8_t id, int n_mfcc, double window_ms, double hop_ms,
                            int n_filters = 40, int sample_rate_hz = kCanonicalRate);
};

inline constexpr std::uint8_t kDeviceConfigId = 1;
inline constexpr std::uint8_t kCloudConfigId = 2;

// The five-point grid studied for feature optimization: the two presets plus
// 13/100/20, 13/30/10 and 13/20/10.
std::vector<FeatureConfig> feature_grid();

// Looks up a preset or grid config by id. Throws on an unknown id.
FeatureConfig config_by_id(std::uint8_t id);

// frames x coeffs, row-major.
struct FeatureMatrix {
  std::size_t n_frames = 0;
  std::size_t n_coeffs = 0;
  std::vector<float> values;
  std::uint8_t config_id = 0;

  float at(std::size_t frame, std::size_t coeff) const { return values[frame * n_coeffs + coeff]; }
  std::span<const float> row(std::size_t frame) const {
    return std::span<const float>(values).subspan(frame * n_coeffs, n_coeffs);
  }
  bool operator==(const FeatureMatrix&) const = default;
};

namespace features {

inline constexpr double kLogFloor = 1e-10;

// floor((n_samples - window) / hop) + 1. Throws clip_too_short when
// n_samples < window.
std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop);

// |FFT|^2 of the zero-padded, rectangular-windowed frame; fft_len/2 + 1 bins.
std::vector<double> power_spectrum(std::span<const float> frame, std::size_t fft_len);

inline double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * std::expm1(mel / 1127.0); }

// n_filters + 2 FFT bin indices of the mel grid (left edge, centers, right
// edge), equally spaced on the mel scale between 0 Hz and Nyquist.
std::vector<std::size_t> mel_grid_bins(const FeatureConfig& config);

// n_filters x n_bins triangular filters, row-major, peak weight 1.0.
class MelFilterbank {
 public:
  explicit MelFilterbank(const FeatureConfig& config);

  std::size_t n_filters() const { return n_filters_; }
  std::size_t n_bins() const { return n_bins_; }
  double weight(std::size_t filter, std::size_t bin) const { return weights_[filter * n_bins_ + bin]; }
  std::size_t center_bin(std::size_t filter) const { return grid_[filter + 1]; }
  std::span<const double> weights() const { return weights_; }

  // energies[f] = sum_k weight(f, k) * power[k]
  void apply(std::span<const double> power, std::span<double> energies) const;

 private:
  std::size_t n_filters_;
  std::size_t n_bins_;
  std::vector<std::size_t> grid_;
  std::vector<double> weights_;
};

// Orthonormal DCT-II, all coefficients.
std::vector<double> dct_ortho(std::span<const double> x);

// Per frame: power spectrum -> mel energies -> ln(e + 1e-10) -> orthonormal
// DCT-II -> first n_mfcc coefficients, with coefficient 0 replaced by the
// frame log energy ln(sum s^2 + 1e-10).
FeatureMatrix mfcc(const AudioClip& clip, const FeatureConfig& config, Exec exec = Exec::parallel);

// WUWF dump: "WUWF", u8 version (1), u8 config_id, u16 n_frames, u16 n_coeffs,
// then float32 values row-major, all little-endian.
std::vector<std::uint8_t> encode_dump(const FeatureMatrix& m);
FeatureMatrix decode_dump(std::span<const std::uint8_t> bytes);
void write_dump(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_dump(const std::filesystem::path& path);

}  // namespace features
}  // namespace wuw
