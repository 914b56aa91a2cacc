#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "wuw/exec.hpp"
#include "wuw/rng.hpp"

namespace wuw {

inline constexpr int kCanonicalRate = 16000;

// Mono sample buffer. Samples are nominally in [-1, 1] and always finite.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRate;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Aligned keyword interval inside a clip, in seconds.
struct AlignmentSpan {
  double start_s = 0.0;
  double end_s = 0.0;
};

// Throws Error{invalid_argument} if the clip has a non-positive rate or a
// non-finite sample.
void validate(const AudioClip& clip);

namespace audio {

// RIFF/WAVE reader: mono, PCM16 (format 1) or float32 (format 3).
// PCM16 is scaled by 1/32768.
AudioClip read_wav(const std::filesystem::path& path);

// Writes float32 (format 3) by default, PCM16 when pcm16 is set.
void write_wav(const std::filesystem::path& path, const AudioClip& clip, bool pcm16 = false);

// Scales so that max |s| == 1. Silence is returned unchanged.
AudioClip peak_normalize(const AudioClip& clip);

// Fixed-length window of round(duration_s * rate) samples.
//
// With a span, the window start is drawn uniformly among the positions that
// keep [start, end) fully inside the window; a span longer than the window
// centers the window on the span midpoint. Without a span the start is drawn
// uniformly over the clip. Clips shorter than the window are zero-padded
// symmetrically (extra pad sample goes to the end).
AudioClip extract_window(const AudioClip& clip, double duration_s,
                         const std::optional<AlignmentSpan>& span, Rng& rng);

// Mean-square power (1/N) sum s^2. Throws on an empty clip.
double measure_power(const AudioClip& clip);
double measure_power(std::span<const float> samples);

// Noise tiled or cropped to the signal length and scaled by `gain`.
struct MixResult {
  AudioClip mixed;
  std::vector<float> scaled_noise;
  double gain = 0.0;
};

// Adds noise to `signal` so that P_signal / P_scaled_noise == 10^(snr_db/10).
// Noise shorter than the signal is tiled.
MixResult mix_components(const AudioClip& signal, const AudioClip& noise, double snr_db);

inline AudioClip mix_at_snr(const AudioClip& signal, const AudioClip& noise, double snr_db) {
  return mix_components(signal, noise, snr_db).mixed;
}

// Linear convolution truncated to the clip length, then peak-normalized.
// Uses FFT convolution; see kernels::conv_direct for the direct form.
AudioClip convolve_rir(const AudioClip& clip, const AudioClip& rir);

inline constexpr double kSnrMinDb = -10.0;
inline constexpr double kSnrMaxDb = 50.0;

// Uniform SNR in [-10, 50] dB.
inline double draw_snr(Rng& rng) { return rng.uniform(kSnrMinDb, kSnrMaxDb); }

}  // namespace audio
}  // namespace wuw
