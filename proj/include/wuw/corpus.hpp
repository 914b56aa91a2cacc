#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "wuw/audio.hpp"
#include "wuw/features.hpp"
#include "wuw/manifest.hpp"
#include "wuw/rng.hpp"
#include "wuw/train.hpp"

namespace wuw {

// Resolves a manifest path to audio.
using AudioSource = std::function<AudioClip(const std::string& path)>;

// read_wav with a thread-safe in-memory cache.
AudioSource wav_source();

struct AugmentSpec {
  double window_s = 1.5;
  double snr_lo_db = audio::kSnrMinDb;
  double snr_hi_db = audio::kSnrMaxDb;
  // Probability of reverberating the speech component before the noise mix.
  double rir_probability = 0.0;
};

struct AugmentedWindow {
  AudioClip window;
  Label label = Label::neg;
  double snr_db = 0.0;
};

// Windows every wuw/other/noise entry of `split` (wuw -> positive) and mixes
// in a random noise window at an SNR uniform in [snr_lo_db, snr_hi_db].
// Speech is reverberated first when an RIR is drawn. A silent window gets the
// noise added unscaled. Noise and RIRs come from the same split when
// available, otherwise from any split.
std::vector<AugmentedWindow> augment_split(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                           Split split, const AugmentSpec& spec, Rng& rng);

std::vector<LabeledFeatures> featurize(const std::vector<AugmentedWindow>& windows, const FeatureConfig& config);

namespace synth {

// Linear chirp from f0 to f1 Hz under a raised-cosine envelope, peak 1.
AudioClip chirp(double duration_s, double f0_hz, double f1_hz, int rate = kCanonicalRate);

// White noise through a random one-pole low-pass, peak-normalized.
AudioClip shaped_noise(std::size_t n_samples, Rng& rng, int rate = kCanonicalRate);

// Exponentially decaying random impulse response.
AudioClip room_response(std::size_t n_taps, Rng& rng, int rate = kCanonicalRate);

struct CorpusSpec {
  std::size_t n_train = 500;
  std::size_t n_valid = 100;
  std::size_t n_test = 100;
  std::size_t n_noise_per_split = 20;
  std::size_t n_rir = 4;
  double keyword_s = 0.5;
  // When false, negative clips hold only the noise floor, so after
  // augmentation every negative is shaped noise.
  bool other_events = true;
  std::uint64_t seed = 7;
};

// Keyword task: "wuw" clips hold a 1-4 kHz chirp (with aligned span) in a
// quiet floor; "other" clips hold a low chirp or a tone pair (or nothing, see
// other_events); "noise" clips are shaped noise. Each split has ~50% positives.
struct Corpus {
  std::vector<ManifestEntry> entries;
  std::map<std::string, AudioClip> clips;

  // Looks clips up in place; the corpus must outlive the returned source.
  AudioSource source() const;
  // Writes every clip as float WAV plus manifest.jsonl into dir.
  void write(const std::filesystem::path& dir) const;
};

Corpus make_corpus(const CorpusSpec& spec);

}  // namespace synth
}  // namespace wuw
