#include "wuw/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "wuw/bytes.hpp"
#include "wuw/error.hpp"

namespace wuw {

AudioSource wav_source() {
  struct Cache {
    std::mutex mu;
    std::map<std::string, AudioClip> clips;
  };
  auto cache = std::make_shared<Cache>();
  return [cache](const std::string& path) {
    {
      std::lock_guard lock(cache->mu);
      auto it = cache->clips.find(path);
      if (it != cache->clips.end()) return it->second;
    }
    AudioClip clip = audio::read_wav(path);
    std::lock_guard lock(cache->mu);
    return cache->clips.emplace(path, std::move(clip)).first->second;
  };
}

namespace {

std::vector<const ManifestEntry*> pool(const std::vector<ManifestEntry>& entries, ClipLabel label, Split split) {
  std::vector<const ManifestEntry*> same, any;
  for (const auto& e : entries) {
    if (e.label != label) continue;
    any.push_back(&e);
    if (e.split == split) same.push_back(&e);
  }
  return same.empty() ? any : same;
}

}  // namespace

std::vector<AugmentedWindow> augment_split(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                           Split split, const AugmentSpec& spec, Rng& rng) {
  const auto noises = pool(entries, ClipLabel::noise, split);
  const auto rirs = pool(entries, ClipLabel::rir, split);
  if (noises.empty()) throw Error(Errc::manifest_error, "augmentation needs at least one noise entry");

  std::vector<AugmentedWindow> out;
  for (const auto& e : entries) {
    if (e.split != split || e.label == ClipLabel::rir) continue;
    AugmentedWindow w;
    w.label = e.label == ClipLabel::wuw ? Label::pos : Label::neg;
    w.window = audio::extract_window(source(e.path), spec.window_s,
                                     e.label == ClipLabel::wuw ? e.span : std::nullopt, rng);
    if (e.label != ClipLabel::noise && !rirs.empty() && rng.uniform() < spec.rir_probability)
      w.window = audio::convolve_rir(w.window, source(rirs[rng.below(rirs.size())]->path));

    const AudioClip noise =
        audio::extract_window(source(noises[rng.below(noises.size())]->path), spec.window_s, std::nullopt, rng);
    w.snr_db = rng.uniform(spec.snr_lo_db, spec.snr_hi_db);
    const double p_sig = audio::measure_power(w.window), p_noise = audio::measure_power(noise);
    if (p_sig > 0 && p_noise > 0) {
      w.window = audio::mix_at_snr(w.window, noise, w.snr_db);
    } else {
      for (std::size_t i = 0; i < w.window.size(); ++i) w.window.samples[i] += noise.samples[i % noise.size()];
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<LabeledFeatures> featurize(const std::vector<AugmentedWindow>& windows, const FeatureConfig& config) {
  std::vector<LabeledFeatures> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    out[i].features = features::mfcc(windows[i].window, config);
    out[i].label = windows[i].label;
  }
  return out;
}

namespace synth {

AudioClip chirp(double duration_s, double f0_hz, double f1_hz, int rate) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate));
  AudioClip c;
  c.sample_rate_hz = rate;
  c.samples.resize(n);
  const double k = (f1_hz - f0_hz) / duration_s;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    c.samples[i] = static_cast<float>(env * std::sin(2.0 * std::numbers::pi * (f0_hz * t + 0.5 * k * t * t)));
  }
  return audio::peak_normalize(c);
}

AudioClip shaped_noise(std::size_t n_samples, Rng& rng, int rate) {
  AudioClip c;
  c.sample_rate_hz = rate;
  c.samples.resize(n_samples);
  const double a = rng.uniform(0.85, 0.98);
  double y = 0.0;
  for (auto& s : c.samples) {
    y = a * y + (1.0 - a) * rng.normal();
    s = static_cast<float>(y);
  }
  return audio::peak_normalize(c);
}

AudioClip room_response(std::size_t n_taps, Rng& rng, int rate) {
  AudioClip c;
  c.sample_rate_hz = rate;
  c.samples.resize(std::max<std::size_t>(n_taps, 1));
  const double tau = rng.uniform(0.05, 0.2) * static_cast<double>(n_taps);
  c.samples[0] = 1.0f;
  for (std::size_t k = 1; k < c.samples.size(); ++k)
    c.samples[k] = static_cast<float>(0.3 * rng.normal() * std::exp(-static_cast<double>(k) / tau));
  return c;
}

AudioSource Corpus::source() const {
  return [this](const std::string& path) {
    auto it = clips.find(path);
    if (it == clips.end()) throw Error(Errc::file_not_found, path);
    return it->second;
  };
}

void Corpus::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [path, clip] : clips) {
    const auto full = dir / path;
    std::filesystem::create_directories(full.parent_path());
    audio::write_wav(full, clip);
  }
  const std::string text = to_jsonl(entries);
  bytes::write_file((dir / "manifest.jsonl").string(),
                    std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

void add_floor(AudioClip& clip, Rng& rng, double level) {
  const AudioClip floor = shaped_noise(clip.size(), rng, clip.sample_rate_hz);
  for (std::size_t i = 0; i < clip.size(); ++i) clip.samples[i] += static_cast<float>(level) * floor.samples[i];
}

void place(AudioClip& clip, const AudioClip& event, std::size_t offset, double gain) {
  for (std::size_t i = 0; i < event.size() && offset + i < clip.size(); ++i)
    clip.samples[offset + i] += static_cast<float>(gain) * event.samples[i];
}

std::string clip_name(Split split, const char* kind, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/%s_%04zu.wav", to_string(split), kind, i);
  return buf;
}

}  // namespace

Corpus make_corpus(const CorpusSpec& spec) {
  Rng rng(spec.seed);
  Corpus c;
  const int rate = kCanonicalRate;
  auto add = [&](const std::string& path, AudioClip clip, ClipLabel label, Split split,
                 std::optional<AlignmentSpan> span = std::nullopt) {
    c.entries.push_back({path, label, span, split});
    c.clips.emplace(path, std::move(clip));
  };

  for (auto [split, count] : {std::pair{Split::train, spec.n_train}, std::pair{Split::valid, spec.n_valid},
                              std::pair{Split::test, spec.n_test}}) {
    for (std::size_t i = 0; i < count; ++i) {
      AudioClip clip;
      clip.sample_rate_hz = rate;
      clip.samples.assign(static_cast<std::size_t>(rng.uniform(1.0, 2.5) * rate), 0.0f);
      add_floor(clip, rng, 0.003);
      const double dur = spec.keyword_s * rng.uniform(0.8, 1.2);
      const bool positive = i % 2 == 0;
      AudioClip event = positive ? chirp(dur, rng.uniform(900, 1100), rng.uniform(3800, 4200), rate)
                        : rng.bernoulli(0.5) ? chirp(dur, rng.uniform(150, 250), rng.uniform(700, 900), rate)
                                             : chirp(dur, rng.uniform(300, 500), rng.uniform(300, 500), rate);
      const std::size_t offset = rng.below(clip.size() - event.size() + 1);
      const double gain = rng.uniform(0.5, 1.0);
      if (positive || spec.other_events) place(clip, event, offset, gain);
      if (positive) {
        const AlignmentSpan span{static_cast<double>(offset) / rate,
                                 static_cast<double>(offset + event.size()) / rate};
        add(clip_name(split, "wuw", i), std::move(clip), ClipLabel::wuw, split, span);
      } else {
        add(clip_name(split, "other", i), std::move(clip), ClipLabel::other, split);
      }
    }
    for (std::size_t i = 0; i < spec.n_noise_per_split; ++i)
      add(clip_name(split, "noise", i),
          shaped_noise(static_cast<std::size_t>(rng.uniform(2.0, 4.0) * rate), rng, rate), ClipLabel::noise, split);
  }
  for (std::size_t i = 0; i < spec.n_rir; ++i)
    add(clip_name(Split::train, "rir", i), room_response(2048, rng, rate), ClipLabel::rir, Split::train);
  return c;
}

}  // namespace synth
}  // namespace wuw
