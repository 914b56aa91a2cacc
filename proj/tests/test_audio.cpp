#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "wuw/audio.hpp"
#include "wuw/error.hpp"

using namespace wuw;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::io_error;
}

std::vector<std::uint8_t> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<std::uint8_t> out;
  for (auto s : v) {
    auto u = static_cast<std::uint16_t>(s);
    out.push_back(u & 0xff);
    out.push_back(u >> 8);
  }
  return out;
}

}  // namespace

TEST_CASE("read_wav scales pcm16 by 1/32768") {
  auto dir = testing::scratch_dir("wav_pcm");
  testing::write_bytes(dir / "a.wav", testing::wav_bytes(1, 1, 16000, 16, pcm16({0, 16384, -32768})));
  auto clip = audio::read_wav(dir / "a.wav");
  REQUIRE(clip.size() == 3);
  CHECK(clip.samples[0] == 0.0f);
  CHECK(clip.samples[1] == 0.5f);
  CHECK(clip.samples[2] == -1.0f);
  CHECK(clip.sample_rate_hz == 16000);
}

TEST_CASE("read_wav edge cases and errors") {
  auto dir = testing::scratch_dir("wav_err");

  testing::write_bytes(dir / "empty.wav", testing::wav_bytes(1, 1, 16000, 16, {}));
  CHECK(audio::read_wav(dir / "empty.wav").empty());

  testing::write_bytes(dir / "long.wav", testing::wav_bytes(1, 1, 16000, 16, pcm16(std::vector<std::int16_t>(24000, 7))));
  auto c = audio::read_wav(dir / "long.wav");
  CHECK(c.duration_s() == 1.5);

  // Other rates load; features reject them later.
  testing::write_bytes(dir / "r8k.wav", testing::wav_bytes(1, 1, 8000, 16, pcm16({1, 2})));
  CHECK(audio::read_wav(dir / "r8k.wav").sample_rate_hz == 8000);

  testing::write_bytes(dir / "stereo.wav", testing::wav_bytes(1, 2, 16000, 16, pcm16({1, 2})));
  CHECK(code_of([&] { audio::read_wav(dir / "stereo.wav"); }) == Errc::unsupported_channels);

  testing::write_bytes(dir / "pcm24.wav", testing::wav_bytes(1, 1, 16000, 24, {0, 0, 0}));
  CHECK(code_of([&] { audio::read_wav(dir / "pcm24.wav"); }) == Errc::unsupported_encoding);

  testing::write_bytes(dir / "alaw.wav", testing::wav_bytes(6, 1, 16000, 8, {0}));
  CHECK(code_of([&] { audio::read_wav(dir / "alaw.wav"); }) == Errc::unsupported_encoding);

  CHECK(code_of([&] { audio::read_wav(dir / "missing.wav"); }) == Errc::file_not_found);

  testing::write_bytes(dir / "junk.wav", {'R', 'I', 'F', 'F', 1, 2});
  CHECK(code_of([&] { audio::read_wav(dir / "junk.wav"); }) == Errc::malformed_wav);
}

TEST_CASE("float wav round trip is exact") {
  auto dir = testing::scratch_dir("wav_rt");
  Rng rng(3);
  auto clip = testing::random_clip(1000, rng);
  audio::write_wav(dir / "f.wav", clip);
  CHECK(audio::read_wav(dir / "f.wav").samples == clip.samples);

  AudioClip q{{0.0f, 0.5f, -1.0f}, 16000};
  audio::write_wav(dir / "p.wav", q, true);
  CHECK(audio::read_wav(dir / "p.wav").samples == q.samples);
}

TEST_CASE("peak_normalize") {
  CHECK(audio::peak_normalize({{0.1f, -0.5f}, 16000}).samples == std::vector<float>{0.2f, -1.0f});
  CHECK(audio::peak_normalize({{0, 0, 0}, 16000}).samples == std::vector<float>{0, 0, 0});
  CHECK(audio::peak_normalize({{1.0f, -1.0f}, 16000}).samples == std::vector<float>{1.0f, -1.0f});

  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    auto c = testing::random_clip(1 + rng.below(500), rng, rng.uniform(1e-3, 5.0));
    auto once = audio::peak_normalize(c);
    CHECK(audio::peak_normalize(once).samples == once.samples);
    float peak = 0;
    for (float s : once.samples) peak = std::max(peak, std::fabs(s));
    CHECK(peak == 1.0f);
  }
}

TEST_CASE("extract_window lengths and padding") {
  Rng rng(5);
  AudioClip exact = testing::random_clip(24000, rng);
  CHECK(audio::extract_window(exact, 1.5, std::nullopt, rng).samples == exact.samples);

  AudioClip shortc = testing::random_clip(8000, rng);
  for (auto& s : shortc.samples) if (s == 0.0f) s = 0.25f;
  auto w = audio::extract_window(shortc, 1.5, std::nullopt, rng);
  REQUIRE(w.size() == 24000);
  std::size_t zeros = 0;
  for (float s : w.samples) zeros += (s == 0.0f);
  CHECK(zeros == 16000);
  CHECK(w.samples[8000] == shortc.samples[0]);

  for (std::size_t n : {1u, 100u, 23999u, 24000u, 24001u, 50000u}) {
    auto c = testing::random_clip(n, rng);
    CHECK(audio::extract_window(c, 1.5, std::nullopt, rng).size() == 24000);
    CHECK(audio::extract_window(c, 0.73, std::nullopt, rng).size() == 11680);
  }

  CHECK(code_of([&] { audio::extract_window(AudioClip{}, 1.5, std::nullopt, rng); }) == Errc::empty_clip);
  CHECK(code_of([&] { audio::extract_window(exact, 0.0, std::nullopt, rng); }) == Errc::invalid_argument);
}

TEST_CASE("extract_window always contains the aligned span") {
  Rng rng(9);
  // Sample values encode their index, so the window start can be recovered.
  AudioClip c;
  for (int i = 0; i < 48000; ++i) c.samples.push_back(static_cast<float>(i + 1));
  AlignmentSpan span{0.2, 1.0};
  std::size_t lo = SIZE_MAX, hi = 0;
  for (int t = 0; t < 1000; ++t) {
    auto w = audio::extract_window(c, 1.5, span, rng);
    REQUIRE(w.size() == 24000);
    const auto start = static_cast<std::size_t>(w.samples[0]) - 1;
    CHECK(start <= 3200);
    CHECK(start + 24000 >= 16000);
    lo = std::min(lo, start);
    hi = std::max(hi, start);
  }
  // Placement actually varies over the valid range [0, 3200].
  CHECK(lo < 200);
  CHECK(hi > 3000);

  // A span longer than the window centers on its midpoint.
  auto w = audio::extract_window(c, 1.5, AlignmentSpan{0.0, 2.5}, rng);
  const auto start = static_cast<std::size_t>(w.samples[0]) - 1;
  CHECK(start == 20000 - 12000);
}

TEST_CASE("measure_power") {
  CHECK(audio::measure_power(AudioClip{std::vector<float>(10, 0.5f), 16000}) == 0.25);
  CHECK(audio::measure_power(AudioClip{std::vector<float>(10, 0.0f), 16000}) == 0.0);
  CHECK(audio::measure_power(AudioClip{{1, -1, 1, -1}, 16000}) == 1.0);
  CHECK(code_of([] { audio::measure_power(AudioClip{}); }) == Errc::empty_clip);
}

TEST_CASE("mix_at_snr gain and realized SNR") {
  AudioClip a{std::vector<float>(100, 0.5f), 16000};
  AudioClip b{std::vector<float>(100, -0.5f), 16000};
  CHECK(audio::mix_components(a, b, 0.0).gain == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(audio::mix_components(a, b, 20.0).gain == doctest::Approx(0.1).epsilon(1e-12));

  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    auto sig = testing::random_clip(1000 + rng.below(3000), rng);
    auto noise = testing::random_clip(100 + rng.below(5000), rng, rng.uniform(0.01, 2.0));
    const double snr = t == 0 ? -10.0 : audio::draw_snr(rng);
    auto r = audio::mix_components(sig, noise, snr);
    REQUIRE(r.mixed.size() == sig.size());
    REQUIRE(r.scaled_noise.size() == sig.size());
    // Recompute the powers of the two addends independently in long double.
    long double ps = 0, pn = 0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      ps += static_cast<long double>(sig.samples[i]) * sig.samples[i];
      pn += static_cast<long double>(r.scaled_noise[i]) * r.scaled_noise[i];
    }
    const double realized = static_cast<double>(10.0L * std::log10(ps / pn));
    CHECK(std::fabs(realized - snr) < 1e-6);
  }

  CHECK(code_of([&] { audio::mix_at_snr(AudioClip{std::vector<float>(10, 0.f), 16000}, b, 0); }) == Errc::invalid_argument);
  CHECK(code_of([&] { audio::mix_at_snr(a, AudioClip{std::vector<float>(10, 0.f), 16000}, 0); }) == Errc::invalid_argument);
  CHECK(code_of([&] { audio::mix_at_snr(a, AudioClip{b.samples, 8000}, 0); }) == Errc::rate_mismatch);
}

TEST_CASE("noise shorter than the signal is tiled") {
  AudioClip sig{std::vector<float>(7, 1.0f), 16000};
  AudioClip noise{{1.0f, -1.0f, 0.5f}, 16000};
  auto r = audio::mix_components(sig, noise, 0.0);
  for (std::size_t i = 0; i < 7; ++i)
    CHECK(r.scaled_noise[i] == doctest::Approx(r.gain * noise.samples[i % 3]).epsilon(1e-6));
}

TEST_CASE("convolve_rir") {
  Rng rng(4);
  auto clip = testing::random_clip(2000, rng, 0.3);
  auto id = audio::convolve_rir(clip, AudioClip{{1.0f}, 16000});
  auto norm = audio::peak_normalize(clip);
  for (std::size_t i = 0; i < clip.size(); ++i) CHECK(id.samples[i] == doctest::Approx(norm.samples[i]).epsilon(1e-6));

  auto delayed = audio::convolve_rir(clip, AudioClip{{0.0f, 1.0f}, 16000});
  REQUIRE(delayed.size() == clip.size());
  // Peak of the delayed clip may differ when the dropped last sample held it.
  std::vector<double> shifted(clip.size(), 0.0);
  for (std::size_t i = 1; i < clip.size(); ++i) shifted[i] = clip.samples[i - 1];
  shifted = oracle::peak_normalized(shifted);
  CHECK(std::fabs(delayed.samples[0]) < 1e-6);
  for (std::size_t i = 0; i < clip.size(); ++i) CHECK(delayed.samples[i] == doctest::Approx(shifted[i]).epsilon(1e-6));

  for (int t = 0; t < 5; ++t) {
    auto x = testing::random_clip(4000, rng);
    auto h = testing::random_clip(512, rng);
    auto y = audio::convolve_rir(x, h);
    auto ref = oracle::peak_normalized(oracle::direct_conv(x.samples, h.samples));
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(y.samples[i] - ref[i]));
    CHECK(worst < 1e-5);
  }

  CHECK(code_of([&] { audio::convolve_rir(clip, AudioClip{}); }) == Errc::empty_clip);
  CHECK(code_of([&] { audio::convolve_rir(AudioClip{}, clip); }) == Errc::empty_clip);
  CHECK(code_of([&] { audio::convolve_rir(clip, AudioClip{{1.0f}, 8000}); }) == Errc::rate_mismatch);
}

TEST_CASE("draw_snr distribution") {
  Rng rng(2024);
  std::vector<double> xs(100000);
  double sum = 0;
  for (auto& x : xs) {
    x = audio::draw_snr(rng);
    CHECK_MESSAGE((x >= -10.0 && x <= 50.0), x);
    sum += x;
  }
  CHECK(std::fabs(sum / xs.size() - 20.0) < 0.5);
  CHECK(oracle::ks_uniform(xs, -10.0, 50.0) < 0.01);

  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) CHECK(audio::draw_snr(a) == audio::draw_snr(b));
}

TEST_CASE("validate rejects non-finite samples") {
  CHECK(code_of([] { validate(AudioClip{{0.0f, NAN}, 16000}); }) == Errc::invalid_argument);
  CHECK(code_of([] { validate(AudioClip{{0.0f}, 0}); }) == Errc::invalid_argument);
}
