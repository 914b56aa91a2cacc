#include "wuw/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <string>

#include "fft.hpp"
#include "wuw/bytes.hpp"
#include "wuw/error.hpp"

namespace wuw {

void validate(const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) throw Error(Errc::invalid_argument, "sample rate must be positive");
  for (float s : clip.samples)
    if (!std::isfinite(s)) throw Error(Errc::invalid_argument, "non-finite sample");
}

namespace audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

void require_rate_match(const AudioClip& a, const AudioClip& b) {
  if (a.sample_rate_hz != b.sample_rate_hz)
    throw Error(Errc::rate_mismatch,
                std::to_string(a.sample_rate_hz) + " Hz vs " + std::to_string(b.sample_rate_hz) + " Hz");
}

std::size_t next_pow2(std::size_t n) { return std::bit_ceil(std::max<std::size_t>(n, 1)); }

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::file_not_found, path.string());
  const auto data = bytes::read_file(path.string());
  bytes::Reader in(data);
  try {
    if (!in.tag("RIFF")) throw Error(Errc::malformed_wav, "missing RIFF tag");
    in.u32();
    if (!in.tag("WAVE")) throw Error(Errc::malformed_wav, "missing WAVE tag");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    while (in.remaining() >= 8) {
      auto id = in.take(4);
      const std::uint32_t size = in.u32();
      const std::string chunk(reinterpret_cast<const char*>(id.data()), 4);
      if (chunk == "fmt ") {
        if (size < 16) throw Error(Errc::malformed_wav, "fmt chunk too small");
        auto body = in.take(size);
        bytes::Reader fmt(body);
        format = fmt.u16();
        channels = fmt.u16();
        rate = fmt.u32();
        fmt.u32();  // byte rate
        fmt.u16();  // block align
        bits = fmt.u16();
        have_fmt = true;
      } else if (chunk == "data") {
        if (!have_fmt) throw Error(Errc::malformed_wav, "data chunk before fmt chunk");
        if (channels != 1) throw Error(Errc::unsupported_channels, std::to_string(channels) + " channels");
        if (rate == 0) throw Error(Errc::malformed_wav, "zero sample rate");
        AudioClip clip;
        clip.sample_rate_hz = static_cast<int>(rate);
        const std::size_t n_bytes = std::min<std::size_t>(size, in.remaining());
        auto payload = in.take(n_bytes);
        if (format == kFormatPcm && bits == 16) {
          const std::size_t n = n_bytes / 2;
          clip.samples.resize(n);
          for (std::size_t i = 0; i < n; ++i) {
            std::int16_t v;
            std::memcpy(&v, payload.data() + 2 * i, 2);
            clip.samples[i] = static_cast<float>(v) / 32768.0f;
          }
        } else if (format == kFormatFloat && bits == 32) {
          const std::size_t n = n_bytes / 4;
          clip.samples.resize(n);
          std::memcpy(clip.samples.data(), payload.data(), n * 4);
        } else {
          throw Error(Errc::unsupported_encoding,
                      "format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
        }
        validate(clip);
        return clip;
      } else {
        in.take(std::min<std::size_t>(size + (size & 1u), in.remaining()));
      }
    }
  } catch (const Error& e) {
    if (e.code() == Errc::truncated) throw Error(Errc::malformed_wav, path.string() + ": truncated");
    throw;
  }
  throw Error(Errc::malformed_wav, path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, bool pcm16) {
  bytes::Writer out;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * (bits / 8));
  out.tag("RIFF");
  out.u32(4 + 8 + 16 + 8 + data_bytes);
  out.tag("WAVE");
  out.tag("fmt ");
  out.u32(16);
  out.u16(pcm16 ? kFormatPcm : kFormatFloat);
  out.u16(1);
  out.u32(static_cast<std::uint32_t>(clip.sample_rate_hz));
  out.u32(static_cast<std::uint32_t>(clip.sample_rate_hz) * (bits / 8));
  out.u16(bits / 8);
  out.u16(bits);
  out.tag("data");
  out.u32(data_bytes);
  if (pcm16) {
    for (float s : clip.samples) {
      const float scaled = std::clamp(s * 32768.0f, -32768.0f, 32767.0f);
      out.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lrint(scaled))));
    }
  } else {
    out.f32s(clip.samples);
  }
  bytes::write_file(path.string(), out.buffer());
}

AudioClip peak_normalize(const AudioClip& clip) {
  float peak = 0.0f;
  for (float s : clip.samples) peak = std::max(peak, std::fabs(s));
  if (peak == 0.0f || peak == 1.0f) return clip;
  AudioClip out = clip;
  // Division keeps the peak sample at exactly 1, which makes this idempotent.
  for (float& s : out.samples) s /= peak;
  return out;
}

AudioClip extract_window(const AudioClip& clip, double duration_s, const std::optional<AlignmentSpan>& span,
                         Rng& rng) {
  if (!(duration_s > 0.0)) throw Error(Errc::invalid_argument, "window duration must be positive");
  if (clip.empty()) throw Error(Errc::empty_clip, "cannot window an empty clip");

  const auto n = static_cast<std::int64_t>(std::llround(duration_s * clip.sample_rate_hz));
  const auto len = static_cast<std::int64_t>(clip.size());
  std::int64_t start = 0;

  if (len < n) {
    start = -((n - len) / 2);
  } else if (span) {
    if (!(span->end_s > span->start_s) || span->start_s < 0.0)
      throw Error(Errc::invalid_argument, "alignment span must satisfy 0 <= start < end");
    const auto s0 = std::clamp<std::int64_t>(std::llround(span->start_s * clip.sample_rate_hz), 0, len);
    const auto s1 = std::clamp<std::int64_t>(std::llround(span->end_s * clip.sample_rate_hz), s0, len);
    const std::int64_t lo = std::max<std::int64_t>(0, s1 - n);
    const std::int64_t hi = std::min<std::int64_t>(s0, len - n);
    if (s1 - s0 > n || lo > hi) {
      start = (s0 + s1) / 2 - n / 2;
    } else {
      start = lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    }
  } else {
    start = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(len - n + 1)));
  }

  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.assign(static_cast<std::size_t>(n), 0.0f);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t src = start + i;
    if (src >= 0 && src < len) out.samples[static_cast<std::size_t>(i)] = clip.samples[static_cast<std::size_t>(src)];
  }
  return out;
}

double measure_power(std::span<const float> samples) {
  if (samples.empty()) throw Error(Errc::empty_clip, "power of an empty clip");
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  return acc / static_cast<double>(samples.size());
}

double measure_power(const AudioClip& clip) { return measure_power(std::span<const float>(clip.samples)); }

MixResult mix_components(const AudioClip& signal, const AudioClip& noise, double snr_db) {
  require_rate_match(signal, noise);
  if (signal.empty() || noise.empty()) throw Error(Errc::empty_clip, "mixing needs nonempty signal and noise");
  const std::size_t n = signal.size();
  std::vector<float> tiled(n);
  for (std::size_t i = 0; i < n; ++i) tiled[i] = noise.samples[i % noise.size()];

  const double p_signal = measure_power(signal);
  const double p_noise = measure_power(tiled);
  if (p_signal <= 0.0 || p_noise <= 0.0) throw Error(Errc::invalid_argument, "SNR undefined for zero-power input");

  MixResult r;
  r.gain = std::sqrt(p_signal / (p_noise * std::pow(10.0, snr_db / 10.0)));
  r.scaled_noise.resize(n);
  r.mixed.sample_rate_hz = signal.sample_rate_hz;
  r.mixed.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.scaled_noise[i] = static_cast<float>(r.gain * tiled[i]);
    r.mixed.samples[i] = signal.samples[i] + r.scaled_noise[i];
  }
  return r;
}

AudioClip convolve_rir(const AudioClip& clip, const AudioClip& rir) {
  if (clip.empty() || rir.empty()) throw Error(Errc::empty_clip, "convolution needs nonempty clip and rir");
  require_rate_match(clip, rir);
  const std::size_t n = clip.size();
  const std::size_t fft_len = next_pow2(n + rir.size() - 1);

  std::vector<double> a(fft_len, 0.0), b(fft_len, 0.0);
  std::copy(clip.samples.begin(), clip.samples.end(), a.begin());
  std::copy(rir.samples.begin(), rir.samples.end(), b.begin());
  std::vector<std::complex<double>> fa(fft_len / 2 + 1), fb(fft_len / 2 + 1);
  fft::forward_real(a, fa);
  fft::forward_real(b, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft::inverse_real(fa, a);

  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.resize(n);
  const double scale = 1.0 / static_cast<double>(fft_len);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = static_cast<float>(a[i] * scale);
  return peak_normalize(out);
}

}  // namespace audio
}  // namespace wuw
