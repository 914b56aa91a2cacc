#include "wuw/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "fft.hpp"
#include "wuw/bytes.hpp"
#include "wuw/error.hpp"

namespace wuw {

std::size_t FeatureConfig::window_samples() const {
  return static_cast<std::size_t>(std::llround(window_ms * sample_rate_hz / 1000.0));
}

std::size_t FeatureConfig::hop_samples() const {
  return static_cast<std::size_t>(std::llround(hop_ms * sample_rate_hz / 1000.0));
}

void FeatureConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::invalid_argument, "feature config: " + why); };
  if (sample_rate_hz <= 0) fail("sample rate must be positive");
  if (n_mfcc < 1) fail("n_mfcc must be >= 1");
  if (n_filters < n_mfcc) fail("n_filters must be >= n_mfcc");
  if (hop_samples() < 1) fail("hop must be at least one sample");
  if (hop_ms > window_ms) fail("hop must not exceed the window");
  if (fft_len <= 0 || !std::has_single_bit(static_cast<unsigned>(fft_len))) fail("fft_len must be a power of two");
  if (static_cast<std::size_t>(fft_len) < window_samples()) fail("fft_len shorter than the window");
}

FeatureConfig FeatureConfig::make(std::uint8_t id, int n_mfcc, double window_ms, double hop_ms, int n_filters,
                                  int sample_rate_hz) {
  FeatureConfig c;
  c.config_id = id;
  c.n_mfcc = n_mfcc;
  c.window_ms = window_ms;
  c.hop_ms = hop_ms;
  c.n_filters = n_filters;
  c.sample_rate_hz = sample_rate_hz;
  c.fft_len = static_cast<int>(std::bit_ceil(std::max<std::size_t>(c.window_samples(), 1)));
  c.validate();
  return c;
}

FeatureConfig FeatureConfig::device() { return make(kDeviceConfigId, 13, 100.0, 50.0); }
FeatureConfig FeatureConfig::cloud() { return make(kCloudConfigId, 40, 30.0, 10.0); }

std::vector<FeatureConfig> feature_grid() {
  return {
      FeatureConfig::device(),
      FeatureConfig::make(3, 13, 100.0, 20.0),
      FeatureConfig::make(4, 13, 30.0, 10.0),
      FeatureConfig::make(5, 13, 20.0, 10.0),
      FeatureConfig::cloud(),
  };
}

FeatureConfig config_by_id(std::uint8_t id) {
  for (const auto& c : feature_grid())
    if (c.config_id == id) return c;
  throw Error(Errc::config_mismatch, "unknown feature config id " + std::to_string(id));
}

namespace features {

std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop) {
  if (hop < 1 || window < 1) throw Error(Errc::invalid_argument, "window and hop must be positive");
  if (n_samples < window)
    throw Error(Errc::clip_too_short,
                std::to_string(n_samples) + " samples is shorter than the " + std::to_string(window) + "-sample window");
  return (n_samples - window) / hop + 1;
}

std::vector<double> power_spectrum(std::span<const float> frame, std::size_t fft_len) {
  if (frame.size() > fft_len) throw Error(Errc::invalid_argument, "frame longer than fft_len");
  std::vector<double> padded(fft_len, 0.0);
  std::copy(frame.begin(), frame.end(), padded.begin());
  std::vector<std::complex<double>> spec(fft_len / 2 + 1);
  fft::forward_real(padded, spec);
  std::vector<double> power(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) power[k] = std::norm(spec[k]);
  return power;
}

std::vector<std::size_t> mel_grid_bins(const FeatureConfig& config) {
  const std::size_t points = static_cast<std::size_t>(config.n_filters) + 2;
  const double mel_hi = hz_to_mel(config.sample_rate_hz / 2.0);
  std::vector<std::size_t> bins(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double mel = mel_hi * static_cast<double>(i) / static_cast<double>(points - 1);
    // The end points are exactly 0 Hz and Nyquist; the mel round trip would
    // otherwise land the top edge one bin short.
    const double hz = i == 0 ? 0.0 : i + 1 == points ? config.sample_rate_hz / 2.0 : mel_to_hz(mel);
    bins[i] = static_cast<std::size_t>(std::floor(hz * config.fft_len / config.sample_rate_hz));
  }
  bins.back() = std::min(bins.back(), config.n_bins() - 1);
  return bins;
}

MelFilterbank::MelFilterbank(const FeatureConfig& config)
    : n_filters_(static_cast<std::size_t>(config.n_filters)),
      n_bins_(config.n_bins()),
      grid_(mel_grid_bins(config)),
      weights_(n_filters_ * n_bins_, 0.0) {
  for (std::size_t f = 0; f < n_filters_; ++f) {
    const std::size_t left = grid_[f], center = grid_[f + 1], right = grid_[f + 2];
    double* row = weights_.data() + f * n_bins_;
    for (std::size_t k = left; k < center; ++k)
      row[k] = static_cast<double>(k - left) / static_cast<double>(center - left);
    for (std::size_t k = center + 1; k <= right && k < n_bins_; ++k)
      row[k] = static_cast<double>(right - k) / static_cast<double>(right - center);
    row[center] = 1.0;
  }
}

void MelFilterbank::apply(std::span<const double> power, std::span<double> energies) const {
  if (power.size() != n_bins_ || energies.size() != n_filters_)
    throw Error(Errc::shape_mismatch, "filterbank operand sizes");
  for (std::size_t f = 0; f < n_filters_; ++f) {
    const std::size_t lo = grid_[f], hi = std::min(grid_[f + 2], n_bins_ - 1);
    const double* row = weights_.data() + f * n_bins_;
    double acc = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) acc += row[k] * power[k];
    energies[f] = acc;
  }
}

namespace {

// Rows 0..n_out-1 of the orthonormal DCT-II matrix of size n.
std::vector<double> dct_matrix(std::size_t n, std::size_t n_out) {
  std::vector<double> m(n_out * n);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n_out; ++k)
    for (std::size_t i = 0; i < n; ++i)
      m[k * n + i] = (k == 0 ? s0 : sk) *
                     std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                              (2.0 * static_cast<double>(n)));
  return m;
}

struct Extractor {
  MelFilterbank bank;
  std::vector<double> dct;  // n_mfcc x n_filters
};

const Extractor& extractor_for(const FeatureConfig& c) {
  using Key = std::tuple<int, int, int, int>;
  static std::mutex mu;
  static std::map<Key, std::unique_ptr<Extractor>> cache;
  const Key key{c.n_mfcc, c.n_filters, c.fft_len, c.sample_rate_hz};
  std::lock_guard lock(mu);
  auto& slot = cache[key];
  if (!slot)
    slot = std::make_unique<Extractor>(Extractor{
        MelFilterbank(c), dct_matrix(static_cast<std::size_t>(c.n_filters), static_cast<std::size_t>(c.n_mfcc))});
  return *slot;
}

void mfcc_frame(const Extractor& ex, const FeatureConfig& c, std::span<const float> frame, float* out) {
  const auto power = power_spectrum(frame, static_cast<std::size_t>(c.fft_len));
  const std::size_t nf = ex.bank.n_filters();
  std::vector<double> logmel(nf);
  ex.bank.apply(power, logmel);
  for (double& e : logmel) e = std::log(e + kLogFloor);
  for (int k = 1; k < c.n_mfcc; ++k) {
    const double* row = ex.dct.data() + static_cast<std::size_t>(k) * nf;
    double acc = 0.0;
    for (std::size_t i = 0; i < nf; ++i) acc += row[i] * logmel[i];
    out[k] = static_cast<float>(acc);
  }
  double energy = 0.0;
  for (float s : frame) energy += static_cast<double>(s) * s;
  out[0] = static_cast<float>(std::log(energy + kLogFloor));
}

}  // namespace

std::vector<double> dct_ortho(std::span<const double> x) {
  const std::size_t n = x.size();
  const auto m = dct_matrix(n, n);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += m[k * n + i] * x[i];
    out[k] = acc;
  }
  return out;
}

FeatureMatrix mfcc(const AudioClip& clip, const FeatureConfig& config, Exec exec) {
  config.validate();
  if (clip.sample_rate_hz != config.sample_rate_hz)
    throw Error(Errc::rate_mismatch, "clip at " + std::to_string(clip.sample_rate_hz) + " Hz, config expects " +
                                         std::to_string(config.sample_rate_hz) + " Hz");
  const std::size_t win = config.window_samples();
  const std::size_t hop = config.hop_samples();
  const std::size_t frames = frame_count(clip.size(), win, hop);
  const Extractor& ex = extractor_for(config);

  FeatureMatrix m;
  m.n_frames = frames;
  m.n_coeffs = static_cast<std::size_t>(config.n_mfcc);
  m.config_id = config.config_id;
  m.values.assign(frames * m.n_coeffs, 0.0f);
  const std::span<const float> samples(clip.samples);
  const bool parallel = exec == Exec::parallel && frames > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t t = 0; t < frames; ++t)
    mfcc_frame(ex, config, samples.subspan(t * hop, win), m.values.data() + t * m.n_coeffs);
  return m;
}

namespace {
constexpr std::string_view kDumpMagic = "WUWF";
constexpr std::uint8_t kDumpVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_dump(const FeatureMatrix& m) {
  if (m.n_frames > 0xFFFF || m.n_coeffs > 0xFFFF) throw Error(Errc::invalid_argument, "matrix too large for WUWF");
  if (m.values.size() != m.n_frames * m.n_coeffs) throw Error(Errc::shape_mismatch, "matrix values vs shape");
  bytes::Writer w;
  w.tag(kDumpMagic);
  w.u8(kDumpVersion);
  w.u8(m.config_id);
  w.u16(static_cast<std::uint16_t>(m.n_frames));
  w.u16(static_cast<std::uint16_t>(m.n_coeffs));
  w.f32s(m.values);
  return w.take();
}

FeatureMatrix decode_dump(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  if (!r.tag(kDumpMagic)) throw Error(Errc::bad_magic, "not a WUWF dump");
  if (r.u8() != kDumpVersion) throw Error(Errc::version_mismatch, "unsupported WUWF version");
  FeatureMatrix m;
  m.config_id = r.u8();
  m.n_frames = r.u16();
  m.n_coeffs = r.u16();
  m.values = r.f32s(m.n_frames * m.n_coeffs);
  if (r.remaining() != 0) throw Error(Errc::length_mismatch, "trailing bytes after WUWF payload");
  return m;
}

void write_dump(const std::filesystem::path& path, const FeatureMatrix& m) {
  bytes::write_file(path.string(), encode_dump(m));
}

FeatureMatrix read_dump(const std::filesystem::path& path) { return decode_dump(bytes::read_file(path.string())); }

}  // namespace features
}  // namespace wuw
