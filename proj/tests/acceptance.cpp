// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "e2e.hpp"
#include "oracles.hpp"
#include "wuw/agent.hpp"
#include "wuw/audio.hpp"
#include "wuw/eval.hpp"
#include "wuw/features.hpp"
#include "wuw/fusion.hpp"
#include "wuw/nninf.hpp"
#include "wuw/server.hpp"
#include "wuw/train.hpp"
#include "wuw/transport.hpp"
#include "wuw/wire.hpp"

using namespace wuw;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

AudioClip random_clip(std::size_t n, Rng& rng, double amp = 1.0) {
  AudioClip c;
  c.samples.resize(n);
  for (auto& s : c.samples) s = static_cast<float>(rng.uniform(-amp, amp));
  return c;
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ------------------------------------------------------------------------ 1

Outcome feature_shapes() {
  const std::map<int, std::pair<std::size_t, std::size_t>> expected{
      {1, {29, 13}}, {2, {148, 40}}, {3, {71, 13}}, {4, {148, 13}}, {5, {149, 13}}};
  Rng rng(1);
  const auto clip = random_clip(24000, rng, 0.5);
  std::string got;
  bool ok = feature_grid().size() == expected.size();
  for (const auto& cfg : feature_grid()) {
    const auto m = features::mfcc(clip, cfg);
    const auto want = expected.at(cfg.config_id);
    ok &= m.n_frames == want.first && m.n_coeffs == want.second && m.values.size() == want.first * want.second;
    got += "(" + std::to_string(m.n_frames) + "," + std::to_string(m.n_coeffs) + ")";
  }
  return {ok, got};
}

// ------------------------------------------------------------------------ 2

Outcome snr_fidelity() {
  Rng rng(2);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const auto sig = random_clip(1000 + rng.below(30000), rng, rng.uniform(0.01, 1.0));
    const auto noise = random_clip(500 + rng.below(30000), rng, rng.uniform(0.01, 1.0));
    const double snr = audio::draw_snr(rng);
    const auto mix = audio::mix_components(sig, noise, snr);
    long double ps = 0, pn = 0;
    for (float s : sig.samples) ps += static_cast<long double>(s) * s;
    for (float s : mix.scaled_noise) pn += static_cast<long double>(s) * s;
    const double realized = static_cast<double>(10.0L * std::log10((ps / sig.size()) / (pn / mix.scaled_noise.size())));
    worst = std::max(worst, std::fabs(realized - snr));
  }
  return {worst <= 1e-6, fmt("max |realized - target| = %.3g dB over 200 triples", worst)};
}

// ------------------------------------------------------------------------ 3

Outcome dsp_oracles() {
  Rng rng(3);
  double spec_err = 0, conv_err = 0, parseval_err = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = std::size_t{1} << (4 + rng.below(6));  // 16 .. 512
    const auto frame = random_clip(1 + rng.below(n), rng);
    spec_err = std::max(spec_err, oracle::rel_error(features::power_spectrum(frame.samples, n),
                                                    oracle::naive_power(frame.samples, n)));
  }
  for (int t = 0; t < 5; ++t) {
    const auto clip = random_clip(4000 + rng.below(4000), rng);
    const auto rir = random_clip(512, rng);
    const auto fast = audio::convolve_rir(clip, rir);
    const auto ref = oracle::peak_normalized(oracle::direct_conv(clip.samples, rir.samples));
    for (std::size_t i = 0; i < ref.size(); ++i) conv_err = std::max(conv_err, std::fabs(fast.samples[i] - ref[i]));
  }
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(1 + rng.below(64));
    for (auto& v : x) v = rng.uniform(-10, 10);
    const auto y = features::dct_ortho(x);
    const double ex = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
    const double ey = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
    parseval_err = std::max(parseval_err, std::fabs(ex - ey) / ex);
  }
  const bool ok = spec_err <= 1e-4 && conv_err <= 1e-5 && parseval_err <= 1e-5;
  return {ok, fmt("spectrum rel %.2g, rir abs %.2g, parseval rel %.2g", spec_err, conv_err, parseval_err)};
}

// ------------------------------------------------------------------------ 4

std::vector<double> random_vec(std::size_t n, Rng& rng, double amp) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-amp, amp);
  return v;
}

// Worst relative error over 100 cases. Saturated draws (loss <= 1e-6, where
// the central difference is pure cancellation) and MLP draws within 1e-2 of
// a ReLU kink are redrawn.
double worst_gradient_error(const std::function<std::unique_ptr<Objective>(Rng&)>& make, bool mlp, Rng& rng) {
  double worst = 0;
  for (int checked = 0; checked < 100;) {
    const auto obj = make(rng);
    const auto params = random_vec(obj->n_params(), rng, 1.0);
    const auto x = random_vec(obj->input_dim(), rng, 3.0);
    if (mlp) {
      bool near_kink = false;
      for (double a : static_cast<const MlpObjective&>(*obj).pre_activations(params, x)) near_kink |= std::fabs(a) < 1e-2;
      if (near_kink) continue;
    }
    const Label y = rng.bernoulli(0.5) ? Label::pos : Label::neg;
    if (obj->loss(params, x, y) <= 1e-6) continue;
    std::vector<double> grad(obj->n_params(), 0.0);
    obj->loss_grad(params, x, y, grad);
    const auto fd = oracle::finite_diff([&](std::span<const double> p) { return obj->loss(p, x, y); }, params, 1e-4);
    worst = std::max(worst, oracle::rel_error(grad, fd));
    ++checked;
  }
  return worst;
}

Outcome gradient_checks() {
  Rng rng(4);
  const double lin = worst_gradient_error(
      [](Rng& r) { return std::make_unique<LinearObjective>(1 + r.below(20)); }, false, rng);
  const double mlp = worst_gradient_error(
      [](Rng& r) {
        const std::size_t n_in = 1 + r.below(6), hidden = 1 + r.below(16);
        return std::make_unique<MlpObjective>(n_in, hidden);
      },
      true, rng);
  return {lin <= 1e-4 && mlp <= 1e-4, fmt("linear worst rel %.2g, fusion mlp worst rel %.2g", lin, mlp)};
}

// ------------------------------------------------------------------------ 5

std::vector<int> labels_of(const fusion::LabeledLogOdds& d) {
  std::vector<int> y;
  for (auto l : d.labels) y.push_back(l == Label::pos);
  return y;
}

Outcome ensemble_property() {
  const std::vector<double> sigmas{1.5, 2.0, 2.5, 3.0};
  int strictly = 0;
  bool never_worse = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(500 + seed);
    const auto train = fusion::synth_score_task(sigmas, 20000, rng);
    const auto test = fusion::synth_score_task(sigmas, 5000, rng);
    TrainSpec spec;
    spec.seed = seed;
    const auto model = fusion::train_fusion(train, spec);
    const auto y = labels_of(test);
    double best = 0;
    for (std::size_t m = 0; m < sigmas.size(); ++m) {
      std::vector<double> s;
      for (const auto& z : test.inputs) s.push_back(z.values[m]);
      best = std::max(best, oracle::macro_f1(s, y));
    }
    std::vector<double> margins;
    for (const auto& z : test.inputs) margins.push_back(fusion::accept(model.fuse(z), 0.5) ? 1.0 : -1.0);
    const double fused = oracle::macro_f1(margins, y);
    never_worse &= fused >= best - 0.005;
    strictly += fused > best;
    detail += fmt("%.4f/%.4f ", fused, best);
  }
  return {never_worse && strictly >= 4, "fused/best per seed: " + detail + "(" + std::to_string(strictly) + "/5 strictly better)"};
}

// ------------------------------------------------------------------------ 6

struct Injection {
  std::size_t start = 0;  // first sample of the injected 1.5 s window
  std::size_t span_lo = 0, span_hi = 0;
};

Outcome protocol_frames(std::uint64_t key) {
  Rng rng(61);
  std::size_t ok = 0;
  for (int t = 0; t < 1000; ++t) {
    FeatureMatrix m;
    m.n_frames = 1 + rng.below(160);
    m.n_coeffs = 1 + rng.below(40);
    m.config_id = kCloudConfigId;
    for (std::size_t i = 0; i < m.n_frames * m.n_coeffs; ++i) m.values.push_back(static_cast<float>(rng.normal()));
    auto req = wire::make_request(m, static_cast<float>(rng.normal()), rng.next_u64());
    const auto plain = req;
    bool good = wire::decode_request(wire::encode_request(req)) == req;
    const auto once = wire::obfuscate(req.payload, key, req.nonce);
    good &= wire::obfuscate(once, key, req.nonce) == req.payload;
    wire::seal(req, key);
    auto back = wire::decode_request(wire::encode_request(req));
    wire::unseal(back, key);
    good &= back == plain && wire::request_features(back) == m;

    wire::VerifyResponse resp;
    resp.verdict = rng.bernoulli(0.5) ? wire::Verdict::accept : wire::Verdict::reject;
    resp.fused_p_pos = static_cast<float>(rng.uniform());
    for (std::size_t i = 0; i < rng.below(6); ++i) resp.member_log_odds.push_back(static_cast<float>(rng.normal()));
    good &= wire::decode_response(wire::encode_response(resp)) == resp;
    ok += good;
  }
  return {ok == 1000, std::to_string(ok) + "/1000 frames round-trip and unseal"};
}

Outcome end_to_end() {
  // Chirp keyword vs shaped-noise negatives.
  const auto sys = testing::train_system(7, false);
  const std::uint64_t key = 0x5eed5eedULL;

  // Keywords are 1.5 s windows of test wuw clips (short clips zero-padded
  // symmetrically, as extract_window does) mixed at 20 dB over the window
  // into a continuous bed of the test split's noise clips. The bed level
  // leaves the median keyword at its corpus amplitude.
  std::vector<const ManifestEntry*> wuw_entries;
  std::vector<float> bed;
  for (const auto& e : sys->corpus.entries) {
    if (e.split != Split::test) continue;
    if (e.label == ClipLabel::wuw) wuw_entries.push_back(&e);
    if (e.label == ClipLabel::noise) {
      const auto& c = sys->corpus.clips.at(e.path);
      bed.insert(bed.end(), c.samples.begin(), c.samples.end());
    }
  }
  constexpr std::size_t kWin = 24000;
  // Triggers run from the keyword entering the window to leaving it (~2 s)
  // plus the refractory, so spans must sit more than ~3.5 s apart.
  const std::size_t gap = 5 * kCanonicalRate, n_keywords = 20, lead = 2 * kCanonicalRate;

  Rng rng(62);
  std::vector<Injection> injections;
  std::vector<AudioClip> windows;
  std::vector<double> window_power;
  for (std::size_t k = 0; k < n_keywords; ++k) {
    const auto& e = *wuw_entries[k % wuw_entries.size()];
    AudioClip clip = sys->corpus.clips.at(e.path);
    std::size_t pad = 0;
    if (clip.size() < kWin) {
      pad = (kWin - clip.size()) / 2;
      clip.samples.insert(clip.samples.begin(), pad, 0.0f);
      clip.samples.resize(kWin, 0.0f);
    }
    const std::size_t lo = pad + static_cast<std::size_t>(std::llround(e.span->start_s * kCanonicalRate));
    const std::size_t hi = pad + static_cast<std::size_t>(std::llround(e.span->end_s * kCanonicalRate));
    const std::size_t latest = std::min(lo, clip.size() - kWin);
    const std::size_t earliest = hi > kWin ? hi - kWin : 0;
    const std::size_t from = earliest + rng.below(latest - earliest + 1);
    windows.push_back(AudioClip{std::vector<float>(clip.samples.begin() + from, clip.samples.begin() + from + kWin)});
    window_power.push_back(audio::measure_power(windows.back()));
    Injection inj;
    inj.start = lead + k * gap;
    inj.span_lo = inj.start + (lo - from);
    inj.span_hi = inj.start + (hi - from);
    injections.push_back(inj);
  }
  auto sorted_power = window_power;
  std::nth_element(sorted_power.begin(), sorted_power.begin() + n_keywords / 2, sorted_power.end());
  const double bed_gain = std::sqrt(sorted_power[n_keywords / 2] / 100.0 / audio::measure_power(bed));
  std::vector<float> stream(lead + n_keywords * gap + lead);
  for (std::size_t i = 0; i < stream.size(); ++i) stream[i] = static_cast<float>(bed_gain * bed[i % bed.size()]);
  for (std::size_t k = 0; k < n_keywords; ++k) {
    const auto at = injections[k].start;
    const double pn = audio::measure_power(std::span<const float>(stream).subspan(at, kWin));
    const double g = std::sqrt(pn * 100.0 / window_power[k]);
    for (std::size_t i = 0; i < kWin; ++i) stream[at + i] += static_cast<float>(g * windows[k].samples[i]);
  }

  auto service = std::make_shared<const VerificationService>(sys->members, sys->fusion, 0.5, key);
  // Independent instance for the offline comparison.
  const VerificationService offline(sys->members, sys->fusion, 0.5, key);
  VerificationServer server(service, transport::TcpListener("127.0.0.1", 0));
  server.start();
  auto conn = transport::connect_tcp("127.0.0.1", server.port());
  VerifyClient client(conn);

  AgentConfig cfg;
  cfg.key = key;
  cfg.nonce_seed = 63;
  DeviceAgent agent(sys->device, cfg);
  std::vector<std::size_t> accepted_per_keyword(n_keywords, 0);
  std::size_t events = 0, accepted = 0, false_accepts = 0, identical = 0;
  for (std::size_t pos = 0; pos < stream.size();) {
    const std::size_t n = std::min<std::size_t>(160 + rng.below(3200), stream.size() - pos);
    for (const auto& d : agent.push(std::span<const float>(stream).subspan(pos, n))) {
      ++events;
      const auto frame = wire::encode_request(d.request);
      const auto resp = client.verify(d.request);
      bool ok_offline = false;
      const auto expect = offline.handle_frame(frame, &ok_offline);
      // Recompute from scratch: unseal, score members, stack, fuse.
      auto plain = wire::decode_request(frame);
      wire::unseal(plain, key);
      const auto feats = wire::request_features(plain);
      std::vector<ScorePair> scores;
      for (const auto& m : sys->members) scores.push_back(m->score(feats));
      auto z = fusion::stack_scores(scores, {sys->members[0]->id(), sys->members[1]->id()});
      z.values.insert(z.values.begin(), d.event.device_log_odds);
      z.member_ids.insert(z.member_ids.begin(), "device");
      const float p = static_cast<float>(softmax2(sys->fusion.fuse(z)).p_pos);
      identical += ok_offline && wire::encode_response(resp) == expect &&
                   std::memcmp(&p, &resp.fused_p_pos, sizeof p) == 0 && resp.status == wire::Status::ok;
      if (resp.verdict != wire::Verdict::accept) continue;
      ++accepted;
      const std::size_t w0 = d.event.window_start_sample, w1 = w0 + 24000;
      bool hit = false;
      for (std::size_t k = 0; k < n_keywords; ++k)
        if (w0 < injections[k].span_hi && w1 > injections[k].span_lo) {
          ++accepted_per_keyword[k];
          hit = true;
        }
      false_accepts += !hit;
    }
    pos += n;
  }
  server.stop();
  const auto single = static_cast<std::size_t>(std::count(accepted_per_keyword.begin(), accepted_per_keyword.end(), 1));
  const auto frames = protocol_frames(key);
  const bool a = events > 0 && identical == events;
  const bool b = single * 100 >= 95 * n_keywords;
  std::string detail = "(a) " + std::to_string(identical) + "/" + std::to_string(events) + " verdicts identical offline; (b) " +
                       std::to_string(single) + "/" + std::to_string(n_keywords) + " keywords with exactly one accepted event (" +
                       std::to_string(accepted) + " accepted, " + std::to_string(false_accepts) + " outside keywords); (c) " +
                       frames.detail;
  return {a && b && frames.pass, detail};
}

// ------------------------------------------------------------------------ 7

Outcome sgru_params() {
  constexpr std::size_t closed = nn::gru_scorer_params(13, {2, 128});
  static_assert(closed == 154242);
  const auto ws = nn::make_gru_scorer(FeatureConfig::device(), {2, 128}, 0);
  const std::size_t counted = param_count(ws);
  const double vs_table = static_cast<double>(counted) / 145600.0 - 1.0;
  return {counted == 154242 && closed == 154242 && std::fabs(vs_table) < 0.06,
          "closed form " + std::to_string(closed) + ", param_count " + std::to_string(counted) +
              fmt(", %+.2f%% vs the reported 145.6k", 100.0 * vs_table)};
}

// ------------------------------------------------------------------------ 8

Outcome rtf_sanity() {
  const StoreScorer sgru(nn::make_gru_scorer(FeatureConfig::device(), {}, 8));
  Rng rng(8);
  const auto clip = random_clip(24000, rng, 0.5);
  const auto cfg = FeatureConfig::device();
  const auto s = bench_rtf([&] { (void)sgru.score(features::mfcc(clip, cfg, Exec::serial)); }, 30);
  return {s.median_rtf < 0.1, fmt("median %.3f ms (RTF %.4f), p95 %.3f ms", s.median_ms, s.median_rtf, s.p95_ms)};
}

// ------------------------------------------------------------------------ 9

Outcome determinism() {
  synth::CorpusSpec cs;
  cs.n_train = 120;
  cs.n_valid = 40;
  cs.n_test = 40;
  cs.seed = 9;
  const auto corpus = synth::make_corpus(cs);
  const auto w1 = testing::train_scorer(corpus, FeatureConfig::device(), "device", 90);
  const auto w2 = testing::train_scorer(corpus, FeatureConfig::device(), "device", 90);
  const auto& s1 = static_cast<const StoreScorer&>(*w1).weights();
  const auto& s2 = static_cast<const StoreScorer&>(*w2).weights();
  const bool weights_same = encode_weights(s1) == encode_weights(s2);

  const SnrBuckets buckets;
  auto report = [&](std::shared_ptr<const Scorer> sc) {
    const auto samples = build_eval_set(corpus.entries, corpus.source(), buckets, 91);
    return evaluate(samples, ScorerPipeline(sc), 0.5, buckets).to_json().dump();
  };
  const bool reports_same = report(w1) == report(std::make_shared<StoreScorer>(s2));
  return {weights_same && reports_same, std::string("weights ") + (weights_same ? "identical" : "differ") +
                                            ", reports " + (reports_same ? "identical" : "differ")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "feature shapes", 1, feature_shapes},
      {2, "snr fidelity", 5, snr_fidelity},
      {3, "dsp oracles", 10, dsp_oracles},
      {4, "gradient checks", 10, gradient_checks},
      {5, "ensemble beats best member", 120, ensemble_property},
      {6, "end-to-end pipeline", 300, end_to_end},
      {7, "sgru parameter count", 1, sgru_params},
      {8, "rtf sanity", 30, rtf_sanity},
      {9, "determinism", 120, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && took <= c.limit_s;
    failed += !pass;
    std::printf("criterion %d %-28s %s  %s [%.2f s, limit %.0f s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), took, c.limit_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
