#include "wuw/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "wuw/error.hpp"
#include "wuw/wire.hpp"

namespace wuw {

double f1_score(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

ScorerPipeline::ScorerPipeline(std::shared_ptr<const Scorer> scorer)
    : scorer_(std::move(scorer)), config_(config_by_id(scorer_->config_id())) {}

ScorePair ScorerPipeline::scores(const AudioClip& window) const {
  return scorer_->score(features::mfcc(window, config_, Exec::serial));
}

double ScorerPipeline::p_pos(const AudioClip& window) const { return softmax2(scores(window)).p_pos; }

EnsemblePipeline::EnsemblePipeline(std::shared_ptr<const Scorer> device,
                                   std::vector<std::shared_ptr<const Scorer>> members, FusionModel fusion)
    : device_(std::move(device)), members_(std::move(members)), fusion_(std::move(fusion)) {
  if (fusion_.n_inputs() != members_.size() + 1)
    throw Error(Errc::member_mismatch, "fusion inputs != device + members");
  ids_ = fusion_.member_ids();
}

LogOddsVector EnsemblePipeline::log_odds(const AudioClip& window) const {
  LogOddsVector z;
  z.member_ids = ids_;
  const auto dev = device_->score(features::mfcc(window, config_by_id(device_->config_id()), Exec::serial));
  z.values.push_back(static_cast<float>(fusion::log_odds(dev)));
  if (!members_.empty()) {
    const auto cloud = features::mfcc(window, FeatureConfig::cloud(), Exec::serial);
    for (const auto& m : members_) z.values.push_back(static_cast<float>(fusion::log_odds(m->score(cloud))));
  }
  return z;
}

double EnsemblePipeline::p_pos(const AudioClip& window) const {
  return softmax2(fusion_.fuse(log_odds(window))).p_pos;
}

void SnrBuckets::validate() const {
  if (edges.size() < 2) throw Error(Errc::invalid_argument, "need at least two bucket edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw Error(Errc::invalid_argument, "bucket edges must increase");
}

SnrBuckets SnrBuckets::parse(const std::string& text) {
  SnrBuckets b;
  if (text.find(',') == std::string::npos) {
    const long n = std::stol(text);
    if (n < 1) throw Error(Errc::invalid_argument, "bucket count must be >= 1");
    b.edges.clear();
    for (long i = 0; i <= n; ++i)
      b.edges.push_back(audio::kSnrMinDb + (audio::kSnrMaxDb - audio::kSnrMinDb) * static_cast<double>(i) / n);
  } else {
    b.edges.clear();
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) b.edges.push_back(std::stod(tok));
  }
  b.validate();
  return b;
}

std::vector<EvalSample> build_eval_set(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                       const SnrBuckets& buckets, std::uint64_t seed, Split split, double window_s) {
  buckets.validate();
  Rng rng(seed);
  std::vector<EvalSample> out;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    AugmentSpec spec;
    spec.window_s = window_s;
    spec.snr_lo_db = buckets.edges[b];
    spec.snr_hi_db = buckets.edges[b + 1];
    for (auto& w : augment_split(entries, source, split, spec, rng))
      out.push_back({std::move(w.window), w.label == Label::pos, b, w.snr_db});
  }
  return out;
}

std::vector<double> score_samples(const std::vector<EvalSample>& samples, const Pipeline& pipeline, Exec exec) {
  std::vector<double> scores(samples.size());
#pragma omp parallel for schedule(dynamic, 4) if (exec == Exec::parallel)
  for (std::size_t i = 0; i < samples.size(); ++i) scores[i] = pipeline.p_pos(samples[i].window);
  return scores;
}

EvalReport report_from_scores(const std::vector<EvalSample>& samples, const std::vector<double>& scores,
                              double theta, const SnrBuckets& buckets) {
  buckets.validate();
  EvalReport r;
  r.theta = theta;
  r.buckets.resize(buckets.size());
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    r.buckets[b].snr_lo = buckets.edges[b];
    r.buckets[b].snr_hi = buckets.edges[b + 1];
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& bucket = r.buckets.at(samples[i].bucket);
    bucket.present = true;
    const bool accepted = scores[i] >= theta;
    if (samples[i].positive) {
      (accepted ? bucket.tp : bucket.fn)++;
    } else {
      (accepted ? bucket.fp : bucket.tn)++;
    }
  }
  for (auto& b : r.buckets) {
    b.f1 = f1_score(b.tp, b.fp, b.fn);
    r.tp += b.tp;
    r.fp += b.fp;
    r.fn += b.fn;
    r.tn += b.tn;
  }
  r.f1 = f1_score(r.tp, r.fp, r.fn);
  return r;
}

EvalReport evaluate(const std::vector<EvalSample>& samples, const Pipeline& pipeline, double theta,
                    const SnrBuckets& buckets, Exec exec) {
  return report_from_scores(samples, score_samples(samples, pipeline, exec), theta, buckets);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["theta"] = theta;
  j["f1"] = f1;
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  j["tn"] = tn;
  j["buckets"] = nlohmann::ordered_json::array();
  for (const auto& b : buckets) {
    nlohmann::ordered_json o;
    o["snr_lo"] = b.snr_lo;
    o["snr_hi"] = b.snr_hi;
    o["present"] = b.present;
    o["tp"] = b.tp;
    o["fp"] = b.fp;
    o["fn"] = b.fn;
    o["tn"] = b.tn;
    o["f1"] = b.present ? nlohmann::ordered_json(b.f1) : nlohmann::ordered_json(nullptr);
    j["buckets"].push_back(o);
  }
  return nlohmann::json::parse(j.dump());
}

std::string EvalReport::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %6s %6s %6s %6s %8s\n", "snr_db", "tp", "fp", "fn", "tn", "f1");
  out += line;
  for (const auto& b : buckets) {
    char range[32];
    std::snprintf(range, sizeof range, "[%g, %g%c", b.snr_lo, b.snr_hi, &b == &buckets.back() ? ']' : ')');
    if (b.present) {
      std::snprintf(line, sizeof line, "%-16s %6llu %6llu %6llu %6llu %8.4f\n", range,
                    static_cast<unsigned long long>(b.tp), static_cast<unsigned long long>(b.fp),
                    static_cast<unsigned long long>(b.fn), static_cast<unsigned long long>(b.tn), b.f1);
    } else {
      std::snprintf(line, sizeof line, "%-16s %6s %6s %6s %6s %8s\n", range, "-", "-", "-", "-", "absent");
    }
    out += line;
  }
  std::snprintf(line, sizeof line, "%-16s %6llu %6llu %6llu %6llu %8.4f\n", "overall",
                static_cast<unsigned long long>(tp), static_cast<unsigned long long>(fp),
                static_cast<unsigned long long>(fn), static_cast<unsigned long long>(tn), f1);
  out += line;
  return out;
}

std::vector<SweepRow> sweep_scores(const std::vector<double>& scores, const std::vector<bool>& positive,
                                   const std::vector<double>& grid) {
  if (grid.empty()) throw Error(Errc::invalid_argument, "threshold grid is empty");
  if (scores.size() != positive.size()) throw Error(Errc::shape_mismatch, "scores vs labels");
  std::vector<SweepRow> rows;
  std::size_t best = 0;
  for (double theta : grid) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool accepted = scores[i] >= theta;
      if (positive[i]) {
        (accepted ? tp : fn)++;
      } else if (accepted) {
        ++fp;
      }
    }
    SweepRow row;
    row.theta = theta;
    row.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    row.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    row.f1 = f1_score(tp, fp, fn);
    if (rows.empty() || row.f1 > rows[best].f1) best = rows.size();
    rows.push_back(row);
  }
  rows[best].best = true;
  return rows;
}

std::vector<SweepRow> threshold_sweep(const std::vector<EvalSample>& samples, const Pipeline& pipeline,
                                      const std::vector<double>& grid, Exec exec) {
  if (grid.empty()) throw Error(Errc::invalid_argument, "threshold grid is empty");
  std::vector<bool> positive;
  positive.reserve(samples.size());
  for (const auto& s : samples) positive.push_back(s.positive);
  return sweep_scores(score_samples(samples, pipeline, exec), positive, grid);
}

namespace {

std::vector<std::string> stacked_ids(const Scorer& device, const std::vector<std::shared_ptr<const Scorer>>& members) {
  std::vector<std::string> ids{device.id()};
  for (const auto& m : members) ids.push_back(m->id());
  return ids;
}

}  // namespace

fusion::LabeledLogOdds streamed_fusion_examples(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                                Split split, const std::shared_ptr<const Scorer>& device,
                                                const std::vector<std::shared_ptr<const Scorer>>& members,
                                                AgentConfig agent, const AugmentSpec& spec, Rng& rng,
                                                double lead_s) {
  std::vector<const ManifestEntry*> noises, rirs;
  for (const auto& e : entries) {
    if (e.label == ClipLabel::noise && e.split == split) noises.push_back(&e);
    if (e.label == ClipLabel::rir) rirs.push_back(&e);
  }
  if (noises.empty()) throw Error(Errc::manifest_error, "streamed fusion examples need a noise entry in the split");
  agent.key.reset();
  const auto ids = stacked_ids(*device, members);

  fusion::LabeledLogOdds out;
  for (const auto& e : entries) {
    if (e.split != split || e.label == ClipLabel::rir) continue;
    const AudioClip clip = source(e.path);
    AudioClip window = audio::extract_window(clip, spec.window_s, e.label == ClipLabel::wuw ? e.span : std::nullopt, rng);
    if (e.label != ClipLabel::noise && !rirs.empty() && rng.uniform() < spec.rir_probability)
      window = audio::convolve_rir(window, source(rirs[rng.below(rirs.size())]->path));
    const auto lead = static_cast<std::size_t>(std::llround(lead_s * clip.sample_rate_hz));
    const auto tail = static_cast<std::size_t>(clip.sample_rate_hz / 2);
    AudioClip stream;
    stream.sample_rate_hz = clip.sample_rate_hz;
    stream.samples.assign(lead, 0.0f);
    stream.samples.insert(stream.samples.end(), window.samples.begin(), window.samples.end());
    stream.samples.resize(stream.samples.size() + tail, 0.0f);

    const AudioClip noise = audio::extract_window(source(noises[rng.below(noises.size())]->path),
                                                  stream.duration_s(), std::nullopt, rng);
    const double snr = rng.uniform(spec.snr_lo_db, spec.snr_hi_db);
    const double p_sig = audio::measure_power(window), p_noise = audio::measure_power(noise);
    const double gain = p_sig > 0 && p_noise > 0 ? std::sqrt(p_sig / (p_noise * std::pow(10.0, snr / 10.0))) : 1.0;
    for (std::size_t i = 0; i < stream.size(); ++i)
      stream.samples[i] += static_cast<float>(gain * noise.samples[i % noise.size()]);

    DeviceAgent det(device, agent);
    for (const auto& d : det.push(stream.samples)) {
      const auto feats = wire::request_features(d.request);
      LogOddsVector z;
      z.member_ids = ids;
      z.values.push_back(d.request.device_log_odds);
      for (const auto& m : members) z.values.push_back(static_cast<float>(fusion::log_odds(m->score(feats))));
      out.inputs.push_back(std::move(z));
      out.labels.push_back(e.label == ClipLabel::wuw ? Label::pos : Label::neg);
    }
  }
  return out;
}

fusion::LabeledLogOdds fusion_training_set(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                           Split split, const std::shared_ptr<const Scorer>& device,
                                           const std::vector<std::shared_ptr<const Scorer>>& members,
                                           const AgentConfig& agent, int repetitions, Rng& rng) {
  const EnsemblePipeline probe(device, members, FusionModel::zeros(stacked_ids(*device, members)));
  fusion::LabeledLogOdds data;
  for (int rep = 0; rep < repetitions; ++rep) {
    for (const auto& w : augment_split(entries, source, split, AugmentSpec{}, rng)) {
      data.inputs.push_back(probe.log_odds(w.window));
      data.labels.push_back(w.label);
    }
    auto streamed = streamed_fusion_examples(entries, source, split, device, members, agent, AugmentSpec{}, rng);
    for (std::size_t i = 0; i < streamed.size(); ++i) {
      data.inputs.push_back(std::move(streamed.inputs[i]));
      data.labels.push_back(streamed.labels[i]);
    }
  }
  // Fisher-Yates with the library RNG so the order is the same everywhere.
  for (std::size_t i = data.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(data.inputs[i - 1], data.inputs[j]);
    std::swap(data.labels[i - 1], data.labels[j]);
  }
  return data;
}

RtfStats bench_rtf(const std::function<void()>& work, std::size_t n_runs, double audio_s) {
  if (n_runs < 10) throw Error(Errc::invalid_argument, "bench_rtf needs at least 10 runs");
  for (int i = 0; i < 3; ++i) work();
  std::vector<double> ms(n_runs);
  for (auto& t : ms) {
    const auto t0 = std::chrono::steady_clock::now();
    work();
    t = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  std::sort(ms.begin(), ms.end());
  RtfStats s;
  s.runs = n_runs;
  s.median_ms = n_runs % 2 ? ms[n_runs / 2] : 0.5 * (ms[n_runs / 2 - 1] + ms[n_runs / 2]);
  s.p95_ms = ms[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n_runs))) - 1];
  s.median_rtf = s.median_ms / (1000.0 * audio_s);
  s.p95_rtf = s.p95_ms / (1000.0 * audio_s);
  return s;
}

}  // namespace wuw
