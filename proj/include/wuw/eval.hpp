#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wuw/agent.hpp"
#include "wuw/audio.hpp"
#include "wuw/corpus.hpp"
#include "wuw/exec.hpp"
#include "wuw/features.hpp"
#include "wuw/fusion.hpp"
#include "wuw/manifest.hpp"
#include "wuw/nninf.hpp"

namespace wuw {

// 2 tp / (2 tp + fp + fn), 0 when the denominator is 0.
double f1_score(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

// Maps a raw 1.5 s window to p(wake word). Implementations are thread-safe.
class Pipeline {
 public:
  virtual ~Pipeline() = default;
  virtual double p_pos(const AudioClip& window) const = 0;
};

// features(config) -> scorer -> softmax2.
class ScorerPipeline final : public Pipeline {
 public:
  explicit ScorerPipeline(std::shared_ptr<const Scorer> scorer);
  double p_pos(const AudioClip& window) const override;
  ScorePair scores(const AudioClip& window) const;

 private:
  std::shared_ptr<const Scorer> scorer_;
  FeatureConfig config_;
};

// Device scorer on DEVICE features plus server members on CLOUD features,
// stacked (device first) and fused.
class EnsemblePipeline final : public Pipeline {
 public:
  EnsemblePipeline(std::shared_ptr<const Scorer> device, std::vector<std::shared_ptr<const Scorer>> members,
                   FusionModel fusion);
  double p_pos(const AudioClip& window) const override;
  LogOddsVector log_odds(const AudioClip& window) const;

 private:
  std::shared_ptr<const Scorer> device_;
  std::vector<std::shared_ptr<const Scorer>> members_;
  FusionModel fusion_;
  std::vector<std::string> ids_;
};

// Partition [edges.front(), edges.back()] into consecutive buckets; the last
// bucket is closed on the right.
struct SnrBuckets {
  std::vector<double> edges{-10, 0, 10, 20, 30, 40, 50};
  std::size_t size() const { return edges.size() - 1; }
  void validate() const;
  // Parses "a,b,c,..." edges or a bucket count ("6" -> equal split of [-10, 50]).
  static SnrBuckets parse(const std::string& text);
};

struct EvalSample {
  AudioClip window;
  bool positive = false;
  std::size_t bucket = 0;
  double snr_db = 0.0;
};

// Every wuw/other/noise entry of `split` is windowed and mixed once per
// bucket at an SNR drawn uniformly inside the bucket.
std::vector<EvalSample> build_eval_set(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                       const SnrBuckets& buckets, std::uint64_t seed, Split split = Split::test,
                                       double window_s = 1.5);

struct BucketReport {
  double snr_lo = 0, snr_hi = 0;
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double f1 = 0;
  bool present = false;  // false when the bucket received no samples
};

struct EvalReport {
  std::vector<BucketReport> buckets;
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double f1 = 0;
  double theta = 0.5;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

std::vector<double> score_samples(const std::vector<EvalSample>& samples, const Pipeline& pipeline,
                                  Exec exec = Exec::parallel);

// Accept iff p_pos >= theta. Counts are reduced per bucket in sample order.
EvalReport evaluate(const std::vector<EvalSample>& samples, const Pipeline& pipeline, double theta,
                    const SnrBuckets& buckets, Exec exec = Exec::parallel);
EvalReport report_from_scores(const std::vector<EvalSample>& samples, const std::vector<double>& scores,
                              double theta, const SnrBuckets& buckets);

struct SweepRow {
  double theta = 0, precision = 0, recall = 0, f1 = 0;
  bool best = false;
};

// Scores once, then computes metrics per threshold; the F1-maximizing row is
// flagged (first on ties). Precision is 1 when nothing is accepted.
std::vector<SweepRow> sweep_scores(const std::vector<double>& scores, const std::vector<bool>& positive,
                                   const std::vector<double>& grid);
std::vector<SweepRow> threshold_sweep(const std::vector<EvalSample>& samples, const Pipeline& pipeline,
                                      const std::vector<double>& grid, Exec exec = Exec::parallel);

// Fusion examples in the form the server receives them: each wuw/other/noise
// entry of `split` is windowed as in augment_split, given lead_s of leading
// and 0.5 s of trailing context, mixed with one noise clip at a uniform SNR
// (measured over the window) and streamed through a fresh DeviceAgent. Each
// triggered request yields one example: its device log-odds stacked with the
// members' log-odds of its CLOUD features. The agent config's key is ignored.
fusion::LabeledLogOdds streamed_fusion_examples(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                                Split split, const std::shared_ptr<const Scorer>& device,
                                                const std::vector<std::shared_ptr<const Scorer>>& members,
                                                AgentConfig agent, const AugmentSpec& spec, Rng& rng,
                                                double lead_s = 1.5);

// Stacking data for train_fusion: `repetitions` rounds of augmented whole
// windows plus streamed trigger windows from `split`, shuffled.
fusion::LabeledLogOdds fusion_training_set(const std::vector<ManifestEntry>& entries, const AudioSource& source,
                                           Split split, const std::shared_ptr<const Scorer>& device,
                                           const std::vector<std::shared_ptr<const Scorer>>& members,
                                           const AgentConfig& agent, int repetitions, Rng& rng);

struct RtfStats {
  double median_ms = 0, p95_ms = 0;
  double median_rtf = 0, p95_rtf = 0;
  std::size_t runs = 0;
};

// Times `work` n_runs times after 3 warm-ups; RTF = wall time / audio_s.
// Throws invalid_argument when n_runs < 10.
RtfStats bench_rtf(const std::function<void()>& work, std::size_t n_runs, double audio_s = 1.5);

}  // namespace wuw
