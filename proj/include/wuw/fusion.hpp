#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wuw/nninf.hpp"
#include "wuw/train.hpp"

namespace wuw {

// One log-odds per ensemble member, in contractual member order.
struct LogOddsVector {
  std::vector<float> values;
  std::vector<std::string> member_ids;
};

namespace fusion {

inline constexpr double kProbClamp = 1e-7;
inline constexpr std::size_t kDefaultHidden = 16;

// ln(p_pos / p_neg) after clamping both to [1e-7, 1 - 1e-7].
double log_odds(double p_pos, double p_neg);
inline double log_odds(const ScorePair& s) {
  const auto p = softmax2(s);
  return log_odds(p.p_pos, p.p_neg);
}

// softmax2 -> log_odds per member. `scores` must follow `member_ids`.
LogOddsVector stack_scores(const std::vector<ScorePair>& scores, const std::vector<std::string>& member_ids);

}  // namespace fusion

// FC(N -> hidden) -> ReLU -> FC(hidden -> 2) over member log-odds.
class FusionModel {
 public:
  FusionModel() = default;
  explicit FusionModel(WeightStore ws);

  static FusionModel zeros(const std::vector<std::string>& member_ids, std::size_t hidden = fusion::kDefaultHidden);
  static FusionModel from_params(const std::vector<std::string>& member_ids, std::size_t hidden,
                                 std::span<const double> params);

  const std::vector<std::string>& member_ids() const { return member_ids_; }
  std::size_t n_inputs() const { return member_ids_.size(); }
  std::size_t hidden() const { return hidden_; }
  const WeightStore& weights() const { return ws_; }
  WeightStore& weights() { return ws_; }

  // Throws member_mismatch unless z.member_ids equals member_ids().
  ScorePair fuse(const LogOddsVector& z) const;

 private:
  WeightStore ws_;
  std::vector<std::string> member_ids_;
  std::size_t hidden_ = 0;
};

namespace fusion {

inline ScorePair fuse(const LogOddsVector& z, const FusionModel& model) { return model.fuse(z); }

// accept iff p_pos >= theta, with p_pos rounded to the float32 that the
// wire response carries, so the verdict and reported probability agree.
inline bool accept(const ScorePair& fused, double theta) {
  return static_cast<float>(softmax2(fused).p_pos) >= theta;
}

struct LabeledLogOdds {
  std::vector<LogOddsVector> inputs;
  std::vector<Label> labels;
  std::size_t size() const { return labels.size(); }
};

Dataset to_dataset(const LabeledLogOdds& data);

// Stacking meta-classifier trained with the shared Adam/plateau machinery.
FusionModel train_fusion(const LabeledLogOdds& train, const LabeledLogOdds& valid, const TrainSpec& spec,
                         std::size_t hidden = kDefaultHidden, TrainResult* result = nullptr);

// Deterministic split: the last `valid_fraction` of the examples validate.
FusionModel train_fusion(const LabeledLogOdds& data, const TrainSpec& spec, double valid_fraction = 0.2,
                         std::size_t hidden = kDefaultHidden);

// Synthetic ensemble scores: labels ~ Bernoulli(0.5); member i emits
// mu * (+-1) + N(0, sigma_i^2). Member ids are "m0", "m1", ...
LabeledLogOdds synth_score_task(const std::vector<double>& sigmas, std::size_t n_samples, Rng& rng,
                                double mu = 1.0);

}  // namespace fusion
}  // namespace wuw
