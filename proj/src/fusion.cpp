#include "wuw/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "wuw/error.hpp"
#include "wuw/kernels.hpp"

namespace wuw {
namespace fusion {

double log_odds(double p_pos, double p_neg) {
  const double hi = 1.0 - kProbClamp;
  p_pos = std::clamp(p_pos, kProbClamp, hi);
  p_neg = std::clamp(p_neg, kProbClamp, hi);
  return std::log(p_pos / p_neg);
}

LogOddsVector stack_scores(const std::vector<ScorePair>& scores, const std::vector<std::string>& member_ids) {
  if (scores.size() != member_ids.size() || scores.empty())
    throw Error(Errc::member_mismatch, std::to_string(scores.size()) + " scores for " +
                                           std::to_string(member_ids.size()) + " members");
  LogOddsVector z;
  z.member_ids = member_ids;
  z.values.reserve(scores.size());
  for (const auto& s : scores) z.values.push_back(static_cast<float>(log_odds(s)));
  return z;
}

}  // namespace fusion

FusionModel::FusionModel(WeightStore ws) : ws_(std::move(ws)) {
  validate_store(ws_);
  if (ws_.kind() != kKindFusion) throw Error(Errc::inconsistent_metadata, "not a fusion model: " + ws_.kind());
  member_ids_ = ws_.metadata["member_ids"].get<std::vector<std::string>>();
  hidden_ = ws_.metadata["hyper"]["hidden"].get<std::size_t>();
}

FusionModel FusionModel::zeros(const std::vector<std::string>& member_ids, std::size_t hidden) {
  const std::size_t n = member_ids.size();
  WeightStore ws;
  ws.metadata = {{"kind", kKindFusion}, {"member_ids", member_ids}, {"hyper", {{"hidden", hidden}}}};
  ws.add("fc1.weight", Tensor({hidden, n}));
  ws.add("fc1.bias", Tensor({hidden}));
  ws.add("fc2.weight", Tensor({2, hidden}));
  ws.add("fc2.bias", Tensor({2}));
  return FusionModel(std::move(ws));
}

FusionModel FusionModel::from_params(const std::vector<std::string>& member_ids, std::size_t hidden,
                                     std::span<const double> params) {
  FusionModel m = zeros(member_ids, hidden);
  std::size_t off = 0;
  for (const char* name : {"fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"}) {
    auto& data = m.ws_.get(name).data;
    if (off + data.size() > params.size()) throw Error(Errc::shape_mismatch, "fusion parameter vector too short");
    for (float& v : data) v = static_cast<float>(params[off++]);
  }
  if (off != params.size()) throw Error(Errc::shape_mismatch, "fusion parameter vector too long");
  return m;
}

ScorePair FusionModel::fuse(const LogOddsVector& z) const {
  if (z.member_ids != member_ids_ || z.values.size() != member_ids_.size())
    throw Error(Errc::member_mismatch, "log-odds members do not match the fusion model");
  std::vector<float> h(hidden_);
  kernels::matvec(ws_.get("fc1.weight").data, z.values, ws_.get("fc1.bias").data, h, Exec::serial);
  for (float& v : h) v = std::max(v, 0.0f);
  std::array<float, 2> out{};
  kernels::matvec(ws_.get("fc2.weight").data, h, ws_.get("fc2.bias").data, out, Exec::serial);
  return {out[0], out[1]};
}

namespace fusion {

Dataset to_dataset(const LabeledLogOdds& data) {
  Dataset d;
  if (data.inputs.empty()) return d;
  d.dim = data.inputs.front().values.size();
  std::vector<double> row(d.dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& v = data.inputs[i].values;
    if (v.size() != d.dim) throw Error(Errc::shape_mismatch, "log-odds vectors differ in width");
    std::copy(v.begin(), v.end(), row.begin());
    d.push(row, data.labels[i]);
  }
  return d;
}

FusionModel train_fusion(const LabeledLogOdds& train, const LabeledLogOdds& valid, const TrainSpec& spec,
                         std::size_t hidden, TrainResult* result) {
  if (train.size() == 0 || valid.size() == 0) throw Error(Errc::invalid_argument, "empty fusion training data");
  const auto& ids = train.inputs.front().member_ids;
  for (const auto* split : {&train, &valid})
    for (const auto& z : split->inputs)
      if (z.member_ids != ids) throw Error(Errc::member_mismatch, "mixed member orders in fusion data");
  const Dataset dtrain = to_dataset(train), dvalid = to_dataset(valid);
  if (!dtrain.has_both_classes()) throw Error(Errc::single_class, "fusion training data holds a single class");
  const MlpObjective objective(ids.size(), hidden);
  TrainResult res = train_adam(objective, dtrain, dvalid, spec);
  FusionModel model = FusionModel::from_params(ids, hidden, res.params);
  model.weights().metadata["train"] = {{"epochs", res.epochs_run},
                                       {"lr_reductions", res.lr_reductions},
                                       {"best_valid_loss", res.best_valid_loss},
                                       {"seed", spec.seed}};
  if (result) *result = std::move(res);
  return model;
}

FusionModel train_fusion(const LabeledLogOdds& data, const TrainSpec& spec, double valid_fraction,
                         std::size_t hidden) {
  const std::size_t n = data.size();
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * valid_fraction));
  if (n_valid == 0 || n_valid >= n) throw Error(Errc::invalid_argument, "validation split leaves an empty side");
  LabeledLogOdds train, valid;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n - n_valid ? train : valid;
    dst.inputs.push_back(data.inputs[i]);
    dst.labels.push_back(data.labels[i]);
  }
  return train_fusion(train, valid, spec, hidden);
}

LabeledLogOdds synth_score_task(const std::vector<double>& sigmas, std::size_t n_samples, Rng& rng, double mu) {
  if (sigmas.empty()) throw Error(Errc::invalid_argument, "synth_score_task needs at least one member");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < sigmas.size(); ++i) ids.push_back("m" + std::to_string(i));
  LabeledLogOdds out;
  out.inputs.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Label label = rng.bernoulli(0.5) ? Label::pos : Label::neg;
    const double sign = label == Label::pos ? 1.0 : -1.0;
    LogOddsVector z;
    z.member_ids = ids;
    for (double sigma : sigmas) z.values.push_back(static_cast<float>(mu * sign + sigma * rng.normal()));
    out.inputs.push_back(std::move(z));
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace fusion
}  // namespace wuw
