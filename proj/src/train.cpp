#include "wuw/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wuw/error.hpp"
#include "wuw/kernels.hpp"

namespace wuw {

void TrainSpec::validate() const {
  if (batch_size == 0 || !(lr0 > 0) || !(lr_decay_factor > 0) || plateau_patience == 0 ||
      max_lr_reductions_without_improvement == 0)
    throw Error(Errc::invalid_argument, "train spec values must be positive");
}

void Dataset::push(std::span<const double> features, Label label) {
  if (dim == 0 && y.empty()) dim = features.size();
  if (features.size() != dim) throw Error(Errc::shape_mismatch, "dataset row width");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(label);
}

bool Dataset::has_both_classes() const {
  const bool pos = std::find(y.begin(), y.end(), Label::pos) != y.end();
  const bool neg = std::find(y.begin(), y.end(), Label::neg) != y.end();
  return pos && neg;
}

double Objective::loss(std::span<const double> params, std::span<const double> x, Label y) const {
  double out[2];
  logits(params, x, out);
  return cross_entropy(out[0], out[1], y).loss;
}

namespace {

std::vector<double> uniform_block(Rng& rng, std::size_t n, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::vector<double> v(n);
  for (double& e : v) e = rng.uniform(-bound, bound);
  return v;
}

}  // namespace

void LinearObjective::logits(std::span<const double> params, std::span<const double> x, double out[2]) const {
  kernels::matvec(params.first(2 * dim_), x, params.subspan(2 * dim_, 2), std::span<double>(out, 2), Exec::serial);
}

double LinearObjective::loss_grad(std::span<const double> params, std::span<const double> x, Label y,
                                  std::span<double> grad) const {
  double z[2];
  logits(params, x, z);
  const LossGrad lg = cross_entropy(z[0], z[1], y);
  const double g[2] = {lg.d_pos, lg.d_neg};
  for (std::size_t r = 0; r < 2; ++r) {
    double* gw = grad.data() + r * dim_;
    for (std::size_t c = 0; c < dim_; ++c) gw[c] += g[r] * x[c];
    grad[2 * dim_ + r] += g[r];
  }
  return lg.loss;
}

std::vector<double> LinearObjective::init(Rng& rng) const {
  auto w = uniform_block(rng, 2 * dim_, dim_);
  auto b = uniform_block(rng, 2, dim_);
  w.insert(w.end(), b.begin(), b.end());
  return w;
}

std::vector<double> MlpObjective::pre_activations(std::span<const double> params, std::span<const double> x) const {
  const std::size_t H = hidden_, N = n_in_;
  std::vector<double> a(H);
  kernels::matvec(params.first(H * N), x, params.subspan(H * N, H), a, Exec::serial);
  return a;
}

void MlpObjective::logits(std::span<const double> params, std::span<const double> x, double out[2]) const {
  const std::size_t H = hidden_, N = n_in_;
  auto a = pre_activations(params, x);
  for (double& v : a) v = std::max(v, 0.0);
  const std::size_t off = H * N + H;
  kernels::matvec(params.subspan(off, 2 * H), std::span<const double>(a), params.subspan(off + 2 * H, 2),
                  std::span<double>(out, 2), Exec::serial);
}

double MlpObjective::loss_grad(std::span<const double> params, std::span<const double> x, Label y,
                               std::span<double> grad) const {
  const std::size_t H = hidden_, N = n_in_;
  const auto pre = pre_activations(params, x);
  std::vector<double> act(H);
  for (std::size_t j = 0; j < H; ++j) act[j] = std::max(pre[j], 0.0);
  const std::size_t off = H * N + H;
  double z[2];
  kernels::matvec(params.subspan(off, 2 * H), std::span<const double>(act), params.subspan(off + 2 * H, 2),
                  std::span<double>(z, 2), Exec::serial);
  const LossGrad lg = cross_entropy(z[0], z[1], y);
  const double g[2] = {lg.d_pos, lg.d_neg};

  const double* w2 = params.data() + off;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < H; ++j) grad[off + r * H + j] += g[r] * act[j];
    grad[off + 2 * H + r] += g[r];
  }
  for (std::size_t j = 0; j < H; ++j) {
    if (pre[j] <= 0.0) continue;
    const double back = g[0] * w2[j] + g[1] * w2[H + j];
    for (std::size_t i = 0; i < N; ++i) grad[j * N + i] += back * x[i];
    grad[H * N + j] += back;
  }
  return lg.loss;
}

std::vector<double> MlpObjective::init(Rng& rng) const {
  std::vector<double> p;
  for (auto block : {uniform_block(rng, hidden_ * n_in_, n_in_), uniform_block(rng, hidden_, n_in_),
                     uniform_block(rng, 2 * hidden_, hidden_), uniform_block(rng, 2, hidden_)})
    p.insert(p.end(), block.begin(), block.end());
  return p;
}

double mean_loss(const Objective& objective, std::span<const double> params, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::vector<double> losses(data.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < data.size(); ++i) losses[i] = objective.loss(params, data.row(i), data.y[i]);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
}

TrainResult train_adam(const Objective& objective, const Dataset& train, const Dataset& valid, const TrainSpec& spec,
                       Exec exec) {
  spec.validate();
  if (train.size() == 0 || valid.size() == 0) throw Error(Errc::invalid_argument, "empty training or validation set");
  if (train.dim != objective.input_dim() || valid.dim != objective.input_dim())
    throw Error(Errc::shape_mismatch, "dataset width does not match the model input");
  if (!train.has_both_classes()) throw Error(Errc::single_class, "training data holds a single class");

  Rng rng(spec.seed);
  std::vector<double> params = objective.init(rng);
  const std::size_t P = params.size();
  std::vector<double> m(P, 0.0), v(P, 0.0), grad(P);
  std::vector<double> per_example(spec.batch_size * P);
  std::vector<double> batch_loss(spec.batch_size);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult res;
  res.params = params;
  res.best_valid_loss = mean_loss(objective, params, valid);
  double lr = spec.lr0;
  std::size_t bad_epochs = 0, reductions_since_best = 0;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < spec.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t bs = std::min(spec.batch_size, order.size() - start);
      std::fill(per_example.begin(), per_example.begin() + static_cast<std::ptrdiff_t>(bs * P), 0.0);
      // Per-example gradients in parallel, reduced below in example order.
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
      for (std::size_t k = 0; k < bs; ++k) {
        const std::size_t idx = order[start + k];
        batch_loss[k] = objective.loss_grad(params, train.row(idx), train.y[idx],
                                            std::span<double>(per_example).subspan(k * P, P));
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = 0; k < bs; ++k) {
        const double* g = per_example.data() + k * P;
        for (std::size_t j = 0; j < P; ++j) grad[j] += g[j];
        epoch_loss += batch_loss[k];
      }
      ++step;
      const double inv = 1.0 / static_cast<double>(bs);
      const double c1 = 1.0 - std::pow(spec.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(spec.adam_beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < P; ++j) {
        const double g = grad[j] * inv;
        m[j] = spec.adam_beta1 * m[j] + (1.0 - spec.adam_beta1) * g;
        v[j] = spec.adam_beta2 * v[j] + (1.0 - spec.adam_beta2) * g * g;
        params[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + spec.adam_eps);
      }
    }

    const double val = mean_loss(objective, params, valid);
    res.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    res.valid_loss.push_back(val);
    res.learning_rate.push_back(lr);
    res.epochs_run = epoch + 1;

    if (val < res.best_valid_loss - spec.min_improvement) {
      res.best_valid_loss = val;
      res.params = params;
      bad_epochs = 0;
      reductions_since_best = 0;
    } else if (++bad_epochs >= spec.plateau_patience) {
      lr *= spec.lr_decay_factor;
      bad_epochs = 0;
      ++res.lr_reductions;
      if (++reductions_since_best >= spec.max_lr_reductions_without_improvement) break;
    }
  }
  return res;
}

WeightStore train_classifier(const std::vector<LabeledFeatures>& train, const std::vector<LabeledFeatures>& valid,
                             const TrainSpec& spec, const std::string& model_id, TrainResult* result) {
  if (train.empty() || valid.empty()) throw Error(Errc::invalid_argument, "empty training or validation split");
  const FeatureMatrix& first = train.front().features;
  const std::size_t frames = first.n_frames, coeffs = first.n_coeffs;
  auto check = [&](const LabeledFeatures& s) {
    if (s.features.n_frames != frames || s.features.n_coeffs != coeffs || s.features.config_id != first.config_id)
      throw Error(Errc::shape_mismatch, "training matrices differ in shape or config");
  };

  // Per-coefficient statistics over every training frame.
  std::vector<double> sum(coeffs, 0.0), sq(coeffs, 0.0);
  bool pos = false, neg = false;
  for (const auto& s : train) {
    check(s);
    (s.label == Label::pos ? pos : neg) = true;
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t c = 0; c < coeffs; ++c) {
        const double v = s.features.at(t, c);
        sum[c] += v;
        sq[c] += v * v;
      }
  }
  if (!pos || !neg) throw Error(Errc::single_class, "training data holds a single class");
  const double count = static_cast<double>(train.size() * frames);
  std::vector<float> mean(coeffs), stdv(coeffs);
  for (std::size_t c = 0; c < coeffs; ++c) {
    const double mu = sum[c] / count;
    const double var = std::max(sq[c] / count - mu * mu, 0.0);
    mean[c] = static_cast<float>(mu);
    stdv[c] = var > 1e-12 ? static_cast<float>(std::sqrt(var)) : 1.0f;
  }

  auto to_dataset = [&](const std::vector<LabeledFeatures>& split) {
    Dataset d;
    d.dim = frames * coeffs;
    std::vector<double> row(d.dim);
    for (const auto& s : split) {
      check(s);
      for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t c = 0; c < coeffs; ++c)
          row[t * coeffs + c] = static_cast<double>((s.features.at(t, c) - mean[c]) / stdv[c]);
      d.push(row, s.label);
    }
    return d;
  };
  const Dataset dtrain = to_dataset(train), dvalid = to_dataset(valid);
  const LinearObjective objective(frames * coeffs);

  TrainResult res = train_adam(objective, dtrain, dvalid, spec);

  FeatureConfig cfg;
  cfg.config_id = first.config_id;
  cfg.n_mfcc = static_cast<int>(coeffs);
  WeightStore ws = nn::make_linear_classifier(cfg, frames, model_id);
  ws.get("mean").data = mean;
  ws.get("std").data = stdv;
  auto& w = ws.get("weight").data;
  auto& b = ws.get("bias").data;
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = static_cast<float>(res.params[j]);
  b[0] = static_cast<float>(res.params[w.size()]);
  b[1] = static_cast<float>(res.params[w.size() + 1]);
  ws.metadata["train"] = {{"epochs", res.epochs_run},
                          {"lr_reductions", res.lr_reductions},
                          {"best_valid_loss", res.best_valid_loss},
                          {"seed", spec.seed}};
  if (result) *result = std::move(res);
  return ws;
}

}  // namespace wuw
