#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wuw/exec.hpp"
#include "wuw/features.hpp"
#include "wuw/nninf.hpp"

namespace wuw {

// Training recipe defaults: batch 128, Adam at lr 1e-3, lr x0.1 on a
// validation-loss plateau, stop after four reductions without a new best,
// at most 700 epochs.
struct TrainSpec {
  std::size_t batch_size = 128;
  double lr0 = 1e-3;
  std::size_t max_epochs = 700;
  double lr_decay_factor = 0.1;
  std::size_t plateau_patience = 5;
  std::size_t max_lr_reductions_without_improvement = 4;
  double min_improvement = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Dense labelled examples, row-major (n x dim).
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<Label> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * dim, dim);
  }
  void push(std::span<const double> features, Label label);
  bool has_both_classes() const;
};

// Differentiable model + cross-entropy, evaluated in double precision.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t n_params() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual void logits(std::span<const double> params, std::span<const double> x, double out[2]) const = 0;
  // Returns the loss and *adds* dL/dparams into grad.
  virtual double loss_grad(std::span<const double> params, std::span<const double> x, Label y,
                           std::span<double> grad) const = 0;
  // Seeded uniform initialization, +-1/sqrt(fan_in) per tensor.
  virtual std::vector<double> init(Rng& rng) const = 0;

  double loss(std::span<const double> params, std::span<const double> x, Label y) const;
};

// logits = W x + b, params laid out [W (2 x D) | b (2)].
class LinearObjective final : public Objective {
 public:
  explicit LinearObjective(std::size_t dim) : dim_(dim) {}
  std::size_t n_params() const override { return 2 * dim_ + 2; }
  std::size_t input_dim() const override { return dim_; }
  void logits(std::span<const double> params, std::span<const double> x, double out[2]) const override;
  double loss_grad(std::span<const double> params, std::span<const double> x, Label y,
                   std::span<double> grad) const override;
  std::vector<double> init(Rng& rng) const override;

 private:
  std::size_t dim_;
};

// FC(N -> H) -> ReLU -> FC(H -> 2), params laid out [W1 | b1 | W2 | b2].
class MlpObjective final : public Objective {
 public:
  MlpObjective(std::size_t n_in, std::size_t hidden) : n_in_(n_in), hidden_(hidden) {}
  std::size_t n_params() const override { return hidden_ * n_in_ + hidden_ + 2 * hidden_ + 2; }
  std::size_t input_dim() const override { return n_in_; }
  std::size_t hidden() const { return hidden_; }
  void logits(std::span<const double> params, std::span<const double> x, double out[2]) const override;
  double loss_grad(std::span<const double> params, std::span<const double> x, Label y,
                   std::span<double> grad) const override;
  std::vector<double> init(Rng& rng) const override;
  // Hidden pre-activations, exposed for kink-avoiding gradient checks.
  std::vector<double> pre_activations(std::span<const double> params, std::span<const double> x) const;

 private:
  std::size_t n_in_;
  std::size_t hidden_;
};

struct TrainResult {
  std::vector<double> params;  // best-validation-loss parameters
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  std::vector<double> learning_rate;
  double best_valid_loss = 0.0;
  std::size_t epochs_run = 0;
  std::size_t lr_reductions = 0;
};

// Mini-batch Adam on mean cross-entropy with the plateau schedule. Per-example
// gradients are computed in parallel and summed in example order, so results
// do not depend on the thread count.
TrainResult train_adam(const Objective& objective, const Dataset& train, const Dataset& valid,
                       const TrainSpec& spec, Exec exec = Exec::parallel);

double mean_loss(const Objective& objective, std::span<const double> params, const Dataset& data);

struct LabeledFeatures {
  FeatureMatrix features;
  Label label = Label::neg;
};

// Fits the linear baseline scorer: per-coefficient standardization from the
// training frames, then train_adam on the flattened matrices.
WeightStore train_classifier(const std::vector<LabeledFeatures>& train,
                             const std::vector<LabeledFeatures>& valid, const TrainSpec& spec,
                             const std::string& model_id = "linear", TrainResult* result = nullptr);

}  // namespace wuw
