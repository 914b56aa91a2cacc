#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wuw/exec.hpp"
#include "wuw/features.hpp"
#include "wuw/rng.hpp"

namespace wuw {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);
  Tensor(std::vector<std::size_t> dims, std::vector<float> values);

  std::size_t numel() const;
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  bool operator==(const Tensor&) const = default;
};

// Model kinds understood by load_scorer / the weight-file validator.
inline constexpr const char* kKindLinear = "linear";
inline constexpr const char* kKindSgru = "sgru";
inline constexpr const char* kKindGruMax = "gru-max";
inline constexpr const char* kKindFusion = "fusion_mlp";

// Ordered name -> tensor map plus JSON metadata. Metadata always carries
// "kind"; scorers also carry "config_id" and "model_id", and per-kind
// hyperparameters live under "hyper".
class WeightStore {
 public:
  nlohmann::json metadata = nlohmann::json::object();

  void add(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool has(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

  std::string kind() const;
  std::uint8_t config_id() const;
  std::string model_id() const;

  bool operator==(const WeightStore&) const = default;

 private:
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

// Sum of tensor element counts.
std::size_t param_count(const WeightStore& ws);

// Checks tensor presence and shape agreement for the declared kind.
// Throws Error{inconsistent_metadata}.
void validate_store(const WeightStore& ws);

// WUWM file: "WUWM", u8 version (1), u32 LE JSON length, UTF-8 JSON
// (metadata plus ordered tensor names and shapes), then the float32 payloads
// concatenated in declared order.
std::vector<std::uint8_t> encode_weights(const WeightStore& ws);
WeightStore decode_weights(std::span<const std::uint8_t> bytes);
void save_weights(const WeightStore& ws, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

// A classifier's two raw outputs.
struct ScorePair {
  float logit_pos = 0.0f;
  float logit_neg = 0.0f;
  bool operator==(const ScorePair&) const = default;
};

struct Probabilities {
  double p_pos = 0.5;
  double p_neg = 0.5;
};

// Numerically stable two-way softmax.
Probabilities softmax2(const ScorePair& s);

enum class Label : std::uint8_t { neg = 0, pos = 1 };

struct LossGrad {
  double loss = 0.0;
  double d_pos = 0.0;  // dL/d logit_pos
  double d_neg = 0.0;  // dL/d logit_neg
};

// -ln p_label with log-sum-exp; gradient is softmax - onehot.
LossGrad cross_entropy(double logit_pos, double logit_neg, Label label);
inline LossGrad cross_entropy(const ScorePair& s, Label label) {
  return cross_entropy(s.logit_pos, s.logit_neg, label);
}

namespace nn {

// W x + b with W of shape (n_out, n_in).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b, Exec exec = Exec::parallel);

// One GRU layer, gates stacked (r, z, n):
//   w_ih (3H x I), w_hh (3H x H), b_ih (3H), b_hh (3H).
struct GruParams {
  std::span<const float> w_ih;
  std::span<const float> w_hh;
  std::span<const float> b_ih;
  std::span<const float> b_hh;
  std::size_t input = 0;
  std::size_t hidden = 0;

  // Views the four tensors "<prefix>.w_ih" ... of a store.
  static GruParams from_store(const WeightStore& ws, const std::string& prefix);
  void check() const;
};

// r = s(W_r x + b_ir + U_r h + b_hr), z likewise,
// n = tanh(W_n x + b_in + r * (U_n h + b_hn)), h' = (1 - z) n + z h.
std::vector<float> gru_cell(std::span<const float> x, std::span<const float> h, const GruParams& p,
                            Exec exec = Exec::serial);

enum class Pooling { last, max };

// Runs the cell over rows of `frames` (n_frames x p.input) from h0 = 0.
// Returns either the final state or the elementwise max over all states.
// When `states` is non-null every h_t is appended to it.
std::vector<float> gru_sequence(std::span<const float> frames, std::size_t n_frames, const GruParams& p,
                                Pooling mode, Exec exec = Exec::serial,
                                std::vector<std::vector<float>>* states = nullptr);

// Closed-form parameter count of a GRU layer: 3 (H I + H^2 + 2 H).
constexpr std::size_t gru_layer_params(std::size_t input, std::size_t hidden) {
  return 3 * (hidden * input + hidden * hidden + 2 * hidden);
}

struct GruScorerShape {
  std::size_t n_layers = 2;
  std::size_t hidden = 128;
};

// Closed-form count for a stacked GRU with a hidden -> 2 head.
constexpr std::size_t gru_scorer_params(std::size_t input, GruScorerShape shape) {
  std::size_t total = 0;
  for (std::size_t l = 0; l < shape.n_layers; ++l)
    total += gru_layer_params(l == 0 ? input : shape.hidden, shape.hidden);
  return total + shape.hidden * 2 + 2;
}

// Uniform +-1/sqrt(fan_in) initialized GRU scorer (kind sgru or gru-max).
WeightStore make_gru_scorer(const FeatureConfig& config, GruScorerShape shape, std::uint64_t seed,
                            const std::string& model_id = "sgru", Pooling pooling = Pooling::last);

// Stacked GRU in last-state (sgru) or max-over-time (gru-max) mode, then the
// linear head. Throws config_mismatch if the features came from another config.
ScorePair gru_forward(const FeatureMatrix& features, const WeightStore& ws, Exec exec = Exec::serial);
inline ScorePair sgru_forward(const FeatureMatrix& features, const WeightStore& ws) {
  return gru_forward(features, ws);
}

// Per-column standardization, row-major flatten, then a (2 x F*C) linear map.
ScorePair linear_classifier_forward(const FeatureMatrix& features, const WeightStore& ws,
                                    Exec exec = Exec::serial);

// Zero-initialized linear classifier store with identity standardization.
WeightStore make_linear_classifier(const FeatureConfig& config, std::size_t n_frames,
                                   const std::string& model_id = "linear");

}  // namespace nn

// Anything that maps a feature matrix to a ScorePair. Implementations are
// immutable after construction and safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScorePair score(const FeatureMatrix& features) const = 0;
  virtual std::uint8_t config_id() const = 0;
  virtual std::string id() const = 0;
};

// Scorer backed by a weight store (linear, sgru or gru-max).
class StoreScorer final : public Scorer {
 public:
  explicit StoreScorer(WeightStore ws);
  ScorePair score(const FeatureMatrix& features) const override;
  std::uint8_t config_id() const override { return config_id_; }
  std::string id() const override { return id_; }
  const WeightStore& weights() const { return ws_; }

 private:
  WeightStore ws_;
  std::string kind_;
  std::uint8_t config_id_;
  std::string id_;
};

std::shared_ptr<const Scorer> load_scorer(const std::filesystem::path& path);

}  // namespace wuw
