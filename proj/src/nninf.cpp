#include "wuw/nninf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>

#include "wuw/bytes.hpp"
#include "wuw/error.hpp"
#include "wuw/kernels.hpp"

namespace wuw {

using nlohmann::json;

Tensor::Tensor(std::vector<std::size_t> dims, float fill) : shape(std::move(dims)) { data.assign(numel(), fill); }

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> values)
    : shape(std::move(dims)), data(std::move(values)) {
  if (data.size() != numel()) throw Error(Errc::shape_mismatch, "tensor data does not match its shape");
}

std::size_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void WeightStore::add(const std::string& name, Tensor t) {
  if (has(name)) throw Error(Errc::inconsistent_metadata, "duplicate tensor name " + name);
  tensors_.emplace_back(name, std::move(t));
}

bool WeightStore::has(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const auto& p) { return p.first == name; });
}

const Tensor& WeightStore::get(const std::string& name) const {
  for (const auto& [n, t] : tensors_)
    if (n == name) return t;
  throw Error(Errc::inconsistent_metadata, "missing tensor " + name);
}

Tensor& WeightStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const WeightStore&>(*this).get(name));
}

std::string WeightStore::kind() const { return metadata.value("kind", std::string{}); }
std::uint8_t WeightStore::config_id() const { return metadata.value("config_id", std::uint8_t{0}); }
std::string WeightStore::model_id() const { return metadata.value("model_id", kind()); }

std::size_t param_count(const WeightStore& ws) {
  std::size_t total = 0;
  for (const auto& [_, t] : ws.tensors()) total += t.numel();
  return total;
}

namespace {

void expect_shape(const WeightStore& ws, const std::string& name, const std::vector<std::size_t>& shape) {
  if (!ws.has(name)) throw Error(Errc::inconsistent_metadata, "missing tensor " + name);
  if (ws.get(name).shape != shape) throw Error(Errc::inconsistent_metadata, "tensor " + name + " has the wrong shape");
}

std::size_t hyper(const WeightStore& ws, const char* key) {
  const auto& h = ws.metadata.value("hyper", json::object());
  if (!h.contains(key) || !h[key].is_number_integer() || h[key].get<std::int64_t>() < 0)
    throw Error(Errc::inconsistent_metadata, std::string("missing hyperparameter ") + key);
  return h[key].get<std::size_t>();
}

}  // namespace

void validate_store(const WeightStore& ws) {
  if (!ws.metadata.is_object() || !ws.metadata.contains("kind") || !ws.metadata["kind"].is_string())
    throw Error(Errc::inconsistent_metadata, "metadata lacks a model kind");
  for (const auto& [name, t] : ws.tensors()) {
    if (t.data.size() != t.numel()) throw Error(Errc::inconsistent_metadata, "tensor " + name + " size vs shape");
    for (float v : t.data)
      if (!std::isfinite(v)) throw Error(Errc::inconsistent_metadata, "tensor " + name + " holds a non-finite value");
  }
  const std::string kind = ws.kind();
  if (kind == kKindLinear) {
    const std::size_t frames = hyper(ws, "n_frames"), coeffs = hyper(ws, "n_coeffs");
    expect_shape(ws, "mean", {coeffs});
    expect_shape(ws, "std", {coeffs});
    expect_shape(ws, "weight", {2, frames * coeffs});
    expect_shape(ws, "bias", {2});
  } else if (kind == kKindSgru || kind == kKindGruMax) {
    const std::size_t layers = hyper(ws, "n_layers"), h = hyper(ws, "hidden"), in = hyper(ws, "input");
    if (layers == 0 || h == 0) throw Error(Errc::inconsistent_metadata, "gru needs layers and hidden units");
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string p = "gru" + std::to_string(l);
      const std::size_t li = l == 0 ? in : h;
      expect_shape(ws, p + ".w_ih", {3 * h, li});
      expect_shape(ws, p + ".w_hh", {3 * h, h});
      expect_shape(ws, p + ".b_ih", {3 * h});
      expect_shape(ws, p + ".b_hh", {3 * h});
    }
    expect_shape(ws, "head.weight", {2, h});
    expect_shape(ws, "head.bias", {2});
  } else if (kind == kKindFusion) {
    const auto& ids = ws.metadata.value("member_ids", json::array());
    if (!ids.is_array() || ids.empty()) throw Error(Errc::inconsistent_metadata, "fusion model lacks member_ids");
    const std::size_t n = ids.size(), h = hyper(ws, "hidden");
    expect_shape(ws, "fc1.weight", {h, n});
    expect_shape(ws, "fc1.bias", {h});
    expect_shape(ws, "fc2.weight", {2, h});
    expect_shape(ws, "fc2.bias", {2});
  }
}

namespace {
constexpr std::string_view kWeightMagic = "WUWM";
constexpr std::uint8_t kWeightVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_weights(const WeightStore& ws) {
  json header;
  header["meta"] = ws.metadata;
  header["tensors"] = json::array();
  for (const auto& [name, t] : ws.tensors()) header["tensors"].push_back({{"name", name}, {"shape", t.shape}});
  const std::string text = header.dump();
  bytes::Writer w;
  w.tag(kWeightMagic);
  w.u8(kWeightVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.tag(text);
  for (const auto& [_, t] : ws.tensors()) w.f32s(t.data);
  return w.take();
}

WeightStore decode_weights(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  if (data.size() < kWeightMagic.size() || !r.tag(kWeightMagic)) throw Error(Errc::bad_magic, "not a WUWM file");
  if (r.u8() != kWeightVersion) throw Error(Errc::version_mismatch, "unsupported WUWM version");
  const std::uint32_t json_len = r.u32();
  auto text = r.take(json_len);
  json header = json::parse(text.begin(), text.end(), nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("tensors") || !header["tensors"].is_array())
    throw Error(Errc::inconsistent_metadata, "malformed WUWM header");

  WeightStore ws;
  ws.metadata = header.value("meta", json::object());
  for (const auto& entry : header["tensors"]) {
    if (!entry.contains("name") || !entry.contains("shape") || !entry["shape"].is_array())
      throw Error(Errc::inconsistent_metadata, "malformed tensor entry");
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (const auto& d : entry["shape"]) {
      if (!d.is_number_unsigned()) throw Error(Errc::inconsistent_metadata, "tensor dimension must be unsigned");
      const auto v = d.get<std::size_t>();
      if (v != 0 && count > (data.size() / sizeof(float)) / v)
        throw Error(Errc::inconsistent_metadata, "tensor shape exceeds the file size");
      count *= v;
      shape.push_back(v);
    }
    if (count > r.remaining() / sizeof(float))
      throw Error(Errc::truncated, "payload for " + entry["name"].get<std::string>() + " is short");
    ws.add(entry["name"].get<std::string>(), Tensor(std::move(shape), r.f32s(count)));
  }
  if (r.remaining() != 0) throw Error(Errc::inconsistent_metadata, "payload longer than the declared shapes");
  validate_store(ws);
  return ws;
}

void save_weights(const WeightStore& ws, const std::filesystem::path& path) {
  validate_store(ws);
  bytes::write_file(path.string(), encode_weights(ws));
}

WeightStore load_weights(const std::filesystem::path& path) {
  return decode_weights(bytes::read_file(path.string()));
}

Probabilities softmax2(const ScorePair& s) {
  const double a = s.logit_pos, b = s.logit_neg;
  const double m = std::max(a, b);
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  const double z = ea + eb;
  return {ea / z, eb / z};
}

LossGrad cross_entropy(double a, double b, Label label) {
  const double m = std::max(a, b);
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  const double lse = m + std::log(ea + eb);
  const double p_pos = ea / (ea + eb), p_neg = eb / (ea + eb);
  LossGrad out;
  if (label == Label::pos) {
    out.loss = lse - a;
    out.d_pos = p_pos - 1.0;
    out.d_neg = p_neg;
  } else {
    out.loss = lse - b;
    out.d_pos = p_pos;
    out.d_neg = p_neg - 1.0;
  }
  return out;
}

namespace nn {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b, Exec exec) {
  if (w.shape.size() != 2 || x.numel() != w.dim(1) || b.numel() != w.dim(0))
    throw Error(Errc::shape_mismatch, "linear: W is not (n_out x n_in) for the given x and b");
  Tensor y({w.dim(0)});
  kernels::matvec(w.data, x.data, b.data, y.data, exec);
  return y;
}

GruParams GruParams::from_store(const WeightStore& ws, const std::string& prefix) {
  const Tensor& w_ih = ws.get(prefix + ".w_ih");
  const Tensor& w_hh = ws.get(prefix + ".w_hh");
  GruParams p{w_ih.data, w_hh.data, ws.get(prefix + ".b_ih").data, ws.get(prefix + ".b_hh").data,
              w_ih.shape.size() == 2 ? w_ih.dim(1) : 0, w_hh.shape.size() == 2 ? w_hh.dim(1) : 0};
  p.check();
  return p;
}

void GruParams::check() const {
  const std::size_t g = 3 * hidden;
  if (hidden == 0 || w_ih.size() != g * input || w_hh.size() != g * hidden || b_ih.size() != g || b_hh.size() != g)
    throw Error(Errc::shape_mismatch, "gru parameter shapes");
}

namespace {
inline float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }
}  // namespace

std::vector<float> gru_cell(std::span<const float> x, std::span<const float> h, const GruParams& p, Exec exec) {
  p.check();
  if (x.size() != p.input || h.size() != p.hidden) throw Error(Errc::shape_mismatch, "gru_cell input sizes");
  const std::size_t H = p.hidden;
  std::vector<float> gi(3 * H), gh(3 * H);
  kernels::matvec(p.w_ih, x, p.b_ih, gi, exec);
  kernels::matvec(p.w_hh, h, p.b_hh, gh, exec);
  std::vector<float> out(H);
  for (std::size_t j = 0; j < H; ++j) {
    const float r = sigmoid(gi[j] + gh[j]);
    const float z = sigmoid(gi[H + j] + gh[H + j]);
    const float n = std::tanh(gi[2 * H + j] + r * gh[2 * H + j]);
    out[j] = (1.0f - z) * n + z * h[j];
  }
  return out;
}

std::vector<float> gru_sequence(std::span<const float> frames, std::size_t n_frames, const GruParams& p, Pooling mode,
                                Exec exec, std::vector<std::vector<float>>* states) {
  if (n_frames == 0) throw Error(Errc::invalid_argument, "gru_sequence needs at least one frame");
  if (frames.size() != n_frames * p.input) throw Error(Errc::shape_mismatch, "gru_sequence frame matrix");
  std::vector<float> h(p.hidden, 0.0f);
  std::vector<float> pooled;
  for (std::size_t t = 0; t < n_frames; ++t) {
    h = gru_cell(frames.subspan(t * p.input, p.input), h, p, exec);
    if (states) states->push_back(h);
    if (mode == Pooling::max) {
      if (t == 0) {
        pooled = h;
      } else {
        for (std::size_t j = 0; j < h.size(); ++j) pooled[j] = std::max(pooled[j], h[j]);
      }
    }
  }
  return mode == Pooling::last ? h : pooled;
}

WeightStore make_gru_scorer(const FeatureConfig& config, GruScorerShape shape, std::uint64_t seed,
                            const std::string& model_id, Pooling pooling) {
  Rng rng(seed);
  WeightStore ws;
  const std::size_t in = static_cast<std::size_t>(config.n_mfcc), H = shape.hidden;
  ws.metadata = {{"kind", pooling == Pooling::last ? kKindSgru : kKindGruMax},
                 {"config_id", config.config_id},
                 {"model_id", model_id},
                 {"hyper", {{"n_layers", shape.n_layers}, {"hidden", H}, {"input", in}}}};
  auto uniform = [&](std::vector<std::size_t> dims, std::size_t fan_in) {
    Tensor t(std::move(dims));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
  };
  for (std::size_t l = 0; l < shape.n_layers; ++l) {
    const std::string p = "gru" + std::to_string(l);
    const std::size_t li = l == 0 ? in : H;
    ws.add(p + ".w_ih", uniform({3 * H, li}, H));
    ws.add(p + ".w_hh", uniform({3 * H, H}, H));
    ws.add(p + ".b_ih", uniform({3 * H}, H));
    ws.add(p + ".b_hh", uniform({3 * H}, H));
  }
  ws.add("head.weight", uniform({2, H}, H));
  ws.add("head.bias", uniform({2}, H));
  return ws;
}

namespace {
void require_config(const FeatureMatrix& f, const WeightStore& ws) {
  if (f.config_id != ws.config_id())
    throw Error(Errc::config_mismatch, "features from config " + std::to_string(f.config_id) + ", model expects " +
                                           std::to_string(ws.config_id()));
}
}  // namespace

ScorePair gru_forward(const FeatureMatrix& features, const WeightStore& ws, Exec exec) {
  require_config(features, ws);
  const std::string kind = ws.kind();
  if (kind != kKindSgru && kind != kKindGruMax) throw Error(Errc::inconsistent_metadata, "not a gru scorer: " + kind);
  const std::size_t layers = hyper(ws, "n_layers");
  const Pooling mode = kind == kKindSgru ? Pooling::last : Pooling::max;

  std::vector<float> seq = features.values;
  std::size_t width = features.n_coeffs;
  std::vector<float> pooled;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto p = GruParams::from_store(ws, "gru" + std::to_string(l));
    if (p.input != width) throw Error(Errc::shape_mismatch, "gru layer input width");
    if (l + 1 == layers) {
      pooled = gru_sequence(seq, features.n_frames, p, mode, exec);
    } else {
      std::vector<std::vector<float>> states;
      gru_sequence(seq, features.n_frames, p, Pooling::last, exec, &states);
      seq.clear();
      for (const auto& s : states) seq.insert(seq.end(), s.begin(), s.end());
      width = p.hidden;
    }
  }
  std::array<float, 2> logits{};
  kernels::matvec(ws.get("head.weight").data, pooled, ws.get("head.bias").data, logits, exec);
  return {logits[0], logits[1]};
}

ScorePair linear_classifier_forward(const FeatureMatrix& features, const WeightStore& ws, Exec exec) {
  require_config(features, ws);
  if (ws.kind() != kKindLinear) throw Error(Errc::inconsistent_metadata, "not a linear scorer: " + ws.kind());
  const std::size_t frames = hyper(ws, "n_frames"), coeffs = hyper(ws, "n_coeffs");
  if (features.n_frames != frames || features.n_coeffs != coeffs)
    throw Error(Errc::shape_mismatch, "features are " + std::to_string(features.n_frames) + "x" +
                                          std::to_string(features.n_coeffs) + ", scorer expects " +
                                          std::to_string(frames) + "x" + std::to_string(coeffs));
  const auto& mean = ws.get("mean").data;
  const auto& stdv = ws.get("std").data;
  std::vector<float> x(features.values.size());
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < coeffs; ++c)
      x[t * coeffs + c] = (features.values[t * coeffs + c] - mean[c]) / stdv[c];
  std::array<float, 2> logits{};
  kernels::matvec(ws.get("weight").data, x, ws.get("bias").data, logits, exec);
  return {logits[0], logits[1]};
}

WeightStore make_linear_classifier(const FeatureConfig& config, std::size_t n_frames, const std::string& model_id) {
  const auto coeffs = static_cast<std::size_t>(config.n_mfcc);
  WeightStore ws;
  ws.metadata = {{"kind", kKindLinear},
                 {"config_id", config.config_id},
                 {"model_id", model_id},
                 {"hyper", {{"n_frames", n_frames}, {"n_coeffs", coeffs}}}};
  ws.add("mean", Tensor({coeffs}, 0.0f));
  ws.add("std", Tensor({coeffs}, 1.0f));
  ws.add("weight", Tensor({2, n_frames * coeffs}, 0.0f));
  ws.add("bias", Tensor({2}, 0.0f));
  return ws;
}

}  // namespace nn

StoreScorer::StoreScorer(WeightStore ws) : ws_(std::move(ws)) {
  validate_store(ws_);
  kind_ = ws_.kind();
  if (kind_ != kKindLinear && kind_ != kKindSgru && kind_ != kKindGruMax)
    throw Error(Errc::inconsistent_metadata, "model kind " + kind_ + " is not a scorer");
  config_id_ = ws_.config_id();
  id_ = ws_.model_id();
}

ScorePair StoreScorer::score(const FeatureMatrix& features) const {
  return kind_ == kKindLinear ? nn::linear_classifier_forward(features, ws_) : nn::gru_forward(features, ws_);
}

std::shared_ptr<const Scorer> load_scorer(const std::filesystem::path& path) {
  return std::make_shared<StoreScorer>(load_weights(path));
}

}  // namespace wuw
