// wuw: command-line front end for the two-phase wake word pipeline.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 model/protocol error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wuw/agent.hpp"
#include "wuw/audio.hpp"
#include "wuw/bytes.hpp"
#include "wuw/corpus.hpp"
#include "wuw/error.hpp"
#include "wuw/eval.hpp"
#include "wuw/features.hpp"
#include "wuw/fusion.hpp"
#include "wuw/manifest.hpp"
#include "wuw/nninf.hpp"
#include "wuw/server.hpp"
#include "wuw/train.hpp"
#include "wuw/transport.hpp"
#include "wuw/wire.hpp"

namespace fs = std::filesystem;
using namespace wuw;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitModel = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

FeatureConfig parse_config(const std::string& name) {
  if (name == "device") return FeatureConfig::device();
  if (name == "cloud") return FeatureConfig::cloud();
  int id = 0;
  try {
    id = std::stoi(name);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--config", "expected device, cloud or a grid id, got '" + name + "'");
  }
  if (id < 0 || id > 255) throw CLI::ValidationError("--config", "id out of range: " + name);
  return config_by_id(static_cast<std::uint8_t>(id));
}

std::optional<std::uint64_t> parse_key(const std::string& text) {
  if (text.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw CLI::ValidationError("--key", "expected an unsigned integer, got '" + text + "'");
  }
}

// Probability threshold -> log-odds threshold on the device score.
double theta_to_log_odds(double p) { return fusion::log_odds(p, 1.0 - p); }

void write_text(const fs::path& path, const std::string& text) {
  bytes::write_file(path.string(), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::shared_ptr<const Scorer>> load_members(const std::vector<std::string>& paths) {
  std::vector<std::shared_ptr<const Scorer>> out;
  for (const auto& p : paths) out.push_back(load_scorer(p));
  return out;
}

Split parse_split_flag(const std::string& s) {
  const auto v = parse_split(s);
  if (!v) throw CLI::ValidationError("--split", "expected train, valid or test, got '" + s + "'");
  return *v;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) grid.push_back(std::stod(item));
  return grid;
}

void print_json(const nlohmann::json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_text(out, text);
}

struct Common {
  std::uint64_t seed = 0;
  std::string buckets = "6";
  double theta_device = 0.5;
  double theta_cloud = 0.5;
  std::string key;
};

// ---------------------------------------------------------------- features

struct FeaturesArgs {
  std::string input, output;
  std::string config = "device";
};

int run_features(const FeaturesArgs& a) {
  const auto cfg = parse_config(a.config);
  const auto m = features::mfcc(audio::read_wav(a.input), cfg);
  features::write_dump(a.output, m);
  std::cout << "config " << int(cfg.config_id) << " frames " << m.n_frames << " coeffs " << m.n_coeffs << "\n";
  return 0;
}

// ----------------------------------------------------------------- augment

struct AugmentArgs {
  std::string manifest, out_dir;
  std::string split = "train";
  std::uint64_t seed = 0;
  double rir_probability = 0.0;
  int copies = 1;
};

int run_augment(const AugmentArgs& a) {
  const auto entries = load_manifest(a.manifest, true);
  const auto src = wav_source();
  AugmentSpec spec;
  spec.rir_probability = a.rir_probability;
  Rng rng(a.seed);
  const Split split = parse_split_flag(a.split);
  std::vector<ManifestEntry> out;
  nlohmann::json snrs = nlohmann::json::array();
  fs::create_directories(a.out_dir);
  std::size_t n = 0;
  for (int c = 0; c < a.copies; ++c)
    for (const auto& w : augment_split(entries, src, split, spec, rng)) {
      char name[64];
      std::snprintf(name, sizeof name, "mix_%06zu.wav", n++);
      audio::write_wav(fs::path(a.out_dir) / name, w.window);
      ManifestEntry e;
      e.path = name;
      e.label = w.label == Label::pos ? ClipLabel::wuw : ClipLabel::other;
      e.split = split;
      out.push_back(e);
      snrs.push_back(w.snr_db);
    }
  write_text(fs::path(a.out_dir) / "manifest.jsonl", to_jsonl(out));
  write_text(fs::path(a.out_dir) / "snr.json", snrs.dump() + "\n");
  std::cout << "wrote " << out.size() << " windows\n";
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string manifest, output;
  std::string config = "device";
  std::string model_id = "linear";
  std::uint64_t seed = 0;
  double rir_probability = 0.25;
  std::size_t max_epochs = TrainSpec{}.max_epochs;
  std::string history;
};

int run_train(const TrainArgs& a) {
  const auto cfg = parse_config(a.config);
  const auto entries = load_manifest(a.manifest, true);
  const auto src = wav_source();
  Rng rng(a.seed);
  AugmentSpec aug;
  aug.rir_probability = a.rir_probability;
  const auto train = featurize(augment_split(entries, src, Split::train, aug, rng), cfg);
  const auto valid = featurize(augment_split(entries, src, Split::valid, aug, rng), cfg);
  TrainSpec spec;
  spec.seed = a.seed;
  spec.max_epochs = a.max_epochs;
  TrainResult result;
  const auto ws = train_classifier(train, valid, spec, a.model_id, &result);
  save_weights(ws, a.output);
  std::cout << "epochs " << result.epochs_run << " best_valid_loss " << result.best_valid_loss << " params "
            << param_count(ws) << "\n";
  if (!a.history.empty()) {
    nlohmann::json h;
    h["train_loss"] = result.train_loss;
    h["valid_loss"] = result.valid_loss;
    h["learning_rate"] = result.learning_rate;
    write_text(a.history, h.dump() + "\n");
  }
  return 0;
}

// -------------------------------------------------------------- fuse-train

struct FuseTrainArgs {
  std::string manifest, device, output;
  std::vector<std::string> members;
  std::uint64_t seed = 0;
  int repetitions = 4;
  std::size_t hidden = fusion::kDefaultHidden;
};

int run_fuse_train(const FuseTrainArgs& a) {
  const auto entries = load_manifest(a.manifest, true);
  const auto src = wav_source();
  const auto device = load_scorer(a.device);
  const auto members = load_members(a.members);
  Rng rng(a.seed);
  const auto data = fusion_training_set(entries, src, Split::valid, device, members, AgentConfig{}, a.repetitions, rng);
  TrainSpec spec;
  spec.seed = a.seed;
  const auto model = fusion::train_fusion(data, spec, 0.2, a.hidden);
  save_weights(model.weights(), a.output);
  std::cout << "fusion over " << model.n_inputs() << " members, " << data.size() << " examples\n";
  return 0;
}

// ------------------------------------------------------------------ detect

struct DetectArgs {
  std::string input, device;
  bool raw = false;
  double refractory_s = 1.0;
  std::size_t chunk = 1600;
  std::string requests_out;
  std::string server;
  std::uint64_t nonce_seed = 0;
};

std::pair<std::string, std::uint16_t> split_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--server", "expected host:port");
  return {s.substr(0, colon), static_cast<std::uint16_t>(std::stoi(s.substr(colon + 1)))};
}

// Raw little-endian float32 samples from a file or stdin.
std::vector<float> read_raw_stream(const std::string& path) {
  std::vector<std::uint8_t> data;
  if (path == "-") {
    std::istreambuf_iterator<char> it(std::cin), end;
    for (; it != end; ++it) data.push_back(static_cast<std::uint8_t>(*it));
  } else {
    data = bytes::read_file(path);
  }
  if (data.size() % 4 != 0) throw Error(Errc::malformed_wav, "raw stream length is not a multiple of 4");
  bytes::Reader r(data);
  return r.f32s(data.size() / 4);
}

int run_detect(const DetectArgs& a, const Common& c) {
  AgentConfig cfg;
  cfg.threshold_log_odds = theta_to_log_odds(c.theta_device);
  cfg.refractory_s = a.refractory_s;
  cfg.key = parse_key(c.key);
  cfg.nonce_seed = a.nonce_seed;
  DeviceAgent agent(load_scorer(a.device), cfg);

  std::vector<float> samples;
  if (a.raw) {
    samples = read_raw_stream(a.input);
  } else {
    const auto clip = audio::read_wav(a.input);
    if (clip.sample_rate_hz != kCanonicalRate) throw Error(Errc::rate_mismatch, "stream must be 16 kHz");
    samples = clip.samples;
  }

  std::optional<transport::TcpStream> conn;
  std::optional<VerifyClient> client;
  if (!a.server.empty()) {
    const auto [host, port] = split_host_port(a.server);
    conn.emplace(transport::connect_tcp(host, port));
    client.emplace(*conn);
  }
  std::vector<std::uint8_t> frames;
  std::size_t n_events = 0;
  const std::size_t step = std::max<std::size_t>(1, a.chunk);
  for (std::size_t at = 0; at < samples.size(); at += step) {
    const auto n = std::min(step, samples.size() - at);
    for (const auto& d : agent.push(std::span<const float>(samples).subspan(at, n))) {
      nlohmann::json line;
      line["event"] = n_events++;
      line["window_start_sample"] = d.event.window_start_sample;
      line["window_start_s"] = static_cast<double>(d.event.window_start_sample) / kCanonicalRate;
      line["device_log_odds"] = d.event.device_log_odds;
      line["nonce"] = d.request.nonce;
      const auto frame = wire::encode_request(d.request);
      frames.insert(frames.end(), frame.begin(), frame.end());
      if (client) {
        const auto resp = client->verify(d.request);
        line["status"] = static_cast<int>(resp.status);
        line["accepted"] = resp.verdict == wire::Verdict::accept;
        line["fused_p_pos"] = resp.fused_p_pos;
      }
      std::cout << line.dump() << "\n";
    }
  }
  if (!a.requests_out.empty()) bytes::write_file(a.requests_out, frames);
  std::cerr << "samples " << agent.samples_seen() << " evaluations " << agent.evaluations() << " events "
            << n_events << "\n";
  return 0;
}

// ------------------------------------------------------------------- serve

struct ServeArgs {
  std::vector<std::string> members;
  std::string fusion_path;
  std::string host = "127.0.0.1";
  std::uint16_t port = 7461;
  std::string port_file;
};

int run_serve(const ServeArgs& a, const Common& c) {
  auto service = std::make_shared<const VerificationService>(
      load_members(a.members), FusionModel(load_weights(a.fusion_path)), c.theta_cloud, parse_key(c.key));
  VerificationServer server(service, transport::TcpListener(a.host, a.port));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  std::cout << "listening on " << a.host << ":" << server.port() << std::endl;
  if (!a.port_file.empty()) write_text(a.port_file, std::to_string(server.port()) + "\n");
  while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

// ------------------------------------------------------------- eval, sweep

struct EvalArgs {
  std::string manifest, device, fusion_path;
  std::vector<std::string> members;
  std::string json_out;
  std::string split = "test";
  std::string grid = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95";
};

std::unique_ptr<Pipeline> make_pipeline(const EvalArgs& a) {
  auto device = load_scorer(a.device);
  if (a.members.empty()) return std::make_unique<ScorerPipeline>(device);
  if (a.fusion_path.empty()) throw CLI::ValidationError("--fusion", "required together with --member");
  return std::make_unique<EnsemblePipeline>(device, load_members(a.members), FusionModel(load_weights(a.fusion_path)));
}

std::vector<EvalSample> eval_samples(const EvalArgs& a, const Common& c, const SnrBuckets& buckets) {
  const auto entries = load_manifest(a.manifest);
  return build_eval_set(entries, wav_source(), buckets, c.seed, parse_split_flag(a.split));
}

int run_eval(const EvalArgs& a, const Common& c) {
  const auto buckets = SnrBuckets::parse(c.buckets);
  const auto pipeline = make_pipeline(a);
  const double theta = a.members.empty() ? c.theta_device : c.theta_cloud;
  const auto report = evaluate(eval_samples(a, c, buckets), *pipeline, theta, buckets);
  std::cout << report.to_table();
  print_json(report.to_json(), a.json_out.empty() ? "" : a.json_out);
  return 0;
}

int run_sweep(const EvalArgs& a, const Common& c) {
  const auto buckets = SnrBuckets::parse(c.buckets);
  const auto grid = parse_grid(a.grid);
  const auto pipeline = make_pipeline(a);
  const auto rows = threshold_sweep(eval_samples(a, c, buckets), *pipeline, grid);
  nlohmann::json j = nlohmann::json::array();
  std::printf("%8s %10s %10s %8s\n", "theta", "precision", "recall", "f1");
  for (const auto& r : rows) {
    std::printf("%8.3f %10.4f %10.4f %8.4f%s\n", r.theta, r.precision, r.recall, r.f1, r.best ? "  *" : "");
    j.push_back({{"theta", r.theta}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"best", r.best}});
  }
  if (!a.json_out.empty()) print_json(j, a.json_out);
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  std::string model;
  std::size_t runs = 50;
  std::string json_out;
};

int run_bench(const BenchArgs& a, const Common& c) {
  // Default subject: the reference two-layer sgru on DEVICE features.
  const WeightStore ws = a.model.empty() ? nn::make_gru_scorer(FeatureConfig::device(), {}, c.seed) : load_weights(a.model);
  const StoreScorer scorer(ws);
  const FeatureConfig cfg = config_by_id(scorer.config_id());
  Rng rng(c.seed);
  AudioClip clip;
  clip.samples.resize(24000);
  for (auto& s : clip.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
  const auto feats = features::mfcc(clip, cfg, Exec::serial);

  const auto fe = bench_rtf([&] { (void)features::mfcc(clip, cfg, Exec::serial); }, a.runs);
  const auto fw = bench_rtf([&] { (void)scorer.score(feats); }, a.runs);
  const auto total = bench_rtf([&] { (void)scorer.score(features::mfcc(clip, cfg, Exec::serial)); }, a.runs);
  auto row = [](const RtfStats& s) {
    return nlohmann::json{{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"median_rtf", s.median_rtf},
                          {"p95_rtf", s.p95_rtf}, {"runs", s.runs}};
  };
  std::printf("%-10s %10s %10s %10s\n", "stage", "median_ms", "p95_ms", "rtf");
  std::printf("%-10s %10.3f %10.3f %10.5f\n", "features", fe.median_ms, fe.p95_ms, fe.median_rtf);
  std::printf("%-10s %10.3f %10.3f %10.5f\n", "forward", fw.median_ms, fw.p95_ms, fw.median_rtf);
  std::printf("%-10s %10.3f %10.3f %10.5f\n", "total", total.median_ms, total.p95_ms, total.median_rtf);
  if (!a.json_out.empty())
    print_json({{"model", scorer.id()}, {"config_id", scorer.config_id()}, {"params", param_count(ws)},
                {"features", row(fe)}, {"forward", row(fw)}, {"total", row(total)}},
               a.json_out);
  return 0;
}

// -------------------------------------------------------------- make-synth

struct SynthArgs {
  std::string out_dir;
  synth::CorpusSpec spec;
};

int run_make_synth(const SynthArgs& a, const Common& c) {
  auto spec = a.spec;
  spec.seed = c.seed;
  const auto corpus = synth::make_corpus(spec);
  corpus.write(a.out_dir);
  std::cout << "wrote " << corpus.entries.size() << " clips to " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase wake word detection: features, training, streaming detection and verification."};
  app.require_subcommand(1);
  Common c;

  auto common_flags = [&c](CLI::App* sub, bool thresholds) {
    sub->add_option("--seed", c.seed, "Random seed");
    if (thresholds) {
      sub->add_option("--theta-device", c.theta_device, "Device trigger threshold on p(wake word)")
          ->check(CLI::Range(0.0, 1.0));
      sub->add_option("--theta-cloud", c.theta_cloud, "Server acceptance threshold on fused p(wake word)")
          ->check(CLI::Range(0.0, 1.0));
      sub->add_option("--buckets", c.buckets, "SNR bucket edges 'a,b,...' or a bucket count over [-10, 50]");
      sub->add_option("--key", c.key, "Payload obfuscation key (unsigned, 0x prefix for hex)");
    }
  };

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "WAV -> WUWF feature dump");
  features->add_option("input", fa.input)->required()->check(CLI::ExistingFile);
  features->add_option("-o,--output", fa.output)->required();
  features->add_option("--config", fa.config, "device, cloud or a grid id");

  AugmentArgs aa;
  auto* augment = app.add_subcommand("augment", "Manifest -> noise/RIR-mixed 1.5 s windows");
  augment->add_option("--manifest", aa.manifest)->required()->check(CLI::ExistingFile);
  augment->add_option("-o,--out-dir", aa.out_dir)->required();
  augment->add_option("--split", aa.split);
  augment->add_option("--rir-probability", aa.rir_probability)->check(CLI::Range(0.0, 1.0));
  augment->add_option("--copies", aa.copies)->check(CLI::PositiveNumber);
  common_flags(augment, false);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the linear scorer on augmented train/valid windows");
  train->add_option("--manifest", ta.manifest)->required()->check(CLI::ExistingFile);
  train->add_option("-o,--output", ta.output)->required();
  train->add_option("--config", ta.config, "device, cloud or a grid id");
  train->add_option("--model-id", ta.model_id);
  train->add_option("--rir-probability", ta.rir_probability)->check(CLI::Range(0.0, 1.0));
  train->add_option("--max-epochs", ta.max_epochs);
  train->add_option("--history", ta.history, "Write per-epoch losses as JSON");
  common_flags(train, false);

  FuseTrainArgs ft;
  auto* fuse = app.add_subcommand("fuse-train", "Train the stacking fusion over device + member log-odds");
  fuse->add_option("--manifest", ft.manifest)->required()->check(CLI::ExistingFile);
  fuse->add_option("--device", ft.device)->required()->check(CLI::ExistingFile);
  fuse->add_option("--member", ft.members)->required()->check(CLI::ExistingFile);
  fuse->add_option("-o,--output", ft.output)->required();
  fuse->add_option("--repetitions", ft.repetitions)->check(CLI::PositiveNumber);
  fuse->add_option("--hidden", ft.hidden)->check(CLI::PositiveNumber);
  common_flags(fuse, false);

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Stream audio through the device agent");
  detect->add_option("input", da.input, "16 kHz WAV, or raw f32le samples with --raw ('-' for stdin)")->required();
  detect->add_option("--device", da.device)->required()->check(CLI::ExistingFile);
  detect->add_flag("--raw", da.raw);
  detect->add_option("--refractory", da.refractory_s)->check(CLI::NonNegativeNumber);
  detect->add_option("--chunk", da.chunk, "Samples per push");
  detect->add_option("--requests", da.requests_out, "Write the request frames here");
  detect->add_option("--server", da.server, "host:port of a verification server");
  detect->add_option("--nonce-seed", da.nonce_seed);
  common_flags(detect, true);

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the verification server");
  serve->add_option("--member", sa.members)->required()->check(CLI::ExistingFile);
  serve->add_option("--fusion", sa.fusion_path)->required()->check(CLI::ExistingFile);
  serve->add_option("--host", sa.host);
  serve->add_option("--port", sa.port, "0 picks a free port");
  serve->add_option("--port-file", sa.port_file);
  common_flags(serve, true);

  EvalArgs ea;
  auto eval_flags = [&](CLI::App* sub) {
    sub->add_option("--manifest", ea.manifest)->required()->check(CLI::ExistingFile);
    sub->add_option("--device", ea.device)->required()->check(CLI::ExistingFile);
    sub->add_option("--member", ea.members)->check(CLI::ExistingFile);
    sub->add_option("--fusion", ea.fusion_path)->check(CLI::ExistingFile);
    sub->add_option("--split", ea.split);
    sub->add_option("--json", ea.json_out, "Write the JSON report here instead of stdout");
    common_flags(sub, true);
  };
  auto* eval = app.add_subcommand("eval", "Per-SNR-bucket F1 of the device scorer or the ensemble");
  eval_flags(eval);
  auto* sweep = app.add_subcommand("sweep", "Precision/recall/F1 over a threshold grid");
  eval_flags(sweep);
  sweep->add_option("--grid", ea.grid, "Comma-separated thresholds");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Real-time factor of features + forward on one 1.5 s window");
  bench->add_option("--model", ba.model, "Weight file (default: reference sgru)")->check(CLI::ExistingFile);
  bench->add_option("--runs", ba.runs);
  bench->add_option("--json", ba.json_out);
  common_flags(bench, false);

  SynthArgs ya;
  auto* synth_cmd = app.add_subcommand("make-synth", "Write the synthetic chirp keyword corpus");
  synth_cmd->add_option("-o,--out-dir", ya.out_dir)->required();
  synth_cmd->add_option("--n-train", ya.spec.n_train);
  synth_cmd->add_option("--n-valid", ya.spec.n_valid);
  synth_cmd->add_option("--n-test", ya.spec.n_test);
  synth_cmd->add_option("--n-noise", ya.spec.n_noise_per_split);
  synth_cmd->add_option("--n-rir", ya.spec.n_rir);
  common_flags(synth_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*features) return run_features(fa);
    if (*augment) {
      aa.seed = c.seed;
      return run_augment(aa);
    }
    if (*train) {
      ta.seed = c.seed;
      return run_train(ta);
    }
    if (*fuse) {
      ft.seed = c.seed;
      return run_fuse_train(ft);
    }
    if (*detect) return run_detect(da, c);
    if (*serve) return run_serve(sa, c);
    if (*eval) return run_eval(ea, c);
    if (*sweep) return run_sweep(ea, c);
    if (*bench) return run_bench(ba, c);
    if (*synth_cmd) return run_make_synth(ya, c);
  } catch (const CLI::Error& e) {
    std::cerr << "wuw: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "wuw: " << e.what() << "\n";
    return is_model_or_protocol(e.code()) ? kExitModel : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "wuw: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
