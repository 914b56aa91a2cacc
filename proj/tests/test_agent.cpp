#include <doctest.h>

#include <thread>
#include <vector>

#include "support.hpp"
#include "wuw/agent.hpp"
#include "wuw/error.hpp"

using namespace wuw;

namespace {

// Positive iff any DEVICE frame carries log energy above `level`; the
// logits are scaled so the log-odds are +-8.
class EnergyOracle final : public Scorer {
 public:
  explicit EnergyOracle(double level) : level_(level) {}
  ScorePair score(const FeatureMatrix& f) const override {
    for (std::size_t t = 0; t < f.n_frames; ++t)
      if (f.at(t, 0) > level_) return {4.0f, -4.0f};
    return {-4.0f, 4.0f};
  }
  std::uint8_t config_id() const override { return kDeviceConfigId; }
  std::string id() const override { return "energy-oracle"; }

 private:
  double level_;
};

std::shared_ptr<const Scorer> zero_scorer() {
  return std::make_shared<StoreScorer>(nn::make_linear_classifier(FeatureConfig::device(), 29, "zero"));
}

}  // namespace

TEST_CASE("silence with a zero scorer and a log-odds threshold of 1 never triggers") {
  AgentConfig cfg;
  cfg.threshold_log_odds = 1.0;
  DeviceAgent agent(zero_scorer(), cfg);
  std::vector<float> chunk(1000, 0.0f);
  std::size_t events = 0;
  for (int i = 0; i < 100; ++i) events += agent.push(chunk).size();
  CHECK(events == 0);
  CHECK(agent.samples_seen() == 100000);
  // First evaluation at 24000 samples, then every 1600.
  CHECK(agent.evaluations() == 1 + (100000 - 24000) / 1600);
  REQUIRE(agent.last_log_odds());
  CHECK(*agent.last_log_odds() == 0.0f);
}

TEST_CASE("buffer underfull means no evaluation") {
  DeviceAgent agent(zero_scorer(), AgentConfig{});
  agent.push(std::vector<float>(23999, 0.0f));
  CHECK(agent.evaluations() == 0);
  agent.push(std::vector<float>(1, 0.0f));
  CHECK(agent.evaluations() == 1);
}

TEST_CASE("one event per injected keyword") {
  Rng rng(60);
  const std::size_t gap = 3 * 16000;
  std::vector<float> stream(25 * gap, 0.0f);
  for (auto& s : stream) s = static_cast<float>(rng.uniform(-1e-3, 1e-3));
  std::vector<std::size_t> onsets;
  for (int k = 0; k < 20; ++k) {
    const std::size_t at = 2 * 16000 + k * gap + rng.below(1600);
    onsets.push_back(at);
    for (std::size_t i = 0; i < 8000; ++i) stream[at + i] += static_cast<float>(0.5 * std::sin(0.3 * i));
  }
  AgentConfig cfg;
  cfg.nonce_seed = 5;
  DeviceAgent agent(std::make_shared<EnergyOracle>(0.0), cfg);
  std::vector<Detection> events;
  // Irregular chunking must not matter.
  for (std::size_t pos = 0; pos < stream.size();) {
    const std::size_t n = std::min<std::size_t>(1 + rng.below(3000), stream.size() - pos);
    auto got = agent.push(std::span<const float>(stream).subspan(pos, n));
    events.insert(events.end(), got.begin(), got.end());
    pos += n;
  }
  REQUIRE(events.size() == 20);
  for (std::size_t k = 0; k < 20; ++k) {
    const auto start = events[k].event.window_start_sample;
    // The window overlaps the keyword.
    CHECK(start < onsets[k] + 8000);
    CHECK(start + 24000 > onsets[k]);
    CHECK(events[k].event.device_log_odds == doctest::Approx(8.0f));
    CHECK(events[k].request.n_frames == 148);
    CHECK(events[k].request.n_coeffs == 40);
    CHECK(events[k].request.config_id == kCloudConfigId);
    CHECK(events[k].request.nonce == wire::SplitMix64(5 + k).next());
    if (k > 0) CHECK(start - events[k - 1].event.window_start_sample >= 16000);
  }
  // Cloud features are those of the same window.
  const auto start = events[3].event.window_start_sample;
  AudioClip window{std::vector<float>(stream.begin() + start, stream.begin() + start + 24000), 16000};
  CHECK(wire::request_features(events[3].request) == features::mfcc(window, FeatureConfig::cloud()));
}

TEST_CASE("refractory suppresses sustained triggers") {
  // A constant loud tone triggers every stride; events are spaced by more
  // than the refractory period only once it ends.
  AgentConfig cfg;
  cfg.refractory_s = 1.0;
  DeviceAgent agent(std::make_shared<EnergyOracle>(0.0), cfg);
  std::vector<float> tone(10 * 16000);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = static_cast<float>(0.5 * std::sin(0.2 * i));
  auto events = agent.push(tone);
  CHECK(events.size() == 1);

  cfg.refractory_s = 0.0;
  DeviceAgent eager(std::make_shared<EnergyOracle>(0.0), cfg);
  const auto fired = eager.push(tone).size();
  CHECK(fired == eager.evaluations());
}

TEST_CASE("agent seals requests when a key is set") {
  AgentConfig cfg;
  cfg.key = 0xABCDEFull;
  DeviceAgent agent(std::make_shared<EnergyOracle>(-100.0), cfg);
  auto events = agent.push(std::vector<float>(24000, 0.1f));
  REQUIRE(events.size() == 1);
  auto req = events[0].request;
  CHECK(req.obfuscated());
  wire::unseal(req, 0xABCDEFull);
  AudioClip window{std::vector<float>(24000, 0.1f), 16000};
  CHECK(wire::request_features(req) == features::mfcc(window, FeatureConfig::cloud()));
}

TEST_CASE("agent rejects a non-device scorer") {
  auto cloud = std::make_shared<StoreScorer>(nn::make_linear_classifier(FeatureConfig::cloud(), 148));
  CHECK_THROWS_AS(DeviceAgent(cloud, AgentConfig{}), Error);
}

TEST_CASE("audio queue drops oldest samples when full") {
  AudioQueue q(5);
  const float a[] = {1, 2, 3, 4};
  const float b[] = {5, 6, 7};
  q.push(a);
  q.push(b);
  CHECK(q.dropped() == 2);
  CHECK(q.pop(10) == std::vector<float>{3, 4, 5, 6, 7});

  std::thread consumer([&] {
    std::size_t got = 0;
    while (true) {
      auto v = q.pop(3);
      if (v.empty()) break;
      got += v.size();
    }
    CHECK(got == 4);
  });
  q.push(a);
  q.close();
  consumer.join();
}
