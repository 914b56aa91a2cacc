#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "wuw/features.hpp"
#include "wuw/nninf.hpp"
#include "wuw/wire.hpp"

namespace wuw {

struct AgentConfig {
  double window_s = 1.5;
  // Evaluation stride in samples; two DEVICE hops (100 ms at 16 kHz).
  std::size_t stride_samples = 1600;
  // Trigger when the device log-odds reaches this value (0 <=> p_pos 0.5).
  double threshold_log_odds = 0.0;
  double refractory_s = 1.0;
  FeatureConfig device = FeatureConfig::device();
  FeatureConfig cloud = FeatureConfig::cloud();
  // When set, request payloads are obfuscated with this key.
  std::optional<std::uint64_t> key;
  std::uint64_t nonce_seed = 0;
};

struct DetectionEvent {
  std::uint64_t window_start_sample = 0;
  float device_log_odds = 0.0f;
  float threshold = 0.0f;
};

struct Detection {
  DetectionEvent event;
  wire::VerifyRequest request;
};

// Streaming on-device detector. Keeps the trailing window in a ring buffer,
// scores it every stride with DEVICE features, and on a trigger builds a
// verification request from CLOUD features of the same window.
//
// Refractory: after an event, triggers are suppressed until refractory_s has
// passed since the most recent above-threshold evaluation, so a keyword that
// stays in the window for several strides yields a single event.
class DeviceAgent {
 public:
  DeviceAgent(std::shared_ptr<const Scorer> scorer, AgentConfig config);

  std::vector<Detection> push(std::span<const float> chunk);

  std::uint64_t samples_seen() const { return total_; }
  std::size_t evaluations() const { return evaluations_; }
  const AgentConfig& config() const { return config_; }
  // Device log-odds of the most recent evaluation.
  std::optional<float> last_log_odds() const { return last_log_odds_; }

 private:
  void evaluate(std::vector<Detection>& out);

  std::shared_ptr<const Scorer> scorer_;
  AgentConfig config_;
  std::size_t window_samples_;
  std::size_t refractory_samples_;
  std::vector<float> ring_;
  std::size_t head_ = 0;  // next write position
  std::uint64_t total_ = 0;
  std::uint64_t next_eval_ = 0;
  std::optional<std::uint64_t> last_hit_start_;
  std::size_t evaluations_ = 0;
  std::uint64_t events_ = 0;
  std::optional<float> last_log_odds_;
};

// Bounded single-producer/single-consumer sample queue between audio
// ingestion and scoring. When full, the oldest samples are dropped and
// counted.
class AudioQueue {
 public:
  explicit AudioQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(std::span<const float> samples);
  // Blocks until samples are available or the queue is closed; returns up to
  // max_samples. Empty result means closed and drained.
  std::vector<float> pop(std::size_t max_samples);
  void close();
  std::uint64_t dropped() const { return dropped_.load(); }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<float> buf_;
  bool closed_ = false;
  std::atomic<std::uint64_t> dropped_{0};
};

}  // namespace wuw
