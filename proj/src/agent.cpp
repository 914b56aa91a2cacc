#include "wuw/agent.hpp"

#include <algorithm>
#include <cmath>

#include "wuw/error.hpp"
#include "wuw/fusion.hpp"

namespace wuw {

DeviceAgent::DeviceAgent(std::shared_ptr<const Scorer> scorer, AgentConfig config)
    : scorer_(std::move(scorer)), config_(std::move(config)) {
  if (!scorer_) throw Error(Errc::invalid_argument, "device agent needs a scorer");
  config_.device.validate();
  config_.cloud.validate();
  if (scorer_->config_id() != config_.device.config_id)
    throw Error(Errc::config_mismatch, "device scorer does not consume the DEVICE feature config");
  if (config_.stride_samples == 0 || !(config_.window_s > 0) || config_.refractory_s < 0)
    throw Error(Errc::invalid_argument, "agent stride, window and refractory must be positive");
  window_samples_ = static_cast<std::size_t>(std::llround(config_.window_s * config_.device.sample_rate_hz));
  refractory_samples_ = static_cast<std::size_t>(std::llround(config_.refractory_s * config_.device.sample_rate_hz));
  ring_.assign(window_samples_, 0.0f);
  next_eval_ = window_samples_;
}

std::vector<Detection> DeviceAgent::push(std::span<const float> chunk) {
  std::vector<Detection> out;
  for (float s : chunk) {
    ring_[head_] = s;
    head_ = (head_ + 1) % window_samples_;
    ++total_;
    if (total_ == next_eval_) {
      evaluate(out);
      next_eval_ += config_.stride_samples;
    }
  }
  return out;
}

void DeviceAgent::evaluate(std::vector<Detection>& out) {
  ++evaluations_;
  AudioClip window;
  window.sample_rate_hz = config_.device.sample_rate_hz;
  window.samples.resize(window_samples_);
  // head_ points at the oldest sample once the buffer is full.
  std::copy(ring_.begin() + static_cast<std::ptrdiff_t>(head_), ring_.end(), window.samples.begin());
  std::copy(ring_.begin(), ring_.begin() + static_cast<std::ptrdiff_t>(head_),
            window.samples.begin() + static_cast<std::ptrdiff_t>(window_samples_ - head_));

  const std::uint64_t start = total_ - window_samples_;
  const float lo = static_cast<float>(fusion::log_odds(scorer_->score(features::mfcc(window, config_.device))));
  last_log_odds_ = lo;
  if (lo < config_.threshold_log_odds) return;

  if (last_hit_start_ && start - *last_hit_start_ < refractory_samples_) {
    last_hit_start_ = start;  // still triggering: extend the hold-off
    return;
  }
  last_hit_start_ = start;

  Detection d;
  d.event = {start, lo, static_cast<float>(config_.threshold_log_odds)};
  const std::uint64_t nonce = wire::SplitMix64(config_.nonce_seed + events_++).next();
  d.request = wire::make_request(features::mfcc(window, config_.cloud), lo, nonce);
  if (config_.key) wire::seal(d.request, *config_.key);
  out.push_back(std::move(d));
}

void AudioQueue::push(std::span<const float> samples) {
  {
    std::lock_guard lock(mu_);
    buf_.insert(buf_.end(), samples.begin(), samples.end());
    if (buf_.size() > capacity_) {
      const std::size_t excess = buf_.size() - capacity_;
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(excess));
      dropped_ += excess;
    }
  }
  cv_.notify_one();
}

std::vector<float> AudioQueue::pop(std::size_t max_samples) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !buf_.empty() || closed_; });
  const std::size_t n = std::min(max_samples, buf_.size());
  std::vector<float> out(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

void AudioQueue::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

}  // namespace wuw
