#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "wuw/fusion.hpp"
#include "wuw/nninf.hpp"
#include "wuw/transport.hpp"
#include "wuw/wire.hpp"

namespace wuw {

// Fused decision for one request, computed without any transport.
struct Verification {
  LogOddsVector stacked;  // device first, then members
  ScorePair fused;
  double p_pos = 0.0;
  bool accepted = false;
};

// Server-side ensemble. Immutable after construction; verify() is safe to
// call from many connections at once.
class VerificationService {
 public:
  // Refuses to start (Error{member_mismatch}/config_mismatch) unless every
  // member uses the CLOUD config and fusion.member_ids() is one device slot
  // followed by the member ids in order.
  VerificationService(std::vector<std::shared_ptr<const Scorer>> members, FusionModel fusion,
                      double theta_cloud = 0.5, std::optional<std::uint64_t> key = std::nullopt);

  Verification verify_features(const FeatureMatrix& features, float device_log_odds) const;
  wire::VerifyResponse verify(const wire::VerifyRequest& req) const;
  // Decodes, verifies and encodes. Malformed input yields an error response
  // instead of an exception; `ok` reports which happened.
  std::vector<std::uint8_t> handle_frame(std::span<const std::uint8_t> frame, bool* ok = nullptr) const;

  const FusionModel& fusion() const { return fusion_; }
  double theta() const { return theta_; }

 private:
  std::vector<std::shared_ptr<const Scorer>> members_;
  FusionModel fusion_;
  double theta_;
  std::optional<std::uint64_t> key_;
};

// Serves frames on one stream until EOF or a malformed frame (which gets an
// error response, then the connection closes).
void serve_connection(transport::ByteStream& stream, const VerificationService& service);

// Accept loop with one thread per connection.
class VerificationServer {
 public:
  VerificationServer(std::shared_ptr<const VerificationService> service, transport::TcpListener listener);
  ~VerificationServer();

  std::uint16_t port() const { return listener_.port(); }
  void start();  // runs the accept loop on a background thread
  void run();    // runs it on the calling thread until stop()
  void stop();

 private:
  std::shared_ptr<const VerificationService> service_;
  transport::TcpListener listener_;
  std::atomic<bool> stop_{false};
  std::thread loop_;
  std::mutex mu_;
  std::vector<std::shared_ptr<transport::TcpStream>> connections_;
  std::vector<std::thread> workers_;
};

// Synchronous client over any byte stream.
class VerifyClient {
 public:
  explicit VerifyClient(transport::ByteStream& stream) : stream_(stream) {}
  wire::VerifyResponse verify(const wire::VerifyRequest& req);
  // Sends raw bytes and reads back one frame (test hook for malformed input).
  std::optional<wire::VerifyResponse> exchange(std::span<const std::uint8_t> raw);

 private:
  transport::ByteStream& stream_;
};

}  // namespace wuw
