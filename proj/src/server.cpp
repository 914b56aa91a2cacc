#include "wuw/server.hpp"

#include <chrono>

#include "wuw/error.hpp"

namespace wuw {

VerificationService::VerificationService(std::vector<std::shared_ptr<const Scorer>> members, FusionModel fusion,
                                         double theta_cloud, std::optional<std::uint64_t> key)
    : members_(std::move(members)), fusion_(std::move(fusion)), theta_(theta_cloud), key_(key) {
  const auto& ids = fusion_.member_ids();
  if (ids.size() != members_.size() + 1)
    throw Error(Errc::member_mismatch, "fusion expects " + std::to_string(ids.size()) + " inputs, have device + " +
                                           std::to_string(members_.size()) + " members");
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (!members_[i]) throw Error(Errc::invalid_argument, "null member scorer");
    if (members_[i]->config_id() != kCloudConfigId)
      throw Error(Errc::config_mismatch, "member " + members_[i]->id() + " does not use the CLOUD config");
    if (ids[i + 1] != members_[i]->id())
      throw Error(Errc::member_mismatch, "fusion slot " + std::to_string(i + 1) + " is " + ids[i + 1] +
                                             " but member is " + members_[i]->id());
  }
}

Verification VerificationService::verify_features(const FeatureMatrix& features, float device_log_odds) const {
  Verification v;
  v.stacked.member_ids = fusion_.member_ids();
  v.stacked.values.push_back(device_log_odds);
  for (const auto& m : members_) v.stacked.values.push_back(static_cast<float>(fusion::log_odds(m->score(features))));
  v.fused = fusion_.fuse(v.stacked);
  v.p_pos = softmax2(v.fused).p_pos;
  v.accepted = fusion::accept(v.fused, theta_);
  return v;
}

wire::VerifyResponse VerificationService::verify(const wire::VerifyRequest& request) const {
  wire::VerifyRequest req = request;
  if (req.config_id != kCloudConfigId)
    throw Error(Errc::config_mismatch, "request carries config " + std::to_string(req.config_id));
  if (req.obfuscated()) {
    if (!key_) throw Error(Errc::invalid_argument, "obfuscated payload but no key configured");
    wire::unseal(req, *key_);
  }
  const Verification v = verify_features(wire::request_features(req), req.device_log_odds);
  wire::VerifyResponse resp;
  resp.verdict = v.accepted ? wire::Verdict::accept : wire::Verdict::reject;
  resp.fused_p_pos = static_cast<float>(v.p_pos);
  resp.member_log_odds = v.stacked.values;
  return resp;
}

std::vector<std::uint8_t> VerificationService::handle_frame(std::span<const std::uint8_t> frame, bool* ok) const {
  wire::VerifyResponse resp;
  try {
    resp = verify(wire::decode_request(frame));
    if (ok) *ok = true;
  } catch (const Error& e) {
    resp = {};
    resp.status = e.code() == Errc::config_mismatch ? wire::Status::unsupported_config : wire::Status::malformed_request;
    if (ok) *ok = false;
  } catch (const std::exception&) {
    resp = {};
    resp.status = wire::Status::internal_error;
    if (ok) *ok = false;
  }
  return wire::encode_response(resp);
}

void serve_connection(transport::ByteStream& stream, const VerificationService& service) {
  try {
    while (true) {
      std::optional<std::vector<std::uint8_t>> frame;
      try {
        frame = transport::read_frame(stream);
      } catch (const Error& e) {
        if (e.code() == Errc::io_error) break;
        wire::VerifyResponse err;
        err.status = wire::Status::malformed_request;
        stream.write_all(wire::encode_response(err));
        break;
      }
      if (!frame) break;
      bool ok = false;
      stream.write_all(service.handle_frame(*frame, &ok));
      if (!ok) break;
    }
  } catch (const Error&) {
    // peer vanished while we were writing
  }
  stream.close();
}

VerificationServer::VerificationServer(std::shared_ptr<const VerificationService> service,
                                       transport::TcpListener listener)
    : service_(std::move(service)), listener_(std::move(listener)) {}

VerificationServer::~VerificationServer() { stop(); }

void VerificationServer::start() {
  loop_ = std::thread([this] { run(); });
}

void VerificationServer::run() {
  while (!stop_.load()) {
    auto conn = listener_.accept(50);
    if (!conn) continue;
    auto stream = std::make_shared<transport::TcpStream>(std::move(*conn));
    std::lock_guard lock(mu_);
    connections_.push_back(stream);
    workers_.emplace_back([stream, svc = service_] { serve_connection(*stream, *svc); });
  }
}

void VerificationServer::stop() {
  stop_.store(true);
  if (loop_.joinable()) loop_.join();
  std::lock_guard lock(mu_);
  for (auto& c : connections_) c->shutdown();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
  workers_.clear();
  connections_.clear();
  listener_.close();
}

wire::VerifyResponse VerifyClient::verify(const wire::VerifyRequest& req) {
  auto resp = exchange(wire::encode_request(req));
  if (!resp) throw Error(Errc::io_error, "server closed the connection");
  return *resp;
}

std::optional<wire::VerifyResponse> VerifyClient::exchange(std::span<const std::uint8_t> raw) {
  stream_.write_all(raw);
  auto frame = transport::read_frame(stream_);
  if (!frame) return std::nullopt;
  return wire::decode_response(*frame);
}

}  // namespace wuw
