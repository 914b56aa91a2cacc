#include "wuw/wire.hpp"

#include <cstring>

#include "wuw/bytes.hpp"
#include "wuw/error.hpp"

namespace wuw::wire {

bool VerifyResponse::operator==(const VerifyResponse& o) const {
  if (version != o.version || status != o.status || verdict != o.verdict ||
      member_log_odds.size() != o.member_log_odds.size())
    return false;
  if (std::memcmp(&fused_p_pos, &o.fused_p_pos, sizeof(float)) != 0) return false;
  return member_log_odds.empty() ||
         std::memcmp(member_log_odds.data(), o.member_log_odds.data(), member_log_odds.size() * sizeof(float)) == 0;
}

VerifyRequest make_request(const FeatureMatrix& features, float device_log_odds, std::uint64_t nonce) {
  if (features.n_frames > 0xFFFF || features.n_coeffs > 0xFFFF)
    throw Error(Errc::invalid_argument, "feature matrix too large for the wire");
  VerifyRequest req;
  req.config_id = features.config_id;
  req.nonce = nonce;
  req.device_log_odds = device_log_odds;
  req.n_frames = static_cast<std::uint16_t>(features.n_frames);
  req.n_coeffs = static_cast<std::uint16_t>(features.n_coeffs);
  req.payload.resize(features.values.size() * sizeof(float));
  if (!req.payload.empty()) std::memcpy(req.payload.data(), features.values.data(), req.payload.size());
  return req;
}

FeatureMatrix request_features(const VerifyRequest& req) {
  if (req.obfuscated()) throw Error(Errc::invalid_argument, "payload is still obfuscated");
  const std::size_t count = std::size_t{req.n_frames} * req.n_coeffs;
  if (req.payload.size() != count * sizeof(float)) throw Error(Errc::length_mismatch, "payload vs header shape");
  FeatureMatrix m;
  m.n_frames = req.n_frames;
  m.n_coeffs = req.n_coeffs;
  m.config_id = req.config_id;
  m.values.resize(count);
  if (count) std::memcpy(m.values.data(), req.payload.data(), req.payload.size());
  return m;
}

namespace {

std::vector<std::uint8_t> frame(bytes::Writer& body) {
  if (body.size() > kMaxBodyBytes) throw Error(Errc::frame_too_large, "message exceeds 16 MiB");
  bytes::Writer out;
  out.tag(kMagic);
  out.u32(static_cast<std::uint32_t>(body.size()));
  out.raw(body.buffer());
  return out.take();
}

// Checks the header and returns the body, which must fill the rest of the
// input exactly.
std::span<const std::uint8_t> unframe(std::span<const std::uint8_t> data) {
  if (data.size() < kHeaderSize) {
    if (data.size() >= kMagic.size() && std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0)
      throw Error(Errc::bad_magic, "frame does not start with WUWP");
    throw Error(Errc::truncated, "frame shorter than its header");
  }
  const std::uint32_t len = parse_header(data.first<kHeaderSize>());
  const std::size_t have = data.size() - kHeaderSize;
  if (have < len) throw Error(Errc::truncated, "body is shorter than the declared length");
  if (have > len) throw Error(Errc::length_mismatch, "bytes beyond the declared length");
  return data.subspan(kHeaderSize, len);
}

void check_version(std::uint8_t v) {
  if (v != kVersion) throw Error(Errc::version_mismatch, "unknown protocol version " + std::to_string(v));
}

}  // namespace

std::uint32_t parse_header(std::span<const std::uint8_t, kHeaderSize> header) {
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0)
    throw Error(Errc::bad_magic, "frame does not start with WUWP");
  std::uint32_t len;
  std::memcpy(&len, header.data() + 4, 4);
  if (len > kMaxBodyBytes) throw Error(Errc::frame_too_large, std::to_string(len) + "-byte body exceeds 16 MiB");
  return len;
}

std::vector<std::uint8_t> encode_request(const VerifyRequest& req) {
  if (req.payload.size() != std::size_t{req.n_frames} * req.n_coeffs * sizeof(float))
    throw Error(Errc::length_mismatch, "payload vs header shape");
  bytes::Writer body;
  body.u8(req.version);
  body.u8(req.config_id);
  body.u8(req.flags);
  body.u64(req.nonce);
  body.f32(req.device_log_odds);
  body.u16(req.n_frames);
  body.u16(req.n_coeffs);
  body.raw(req.payload);
  return frame(body);
}

VerifyRequest decode_request(std::span<const std::uint8_t> data) {
  bytes::Reader r(unframe(data));
  VerifyRequest req;
  req.version = r.u8();
  check_version(req.version);
  req.config_id = r.u8();
  req.flags = r.u8();
  req.nonce = r.u64();
  req.device_log_odds = r.f32();
  req.n_frames = r.u16();
  req.n_coeffs = r.u16();
  const std::size_t want = std::size_t{req.n_frames} * req.n_coeffs * sizeof(float);
  if (r.remaining() != want)
    throw Error(r.remaining() < want ? Errc::truncated : Errc::length_mismatch, "payload length vs header shape");
  auto payload = r.take(want);
  req.payload.assign(payload.begin(), payload.end());
  return req;
}

std::vector<std::uint8_t> encode_response(const VerifyResponse& resp) {
  if (resp.member_log_odds.size() > 0xFFFF) throw Error(Errc::invalid_argument, "too many members");
  bytes::Writer body;
  body.u8(resp.version);
  body.u8(static_cast<std::uint8_t>(resp.status));
  body.u8(static_cast<std::uint8_t>(resp.verdict));
  body.f32(resp.fused_p_pos);
  body.u16(static_cast<std::uint16_t>(resp.member_log_odds.size()));
  body.f32s(resp.member_log_odds);
  return frame(body);
}

VerifyResponse decode_response(std::span<const std::uint8_t> data) {
  bytes::Reader r(unframe(data));
  VerifyResponse resp;
  resp.version = r.u8();
  check_version(resp.version);
  const std::uint8_t status = r.u8();
  if (status > static_cast<std::uint8_t>(Status::internal_error))
    throw Error(Errc::inconsistent_metadata, "unknown response status");
  resp.status = static_cast<Status>(status);
  const std::uint8_t verdict = r.u8();
  if (verdict > 1) throw Error(Errc::inconsistent_metadata, "unknown verdict");
  resp.verdict = static_cast<Verdict>(verdict);
  resp.fused_p_pos = r.f32();
  const std::uint16_t n = r.u16();
  if (r.remaining() != std::size_t{n} * sizeof(float))
    throw Error(r.remaining() < std::size_t{n} * sizeof(float) ? Errc::truncated : Errc::length_mismatch,
                "member count vs body length");
  resp.member_log_odds = r.f32s(n);
  return resp;
}

void obfuscate_in_place(std::span<std::uint8_t> data, std::uint64_t key, std::uint64_t nonce) {
  SplitMix64 gen(key ^ nonce);
  for (std::size_t i = 0; i < data.size(); i += 8) {
    const std::uint64_t ks = gen.next();
    const std::size_t n = std::min<std::size_t>(8, data.size() - i);
    for (std::size_t b = 0; b < n; ++b) data[i + b] ^= static_cast<std::uint8_t>(ks >> (8 * b));
  }
}

std::vector<std::uint8_t> obfuscate(std::span<const std::uint8_t> data, std::uint64_t key, std::uint64_t nonce) {
  std::vector<std::uint8_t> out(data.begin(), data.end());
  obfuscate_in_place(std::span<std::uint8_t>(out), key, nonce);
  return out;
}

void seal(VerifyRequest& req, std::uint64_t key) {
  if (req.obfuscated()) throw Error(Errc::invalid_argument, "payload already obfuscated");
  obfuscate_in_place(std::span<std::uint8_t>(req.payload), key, req.nonce);
  req.flags |= kFlagObfuscated;
}

void unseal(VerifyRequest& req, std::uint64_t key) {
  if (!req.obfuscated()) return;
  obfuscate_in_place(std::span<std::uint8_t>(req.payload), key, req.nonce);
  req.flags &= static_cast<std::uint8_t>(~kFlagObfuscated);
}

}  // namespace wuw::wire
