#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "wuw/features.hpp"

// Device <-> server verification protocol. Only feature matrices ever cross
// the wire; no message type has a field for audio samples.
//
// Frame: "WUWP" | u32 LE body length | body. Bodies are little-endian:
//   request:  u8 version | u8 config_id | u8 flags | u64 nonce |
//             f32 device_log_odds | u16 n_frames | u16 n_coeffs |
//             n_frames * n_coeffs f32 payload (row-major)
//   response: u8 version | u8 status | u8 verdict | f32 fused_p_pos |
//             u16 n_members | n_members f32 member log-odds
namespace wuw::wire {

inline constexpr std::string_view kMagic = "WUWP";
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::uint32_t kMaxBodyBytes = 16u * 1024u * 1024u;
inline constexpr std::uint8_t kFlagObfuscated = 0x01;
inline constexpr std::size_t kRequestFixedBytes = 1 + 1 + 1 + 8 + 4 + 2 + 2;

struct VerifyRequest {
  std::uint8_t version = kVersion;
  std::uint8_t config_id = kCloudConfigId;
  std::uint8_t flags = 0;
  std::uint64_t nonce = 0;
  float device_log_odds = 0.0f;
  std::uint16_t n_frames = 0;
  std::uint16_t n_coeffs = 0;
  // Raw payload bytes as carried on the wire (possibly obfuscated).
  std::vector<std::uint8_t> payload;

  bool obfuscated() const { return (flags & kFlagObfuscated) != 0; }
  bool operator==(const VerifyRequest&) const = default;
};

enum class Verdict : std::uint8_t { reject = 0, accept = 1 };

enum class Status : std::uint8_t {
  ok = 0,
  malformed_request = 1,
  unsupported_config = 2,
  internal_error = 3,
};

struct VerifyResponse {
  std::uint8_t version = kVersion;
  Status status = Status::ok;
  Verdict verdict = Verdict::reject;
  float fused_p_pos = 0.0f;
  std::vector<float> member_log_odds;

  bool operator==(const VerifyResponse& o) const;
};

// Packs a feature matrix into a plaintext request.
VerifyRequest make_request(const FeatureMatrix& features, float device_log_odds, std::uint64_t nonce);

// Unpacks the payload, which must be plaintext (flag cleared).
FeatureMatrix request_features(const VerifyRequest& req);

std::vector<std::uint8_t> encode_request(const VerifyRequest& req);
std::vector<std::uint8_t> encode_response(const VerifyResponse& resp);

// Decoders accept exactly one complete frame and never read past it.
// Errors: bad_magic, frame_too_large (body > 16 MiB), truncated,
// length_mismatch, version_mismatch.
VerifyRequest decode_request(std::span<const std::uint8_t> frame);
VerifyResponse decode_response(std::span<const std::uint8_t> frame);

// Validates the 8-byte header and returns the body length.
std::uint32_t parse_header(std::span<const std::uint8_t, kHeaderSize> header);

// XOR with a splitmix64 keystream seeded by key ^ nonce. Involutive.
// This is obfuscation, not encryption; use a secure transport in production.
void obfuscate_in_place(std::span<std::uint8_t> data, std::uint64_t key, std::uint64_t nonce);
std::vector<std::uint8_t> obfuscate(std::span<const std::uint8_t> data, std::uint64_t key, std::uint64_t nonce);

// Obfuscates the payload in place and toggles the flag bit.
void seal(VerifyRequest& req, std::uint64_t key);
void unseal(VerifyRequest& req, std::uint64_t key);

// splitmix64 step: state += golden gamma, then the standard finalizer.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace wuw::wire
