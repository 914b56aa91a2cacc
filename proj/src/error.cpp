#include "wuw/error.hpp"

namespace wuw {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::file_not_found: return "file not found";
    case Errc::unsupported_channels: return "unsupported channel count";
    case Errc::unsupported_encoding: return "unsupported encoding";
    case Errc::malformed_wav: return "malformed wav";
    case Errc::empty_clip: return "empty clip";
    case Errc::rate_mismatch: return "sample rate mismatch";
    case Errc::clip_too_short: return "clip too short";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::single_class: return "single class";
    case Errc::manifest_error: return "manifest error";
    case Errc::bad_magic: return "bad magic";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::truncated: return "truncated";
    case Errc::inconsistent_metadata: return "inconsistent metadata";
    case Errc::config_mismatch: return "config mismatch";
    case Errc::member_mismatch: return "member mismatch";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::frame_too_large: return "frame too large";
    case Errc::io_error: return "i/o error";
  }
  return "unknown";
}

bool is_model_or_protocol(Errc code) noexcept {
  switch (code) {
    case Errc::bad_magic:
    case Errc::version_mismatch:
    case Errc::truncated:
    case Errc::inconsistent_metadata:
    case Errc::config_mismatch:
    case Errc::member_mismatch:
    case Errc::length_mismatch:
    case Errc::frame_too_large:
    case Errc::io_error:
      return true;
    default:
      return false;
  }
}

}  // namespace wuw
