#pragma once

#include <stdexcept>
#include <string>

namespace wuw {

// Error categories. The CLI maps each one to an exit code.
enum class Errc {
  // audio / data
  file_not_found,
  unsupported_channels,
  unsupported_encoding,
  malformed_wav,
  empty_clip,
  rate_mismatch,
  clip_too_short,
  invalid_argument,
  shape_mismatch,
  single_class,
  manifest_error,
  // model files
  bad_magic,
  version_mismatch,
  truncated,
  inconsistent_metadata,
  config_mismatch,
  member_mismatch,
  // wire protocol
  length_mismatch,
  frame_too_large,
  io_error,
};

const char* errc_name(Errc code) noexcept;

// True for categories that belong to model files and the wire protocol;
// everything else is a data error.
bool is_model_or_protocol(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace wuw
