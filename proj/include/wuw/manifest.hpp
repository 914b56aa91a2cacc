#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wuw/audio.hpp"

namespace wuw {

enum class ClipLabel { wuw, other, noise, rir };
enum class Split { train, valid, test };

std::optional<ClipLabel> parse_label(std::string_view s);
std::optional<Split> parse_split(std::string_view s);
const char* to_string(ClipLabel l);
const char* to_string(Split s);

struct ManifestEntry {
  std::string path;
  ClipLabel label = ClipLabel::other;
  std::optional<AlignmentSpan> span;
  Split split = Split::train;
};

// JSONL, one object per line: {"path", "label", "split", optional
// "start_s"/"end_s"}. Blank lines are skipped. Relative paths are resolved
// against the manifest's directory. Errors name the 1-based line.
// With require_alignment, train/valid wuw entries must carry a span.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path, bool require_alignment = false);
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {},
                                          bool require_alignment = false);

std::string to_jsonl(const std::vector<ManifestEntry>& entries);

}  // namespace wuw
