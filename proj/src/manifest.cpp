#include "wuw/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wuw/error.hpp"

namespace wuw {

std::optional<ClipLabel> parse_label(std::string_view s) {
  if (s == "wuw") return ClipLabel::wuw;
  if (s == "other") return ClipLabel::other;
  if (s == "noise") return ClipLabel::noise;
  if (s == "rir") return ClipLabel::rir;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  return std::nullopt;
}

const char* to_string(ClipLabel l) {
  switch (l) {
    case ClipLabel::wuw: return "wuw";
    case ClipLabel::other: return "other";
    case ClipLabel::noise: return "noise";
    case ClipLabel::rir: return "rir";
  }
  return "?";
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                                          bool require_alignment) {
  std::vector<ManifestEntry> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    auto fail = [&](const std::string& why) -> void {
      throw Error(Errc::manifest_error, "line " + std::to_string(line_no) + ": " + why);
    };
    const auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) fail("not a JSON object");

    ManifestEntry e;
    if (!obj.contains("path") || !obj["path"].is_string() || obj["path"].get<std::string>().empty())
      fail("missing path");
    std::filesystem::path p = obj["path"].get<std::string>();
    e.path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();

    if (!obj.contains("label") || !obj["label"].is_string()) fail("missing label");
    const auto label = parse_label(obj["label"].get<std::string>());
    if (!label) fail("unknown label \"" + obj["label"].get<std::string>() + "\"");
    e.label = *label;

    if (obj.contains("split")) {
      const auto split = obj["split"].is_string() ? parse_split(obj["split"].get<std::string>()) : std::nullopt;
      if (!split) fail("unknown split");
      e.split = *split;
    }

    const bool has_start = obj.contains("start_s"), has_end = obj.contains("end_s");
    if (has_start != has_end) fail("start_s and end_s must appear together");
    if (has_start) {
      if (!obj["start_s"].is_number() || !obj["end_s"].is_number()) fail("span bounds must be numbers");
      const double s = obj["start_s"].get<double>(), t = obj["end_s"].get<double>();
      if (s < 0) fail("start_s < 0");
      if (!(t > s)) fail("end_s <= start_s");
      e.span = AlignmentSpan{s, t};
    }
    if (require_alignment && e.label == ClipLabel::wuw && e.split != Split::test && !e.span)
      fail("wuw entry without an alignment span");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path, bool require_alignment) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::file_not_found, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), require_alignment);
}

std::string to_jsonl(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["path"] = e.path;
    j["label"] = to_string(e.label);
    j["split"] = to_string(e.split);
    if (e.span) {
      j["start_s"] = e.span->start_s;
      j["end_s"] = e.span->end_s;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace wuw
