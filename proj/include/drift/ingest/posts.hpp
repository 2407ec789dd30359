#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "absl/time/time.h"
#include "drift/common.hpp"

namespace drift::ingest {

/// Named IANA zone used to map instants onto calendar days.
struct Timezone {
  std::string name;
  absl::TimeZone zone;

  static Timezone load(const std::string& name) {
    Timezone tz{name, {}};
    if (!absl::LoadTimeZone(name, &tz.zone)) throw Error("unknown timezone '" + name + "'");
    return tz;
  }

  Date local_date(absl::Time t) const { return absl::ToCivilDay(t, zone); }
};

inline constexpr const char* kDefaultTimezone = "America/New_York";

struct PostRecord {
  std::string id;
  absl::Time timestamp;
  std::string text;
  std::optional<std::size_t> embedding_row;
};

inline absl::Time parse_instant(const std::string& text) {
  absl::Time t;
  std::string err;
  if (!absl::ParseTime(absl::RFC3339_full, text, &t, &err)) {
    throw Error("unparseable timestamp '" + text + "': " + err);
  }
  return t;
}

/// Loads a posts file: one JSON object per line with string fields
/// `id`, `created_at` (ISO-8601 with offset) and `content`.
/// Returns records sorted by (timestamp, id).
inline std::vector<PostRecord> load_posts(const std::filesystem::path& path, const Timezone& /*tz*/) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open posts file '" + path.string() + "'");
  std::vector<PostRecord> posts;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(where + ": malformed record (" + e.what() + ")");
    }
    if (!rec.is_object()) throw Error(where + ": malformed record (not an object)");
    for (const char* key : {"id", "created_at", "content"}) {
      if (!rec.contains(key) || !rec[key].is_string()) {
        throw Error(where + ": malformed record (missing string field '" + key + "')");
      }
    }
    PostRecord p;
    p.id = rec["id"].get<std::string>();
    try {
      p.timestamp = parse_instant(rec["created_at"].get<std::string>());
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    p.text = rec["content"].get<std::string>();
    if (!seen.insert(p.id).second) throw Error(where + ": duplicate id '" + p.id + "'");
    posts.push_back(std::move(p));
  }
  std::stable_sort(posts.begin(), posts.end(), [](const PostRecord& a, const PostRecord& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
  });
  return posts;
}

}  // namespace drift::ingest
