#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "drift/common.hpp"
#include "drift/hash.hpp"

#ifndef DRIFT_VERSION
#define DRIFT_VERSION "0.0.0"
#endif

namespace drift::pipeline {

using json = nlohmann::json;

inline constexpr const char* kVersion = DRIFT_VERSION;

/// Fixed 3-decimal cell, as in the published tables; empty when missing.
inline std::string fmt3(double v) {
  if (is_missing(v)) return {};
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  if (std::string(buf) == "-0.000") return "0.000";
  return buf;
}

inline std::string fmt_p(double p) {
  if (is_missing(p)) return {};
  return p < 0.001 ? "<0.001" : fmt3(p);
}

/// Shortest round-trip representation, for data files.
inline std::string fmt_full(double v) {
  if (is_missing(v)) return {};
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline json num_or_null(double v) { return is_missing(v) ? json(nullptr) : json(v); }

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Content hashes of the inputs a stage actually read, keyed by the role
/// under which they were read.
class InputLedger {
 public:
  void record(const std::string& role, const std::filesystem::path& path) {
    if (entries_.count(role)) return;
    entries_[role] = {path.filename().string(), sha256_file(path)};
  }
  bool contains(const std::string& role) const { return entries_.count(role) > 0; }
  json to_json() const {
    json j = json::object();
    for (const auto& [role, e] : entries_) j[role] = {{"file", e.first}, {"sha256", e.second}};
    return j;
  }

 private:
  std::map<std::string, std::pair<std::string, std::string>> entries_;
};

/// Provenance block shared by every file of one result bundle.
struct Provenance {
  json inputs;
  json config;
  std::string stage;
  std::vector<std::string> warnings;

  std::string hash() const {
    return sha256_hex(json{{"inputs", inputs}, {"config", config}, {"version", kVersion}}.dump());
  }
  json to_json() const {
    return json{{"inputs", inputs},  {"config", config},     {"version", kVersion},
                {"stage", stage},    {"warnings", warnings}, {"provenance_sha256", hash()}};
  }
  std::string csv_line() const {
    return std::string("# drift ") + kVersion + " stage=" + stage + " provenance_sha256=" + hash() + "\n";
  }
};

/// A published table: display cells for the CSV plus, for every numeric
/// cell, the full-precision value and where it came from.
class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  struct Cell {
    std::string text;
    json value;        // full-precision number, string or null
    std::string spec;  // regression id the number belongs to
    std::string label; // coefficient label or statistic name
  };

  void add_row(std::vector<Cell> cells) {
    if (cells.size() != columns_.size()) throw Error("table row has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(columns_.size()));
    rows_.push_back(std::move(cells));
  }

  static Cell text(std::string s) { return {s, json(s), {}, {}}; }
  static Cell number(double v, const std::string& spec, const std::string& label) {
    return {fmt3(v), num_or_null(v), spec, label};
  }
  static Cell pvalue(double v, const std::string& spec, const std::string& label) {
    return {fmt_p(v), num_or_null(v), spec, label};
  }
  static Cell count(std::size_t n, const std::string& spec) { return {std::to_string(n), json(n), spec, "n"}; }

  std::string csv(const Provenance& prov) const {
    std::string out = prov.csv_line();
    for (std::size_t c = 0; c < columns_.size(); ++c) out += (c ? "," : "") + csv_escape(columns_[c]);
    out += '\n';
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + csv_escape(r[c].text);
      out += '\n';
    }
    return out;
  }

  json sidecar(const Provenance& prov) const {
    json rows = json::array();
    for (const auto& r : rows_) {
      json cells = json::array();
      for (std::size_t c = 0; c < r.size(); ++c) {
        json cell{{"column", columns_[c]}, {"text", r[c].text}, {"value", r[c].value}};
        if (!r[c].spec.empty()) cell["spec_id"] = r[c].spec;
        if (!r[c].label.empty()) cell["label"] = r[c].label;
        cells.push_back(std::move(cell));
      }
      rows.push_back(std::move(cells));
    }
    return json{{"provenance", prov.to_json()}, {"columns", columns_}, {"rows", rows}};
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

/// Collects a stage's outputs in a staging directory next to the output
/// directory and moves them into place only on commit. Anything not
/// committed is deleted, so a failed run leaves no partial files.
class StagedOutput {
 public:
  explicit StagedOutput(std::filesystem::path output_dir) : final_(std::move(output_dir)) {
    std::filesystem::create_directories(final_.parent_path().empty() ? "." : final_.parent_path());
    staging_ = final_;
    staging_ += ".staging";
    std::filesystem::remove_all(staging_);
    std::filesystem::create_directories(staging_);
  }
  ~StagedOutput() {
    std::error_code ec;
    std::filesystem::remove_all(staging_, ec);
  }
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  void write(const std::string& relative, const std::string& body) {
    const auto path = staging_ / relative;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw Error("cannot write output '" + path.string() + "'");
    if (std::find(files_.begin(), files_.end(), relative) == files_.end()) files_.push_back(relative);
  }
  void write_json(const std::string& relative, const json& j) { write(relative, j.dump(2) + "\n"); }
  void write_table(const std::string& stem, const Table& t, const Provenance& prov) {
    write(stem + ".csv", t.csv(prov));
    write_json(stem + ".json", t.sidecar(prov));
  }

  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& staging() const { return staging_; }

  /// Moves every staged file into the output directory, replacing files of
  /// the same name and leaving other files there untouched.
  void commit() {
    for (const auto& rel : files_) {
      const auto dst = final_ / rel;
      std::filesystem::create_directories(dst.parent_path());
      std::filesystem::rename(staging_ / rel, dst);
    }
    files_.clear();
  }

 private:
  std::filesystem::path final_;
  std::filesystem::path staging_;
  std::vector<std::string> files_;
};

}  // namespace drift::pipeline
