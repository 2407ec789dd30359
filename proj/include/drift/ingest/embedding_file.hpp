#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "drift/common.hpp"
#include "drift/hash.hpp"
#include "drift/ingest/posts.hpp"

namespace drift::ingest {

// Embedding file layouts.
//
// Text:
//   #embeddings count=<n> dim=<d> hash=<sha256 of posts file> [model=<id>]
//   <post id>,<v_1>,...,<v_d>            (n lines)
//
// Binary (all integers and floats little-endian):
//   "DRFTEMB1"                           8-byte magic
//   u64 count, u64 dim
//   u32 len + bytes                      corpus hash
//   u32 len + bytes                      model id (may be empty)
//   n x { u32 len + id bytes, d x f64 }

inline constexpr char kEmbeddingMagic[8] = {'D', 'R', 'F', 'T', 'E', 'M', 'B', '1'};

struct EmbeddingFile {
  std::string corpus_hash;
  std::string model;
  std::vector<std::string> ids;
  Eigen::MatrixXd values;  // ids.size() x dim

  std::size_t count() const { return ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary embedding I/O assumes a little-endian host");

template <class T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("embedding file truncated while reading " + what);
  return v;
}

inline std::string read_blob(std::istream& in, const std::string& what) {
  const auto len = read_le<std::uint32_t>(in, what + " length");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) throw Error("embedding file truncated while reading " + what);
  return s;
}

inline void write_blob(std::ostream& out, const std::string& s) {
  write_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline EmbeddingFile read_binary(std::istream& in) {
  EmbeddingFile f;
  const auto count = read_le<std::uint64_t>(in, "count");
  const auto dim = read_le<std::uint64_t>(in, "dim");
  f.corpus_hash = read_blob(in, "hash");
  f.model = read_blob(in, "model");
  f.ids.reserve(count);
  f.values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::uint64_t r = 0; r < count; ++r) {
    f.ids.push_back(read_blob(in, "id of row " + std::to_string(r)));
    for (std::uint64_t c = 0; c < dim; ++c) {
      f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          read_le<double>(in, "row " + std::to_string(r));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("embedding file has trailing bytes after " + std::to_string(count) + " rows");
  return f;
}

inline EmbeddingFile read_text(std::istream& in) {
  std::string line;
  std::getline(in, line);
  std::istringstream hdr(line);
  std::string tag;
  hdr >> tag;
  if (tag != "#embeddings") throw Error("embedding file header must start with '#embeddings'");
  long long count = -1;
  long long dim = -1;
  EmbeddingFile f;
  for (std::string kv; hdr >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("embedding header token '" + kv + "' is not key=value");
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    if (key == "count") {
      count = std::stoll(val);
    } else if (key == "dim") {
      dim = std::stoll(val);
    } else if (key == "hash") {
      f.corpus_hash = val;
    } else if (key == "model") {
      f.model = val;
    }
  }
  if (count < 0 || dim <= 0) throw Error("embedding header must carry count and dim");
  f.values.resize(count, dim);
  std::size_t lineno = 1;
  long long row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row >= count) throw Error("count mismatch: more than " + std::to_string(count) + " vectors");
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error("embedding line " + std::to_string(lineno) + ": missing id");
    f.ids.push_back(line.substr(0, comma));
    const char* p = line.data() + comma + 1;
    const char* end = line.data() + line.size();
    for (long long c = 0; c < dim; ++c) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{}) throw Error("embedding line " + std::to_string(lineno) + ": bad value in column " + std::to_string(c));
      f.values(row, c) = v;
      p = next;
      if (c + 1 < dim) {
        if (p == end || *p != ',') throw Error("embedding line " + std::to_string(lineno) + ": dimension mismatch");
        ++p;
      }
    }
    if (p != end) throw Error("embedding line " + std::to_string(lineno) + ": dimension mismatch");
    ++row;
  }
  if (row != count) throw Error("count mismatch: header says " + std::to_string(count) + ", found " + std::to_string(row));
  return f;
}

}  // namespace detail

/// Reads either layout, detected from the leading bytes.
inline EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file '" + path.string() + "'");
  char magic[8] = {};
  in.read(magic, sizeof magic);
  try {
    if (in.gcount() == 8 && std::memcmp(magic, kEmbeddingMagic, 8) == 0) return detail::read_binary(in);
    in.clear();
    in.seekg(0);
    return detail::read_text(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_embedding_file(const std::filesystem::path& path, const EmbeddingFile& f, bool binary) {
  if (f.ids.size() != static_cast<std::size_t>(f.values.rows())) throw Error("embedding ids and rows differ in count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file '" + path.string() + "'");
  if (binary) {
    out.write(kEmbeddingMagic, 8);
    detail::write_le(out, static_cast<std::uint64_t>(f.count()));
    detail::write_le(out, static_cast<std::uint64_t>(f.dim()));
    detail::write_blob(out, f.corpus_hash);
    detail::write_blob(out, f.model);
    for (std::size_t r = 0; r < f.count(); ++r) {
      detail::write_blob(out, f.ids[r]);
      for (std::size_t c = 0; c < f.dim(); ++c) {
        detail::write_le(out, f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      }
    }
    return;
  }
  out << "#embeddings count=" << f.count() << " dim=" << f.dim() << " hash=" << f.corpus_hash;
  if (!f.model.empty()) out << " model=" << f.model;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < f.count(); ++r) {
    out << f.ids[r];
    for (std::size_t c = 0; c < f.dim(); ++c) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

/// Sets `embedding_row` on every post from the file's id column. Every post
/// needs a vector and every vector must belong to a post.
inline void join_embeddings(std::vector<PostRecord>& posts, const EmbeddingFile& f) {
  std::unordered_map<std::string, std::size_t> row_of;
  row_of.reserve(f.ids.size());
  for (std::size_t r = 0; r < f.ids.size(); ++r) {
    if (!row_of.emplace(f.ids[r], r).second) throw Error("embedding file repeats id '" + f.ids[r] + "'");
  }
  if (f.ids.size() != posts.size()) {
    throw Error("count mismatch: " + std::to_string(f.ids.size()) + " vectors for " + std::to_string(posts.size()) + " posts");
  }
  for (auto& p : posts) {
    auto it = row_of.find(p.id);
    if (it == row_of.end()) throw Error("no embedding for post id '" + p.id + "'");
    p.embedding_row = it->second;
  }
}

/// Checks an embedding file against its posts file: readable layout, count,
/// dimension, hash linkage, id coverage and finite values. Returns one line
/// per problem; empty means the pair is consistent.
inline std::vector<std::string> verify_embedding_file(const std::filesystem::path& path, const std::filesystem::path& posts_path,
                                                      std::size_t expected_dim = 0) {
  std::vector<std::string> issues;
  EmbeddingFile f;
  try {
    f = read_embedding_file(path);
  } catch (const Error& e) {
    issues.push_back(e.what());
    return issues;
  }
  if (expected_dim && f.dim() != expected_dim) {
    issues.push_back("dimension mismatch: " + std::to_string(f.dim()) + ", expected " + std::to_string(expected_dim));
  }
  for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
    if (!f.values.row(r).allFinite()) issues.push_back("non-finite at row " + std::to_string(r));
  }
  std::vector<PostRecord> posts;
  try {
    posts = load_posts(posts_path, Timezone{});
  } catch (const Error& e) {
    issues.push_back(e.what());
    return issues;
  }
  const auto hash = sha256_file(posts_path);
  if (f.corpus_hash != hash) issues.push_back("hash mismatch: header " + f.corpus_hash + ", posts file " + hash);
  try {
    join_embeddings(posts, f);
  } catch (const Error& e) {
    issues.push_back(e.what());
  }
  return issues;
}

}  // namespace drift::ingest
