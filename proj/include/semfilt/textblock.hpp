#pragma once

// Versioned plain-text container shared by the model and classifier files:
//
//   <format tag>
//   key value            (header fields, one per line)
//   ...
//   block <name> <rows> <cols>
//   <row 0 values>       (row-major, whitespace separated, 17 significant digits)
//   ...
//   end
//
// 17 significant digits make every double round-trip bit-exactly.

#include <Eigen/Dense>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "semfilt/error.hpp"

namespace semfilt::textblock {

inline std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

class Writer {
 public:
  explicit Writer(const std::string& tag) { out_ << tag << '\n'; }

  void field(const std::string& key, const std::string& value) {
    out_ << key << ' ' << value << '\n';
  }
  void field(const std::string& key, long long value) { field(key, std::to_string(value)); }
  void field(const std::string& key, double value) { field(key, format_double(value)); }

  void block(const std::string& name, const Eigen::MatrixXd& m) {
    out_ << "block " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out_ << ' ';
        out_ << format_double(m(r, c));
      }
      out_ << '\n';
    }
  }

  /// Writes to a sibling temp file, then renames it over `path`.
  void commit(const std::filesystem::path& path) {
    out_ << "end\n";
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
      const std::string text = out_.str();
      f.write(text.data(), static_cast<std::streamsize>(text.size()));
      if (!f) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::Io, "cannot move file into place at " + path.string());
    }
  }

 private:
  std::ostringstream out_;
};

struct Document {
  std::string tag;
  std::map<std::string, std::string> fields;
  std::map<std::string, Eigen::MatrixXd> blocks;

  const std::string& field(const std::string& key) const {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::MalformedFile, "missing header field " + key);
    return it->second;
  }

  long long integer(const std::string& key) const {
    const std::string& s = field(key);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error(ErrorCode::MalformedFile, "field " + key + " is not an integer: " + s);
    }
    return v;
  }

  double real(const std::string& key) const;

  const Eigen::MatrixXd& block(const std::string& name) const {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw Error(ErrorCode::MalformedFile, "missing block " + name);
    return it->second;
  }
};

namespace detail {

inline double parse_double(const std::string& token) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::MalformedFile, "not a number: '" + token + "'");
  }
  return v;
}

}  // namespace detail

inline double Document::real(const std::string& key) const {
  return detail::parse_double(field(key));
}

/// Parses a container whose first line must equal `tag`. A first line with the
/// same family prefix but a different version yields VersionMismatch.
inline Document read(const std::filesystem::path& path, const std::string& tag) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  Document doc;
  if (!std::getline(in, doc.tag)) throw Error(ErrorCode::MalformedFile, "empty file");
  if (!doc.tag.empty() && doc.tag.back() == '\r') doc.tag.pop_back();
  if (doc.tag != tag) {
    const std::string family = tag.substr(0, tag.find('/') + 1);
    if (doc.tag.rfind(family, 0) == 0) {
      throw Error(ErrorCode::VersionMismatch,
                  "file version '" + doc.tag + "', this build reads '" + tag + "'");
    }
    throw Error(ErrorCode::VersionMismatch, "unknown format tag '" + doc.tag + "'");
  }

  std::string word;
  while (in >> word) {
    if (word == "end") return doc;
    if (word != "block") {
      std::string value;
      if (!(in >> value)) throw Error(ErrorCode::MalformedFile, "header field " + word + " has no value");
      doc.fields[word] = value;
      continue;
    }
    std::string name;
    long long rows = -1;
    long long cols = -1;
    if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0) {
      throw Error(ErrorCode::MalformedFile, "bad block header");
    }
    Eigen::MatrixXd m(rows, cols);
    for (long long r = 0; r < rows; ++r) {
      for (long long c = 0; c < cols; ++c) {
        std::string token;
        if (!(in >> token) || token == "block" || token == "end") {
          throw Error(ErrorCode::ShapeMismatch, "block " + name + " holds fewer than " +
                                                    std::to_string(rows * cols) + " values");
        }
        m(r, c) = detail::parse_double(token);
      }
    }
    doc.blocks[name] = std::move(m);
  }
  throw Error(ErrorCode::MalformedFile, "missing end marker");
}

}  // namespace semfilt::textblock
