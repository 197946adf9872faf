#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rbmlab {

/// Shortest decimal text that round-trips the double, so identical values
/// always produce identical bytes.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Row-at-a-time CSV writer. Fields containing separators or quotes are
/// quoted.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    row(header);
  }

  CsvWriter& cell(std::string_view s) {
    if (!first_) out_ << ',';
    first_ = false;
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
      out_ << s;
    } else {
      out_ << '"';
      for (char c : s) {
        if (c == '"') out_ << '"';
        out_ << c;
      }
      out_ << '"';
    }
    return *this;
  }
  CsvWriter& cell(const std::string& s) { return cell(std::string_view(s)); }
  CsvWriter& cell(const char* s) { return cell(std::string_view(s)); }
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  CsvWriter& cell(std::uint64_t v) { return cell(std::to_string(v)); }
  CsvWriter& cell(int v) { return cell(std::to_string(v)); }
  CsvWriter& cell(bool v) { return cell(v ? "1" : "0"); }
  CsvWriter& empty() { return cell(std::string_view()); }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

  void row(const std::vector<std::string>& fields) {
    for (const auto& f : fields) cell(f);
    end_row();
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  bool first_ = true;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace rbmlab
