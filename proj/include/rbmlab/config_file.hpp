#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

// Reader for the experiment config: a TOML subset.
//
//   # comment
//   key = value
//   [section]          [section.sub]
//
// Values are numbers (decimal, or 0x hex integers), "strings", true/false,
// [arrays] (possibly nested, possibly spanning lines) and { inline = tables }.
// Every key must be consumed by the schema; leftovers are reported as unknown
// with their line.

namespace rbmlab::config {

struct ConfigError : std::runtime_error {
  ConfigError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line(line) {}
  std::size_t line;
};

struct Value;
using Array = std::vector<Value>;

struct Table {
  struct Entry {
    std::shared_ptr<Value> value;
    std::size_t line = 0;
  };
  std::map<std::string, Entry> entries;
  std::size_t line = 0;
};

struct Number {
  double value = 0.0;
  std::string text;  // as written, for exact integer parsing
};

struct Value {
  std::variant<Number, std::string, bool, Array, Table> data;
  std::size_t line = 0;

  [[nodiscard]] const char* type_name() const {
    switch (data.index()) {
      case 0: return "number";
      case 1: return "string";
      case 2: return "boolean";
      case 3: return "array";
      default: return "table";
    }
  }
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : src_(text) {}

  Table parse() {
    Table root;
    root.line = 1;
    Table* current = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        skip_inline_space();
        const std::string name = read_dotted_key();
        skip_inline_space();
        expect(']');
        current = &open_section(root, name);
        end_of_line();
        continue;
      }
      const std::size_t key_line = line_;
      const std::string key = read_key();
      skip_inline_space();
      expect('=');
      skip_inline_space();
      Value v = read_value();
      insert(*current, key, std::move(v), key_line);
      end_of_line();
    }
    return root;
  }

 private:
  [[nodiscard]] bool at_end() const { return pos_ >= src_.size(); }
  [[nodiscard]] char peek() const { return at_end() ? '\0' : src_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(line_, what); }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'" + found());
    ++pos_;
  }

  [[nodiscard]] std::string found() const {
    if (at_end()) return " but reached end of file";
    if (peek() == '\n') return " but reached end of line";
    return std::string(" but found '") + peek() + "'";
  }

  void skip_inline_space() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }

  void skip_blank_lines() {
    while (!at_end()) {
      skip_inline_space();
      skip_comment();
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  // whitespace, comments and newlines inside arrays
  void skip_any_space() {
    while (!at_end()) {
      skip_inline_space();
      skip_comment();
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (at_end()) return;
    if (peek() != '\n') fail("unexpected trailing text" + found());
    ++pos_;
    ++line_;
  }

  static bool key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string read_key() {
    const std::size_t start = pos_;
    while (!at_end() && key_char(peek())) ++pos_;
    if (pos_ == start) fail("expected a key" + found());
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string read_dotted_key() {
    std::string name = read_key();
    while (peek() == '.') {
      ++pos_;
      name += "." + read_key();
    }
    return name;
  }

  Table& open_section(Table& root, const std::string& dotted) {
    Table* t = &root;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = dotted.find('.', start);
      const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      auto it = t->entries.find(part);
      if (it == t->entries.end()) {
        Value v{Table{{}, line_}, line_};
        it = t->entries.emplace(part, Table::Entry{std::make_shared<Value>(std::move(v)), line_}).first;
      } else if (!std::holds_alternative<Table>(it->second.value->data)) {
        fail("'" + part + "' is already defined as a " + it->second.value->type_name());
      } else if (dot == std::string::npos) {
        fail("section [" + dotted + "] is defined twice");
      }
      t = &std::get<Table>(it->second.value->data);
      if (dot == std::string::npos) return *t;
      start = dot + 1;
    }
  }

  void insert(Table& t, const std::string& key, Value v, std::size_t line) {
    if (t.entries.count(key)) throw ConfigError(line, "duplicate key '" + key + "'");
    t.entries.emplace(key, Table::Entry{std::make_shared<Value>(std::move(v)), line});
  }

  Value read_value() {
    Value v;
    v.line = line_;
    const char c = peek();
    if (c == '"') {
      v.data = read_string();
    } else if (c == '[') {
      v.data = read_array();
    } else if (c == '{') {
      v.data = read_inline_table();
    } else if (src_.substr(pos_, 4) == "true" && !key_char(char_at(pos_ + 4))) {
      pos_ += 4;
      v.data = true;
    } else if (src_.substr(pos_, 5) == "false" && !key_char(char_at(pos_ + 5))) {
      pos_ += 5;
      v.data = false;
    } else {
      v.data = read_number();
    }
    return v;
  }

  [[nodiscard]] char char_at(std::size_t i) const { return i < src_.size() ? src_[i] : '\0'; }

  std::string read_string() {
    expect('"');
    std::string s;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = src_[pos_++];
      if (c == '"') return s;
      if (c == '\\') {
        const char e = peek();
        ++pos_;
        switch (e) {
          case '"': s += '"'; break;
          case '\\': s += '\\'; break;
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        s += c;
      }
    }
  }

  Number read_number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' ||
                         peek() == '+' || peek() == '-' || peek() == '_')) {
      ++pos_;
    }
    std::string text(src_.substr(start, pos_ - start));
    std::erase(text, '_');
    if (text.empty()) fail("expected a value" + found());
    Number n;
    n.text = text;
    const char* b = text.data();
    const char* e = b + text.size();
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
      std::uint64_t u = 0;
      auto [ptr, ec] = std::from_chars(b + 2, e, u, 16);
      if (ec != std::errc{} || ptr != e) fail("'" + text + "' is not a hexadecimal integer");
      n.value = static_cast<double>(u);
      return n;
    }
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, n.value);
    if (ec != std::errc{} || ptr != e) fail("'" + text + "' is not a number");
    return n;
  }

  Array read_array() {
    const std::size_t open = line_;
    expect('[');
    Array a;
    skip_any_space();
    while (peek() != ']') {
      if (at_end()) throw ConfigError(open, "unterminated array");
      a.push_back(read_value());
      skip_any_space();
      if (peek() == ',') {
        ++pos_;
        skip_any_space();
      } else if (at_end()) {
        throw ConfigError(open, "unterminated array");
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array" + found());
      }
    }
    ++pos_;
    return a;
  }

  Table read_inline_table() {
    expect('{');
    Table t;
    t.line = line_;
    skip_inline_space();
    while (peek() != '}') {
      const std::size_t key_line = line_;
      const std::string key = read_key();
      skip_inline_space();
      expect('=');
      skip_inline_space();
      insert(t, key, read_value(), key_line);
      skip_inline_space();
      if (peek() == ',') {
        ++pos_;
        skip_inline_space();
      } else if (peek() != '}') {
        fail("expected ',' or '}' in inline table" + found());
      }
    }
    ++pos_;
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace detail

inline Table parse(std::string_view text) { return detail::Parser(text).parse(); }

/// Typed access to one table. Every key read is marked; finish() rejects
/// whatever is left, so misspelled keys never fall back to defaults.
class View {
 public:
  View(const Table& t, std::string path) : table_(&t), path_(std::move(path)) {}

  [[nodiscard]] bool has(const std::string& key) const { return table_->entries.count(key) != 0; }
  [[nodiscard]] const std::string& path() const noexcept { return path_; }
  [[nodiscard]] std::size_t line() const noexcept { return table_->line; }

  [[nodiscard]] std::size_t line_of(const std::string& key) const {
    auto it = table_->entries.find(key);
    return it == table_->entries.end() ? table_->line : it->second.line;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(line_of(key), field(key) + ": " + what);
  }

  [[nodiscard]] std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Value* find(const std::string& key) {
    auto it = table_->entries.find(key);
    if (it == table_->entries.end()) return nullptr;
    used_.insert(key);
    return it->second.value.get();
  }

  const Value& require(const std::string& key) {
    const Value* v = find(key);
    if (v == nullptr) throw ConfigError(table_->line, "missing required field '" + field(key) + "'");
    return *v;
  }

  double number(const std::string& key, double fallback) {
    const Value* v = find(key);
    return v ? as_number(key, *v) : fallback;
  }
  double number(const std::string& key) { return as_number(key, require(key)); }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    const Value* v = find(key);
    return v ? as_u64(key, *v) : fallback;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const std::uint64_t v = u64(key, fallback);
    return static_cast<std::size_t>(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    const Value* v = find(key);
    if (!v) return fallback;
    if (const bool* b = std::get_if<bool>(&v->data)) return *b;
    fail(key, std::string("expected true or false, got a ") + v->type_name());
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const Value* v = find(key);
    return v ? as_string(key, *v) : fallback;
  }
  std::string string(const std::string& key) { return as_string(key, require(key)); }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback = {}) {
    const Value* v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const Value& e : as_array(key, *v)) out.push_back(as_number(key, e));
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback = {}) {
    const Value* v = find(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    for (const Value& e : as_array(key, *v)) out.push_back(as_string(key, e));
    return out;
  }

  /// Array of numeric arrays, e.g. a list of points.
  std::vector<std::vector<double>> rows(const std::string& key, std::vector<std::vector<double>> fallback = {}) {
    const Value* v = find(key);
    if (!v) return fallback;
    std::vector<std::vector<double>> out;
    for (const Value& r : as_array(key, *v)) {
      std::vector<double> row;
      for (const Value& e : as_array(key, r)) row.push_back(as_number(key, e));
      out.push_back(std::move(row));
    }
    return out;
  }

  /// Sub-table (section or inline table); nullopt when absent.
  std::optional<View> table(const std::string& key) {
    const Value* v = find(key);
    if (!v) return std::nullopt;
    const Table* t = std::get_if<Table>(&v->data);
    if (!t) fail(key, std::string("expected a table, got a ") + v->type_name());
    return View(*t, field(key));
  }

  [[nodiscard]] std::vector<std::string> keys() const {
    std::vector<std::string> k;
    for (const auto& [name, e] : table_->entries) k.push_back(name);
    return k;
  }

  void finish() const {
    for (const auto& [key, e] : table_->entries) {
      if (!used_.count(key)) throw ConfigError(e.line, "unknown field '" + field(key) + "'");
    }
  }

 private:
  double as_number(const std::string& key, const Value& v) const {
    if (const Number* n = std::get_if<Number>(&v.data)) return n->value;
    throw ConfigError(v.line, field(key) + ": expected a number, got a " + v.type_name());
  }

  std::uint64_t as_u64(const std::string& key, const Value& v) const {
    const Number* n = std::get_if<Number>(&v.data);
    if (!n) throw ConfigError(v.line, field(key) + ": expected an integer, got a " + v.type_name());
    std::uint64_t out = 0;
    const char* b = n->text.data();
    const char* e = b + n->text.size();
    int base = 10;
    if (n->text.size() > 2 && n->text[0] == '0' && (n->text[1] == 'x' || n->text[1] == 'X')) {
      b += 2;
      base = 16;
    }
    auto [ptr, ec] = std::from_chars(b, e, out, base);
    if (ec != std::errc{} || ptr != e) {
      throw ConfigError(v.line, field(key) + ": '" + n->text + "' is not a nonnegative integer");
    }
    return out;
  }

  std::string as_string(const std::string& key, const Value& v) const {
    if (const std::string* s = std::get_if<std::string>(&v.data)) return *s;
    throw ConfigError(v.line, field(key) + ": expected a string, got a " + v.type_name());
  }

  const Array& as_array(const std::string& key, const Value& v) const {
    if (const Array* a = std::get_if<Array>(&v.data)) return *a;
    throw ConfigError(v.line, field(key) + ": expected an array, got a " + v.type_name());
  }

  const Table* table_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace rbmlab::config
