#pragma once

// Minimal TOML reader covering the subset task configs use: [tables],
// [[arrays of tables]], bare/quoted keys, strings, integers, floats,
// booleans, homogeneous arrays (multi-line allowed), and # comments.
// Dates, inline tables, and dotted keys are rejected with a ParseError.

#include <cctype>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "demoforge/error.hpp"

namespace demoforge::toml {

class Value;
using Table = std::map<std::string, Value>;
using Array = std::vector<Value>;

class Value {
 public:
  using Storage = std::variant<std::string, std::int64_t, double, bool, Array, Table>;

  Value() : storage_(Table{}) {}
  Value(Storage s) : storage_(std::move(s)) {}

  bool is_table() const { return std::holds_alternative<Table>(storage_); }
  bool is_array() const { return std::holds_alternative<Array>(storage_); }
  bool is_string() const { return std::holds_alternative<std::string>(storage_); }
  bool is_number() const {
    return std::holds_alternative<std::int64_t>(storage_) || std::holds_alternative<double>(storage_);
  }
  bool is_bool() const { return std::holds_alternative<bool>(storage_); }

  const Table& table() const { return expect<Table>("table"); }
  Table& table() { return std::get<Table>(storage_); }
  const Array& array() const { return expect<Array>("array"); }
  const std::string& str() const { return expect<std::string>("string"); }
  bool boolean() const { return expect<bool>("boolean"); }

  double number() const {
    if (auto* i = std::get_if<std::int64_t>(&storage_)) return static_cast<double>(*i);
    return expect<double>("number");
  }

  std::int64_t integer() const {
    if (auto* d = std::get_if<double>(&storage_)) return static_cast<std::int64_t>(*d);
    return expect<std::int64_t>("integer");
  }

 private:
  template <typename T>
  const T& expect(const char* what) const {
    if (auto* v = std::get_if<T>(&storage_)) return *v;
    throw Error(ErrorKind::ParseError, std::string("expected a ") + what);
  }

  Storage storage_;
};

namespace detail {

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  Table parse() {
    Table root;
    Table* current = &root;
    while (!at_end()) {
      skip_blank();
      if (at_end()) break;
      if (peek() == '[') {
        current = parse_header(root);
      } else {
        auto [key, value] = parse_key_value();
        if (!current->emplace(key, std::move(value)).second) {
          fail("duplicate key '" + key + "'");
        }
        expect_line_end();
      }
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_) + ": " + msg);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  char advance() {
    char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    while (!at_end() && peek() != '\n') ++pos_;
  }

  // Whitespace, newlines, comments.
  void skip_blank() {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '\n') {
        advance();
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  void expect_line_end() {
    skip_ws();
    if (!at_end() && peek() == '#') skip_comment();
    if (at_end()) return;
    if (peek() == '\r') ++pos_;
    if (at_end()) return;
    if (peek() != '\n') fail("expected end of line");
    advance();
  }

  std::string parse_key() {
    skip_ws();
    if (!at_end() && peek() == '"') return parse_basic_string();
    std::string key;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
      key += advance();
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  Table* parse_header(Table& root) {
    advance();  // '['
    const bool array_of_tables = !at_end() && peek() == '[';
    if (array_of_tables) advance();

    std::vector<std::string> path;
    for (;;) {
      path.push_back(parse_key());
      skip_ws();
      if (!at_end() && peek() == '.') {
        advance();
        continue;
      }
      break;
    }
    if (at_end() || advance() != ']') fail("expected ']' in table header");
    if (array_of_tables && (at_end() || advance() != ']')) fail("expected ']]' in table header");
    expect_line_end();

    Table* node = &root;
    for (std::size_t i = 0; i < path.size(); ++i) {
      const bool leaf = (i + 1 == path.size());
      auto it = node->find(path[i]);
      if (leaf && array_of_tables) {
        if (it == node->end()) {
          it = node->emplace(path[i], Value(Array{})).first;
        }
        if (!it->second.is_array()) fail("'" + path[i] + "' is not an array of tables");
        auto& arr = const_cast<Array&>(it->second.array());
        arr.emplace_back(Value(Table{}));
        return &arr.back().table();
      }
      if (it == node->end()) {
        it = node->emplace(path[i], Value(Table{})).first;
      }
      if (it->second.is_array()) {
        auto& arr = const_cast<Array&>(it->second.array());
        if (arr.empty() || !arr.back().is_table()) fail("'" + path[i] + "' is not a table");
        node = &arr.back().table();
      } else {
        if (!it->second.is_table()) fail("'" + path[i] + "' is not a table");
        node = &it->second.table();
      }
    }
    return node;
  }

  std::pair<std::string, Value> parse_key_value() {
    const std::string key = parse_key();
    if (!at_end() && peek() == '.') fail("dotted keys are not supported");
    skip_ws();
    if (at_end() || advance() != '=') fail("expected '=' after key '" + key + "'");
    skip_ws();
    return {key, parse_value()};
  }

  Value parse_value() {
    if (at_end()) fail("expected a value");
    const char c = peek();
    if (c == '"') return Value(parse_basic_string());
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    return parse_scalar();
  }

  std::string parse_basic_string() {
    advance();  // opening quote
    std::string out;
    while (!at_end() && peek() != '"') {
      char c = advance();
      if (c == '\n') fail("unterminated string");
      if (c == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = advance();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    if (at_end()) fail("unterminated string");
    advance();  // closing quote
    return out;
  }

  Value parse_array() {
    advance();  // '['
    Array items;
    for (;;) {
      skip_blank();
      if (at_end()) fail("unterminated array");
      if (peek() == ']') {
        advance();
        break;
      }
      items.push_back(parse_value());
      skip_blank();
      if (!at_end() && peek() == ',') {
        advance();
        continue;
      }
      skip_blank();
      if (at_end() || peek() != ']') fail("expected ',' or ']' in array");
      advance();
      break;
    }
    return Value(std::move(items));
  }

  Value parse_scalar() {
    std::string tok;
    while (!at_end()) {
      const char c = peek();
      if (c == '\n' || c == '\r' || c == ',' || c == ']' || c == '#' || c == ' ' || c == '\t') break;
      tok += advance();
    }
    if (tok == "true") return Value(true);
    if (tok == "false") return Value(false);
    if (tok.empty()) fail("expected a value");

    const bool looks_float = tok.find_first_of(".eE") != std::string::npos &&
                             tok.find_first_not_of("+-0123456789.eE") == std::string::npos;
    try {
      std::size_t used = 0;
      if (looks_float) {
        const double d = std::stod(tok, &used);
        if (used == tok.size()) return Value(d);
      } else {
        const std::int64_t i = std::stoll(tok, &used);
        if (used == tok.size()) return Value(i);
        const double d = std::stod(tok, &used);
        if (used == tok.size()) return Value(d);
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + tok + "'");
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

inline Table parse(const std::string& text) { return detail::Parser(text).parse(); }

// Lookup helpers with defaults; missing keys keep the fallback.

inline const Value* find(const Table& t, const std::string& key) {
  auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

inline double get_number(const Table& t, const std::string& key, double fallback) {
  const Value* v = find(t, key);
  return v ? v->number() : fallback;
}

inline std::int64_t get_integer(const Table& t, const std::string& key, std::int64_t fallback) {
  const Value* v = find(t, key);
  return v ? v->integer() : fallback;
}

inline std::string get_string(const Table& t, const std::string& key, const std::string& fallback) {
  const Value* v = find(t, key);
  return v ? v->str() : fallback;
}

inline bool get_bool(const Table& t, const std::string& key, bool fallback) {
  const Value* v = find(t, key);
  return v ? v->boolean() : fallback;
}

}  // namespace demoforge::toml
