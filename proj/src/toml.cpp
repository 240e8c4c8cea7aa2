#include "leakprobe/toml.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace leakprobe::toml {

Value Value::of_string(std::string s) {
  Value v;
  v.kind_ = Kind::string;
  v.str_ = std::move(s);
  v.table_.reset();
  return v;
}
Value Value::of_integer(std::int64_t x) {
  Value v;
  v.kind_ = Kind::integer;
  v.int_ = x;
  v.table_.reset();
  return v;
}
Value Value::of_float(double x) {
  Value v;
  v.kind_ = Kind::floating;
  v.float_ = x;
  v.table_.reset();
  return v;
}
Value Value::of_boolean(bool x) {
  Value v;
  v.kind_ = Kind::boolean;
  v.bool_ = x;
  v.table_.reset();
  return v;
}
Value Value::of_array(Array a) {
  Value v;
  v.kind_ = Kind::array;
  v.array_ = std::make_shared<Array>(std::move(a));
  v.table_.reset();
  return v;
}
Value Value::of_table(Table t) {
  Value v;
  v.kind_ = Kind::table;
  v.table_ = std::make_shared<Table>(std::move(t));
  return v;
}

namespace {
[[noreturn]] void type_error(const char* want, Value::Kind got) {
  static const char* names[] = {"string", "integer", "float", "boolean", "array", "table"};
  throw Error(errkind::toml_parse,
              std::string("expected ") + want + ", found " + names[static_cast<int>(got)]);
}
}  // namespace

const std::string& Value::as_string() const {
  if (!is_string()) type_error("string", kind_);
  return str_;
}
std::int64_t Value::as_integer() const {
  if (!is_integer()) type_error("integer", kind_);
  return int_;
}
double Value::as_float() const {
  if (is_integer()) return static_cast<double>(int_);
  if (!is_float()) type_error("float", kind_);
  return float_;
}
bool Value::as_boolean() const {
  if (!is_boolean()) type_error("boolean", kind_);
  return bool_;
}
const Array& Value::as_array() const {
  if (!is_array()) type_error("array", kind_);
  return *array_;
}
const Table& Value::as_table() const {
  if (!is_table()) type_error("table", kind_);
  return *table_;
}

const Value* Value::find(const std::string& key) const {
  if (!is_table()) return nullptr;
  auto it = table_->find(key);
  return it == table_->end() ? nullptr : &it->second;
}
const Value& Value::at(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw Error(errkind::toml_parse, "missing required key '" + key + "'");
  return *v;
}
std::string Value::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  return v ? v->as_string() : fallback;
}
std::int64_t Value::get_integer(const std::string& key, std::int64_t fallback) const {
  const Value* v = find(key);
  return v ? v->as_integer() : fallback;
}
double Value::get_float(const std::string& key, double fallback) const {
  const Value* v = find(key);
  return v ? v->as_float() : fallback;
}
bool Value::get_boolean(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  return v ? v->as_boolean() : fallback;
}

Table& Value::mutable_table() { return *table_; }
Array& Value::mutable_array() { return *array_; }

// ---------------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Value parse_document() {
    Value root = Value::of_table({});
    Value* current = &root;
    while (!at_end()) {
      skip_ws_and_comments_and_newlines();
      if (at_end()) break;
      if (peek() == '[') {
        current = parse_table_header(root);
      } else {
        parse_key_value_into(*current);
        expect_line_end();
      }
    }
    return root;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek(std::size_t off = 0) const {
    return pos_ + off < text_.size() ? text_[pos_ + off] : '\0';
  }
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  bool consume(char c) {
    if (!at_end() && peek() == c) {
      advance();
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(errkind::toml_parse, "line " + std::to_string(line_) + ": " + msg);
  }

  void skip_inline_ws() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) advance();
  }
  void skip_comment() {
    if (!at_end() && peek() == '#') {
      while (!at_end() && peek() != '\n') advance();
    }
  }
  void skip_ws_and_comments_and_newlines() {
    while (!at_end()) {
      skip_inline_ws();
      skip_comment();
      if (!at_end() && (peek() == '\n' || peek() == '\r')) {
        advance();
        continue;
      }
      break;
    }
  }
  void expect_line_end() {
    skip_inline_ws();
    skip_comment();
    if (at_end()) return;
    if (peek() == '\r') advance();
    if (at_end()) return;
    if (peek() != '\n') fail("expected end of line");
    advance();
  }

  static bool is_bare_key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  }

  std::string parse_key_part() {
    skip_inline_ws();
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    std::string key;
    while (!at_end() && is_bare_key_char(peek())) key.push_back(advance());
    if (key.empty()) fail("expected key");
    return key;
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_key_part()};
    skip_inline_ws();
    while (consume('.')) {
      path.push_back(parse_key_part());
      skip_inline_ws();
    }
    return path;
  }

  // Walks/creates intermediate tables for all but the last path element.
  Value* descend(Value& root, const std::vector<std::string>& path) {
    Value* node = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      Table& t = node->mutable_table();
      auto it = t.find(path[i]);
      if (it == t.end()) {
        it = t.emplace(path[i], Value::of_table({})).first;
      }
      Value& v = it->second;
      if (v.is_array()) {  // descend into last element of an array of tables
        if (v.mutable_array().empty() || !v.mutable_array().back().is_table())
          fail("key '" + path[i] + "' is not a table");
        node = &v.mutable_array().back();
      } else if (v.is_table()) {
        node = &v;
      } else {
        fail("key '" + path[i] + "' is not a table");
      }
    }
    return node;
  }

  Value* parse_table_header(Value& root) {
    advance();  // '['
    bool array_of_tables = consume('[');
    auto path = parse_key_path();
    skip_inline_ws();
    if (!consume(']')) fail("expected ']' in table header");
    if (array_of_tables && !consume(']')) fail("expected ']]' in table header");
    expect_line_end();

    Value* parent = descend(root, path);
    Table& t = parent->mutable_table();
    const std::string& leaf = path.back();
    auto it = t.find(leaf);
    if (array_of_tables) {
      if (it == t.end()) it = t.emplace(leaf, Value::of_array({})).first;
      if (!it->second.is_array()) fail("key '" + leaf + "' is not an array of tables");
      it->second.mutable_array().push_back(Value::of_table({}));
      return &it->second.mutable_array().back();
    }
    if (it == t.end()) it = t.emplace(leaf, Value::of_table({})).first;
    if (!it->second.is_table()) fail("table header redefines key '" + leaf + "'");
    return &it->second;
  }

  void parse_key_value_into(Value& table) {
    auto path = parse_key_path();
    skip_inline_ws();
    if (!consume('=')) fail("expected '=' after key");
    skip_inline_ws();
    Value v = parse_value();
    Value* parent = descend(table, path);
    Table& t = parent->mutable_table();
    if (t.count(path.back()) > 0) fail("duplicate key '" + path.back() + "'");
    t.emplace(path.back(), std::move(v));
  }

  Value parse_value() {
    if (at_end()) fail("expected value");
    char c = peek();
    if (c == '"') {
      if (peek(1) == '"' && peek(2) == '"') return Value::of_string(parse_multiline_basic());
      return Value::of_string(parse_basic_string());
    }
    if (c == '\'') {
      if (peek(1) == '\'' && peek(2) == '\'') return Value::of_string(parse_multiline_literal());
      return Value::of_string(parse_literal_string());
    }
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (text_.compare(pos_, 4, "true") == 0 && !is_bare_key_char(peek(4))) {
      pos_ += 4;
      return Value::of_boolean(true);
    }
    if (text_.compare(pos_, 5, "false") == 0 && !is_bare_key_char(peek(5))) {
      pos_ += 5;
      return Value::of_boolean(false);
    }
    return parse_number();
  }

  std::string parse_basic_string() {
    if (!consume('"')) fail("expected '\"'");
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      char c = advance();
      if (c == '"') return out;
      if (c == '\n') fail("newline in single-line string");
      if (c == '\\') {
        out += parse_escape();
        continue;
      }
      out.push_back(c);
    }
  }

  std::string parse_escape() {
    if (at_end()) fail("dangling escape");
    char e = advance();
    switch (e) {
      case 'n': return "\n";
      case 't': return "\t";
      case 'r': return "\r";
      case 'f': return "\f";
      case 'b': return "\b";
      case '"': return "\"";
      case '\\': return "\\";
      case 'u': return parse_unicode_escape(4);
      case 'U': return parse_unicode_escape(8);
      default: fail(std::string("unsupported escape '\\") + e + "'");
    }
  }

  std::string parse_unicode_escape(int digits) {
    std::uint32_t cp = 0;
    for (int i = 0; i < digits; ++i) {
      if (at_end()) fail("truncated unicode escape");
      char c = advance();
      cp <<= 4;
      if (c >= '0' && c <= '9') cp |= static_cast<std::uint32_t>(c - '0');
      else if (c >= 'a' && c <= 'f') cp |= static_cast<std::uint32_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') cp |= static_cast<std::uint32_t>(c - 'A' + 10);
      else fail("bad unicode escape digit");
    }
    std::string out;  // UTF-8 encode
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
    return out;
  }

  std::string parse_multiline_basic() {
    pos_ += 3;  // opening """
    if (peek() == '\r') advance();
    if (peek() == '\n') advance();  // trim first newline
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated multi-line string");
      if (peek() == '"' && peek(1) == '"' && peek(2) == '"') {
        pos_ += 3;
        return out;
      }
      char c = advance();
      if (c == '\\') {
        // line-ending backslash: skip whitespace through the newline(s)
        std::size_t look = pos_;
        while (look < text_.size() && (text_[look] == ' ' || text_[look] == '\t')) ++look;
        if (look < text_.size() && (text_[look] == '\n' || text_[look] == '\r')) {
          while (pos_ < text_.size() && is_space_ascii(peek())) advance();
          continue;
        }
        out += parse_escape();
        continue;
      }
      out.push_back(c);
    }
  }

  std::string parse_literal_string() {
    if (!consume('\'')) fail("expected '\\''");
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated literal string");
      char c = advance();
      if (c == '\'') return out;
      if (c == '\n') fail("newline in single-line string");
      out.push_back(c);
    }
  }

  std::string parse_multiline_literal() {
    pos_ += 3;  // opening '''
    if (peek() == '\r') advance();
    if (peek() == '\n') advance();
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated multi-line string");
      if (peek() == '\'' && peek(1) == '\'' && peek(2) == '\'') {
        pos_ += 3;
        return out;
      }
      out.push_back(advance());
    }
  }

  Value parse_array() {
    advance();  // '['
    Array items;
    while (true) {
      skip_ws_and_comments_and_newlines();
      if (at_end()) fail("unterminated array");
      if (consume(']')) break;
      items.push_back(parse_value());
      skip_ws_and_comments_and_newlines();
      if (consume(',')) continue;
      skip_ws_and_comments_and_newlines();
      if (consume(']')) break;
      fail("expected ',' or ']' in array");
    }
    return Value::of_array(std::move(items));
  }

  Value parse_inline_table() {
    advance();  // '{'
    Value table = Value::of_table({});
    skip_inline_ws();
    if (consume('}')) return table;
    while (true) {
      parse_key_value_into(table);
      skip_inline_ws();
      if (consume(',')) {
        skip_inline_ws();
        continue;
      }
      if (consume('}')) return table;
      fail("expected ',' or '}' in inline table");
    }
  }

  Value parse_number() {
    std::size_t start = pos_;
    std::string raw;
    bool is_float = false;
    if (peek() == '+' || peek() == '-') raw.push_back(advance());
    while (!at_end()) {
      char c = peek();
      if ((c >= '0' && c <= '9')) {
        raw.push_back(advance());
      } else if (c == '_') {
        advance();
      } else if (c == '.' || c == 'e' || c == 'E') {
        is_float = true;
        raw.push_back(advance());
        if ((peek() == '+' || peek() == '-') && (raw.back() == 'e' || raw.back() == 'E'))
          raw.push_back(advance());
      } else {
        break;
      }
    }
    if (raw.empty() || raw == "+" || raw == "-") {
      pos_ = start;
      fail("expected value");
    }
    errno = 0;
    if (is_float) {
      char* end = nullptr;
      double v = std::strtod(raw.c_str(), &end);
      if (end == nullptr || *end != '\0') fail("bad float '" + raw + "'");
      return Value::of_float(v);
    }
    char* end = nullptr;
    long long v = std::strtoll(raw.c_str(), &end, 10);
    if (end == nullptr || *end != '\0' || errno == ERANGE) fail("bad integer '" + raw + "'");
    return Value::of_integer(static_cast<std::int64_t>(v));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

Value parse(std::string_view text) { return Parser(text).parse_document(); }

Value parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw Error(errkind::io_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace leakprobe::toml
