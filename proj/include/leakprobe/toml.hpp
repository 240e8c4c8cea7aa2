#pragma once

// Minimal TOML reader covering the subset this tool's files use: bare/quoted/
// dotted keys, basic and literal strings (single- and multi-line), integers,
// floats, booleans, arrays, inline tables, [table] and [[array-of-tables]]
// headers, comments. Dates and some escapes are intentionally unsupported and
// raise parse errors.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "leakprobe/util.hpp"

namespace leakprobe::toml {

class Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

class Value {
 public:
  enum class Kind { string, integer, floating, boolean, array, table };

  Value() : kind_(Kind::table), table_(std::make_shared<Table>()) {}
  static Value of_string(std::string s);
  static Value of_integer(std::int64_t v);
  static Value of_float(double v);
  static Value of_boolean(bool v);
  static Value of_array(Array a);
  static Value of_table(Table t);

  Kind kind() const { return kind_; }
  bool is_string() const { return kind_ == Kind::string; }
  bool is_integer() const { return kind_ == Kind::integer; }
  bool is_float() const { return kind_ == Kind::floating; }
  bool is_boolean() const { return kind_ == Kind::boolean; }
  bool is_array() const { return kind_ == Kind::array; }
  bool is_table() const { return kind_ == Kind::table; }

  const std::string& as_string() const;
  std::int64_t as_integer() const;
  double as_float() const;  // accepts integer values too
  bool as_boolean() const;
  const Array& as_array() const;
  const Table& as_table() const;

  // Table lookups. find returns nullptr when the key is absent.
  const Value* find(const std::string& key) const;
  const Value& at(const std::string& key) const;  // throws toml_parse
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_integer(const std::string& key, std::int64_t fallback) const;
  double get_float(const std::string& key, double fallback) const;
  bool get_boolean(const std::string& key, bool fallback) const;

 private:
  friend class Parser;
  Table& mutable_table();
  Array& mutable_array();

  Kind kind_;
  std::string str_;
  std::int64_t int_ = 0;
  double float_ = 0.0;
  bool bool_ = false;
  std::shared_ptr<Array> array_;
  std::shared_ptr<Table> table_;
};

// Parses a whole document into a table value. Throws Error(toml_parse).
Value parse(std::string_view text);
Value parse_file(const std::string& path);  // throws Error(io_error) too

}  // namespace leakprobe::toml
