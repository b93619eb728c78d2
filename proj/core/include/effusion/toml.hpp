#pragma once

// A small TOML-style config reader covering what the run configs need:
// comments, [table] and [[array-of-table]] headers, dotted keys, strings,
// numbers, booleans, and (nested, possibly multi-line) arrays.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "effusion/errors.hpp"

namespace effusion::toml {

class Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

class Value {
 public:
  Value() : data_(std::monostate{}) {}
  explicit Value(std::string s) : data_(std::move(s)) {}
  explicit Value(double d) : data_(d) {}
  explicit Value(std::int64_t i) : data_(i) {}
  explicit Value(bool b) : data_(b) {}
  explicit Value(Array a) : data_(std::move(a)) {}
  explicit Value(Table t) : data_(std::move(t)) {}

  bool is_string() const { return std::holds_alternative<std::string>(data_); }
  bool is_float() const { return std::holds_alternative<double>(data_); }
  bool is_integer() const {
    return std::holds_alternative<std::int64_t>(data_);
  }
  bool is_number() const { return is_float() || is_integer(); }
  bool is_bool() const { return std::holds_alternative<bool>(data_); }
  bool is_array() const { return std::holds_alternative<Array>(data_); }
  bool is_table() const { return std::holds_alternative<Table>(data_); }

  const std::string& as_string() const;
  double as_number() const;
  std::int64_t as_integer() const;
  bool as_bool() const;
  const Array& as_array() const;
  Array& as_array();
  const Table& as_table() const;
  Table& as_table();

  std::string type_name() const;

 private:
  std::variant<std::monostate, std::string, double, std::int64_t, bool, Array,
               Table>
      data_;
};

// Parse a document into its root table.  Errors carry line numbers.
Table parse(const std::string& text, const std::string& origin = "<string>");
Table parse_file(const std::string& path);

// Typed lookups with config-style error messages ("[sampler] burnin ...").
const Value* find(const Table& t, const std::string& key);
std::string get_string(const Table& t, const std::string& key,
                       const std::string& context);
std::string get_string_or(const Table& t, const std::string& key,
                          const std::string& fallback);
double get_number(const Table& t, const std::string& key,
                  const std::string& context);
double get_number_or(const Table& t, const std::string& key, double fallback);
std::int64_t get_integer(const Table& t, const std::string& key,
                         const std::string& context);
std::int64_t get_integer_or(const Table& t, const std::string& key,
                            std::int64_t fallback);
bool get_bool_or(const Table& t, const std::string& key, bool fallback);

}  // namespace effusion::toml
