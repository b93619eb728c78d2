#include "effusion/toml.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace effusion::toml {

const std::string& Value::as_string() const {
  if (!is_string()) throw ConfigError("expected a string, got " + type_name());
  return std::get<std::string>(data_);
}

double Value::as_number() const {
  if (is_float()) return std::get<double>(data_);
  if (is_integer()) return static_cast<double>(std::get<std::int64_t>(data_));
  throw ConfigError("expected a number, got " + type_name());
}

std::int64_t Value::as_integer() const {
  if (is_integer()) return std::get<std::int64_t>(data_);
  if (is_float()) {
    const double d = std::get<double>(data_);
    const auto i = static_cast<std::int64_t>(d);
    if (static_cast<double>(i) == d) return i;
  }
  throw ConfigError("expected an integer, got " + type_name());
}

bool Value::as_bool() const {
  if (!is_bool()) throw ConfigError("expected a boolean, got " + type_name());
  return std::get<bool>(data_);
}

const Array& Value::as_array() const {
  if (!is_array()) throw ConfigError("expected an array, got " + type_name());
  return std::get<Array>(data_);
}

Array& Value::as_array() {
  if (!is_array()) throw ConfigError("expected an array, got " + type_name());
  return std::get<Array>(data_);
}

const Table& Value::as_table() const {
  if (!is_table()) throw ConfigError("expected a table, got " + type_name());
  return std::get<Table>(data_);
}

Table& Value::as_table() {
  if (!is_table()) throw ConfigError("expected a table, got " + type_name());
  return std::get<Table>(data_);
}

std::string Value::type_name() const {
  switch (data_.index()) {
    case 0: return "nothing";
    case 1: return "a string";
    case 2: return "a float";
    case 3: return "an integer";
    case 4: return "a boolean";
    case 5: return "an array";
    case 6: return "a table";
  }
  return "unknown";
}

namespace {

struct Cursor {
  const std::string& text;
  const std::string& origin;
  std::size_t pos = 0;
  int line = 1;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char get() {
    const char ch = text[pos++];
    if (ch == '\n') ++line;
    return ch;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }

  void skip_comment() {
    if (!eof() && peek() == '#')
      while (!eof() && peek() != '\n') get();
  }

  // Whitespace, comments and newlines; used between top-level statements and
  // inside arrays.
  void skip_filler() {
    for (;;) {
      skip_inline_ws();
      skip_comment();
      if (!eof() && (peek() == '\n' || peek() == '\r')) {
        get();
        continue;
      }
      return;
    }
  }

  void expect_line_end(const char* what) {
    skip_inline_ws();
    skip_comment();
    if (eof()) return;
    if (peek() == '\n' || peek() == '\r') {
      get();
      return;
    }
    fail(std::string("unexpected text after ") + what);
  }
};

bool bare_key_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
}

std::string parse_basic_string(Cursor& cur) {
  cur.get();  // opening quote
  std::string out;
  for (;;) {
    if (cur.eof()) cur.fail("unterminated string");
    const char ch = cur.get();
    if (ch == '"') return out;
    if (ch == '\n') cur.fail("newline inside a string");
    if (ch != '\\') {
      out += ch;
      continue;
    }
    if (cur.eof()) cur.fail("unterminated escape sequence");
    const char esc = cur.get();
    switch (esc) {
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      default: cur.fail(std::string("unsupported escape '\\") + esc + "'");
    }
  }
}

std::string parse_key_segment(Cursor& cur) {
  if (!cur.eof() && cur.peek() == '"') return parse_basic_string(cur);
  std::string out;
  while (!cur.eof() && bare_key_char(cur.peek())) out += cur.get();
  if (out.empty()) cur.fail("expected a key");
  return out;
}

std::vector<std::string> parse_dotted_key(Cursor& cur) {
  std::vector<std::string> path;
  for (;;) {
    path.push_back(parse_key_segment(cur));
    cur.skip_inline_ws();
    if (cur.eof() || cur.peek() != '.') return path;
    cur.get();
    cur.skip_inline_ws();
  }
}

Value parse_value(Cursor& cur);

Value parse_array(Cursor& cur) {
  cur.get();  // '['
  Array arr;
  for (;;) {
    cur.skip_filler();
    if (cur.eof()) cur.fail("unterminated array");
    if (cur.peek() == ']') {
      cur.get();
      return Value(std::move(arr));
    }
    arr.push_back(parse_value(cur));
    cur.skip_filler();
    if (cur.eof()) cur.fail("unterminated array");
    if (cur.peek() == ',') {
      cur.get();
      continue;
    }
    if (cur.peek() == ']') {
      cur.get();
      return Value(std::move(arr));
    }
    cur.fail("expected ',' or ']' in array");
  }
}

Value parse_number(Cursor& cur) {
  std::string text;
  bool is_float = false;
  while (!cur.eof()) {
    const char ch = cur.peek();
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '+' ||
        ch == '-') {
      text += cur.get();
    } else if (ch == '.' || ch == 'e' || ch == 'E') {
      is_float = true;
      text += cur.get();
    } else if (ch == '_') {
      cur.get();  // digit group separator
    } else {
      break;
    }
  }
  if (text.empty()) cur.fail("expected a value");
  const char* begin = text.c_str();
  char* end = nullptr;
  if (is_float) {
    const double v = std::strtod(begin, &end);
    if (end != begin + text.size()) cur.fail("malformed number '" + text + "'");
    return Value(v);
  }
  const long long v = std::strtoll(begin, &end, 10);
  if (end != begin + text.size()) cur.fail("malformed integer '" + text + "'");
  return Value(static_cast<std::int64_t>(v));
}

Value parse_value(Cursor& cur) {
  if (cur.eof()) cur.fail("expected a value");
  const char ch = cur.peek();
  if (ch == '"') return Value(parse_basic_string(cur));
  if (ch == '[') return parse_array(cur);
  if (ch == 't' || ch == 'f') {
    std::string word;
    while (!cur.eof() && std::isalpha(static_cast<unsigned char>(cur.peek())))
      word += cur.get();
    if (word == "true") return Value(true);
    if (word == "false") return Value(false);
    cur.fail("unknown literal '" + word + "'");
  }
  return parse_number(cur);
}

// Walk (creating) intermediate tables; descends into the last element of an
// array of tables.
Table* descend(Cursor& cur, Table* t, const std::string& key) {
  auto it = t->find(key);
  if (it == t->end()) {
    auto [ins, ok] = t->emplace(key, Value(Table{}));
    return &ins->second.as_table();
  }
  Value& v = it->second;
  if (v.is_table()) return &v.as_table();
  if (v.is_array()) {
    auto& arr = v.as_array();
    if (!arr.empty() && arr.back().is_table())
      return &arr.back().as_table();
  }
  cur.fail("key '" + key + "' is already used for " + v.type_name());
}

void insert_value(Cursor& cur, Table* t, const std::vector<std::string>& path,
                  Value v) {
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    t = descend(cur, t, path[i]);
  if (t->count(path.back()))
    cur.fail("duplicate key '" + path.back() + "'");
  t->emplace(path.back(), std::move(v));
}

}  // namespace

Table parse(const std::string& text, const std::string& origin) {
  Cursor cur{text, origin};
  Table root;
  Table* current = &root;
  for (;;) {
    cur.skip_filler();
    if (cur.eof()) return root;
    if (cur.peek() == '[') {
      cur.get();
      const bool array_header = !cur.eof() && cur.peek() == '[';
      if (array_header) cur.get();
      cur.skip_inline_ws();
      const auto path = parse_dotted_key(cur);
      cur.skip_inline_ws();
      if (cur.eof() || cur.get() != ']') cur.fail("expected ']'");
      if (array_header && (cur.eof() || cur.get() != ']'))
        cur.fail("expected ']]'");
      Table* t = &root;
      for (std::size_t i = 0; i + 1 < path.size(); ++i)
        t = descend(cur, t, path[i]);
      const std::string& last = path.back();
      if (array_header) {
        auto it = t->find(last);
        if (it == t->end())
          it = t->emplace(last, Value(Array{})).first;
        if (!it->second.is_array())
          cur.fail("key '" + last + "' is already used for " +
                   it->second.type_name());
        auto& arr = it->second.as_array();
        arr.emplace_back(Value(Table{}));
        current = &arr.back().as_table();
      } else {
        auto it = t->find(last);
        if (it != t->end()) {
          if (!it->second.is_table())
            cur.fail("key '" + last + "' is already used for " +
                     it->second.type_name());
          cur.fail("table [" + last + "] is declared twice");
        }
        current = descend(cur, t, last);
      }
      cur.expect_line_end("table header");
      continue;
    }
    const auto path = parse_dotted_key(cur);
    cur.skip_inline_ws();
    if (cur.eof() || cur.get() != '=') cur.fail("expected '=' after key");
    cur.skip_inline_ws();
    Value v = parse_value(cur);
    insert_value(cur, current, path, std::move(v));
    cur.expect_line_end("value");
  }
}

Table parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

const Value* find(const Table& t, const std::string& key) {
  const auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

namespace {
[[noreturn]] void missing(const std::string& key, const std::string& context) {
  throw ConfigError("missing key '" + key + "' in " + context);
}
}  // namespace

std::string get_string(const Table& t, const std::string& key,
                       const std::string& context) {
  const Value* v = find(t, key);
  if (!v) missing(key, context);
  try {
    return v->as_string();
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": key '" + key + "': " + e.what());
  }
}

std::string get_string_or(const Table& t, const std::string& key,
                          const std::string& fallback) {
  const Value* v = find(t, key);
  return v ? v->as_string() : fallback;
}

double get_number(const Table& t, const std::string& key,
                  const std::string& context) {
  const Value* v = find(t, key);
  if (!v) missing(key, context);
  try {
    return v->as_number();
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": key '" + key + "': " + e.what());
  }
}

double get_number_or(const Table& t, const std::string& key, double fallback) {
  const Value* v = find(t, key);
  return v ? v->as_number() : fallback;
}

std::int64_t get_integer(const Table& t, const std::string& key,
                         const std::string& context) {
  const Value* v = find(t, key);
  if (!v) missing(key, context);
  try {
    return v->as_integer();
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": key '" + key + "': " + e.what());
  }
}

std::int64_t get_integer_or(const Table& t, const std::string& key,
                            std::int64_t fallback) {
  const Value* v = find(t, key);
  return v ? v->as_integer() : fallback;
}

bool get_bool_or(const Table& t, const std::string& key, bool fallback) {
  const Value* v = find(t, key);
  return v ? v->as_bool() : fallback;
}

}  // namespace effusion::toml
