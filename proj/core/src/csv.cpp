#include "effusion/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "effusion/errors.hpp"

namespace effusion::csvio {

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

Table parse(const std::string& text, const std::string& origin) {
  Table t;
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool saw_quote = false;  // a quote appeared somewhere in this record
  int lineno = 1;

  auto flush_record = [&]() {
    fields.push_back(std::move(cur));
    cur.clear();
    // A record that is a single empty unquoted field is a blank line.
    const bool blank = fields.size() == 1 && fields[0].empty() && !saw_quote;
    if (!blank) {
      if (t.header.empty())
        t.header = std::move(fields);
      else
        t.rows.push_back(std::move(fields));
    }
    fields.clear();
    saw_quote = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++lineno;
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
      saw_quote = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch == '\n') {
      flush_record();
      ++lineno;
    } else if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF line ending; the newline itself is handled next.
    } else {
      cur += ch;
    }
  }
  if (quoted)
    throw DataError(origin + ":" + std::to_string(lineno) +
                    ": unterminated quote in CSV record");
  if (!cur.empty() || !fields.empty() || saw_quote) flush_record();
  if (t.header.empty()) throw DataError(origin + ": empty CSV file");
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  // Shortest representation that parses back exactly.
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_file(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write CSV file '" + path + "'");
  auto emit = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << escape(row[i]);
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
}

}  // namespace effusion::csvio
