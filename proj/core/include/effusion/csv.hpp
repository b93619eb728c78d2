#pragma once

// Minimal RFC-ish CSV support: quoted fields, embedded commas and quotes,
// both line endings.  Numbers are written with enough digits to round-trip.

#include <string>
#include <vector>

namespace effusion::csvio {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

Table read_file(const std::string& path);
Table parse(const std::string& text, const std::string& origin = "<string>");

std::string escape(const std::string& field);
std::string format_double(double v);  // shortest round-trip decimal form

void write_file(const std::string& path, const Table& table);

}  // namespace effusion::csvio
