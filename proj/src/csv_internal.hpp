#pragma once

#include "mmbattn/data.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"

#include <istream>

namespace mmb::data::detail {

// Reads the header; returns the column of every schema field followed by the
// label column, and the header width.
inline std::vector<std::size_t> resolve_columns(std::istream& csv, const FieldSchema& schema, std::size_t& width) {
  std::string header;
  if (!std::getline(csv, header) || trim(header).empty()) throw DataError("empty CSV stream (no header row)");
  const auto names = split_csv_line(header, schema.delimiter);
  width = names.size();
  auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (trim(names[i]) == name) return i;
    throw SchemaError("CSV header is missing column '" + name + "'");
  };
  std::vector<std::size_t> cols;
  for (const Field& f : schema.fields) cols.push_back(find(f.name));
  cols.push_back(find(schema.label_column));
  return cols;
}

}  // namespace mmb::data::detail
