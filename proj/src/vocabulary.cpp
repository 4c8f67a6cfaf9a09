#include "mmbattn/data.hpp"

#include "csv_internal.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>

namespace mmb::data {

namespace {

std::optional<double> parse_number(const std::string& raw) {
  if (raw.empty()) return std::nullopt;
  double x = 0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), x);
  if (ec != std::errc() || ptr != raw.data() + raw.size() || !std::isfinite(x)) return std::nullopt;
  return x;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r' || i + 1 != line.size()) {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::uint32_t FieldVocab::size() const {
  if (kind == FieldKind::numeric) return static_cast<std::uint32_t>(boundaries.size() + 2);
  return static_cast<std::uint32_t>(values.size());
}

std::uint32_t FieldVocab::lookup(const std::string& raw) const {
  if (kind == FieldKind::numeric) {
    auto x = parse_number(raw);
    if (!x) return 0;
    return 1 + static_cast<std::uint32_t>(std::upper_bound(boundaries.begin(), boundaries.end(), *x) -
                                          boundaries.begin());
  }
  auto it = index.find(raw);
  return it == index.end() ? 0 : it->second;
}

std::uint64_t Vocabulary::total_features() const {
  std::uint64_t n = 0;
  for (const FieldVocab& f : fields) n += f.size();
  return n;
}


Vocabulary build_vocab(std::istream& csv, const FieldSchema& schema) {
  schema.validate();
  std::size_t width = 0;
  const auto cols = detail::resolve_columns(csv, schema, width);
  const std::size_t F = schema.fields.size();

  std::vector<std::vector<std::string>> first_seen(F);
  std::vector<std::unordered_map<std::string, std::int64_t>> counts(F);
  std::vector<std::vector<double>> numeric(F);

  Vocabulary vocab;
  std::string line;
  std::uint64_t lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line, schema.delimiter);
    if (cells.size() != width)
      throw DataError("row " + std::to_string(lineno) + ": expected " + std::to_string(width) + " columns, got " +
                      std::to_string(cells.size()));
    ++vocab.rows;
    for (std::size_t f = 0; f < F; ++f) {
      const std::string& raw = cells[cols[f]];
      if (schema.fields[f].kind == FieldKind::numeric) {
        if (auto x = parse_number(raw)) numeric[f].push_back(*x);
      } else if (counts[f][raw]++ == 0) {
        first_seen[f].push_back(raw);
      }
    }
  }
  if (vocab.rows == 0) throw DataError("CSV stream has a header but no data rows");

  vocab.fields.resize(F);
  for (std::size_t f = 0; f < F; ++f) {
    FieldVocab& fv = vocab.fields[f];
    fv.kind = schema.fields[f].kind;
    if (fv.kind == FieldKind::numeric) {
      auto& xs = numeric[f];
      std::sort(xs.begin(), xs.end());
      const auto K = static_cast<std::size_t>(schema.buckets);
      for (std::size_t k = 1; k < K && !xs.empty(); ++k) {
        const double q = xs[std::min(xs.size() - 1, k * xs.size() / K)];
        if (fv.boundaries.empty() || q > fv.boundaries.back()) fv.boundaries.push_back(q);
      }
      continue;
    }
    for (const std::string& raw : first_seen[f]) {
      if (counts[f][raw] < schema.min_count) continue;
      fv.index.emplace(raw, static_cast<std::uint32_t>(fv.values.size()));
      fv.values.push_back(raw);
    }
  }
  return vocab;
}

}  // namespace mmb::data
