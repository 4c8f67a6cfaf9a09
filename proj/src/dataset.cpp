#include "csv_internal.hpp"
#include "mmbattn/data.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/random.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>

namespace mmb::data {

namespace {

double parse_label(const std::string& raw, std::uint64_t row) {
  const std::string s = trim(raw);
  if (s == "1" || s == "1.0") return 1.0;
  if (s == "0" || s == "0.0") return 0.0;
  throw DataError("row " + std::to_string(row) + ": label '" + s + "' is not binary (expected 0 or 1)");
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size()) throw ParseError(std::string("truncated dataset: expected ") + what, pos_);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Batch Dataset::gather(std::span<const Index> rows) const {
  Batch b;
  b.indices.resize(static_cast<Index>(rows.size()), indices.cols());
  b.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.indices.row(static_cast<Index>(i)) = indices.row(rows[i]);
    b.labels[static_cast<Index>(i)] = labels[rows[i]];
  }
  return b;
}

Dataset Dataset::slice(Index begin, Index end) const {
  return Dataset{indices.middleRows(begin, end - begin), labels.segment(begin, end - begin)};
}

Dataset encode(std::istream& csv, const FieldSchema& schema, const Vocabulary& vocab) {
  schema.validate();
  if (vocab.num_fields() != schema.num_fields())
    throw SchemaError("vocabulary has " + std::to_string(vocab.num_fields()) + " fields, schema has " +
                      std::to_string(schema.num_fields()));
  std::size_t width = 0;
  const auto cols = detail::resolve_columns(csv, schema, width);
  const std::size_t F = schema.fields.size();

  std::vector<std::uint32_t> idx;
  std::vector<double> labels;
  std::string line;
  std::uint64_t row = 0;
  while (std::getline(csv, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line, schema.delimiter);
    if (cells.size() != width)
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(width) + " columns, got " +
                      std::to_string(cells.size()));
    for (std::size_t f = 0; f < F; ++f) idx.push_back(vocab.fields[f].lookup(cells[cols[f]]));
    labels.push_back(parse_label(cells[cols[F]], row));
  }
  Dataset ds;
  ds.indices = Eigen::Map<const IndexMatrix>(idx.data(), static_cast<Index>(labels.size()), static_cast<Index>(F));
  ds.labels = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Index>(labels.size()));
  return ds;
}

std::vector<std::string> decode_row(const Dataset& ds, Index row, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (Index f = 0; f < ds.num_fields(); ++f) {
    const FieldVocab& fv = vocab.fields[static_cast<std::size_t>(f)];
    const std::uint32_t i = ds.indices(row, f);
    if (fv.kind == FieldKind::numeric) out.push_back("bucket:" + std::to_string(i));
    else out.push_back(fv.values.at(i));
  }
  return out;
}

Splits split_811(const Dataset& ds) {
  const Index n = ds.rows();
  const Index n_train = n * 8 / 10;
  const Index n_valid = n / 10;
  return Splits{ds.slice(0, n_train), ds.slice(n_train, n_train + n_valid), ds.slice(n_train + n_valid, n)};
}

std::vector<std::uint8_t> serialize(const Dataset& ds) {
  std::vector<std::uint8_t> out{'M', 'M', 'B', 'D'};
  put<std::uint16_t>(out, kDatasetFormatVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(ds.rows()));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(ds.num_fields()));
  out.reserve(out.size() + static_cast<std::size_t>(ds.indices.size()) * 4 + static_cast<std::size_t>(ds.rows()));
  for (Index r = 0; r < ds.rows(); ++r)
    for (Index f = 0; f < ds.num_fields(); ++f) put<std::uint32_t>(out, ds.indices(r, f));
  for (Index r = 0; r < ds.rows(); ++r) out.push_back(ds.labels[r] != 0.0 ? 1 : 0);
  return out;
}

Dataset deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "MMBD"))
    throw ParseError("bad dataset magic (expected MMBD)", 0);
  Reader in(bytes.subspan(4));
  const auto version = in.get<std::uint16_t>("version");
  if (version != kDatasetFormatVersion)
    throw ParseError("unsupported dataset version " + std::to_string(version), 4);
  const auto rows = in.get<std::uint64_t>("row count");
  const auto fields = in.get<std::uint16_t>("field count");
  const std::uint64_t need = rows * fields * 4 + rows;
  if (in.remaining() != need)
    throw ParseError("dataset payload size mismatch: expected " + std::to_string(need) + " bytes, found " +
                         std::to_string(in.remaining()),
                     4 + in.pos());
  Dataset ds;
  ds.indices.resize(static_cast<Index>(rows), fields);
  ds.labels.resize(static_cast<Index>(rows));
  for (Index r = 0; r < ds.indices.rows(); ++r)
    for (Index f = 0; f < fields; ++f) ds.indices(r, f) = in.get<std::uint32_t>("index");
  for (Index r = 0; r < ds.indices.rows(); ++r) {
    const auto label = in.get<std::uint8_t>("label");
    if (label > 1) throw ParseError("non-binary label", 4 + in.pos() - 1);
    ds.labels[r] = label;
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const auto bytes = serialize(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::vector<std::vector<Index>> batch_rows(Index n, Index batch_size, std::optional<std::uint64_t> shuffle_seed,
                                           std::uint64_t epoch) {
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (shuffle_seed) {
    Rng rng = make_rng(*shuffle_seed, "shuffle.epoch." + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<Index>> out;
  for (Index start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + start, order.begin() + std::min(n, start + batch_size));
  return out;
}

std::vector<Batch> batches(const Dataset& ds, Index batch_size, std::optional<std::uint64_t> shuffle_seed,
                           std::uint64_t epoch) {
  std::vector<Batch> out;
  for (const auto& rows : batch_rows(ds.rows(), batch_size, shuffle_seed, epoch)) out.push_back(ds.gather(rows));
  return out;
}

}  // namespace mmb::data
