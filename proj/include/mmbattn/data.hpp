#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmb {
class KeyValueFile;
}

namespace mmb::data {

using Index = Eigen::Index;
using IndexMatrix = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FieldKind { categorical, numeric };

struct Field {
  std::string name;
  FieldKind kind = FieldKind::categorical;
};

struct FieldSchema {
  std::vector<Field> fields;
  std::string label_column = "label";
  char delimiter = ',';
  std::int64_t min_count = 1;
  // Quantile buckets per numeric field.
  std::int64_t buckets = 10;

  Index num_fields() const { return static_cast<Index>(fields.size()); }
  void validate() const;

  // Keys: schema.fields = name[:categorical|numeric],...; schema.label;
  // schema.delimiter (a character, "comma" or "tab"); schema.min_count;
  // schema.buckets.
  static FieldSchema from_config(const KeyValueFile& kv);
  static FieldSchema load(const std::filesystem::path& path);
};

struct FieldVocab {
  FieldKind kind = FieldKind::categorical;
  std::unordered_map<std::string, std::uint32_t> index;
  // values[i] is the raw value mapped to index i; values[0] is the OOV slot.
  std::vector<std::string> values{""};
  // Ascending bucket boundaries for numeric fields.
  std::vector<double> boundaries;

  std::uint32_t size() const;
  std::uint32_t lookup(const std::string& raw) const;
};

/// Per-field value → index maps. Index 0 is shared by OOV and padding.
struct Vocabulary {
  std::vector<FieldVocab> fields;
  std::uint64_t rows = 0;

  Index num_fields() const { return static_cast<Index>(fields.size()); }
  std::uint32_t size(Index field) const { return fields[static_cast<std::size_t>(field)].size(); }
  std::uint64_t total_features() const;
};

struct Batch {
  IndexMatrix indices;  // B × F
  Eigen::VectorXd labels;

  Index size() const { return indices.rows(); }
};

/// Encoded rows; immutable once built.
struct Dataset {
  IndexMatrix indices;  // N × F
  Eigen::VectorXd labels;

  Index rows() const { return indices.rows(); }
  Index num_fields() const { return indices.cols(); }
  Batch gather(std::span<const Index> rows) const;
  Batch all() const { return Batch{indices, labels}; }
  Dataset slice(Index begin, Index end) const;
};

// Splits one delimited line; double quotes group a field.
std::vector<std::string> split_csv_line(const std::string& line, char delim);

Vocabulary build_vocab(std::istream& csv, const FieldSchema& schema);
Dataset encode(std::istream& csv, const FieldSchema& schema, const Vocabulary& vocab);
// Raw values for one encoded row; numeric fields render as their bucket id.
std::vector<std::string> decode_row(const Dataset& ds, Index row, const Vocabulary& vocab);

// Contiguous 8:1:1 split on row order.
struct Splits {
  Dataset train, valid, test;
};
Splits split_811(const Dataset& ds);

// Binary cache: "MMBD", u16 version, u64 rows, u16 F, rows×F u32 indices,
// rows u8 labels. Little-endian.
inline constexpr std::uint16_t kDatasetFormatVersion = 1;
std::vector<std::uint8_t> serialize(const Dataset& ds);
Dataset deserialize(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Row order for one epoch: shuffled by (seed, epoch) when a seed is given,
// otherwise sequential. The last partial batch is kept.
std::vector<std::vector<Index>> batch_rows(Index n, Index batch_size, std::optional<std::uint64_t> shuffle_seed,
                                           std::uint64_t epoch);
std::vector<Batch> batches(const Dataset& ds, Index batch_size, std::optional<std::uint64_t> shuffle_seed,
                           std::uint64_t epoch = 0);

}  // namespace mmb::data
