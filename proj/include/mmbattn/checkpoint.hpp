#pragma once

#include "mmbattn/data.hpp"
#include "mmbattn/keyvalue.hpp"
#include "mmbattn/model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mmb::ckpt {

inline constexpr std::uint16_t kFormatVersion = 1;

/**
 * Binary layout, little-endian:
 *   "MMBC"  u16 version  32-byte SHA-256 of the canonical config
 *   u32 config length, canonical config text
 *   u32 entry count; per entry: u16 name length, name, u8 rank,
 *       rank × u64 extents, u64 offset (in doubles)
 *   u64 payload length (in doubles), f64 payload
 * Manifest entries tile the payload in order with no gaps.
 */
struct Checkpoint {
  struct Entry {
    std::string name;
    ag::Shape shape;
    std::uint64_t offset = 0;
  };
  std::string digest;  // lowercase hex
  std::string config_text;
  std::vector<Entry> manifest;
  std::vector<double> payload;
};

Checkpoint capture(const model::Model& model, const KeyValueFile& config);
std::vector<std::uint8_t> encode(const Checkpoint& ckpt);
// Throws ParseError with the byte offset of the first inconsistency.
Checkpoint decode(std::span<const std::uint8_t> bytes);

void save(const model::Model& model, const KeyValueFile& config, const std::filesystem::path& path);
Checkpoint read(const std::filesystem::path& path);

// Builds a model for `config` and fills it from the checkpoint. A digest
// mismatch throws DigestMismatch unless `force`, in which case the model is
// built from the configuration stored in the checkpoint instead.
model::Model load(const std::filesystem::path& path, const KeyValueFile& config, const data::FieldSchema& schema,
                  const data::Vocabulary& vocab, bool force = false);

// Copies payload values into a model whose registry matches the manifest.
void apply(const Checkpoint& ckpt, model::Model& model);

}  // namespace mmb::ckpt
