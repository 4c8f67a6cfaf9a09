#pragma once

#include "mmbattn/data.hpp"
#include "mmbattn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmb::emb {

using ag::Index;

inline constexpr double kInitStddev = 0.01;

/// One (V_f × d) table per schema field, rows indexed by vocabulary index.
struct EmbeddingTable {
  std::vector<std::string> names;
  std::vector<ag::Tensor> tables;
  Index dim = 0;

  Index num_fields() const { return static_cast<Index>(tables.size()); }
};

// Entries ~ Normal(0, 0.01²); each field draws from sub-seed "embedding.<name>".
EmbeddingTable init_embeddings(const data::FieldSchema& schema, const data::Vocabulary& vocab, Index dim,
                               std::uint64_t seed);

// Row gather: out[b, f, :] = tables[f][indices(b, f), :], shape (B × F × d).
// Backward scatter-adds into the gathered rows only.
ag::Tensor lookup(ag::Graph& g, const EmbeddingTable& emb, const data::Batch& batch);

}  // namespace mmb::emb
