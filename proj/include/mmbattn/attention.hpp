#pragma once

#include "mmbattn/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace mmb {
class KeyValueFile;
}

// Max-pool, mean-pool and bit-wise attention over field embeddings. The
// module maps the flattened (B × F·d) embedding space onto itself, so any
// tower placed after it is unchanged.
namespace mmb::attn {

using ag::Graph;
using ag::Index;
using ag::Tensor;

enum class CombineMode {
  // F_MM = e ⊗ w_mm;  F_B = F_MM ⊗ w_b;  out = F_MM + F_B.
  residual_product,
  // Weights combined first: out = e ⊗ (w_mm + w_mm ⊗ w_b).
  paper_literal,
};

std::string to_string(CombineMode mode);
CombineMode parse_combine_mode(const std::string& text);

struct AttnConfig {
  bool use_max = true;
  bool use_mean = true;
  bool use_bitwise = true;
  Index reduction_ratio = 3;
  CombineMode combine_mode = CombineMode::residual_product;

  bool enabled() const { return use_max || use_mean || use_bitwise; }
  bool use_pooling() const { return use_max || use_mean; }
  void validate() const;

  // Reads attn.use_max, attn.use_mean, attn.use_bitwise,
  // attn.reduction_ratio and attn.combine_mode; missing keys keep defaults.
  static AttnConfig from_config(const KeyValueFile& kv);
};

// Bottleneck width max(1, ⌊C/R⌋).
Index hidden_width(Index width, Index reduction_ratio);

/// Two-layer bias-free MLP: w1 is (h × C), w2 is (C × h).
struct BranchParams {
  Tensor w1;
  Tensor w2;
};

/// Max and mean branches always own separate weights.
struct AttnParams {
  std::optional<BranchParams> max;
  std::optional<BranchParams> mean;
  std::optional<BranchParams> bit;
};

// Only enabled branches get weights, Normal(0, 1/C) from sub-seeds
// "attn.max", "attn.mean", "attn.bit".
AttnParams init_attention(const AttnConfig& config, Index num_fields, Index dim, std::uint64_t seed);
BranchParams init_branch(Index width, Index reduction_ratio, std::uint64_t seed, const char* purpose);
Index parameter_count(const AttnConfig& config, Index num_fields, Index dim);

enum class PoolKind { max, mean };

// (B × F × d) → (B × F), reducing the embedding axis.
Tensor pool(Graph& g, const Tensor& e, PoolKind kind);

// sigmoid(relu(s · w1ᵀ) · w2ᵀ), row-wise over a (B × C) input.
Tensor branch_attention(Graph& g, const Tensor& s, const BranchParams& params);

// Sum of whichever branch outputs are defined.
Tensor mm_combine(Graph& g, const Tensor& w_max, const Tensor& w_mean);

// out[b, f, j] = e[b, f, j] · w_mm[b, f].
Tensor mm_reweight(Graph& g, const Tensor& e, const Tensor& w_mm);

// Per-bit weights over flatten(e): (B × F·d).
Tensor bitwise_attention(Graph& g, const Tensor& e, const BranchParams& params);

// Final (B × F·d) representation. Undefined w_mm / w_b mean that component
// is switched off; with both off this is flatten(e).
Tensor mmb_combine(Graph& g, const Tensor& e, const Tensor& w_mm, const Tensor& w_b, CombineMode mode);

struct AttnOutputs {
  Tensor w_max, w_mean, w_mm, w_bit;
  Tensor output;
};

AttnOutputs forward(Graph& g, const Tensor& e, const AttnParams& params, const AttnConfig& config);

}  // namespace mmb::attn
