#pragma once

#include "mmbattn/attention.hpp"
#include "mmbattn/data.hpp"
#include "mmbattn/embedding.hpp"
#include "mmbattn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmb {
class KeyValueFile;
}

namespace mmb::model {

using ag::Graph;
using ag::Index;
using ag::Tensor;

struct TowerConfig {
  std::vector<Index> hidden_sizes{400, 400, 400};
};

struct ModelConfig {
  Index embedding_dim = 10;
  attn::AttnConfig attn;
  TowerConfig tower;
  std::uint64_t seed = 0;

  void validate() const;
  // model.embedding_dim, model.hidden_sizes, model.seed plus the attn.* keys.
  static ModelConfig from_config(const KeyValueFile& kv);
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterRegistry = std::vector<NamedParameter>;

struct Linear {
  Tensor weight;  // fan_in × fan_out
  Tensor bias;    // 1 × fan_out
};

/**
 * Embeddings → optional attention → ReLU MLP tower → single logit.
 *
 * Registry order: embedding.<field> in schema order, then attn.max.w1,
 * attn.max.w2, attn.mean.w1, attn.mean.w2, attn.bit.w1, attn.bit.w2 for the
 * enabled branches, then tower.<i>.weight / tower.<i>.bias with the output
 * layer last. Copies of a Model share parameter storage.
 */
class Model {
 public:
  static Model build(const data::FieldSchema& schema, const data::Vocabulary& vocab, const ModelConfig& config);

  Tensor logits(Graph& g, const data::Batch& batch) const;
  Tensor forward(Graph& g, const data::Batch& batch) const;
  // Attention weights and the re-weighted embedding for a batch.
  attn::AttnOutputs attention(Graph& g, const data::Batch& batch) const;
  Tensor tower(Graph& g, const Tensor& x) const;

  // Logits for every row, evaluated in fixed-size batches. Batches may be
  // spread over `threads` workers; the result does not depend on it.
  Eigen::VectorXd predict_logits(const data::Dataset& ds, Index batch_size = 4096, int threads = 1) const;
  Eigen::VectorXd predict(const data::Dataset& ds, Index batch_size = 4096, int threads = 1) const;

  const ModelConfig& config() const { return config_; }
  const ParameterRegistry& parameters() const { return registry_; }
  Tensor parameter(const std::string& name) const;
  const emb::EmbeddingTable& embeddings() const { return embedding_; }
  const attn::AttnParams& attention_params() const { return attn_; }
  Index num_fields() const { return embedding_.num_fields(); }
  Index embedding_dim() const { return embedding_.dim; }
  Index parameter_count() const;

 private:
  ModelConfig config_;
  emb::EmbeddingTable embedding_;
  attn::AttnParams attn_;
  std::vector<Linear> layers_;
  ParameterRegistry registry_;
};

// Closed form: Σ_f V_f·d + attention weights + Σ_layers (fan_in·fan_out + fan_out).
Index parameter_count(const ModelConfig& config, const data::Vocabulary& vocab);

}  // namespace mmb::model
