#pragma once

#include "mmbattn/data.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mmb {
class KeyValueFile;
}

namespace mmb::data {

/**
 * Planted-importance generator. Field f takes values uniformly from
 * {v0, ..., v(c_f - 1)}; the label is Bernoulli(sigmoid(bias + Σ_{f informative}
 * w_f[x_f])) with per-value weights w_f[k] ~ Normal(0, weight_scale²) drawn
 * once. Noise fields never enter the label.
 */
struct SynthSpec {
  std::int64_t rows = 100000;
  std::vector<std::int64_t> cardinalities;
  std::vector<std::int64_t> informative;
  double weight_scale = 1.0;
  double bias = 0.0;
  std::uint64_t seed = 0;
  // Replaces the drawn weights of a field (test fixtures).
  std::map<std::int64_t, std::vector<double>> fixed_weights;

  Index num_fields() const { return static_cast<Index>(cardinalities.size()); }
  bool is_informative(Index field) const;
  void validate() const;

  // Keys: synth.rows, synth.cardinalities, synth.informative,
  // synth.weight_scale, synth.bias, synth.seed. Other sections are ignored.
  static SynthSpec from_config(const KeyValueFile& kv);
};

struct SynthTruth {
  std::vector<Eigen::VectorXd> weights;  // empty for noise fields
  double bias = 0.0;
  // Variance of each field's logit contribution; 0 on noise fields.
  Eigen::VectorXd importance;
  double base_rate = 0.0;  // empirical, over all generated rows
};

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv(char delim = ',') const;
};

struct SynthData {
  FieldSchema schema;
  RawTable train, valid, test;
  SynthTruth truth;
};

SynthData synth_generate(const SynthSpec& spec);

// Exact AUC of ranking rows by their true click probability, by enumerating
// every combination of informative values.
double bayes_auc(const SynthSpec& spec, const SynthTruth& truth);

}  // namespace mmb::data
