#pragma once

#include "mmbattn/data.hpp"
#include "mmbattn/model.hpp"
#include "mmbattn/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmb {
class KeyValueFile;
}

namespace mmb::train {

using ag::Index;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels, computed
// as max(z, 0) − z·y + log1p(e^{−|z|}). d/dz = (sigmoid(z) − y) / N.
ag::Tensor bce_loss(ag::Graph& g, const ag::Tensor& logits, const VectorRef& labels);

// Value-only form of the same loss on logits.
double log_loss_from_logits(const VectorRef& logits, const VectorRef& labels);

// −(1/N) Σ [y·log(p) + (1 − y)·log(1 − p)] evaluated directly on probabilities.
double log_loss(const VectorRef& probabilities, const VectorRef& labels);

// Mann–Whitney AUC from average ranks; tied scores count ½.
// Throws MetricError unless both classes are present.
double auc(const VectorRef& scores, const VectorRef& labels);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a parameter registry. Reads each
/// parameter's accumulated gradient; a parameter without one counts as zero.
class Adam {
 public:
  Adam(model::ParameterRegistry params, AdamConfig config);

  void step();
  void zero_grad();
  std::int64_t steps() const { return t_; }

 private:
  model::ParameterRegistry params_;
  AdamConfig config_;
  std::vector<Eigen::VectorXd> m_, v_;
  std::int64_t t_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  Index batch_size = 256;
  Index max_epochs = 10;
  Index early_stop_patience = 2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  // Runtime only (not a config key): workers for evaluation sharding.
  int eval_threads = 1;

  void validate() const;
  // train.learning_rate, train.batch_size, train.max_epochs,
  // train.early_stop_patience, train.beta1, train.beta2, train.epsilon.
  static TrainConfig from_config(const KeyValueFile& kv);
};

// Tracks the best validation AUC; stops after `patience` epochs without a
// strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(Index patience) : patience_(patience) {}

  // Returns true when `auc` is a new best.
  bool update(double auc);
  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }

 private:
  Index patience_;
  Index stale_ = 0;
  double best_ = -1.0;
};

struct EpochRecord {
  Index epoch = 0;
  std::string split;
  double auc = 0.0;
  double logloss = 0.0;
  double seconds = 0.0;
};

struct Metrics {
  double auc = 0.0;
  double logloss = 0.0;
  Index n = 0;
};

struct MetricsReport {
  Metrics test;
  Index best_epoch = 0;
  Index epochs_run = 0;
  std::vector<EpochRecord> history;  // train/valid per epoch, then "test"
};

Metrics evaluate(const model::Model& model, const data::Dataset& ds, int threads = 1);

// Trains in place, restores the best-validation-AUC parameters, then scores
// the test split once. A non-finite loss or gradient aborts with a
// NumericError naming the epoch and batch.
MetricsReport train(model::Model& model, const data::Splits& splits, const TrainConfig& config);

struct SeedSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n − 1); 0 for one seed
};
SeedSummary summarize(const std::vector<double>& values);

}  // namespace mmb::train
