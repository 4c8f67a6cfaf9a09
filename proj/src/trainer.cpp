#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"
#include "mmbattn/train.hpp"

#include <chrono>
#include <cmath>

namespace mmb::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("train.early_stop_patience must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("train.epsilon must be > 0");
}

TrainConfig TrainConfig::from_config(const KeyValueFile& kv) {
  TrainConfig c;
  if (auto v = kv.get("train.learning_rate")) c.learning_rate = parse_double("train.learning_rate", *v);
  if (auto v = kv.get("train.batch_size")) c.batch_size = parse_int("train.batch_size", *v);
  if (auto v = kv.get("train.max_epochs")) c.max_epochs = parse_int("train.max_epochs", *v);
  if (auto v = kv.get("train.early_stop_patience")) c.early_stop_patience = parse_int("train.early_stop_patience", *v);
  if (auto v = kv.get("train.beta1")) c.beta1 = parse_double("train.beta1", *v);
  if (auto v = kv.get("train.beta2")) c.beta2 = parse_double("train.beta2", *v);
  if (auto v = kv.get("train.epsilon")) c.epsilon = parse_double("train.epsilon", *v);
  if (auto v = kv.get("model.seed")) c.seed = static_cast<std::uint64_t>(parse_int("model.seed", *v));
  c.validate();
  return c;
}

bool EarlyStopping::update(double auc) {
  if (auc > best_) {
    best_ = auc;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

Metrics evaluate(const model::Model& model, const data::Dataset& ds, int threads) {
  const Eigen::VectorXd z = model.predict_logits(ds, 4096, threads);
  return Metrics{auc(z, ds.labels), log_loss_from_logits(z, ds.labels), ds.rows()};
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

MetricsReport train(model::Model& model, const data::Splits& splits, const TrainConfig& config) {
  config.validate();
  Adam adam(model.parameters(), AdamConfig{config.learning_rate, config.beta1, config.beta2, config.epsilon});
  EarlyStopping stopper(config.early_stop_patience);
  std::vector<Eigen::VectorXd> best;
  MetricsReport report;

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = data::batch_rows(splits.train.rows(), config.batch_size, config.seed,
                                        static_cast<std::uint64_t>(epoch));
    Eigen::VectorXd scores(splits.train.rows()), labels(splits.train.rows());
    double loss_sum = 0.0;
    Index seen = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const data::Batch batch = splits.train.gather(order[k]);
      adam.zero_grad();
      ag::Graph g;
      try {
        ag::Tensor z = model.logits(g, batch);
        ag::Tensor loss = bce_loss(g, z, batch.labels);
        g.backward(loss);
        scores.segment(seen, batch.size()) = z.value();
        labels.segment(seen, batch.size()) = batch.labels;
        loss_sum += loss.item() * static_cast<double>(batch.size());
      } catch (const NumericError& e) {
        throw NumericError("training aborted at epoch " + std::to_string(epoch) + ", batch " + std::to_string(k) +
                           ": " + e.what());
      }
      adam.step();
      seen += batch.size();
    }
    const double train_seconds = seconds_since(start);
    report.history.push_back(
        {epoch, "train", auc(scores, labels), loss_sum / static_cast<double>(seen), train_seconds});

    const auto valid_start = std::chrono::steady_clock::now();
    const Metrics valid = evaluate(model, splits.valid, config.eval_threads);
    report.history.push_back({epoch, "valid", valid.auc, valid.logloss, seconds_since(valid_start)});
    report.epochs_run = epoch;

    if (stopper.update(valid.auc)) {
      report.best_epoch = epoch;
      best.clear();
      for (const auto& p : model.parameters()) best.push_back(p.tensor.value());
    }
    if (stopper.should_stop()) break;
  }

  for (std::size_t i = 0; i < best.size(); ++i) {
    ag::Tensor t = model.parameters()[i].tensor;
    t.value() = best[i];
  }
  const auto test_start = std::chrono::steady_clock::now();
  report.test = evaluate(model, splits.test, config.eval_threads);
  report.history.push_back({report.best_epoch, "test", report.test.auc, report.test.logloss, seconds_since(test_start)});
  return report;
}

SeedSummary summarize(const std::vector<double>& values) {
  SeedSummary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace mmb::train
