#include "mmbattn/cli.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/gradcheck.hpp"

#include "json.hpp"

#include <cstdio>
#include <cstdlib>

namespace mmb::cli {

int eval_threads_from_env() {
  const char* v = std::getenv(kThreadsEnv);
  if (!v || !*v) return 1;
  const auto n = parse_int(kThreadsEnv, v);
  if (n < 1) throw ConfigError(std::string(kThreadsEnv) + " must be >= 1");
  return static_cast<int>(n);
}

SeedRun run_seed(const RunConfig& config, const LoadedData& data, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  run.config = config.for_seed(seed);
  const auto model_config = model::ModelConfig::from_config(run.config);
  auto train_config = train::TrainConfig::from_config(run.config);
  train_config.eval_threads = eval_threads_from_env();
  run.model = model::Model::build(data.schema, data.vocab, model_config);
  run.report = train::train(run.model, data.splits, train_config);
  return run;
}

Aggregate aggregate(const std::vector<SeedRun>& runs) {
  std::vector<double> aucs, losses;
  for (const auto& r : runs) {
    aucs.push_back(r.report.test.auc);
    losses.push_back(r.report.test.logloss);
  }
  return Aggregate{train::summarize(aucs), train::summarize(losses)};
}

std::string metrics_jsonl(const train::MetricsReport& report) {
  std::string out;
  for (const auto& rec : report.history) {
    nlohmann::ordered_json j;
    j["epoch"] = rec.epoch;
    j["split"] = rec.split;
    j["auc"] = rec.auc;
    j["logloss"] = rec.logloss;
    j["seconds"] = rec.seconds;
    out += j.dump() + "\n";
  }
  return out;
}

std::string dataset_digest(const data::Splits& splits) {
  std::vector<std::uint8_t> bytes;
  for (const auto* ds : {&splits.train, &splits.valid, &splits.test}) {
    const auto part = data::serialize(*ds);
    bytes.insert(bytes.end(), part.begin(), part.end());
  }
  return sha256_hex(bytes);
}

std::string improvement(double auc, std::optional<double> base_auc) {
  if (!base_auc) return "Base";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", (auc - *base_auc) / *base_auc * 100.0);
  return buf;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, const LoadedData& data) {
  std::vector<AblationRow> rows;
  for (const auto& row : gradcheck::ablation_rows()) {
    RunConfig variant = config;
    variant.kv.set("attn.use_max", row.use_max ? "true" : "false");
    variant.kv.set("attn.use_mean", row.use_mean ? "true" : "false");
    variant.kv.set("attn.use_bitwise", row.use_bitwise ? "true" : "false");
    std::vector<SeedRun> runs;
    AblationRow out;
    out.label = row.label;
    for (auto seed : variant.seeds()) {
      runs.push_back(run_seed(variant, data, seed));
      out.aucs.push_back(runs.back().report.test.auc);
    }
    out.metrics = aggregate(runs);
    out.data_digest = dataset_digest(data.splits);
    rows.push_back(std::move(out));
  }
  return rows;
}

}  // namespace mmb::cli
