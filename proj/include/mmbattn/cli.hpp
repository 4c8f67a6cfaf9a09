#pragma once

#include "mmbattn/data.hpp"
#include "mmbattn/keyvalue.hpp"
#include "mmbattn/model.hpp"
#include "mmbattn/synth.hpp"
#include "mmbattn/train.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mmb::cli {

/**
 * A run configuration in the flat key-value format.
 *
 *   data.source       csv (default) or synth
 *   data.schema       schema file (csv)
 *   data.train/valid/test   pre-split CSVs, or
 *   data.file         one CSV split 8:1:1 by hashing the row number
 *   synth.*           generator spec (synth)
 *   model.*, attn.*, train.*   see ModelConfig / AttnConfig / TrainConfig
 *   run.seeds         comma-separated seeds (default: model.seed)
 *   run.out           output directory
 *   gradcheck.*       fields, rows, cardinality (gradcheck only)
 *
 * Relative paths resolve against the config file's directory.
 */
struct RunConfig {
  KeyValueFile kv;
  std::filesystem::path base_dir;

  std::vector<std::uint64_t> seeds() const;
  std::filesystem::path out_dir() const;
  std::filesystem::path resolve(const std::string& key) const;

  // The configuration one seed's model is built and digested from:
  // model.seed = seed, run.* removed.
  KeyValueFile for_seed(std::uint64_t seed) const;

  // Rejects unknown keys and checks that referenced files exist.
  void validate() const;

  static RunConfig from_kv(KeyValueFile kv, std::filesystem::path base_dir = ".");
  // Applies `--override section.key=value` items and replaces run.seeds when
  // `seeds` is non-empty.
  static RunConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
                        const std::vector<std::uint64_t>& seeds = {});
};

struct LoadedData {
  data::FieldSchema schema;
  data::Vocabulary vocab;
  data::Splits splits;
  std::optional<data::SynthSpec> synth_spec;
  std::optional<data::SynthTruth> synth_truth;
  std::uint64_t instances() const;
};

// Vocabulary is built from the training split only.
LoadedData load_data(const RunConfig& config);

struct SeedRun {
  std::uint64_t seed = 0;
  train::MetricsReport report;
  model::Model model;
  KeyValueFile config;  // RunConfig::for_seed(seed)
};

SeedRun run_seed(const RunConfig& config, const LoadedData& data, std::uint64_t seed);

struct Aggregate {
  train::SeedSummary auc;
  train::SeedSummary logloss;
};
Aggregate aggregate(const std::vector<SeedRun>& runs);

// One line per epoch record: {"epoch", "split", "auc", "logloss", "seconds"}.
std::string metrics_jsonl(const train::MetricsReport& report);

struct AblationRow {
  std::string label;
  Aggregate metrics;
  std::vector<double> aucs;
  std::string data_digest;
};
std::vector<AblationRow> run_ablation(const RunConfig& config, const LoadedData& data);
// "Base" without a base AUC; otherwise (AUC − AUC_base) / AUC_base · 100, as "0.37%".
std::string improvement(double auc, std::optional<double> base_auc);

std::string dataset_digest(const data::Splits& splits);

// Environment variable that sets evaluation threads (default 1).
inline constexpr const char* kThreadsEnv = "MMBATTN_EVAL_THREADS";
int eval_threads_from_env();

struct Options {
  std::filesystem::path config;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out;
  std::vector<std::string> overrides;
  bool force = false;
};

// Each returns a process exit status; errors are reported on `err`.
int cmd_train(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_evaluate(const Options& opts, const std::filesystem::path& checkpoint, std::ostream& out, std::ostream& err);
int cmd_ablate(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const Options& opts, const std::string& axis, const std::vector<std::int64_t>& values,
              std::ostream& out, std::ostream& err);
int cmd_gradcheck(const Options& opts, const std::optional<std::pair<std::string, double>>& fault, std::ostream& out,
                  std::ostream& err);
int cmd_synth(const std::filesystem::path& spec, const std::filesystem::path& out_dir, std::ostream& out,
              std::ostream& err);
int cmd_inspect_checkpoint(const std::filesystem::path& checkpoint, std::ostream& out, std::ostream& err);

}  // namespace mmb::cli
