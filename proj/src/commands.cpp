#include "mmbattn/checkpoint.hpp"
#include "mmbattn/cli.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/gradcheck.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

namespace mmb::cli {

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const MetricError& e) {
    err << "metric error: " << e.what() << '\n';
    return 4;
  } catch (const DigestMismatch& e) {
    err << "digest mismatch: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string fmt(const char* format, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::filesystem::path out_dir(const Options& opts, const RunConfig& config) {
  return opts.out.empty() ? config.out_dir() : opts.out;
}

RunConfig load_config(const Options& opts) {
  if (opts.config.empty()) throw ConfigError("--config is required");
  return RunConfig::load(opts.config, opts.overrides, opts.seeds);
}

std::vector<SeedRun> run_all_seeds(const RunConfig& config, const LoadedData& data, const std::filesystem::path& dir,
                                   bool write_checkpoints, std::ostream& out) {
  std::vector<SeedRun> runs;
  for (auto seed : config.seeds()) {
    runs.push_back(run_seed(config, data, seed));
    const SeedRun& run = runs.back();
    const auto seed_dir = dir / ("seed_" + std::to_string(seed));
    write_text(seed_dir / "metrics.jsonl", metrics_jsonl(run.report));
    if (write_checkpoints) ckpt::save(run.model, run.config, seed_dir / "checkpoint.mmbc");
    out << "seed " << seed << ": test auc " << num(run.report.test.auc) << " logloss "
        << num(run.report.test.logloss) << " (best epoch " << run.report.best_epoch << " of "
        << run.report.epochs_run << ")\n";
  }
  return runs;
}

}  // namespace

int cmd_train(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_config(opts);
    const auto dir = out_dir(opts, config);
    const LoadedData data = load_data(config);
    std::filesystem::create_directories(dir / "data");
    data::save_dataset(data.splits.train, dir / "data" / "train.mmbd");
    data::save_dataset(data.splits.valid, dir / "data" / "valid.mmbd");
    data::save_dataset(data.splits.test, dir / "data" / "test.mmbd");
    out << "instances " << data.instances() << ", fields " << data.schema.num_fields() << ", features "
        << data.vocab.total_features() << "\n";

    const auto runs = run_all_seeds(config, data, dir, true, out);
    const Aggregate agg = aggregate(runs);
    out << "test auc " << fmt("%.6f ± %.6f", agg.auc.mean, agg.auc.stddev) << ", logloss "
        << fmt("%.6f ± %.6f", agg.logloss.mean, agg.logloss.stddev) << " over " << runs.size() << " seed(s)\n";

    std::string csv = "seed,auc,logloss,best_epoch\n";
    for (const auto& r : runs)
      csv += std::to_string(r.seed) + "," + num(r.report.test.auc) + "," + num(r.report.test.logloss) + "," +
             std::to_string(r.report.best_epoch) + "\n";
    write_text(dir / "summary.csv", csv);
    return 0;
  });
}

int cmd_evaluate(const Options& opts, const std::filesystem::path& checkpoint, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_config(opts);
    const LoadedData data = load_data(config);
    const auto seed = config.seeds().front();
    const model::Model m = ckpt::load(checkpoint, config.for_seed(seed), data.schema, data.vocab, opts.force);
    const train::Metrics metrics = train::evaluate(m, data.splits.test, eval_threads_from_env());
    nlohmann::ordered_json j;
    j["split"] = "test";
    j["auc"] = metrics.auc;
    j["logloss"] = metrics.logloss;
    j["n"] = metrics.n;
    out << j.dump() << "\n";
    return 0;
  });
}

int cmd_ablate(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_config(opts);
    const auto dir = out_dir(opts, config);
    const LoadedData data = load_data(config);
    const auto rows = run_ablation(config, data);

    std::string csv = "model,auc_mean,auc_std,impr,logloss_mean,logloss_std,data_digest\n";
    out << "model                          auc       impr     logloss\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const std::string impr =
          improvement(r.metrics.auc.mean, i == 0 ? std::nullopt : std::optional<double>(rows[0].metrics.auc.mean));
      csv += r.label + "," + num(r.metrics.auc.mean) + "," + num(r.metrics.auc.stddev) + "," + impr + "," +
             num(r.metrics.logloss.mean) + "," + num(r.metrics.logloss.stddev) + "," + r.data_digest + "\n";
      char line[160];
      std::snprintf(line, sizeof line, "%-30s %.6f  %-8s %.6f\n", r.label.c_str(), r.metrics.auc.mean, impr.c_str(),
                    r.metrics.logloss.mean);
      out << line;
    }
    write_text(dir / "ablation.csv", csv);
    return 0;
  });
}

int cmd_sweep(const Options& opts, const std::string& axis, const std::vector<std::int64_t>& values,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string key;
    if (axis == "reduction_ratio") key = "attn.reduction_ratio";
    else if (axis == "embedding_dim") key = "model.embedding_dim";
    else throw ConfigError("sweep axis must be reduction_ratio or embedding_dim, got '" + axis + "'");
    if (values.empty()) throw ConfigError("sweep needs at least one value");

    const RunConfig config = load_config(opts);
    const auto dir = out_dir(opts, config);
    const LoadedData data = load_data(config);
    std::string csv = axis + ",auc_mean,auc_std,logloss_mean,logloss_std,base_digest\n";
    for (auto v : values) {
      RunConfig variant = config;
      variant.kv.set(key, std::to_string(v));
      variant.validate();
      KeyValueFile rest = variant.kv;
      rest.erase(key);
      rest.erase("run.seeds");
      rest.erase("run.out");
      const auto runs = run_all_seeds(variant, data, dir / ("sweep_" + axis) / std::to_string(v), false, out);
      const Aggregate agg = aggregate(runs);
      csv += std::to_string(v) + "," + num(agg.auc.mean) + "," + num(agg.auc.stddev) + "," + num(agg.logloss.mean) +
             "," + num(agg.logloss.stddev) + "," + rest.digest() + "\n";
      out << axis << "=" << v << ": auc " << fmt("%.6f ± %.6f", agg.auc.mean, agg.auc.stddev) << "\n";
    }
    write_text(dir / ("sweep_" + axis + ".csv"), csv);
    out << csv;
    return 0;
  });
}

int cmd_gradcheck(const Options& opts, const std::optional<std::pair<std::string, double>>& fault, std::ostream& out,
                  std::ostream& err) {
  return guarded(err, [&] {
    gradcheck::Options o;
    if (!opts.config.empty()) {
      KeyValueFile kv = KeyValueFile::load(opts.config);
      for (const auto& item : opts.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--override expects section.key=value, got '" + item + "'");
        kv.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
      }
      static const std::set<std::string> allowed{"gradcheck.fields",   "gradcheck.rows",      "gradcheck.cardinality",
                                                 "model.embedding_dim", "model.hidden_sizes", "model.seed",
                                                 "attn.reduction_ratio"};
      for (const auto& [key, value] : kv.entries()) {
        if (!allowed.count(key)) throw ConfigError("unknown gradcheck config key '" + key + "'");
        if (key == "gradcheck.fields") o.fields = parse_int(key, value);
        else if (key == "gradcheck.rows") o.rows = parse_int(key, value);
        else if (key == "gradcheck.cardinality") o.cardinality = parse_int(key, value);
        else if (key == "model.embedding_dim") o.embedding_dim = parse_int(key, value);
        else if (key == "model.seed") o.seed = static_cast<std::uint64_t>(parse_int(key, value));
        else if (key == "attn.reduction_ratio") o.reduction_ratio = parse_int(key, value);
        else if (key == "model.hidden_sizes") {
          o.hidden_sizes.clear();
          for (auto h : parse_int_list(key, value)) o.hidden_sizes.push_back(h);
        }
      }
    }
    if (!opts.seeds.empty()) o.seed = opts.seeds.front();
    o.fault = fault;
    const gradcheck::Report report = gradcheck::run(o);
    char line[160];
    for (const auto& c : report.configs) {
      std::snprintf(line, sizeof line, "config %-48s max rel err %.3e\n", c.label.c_str(), c.max_error);
      out << line;
    }
    for (const auto& g : report.groups) {
      std::snprintf(line, sizeof line, "group  %-12s max rel err %.3e\n", g.name.c_str(), g.max_error);
      out << line;
    }
    std::snprintf(line, sizeof line, "%s: max relative error %.3e (tolerance %.0e)\n",
                  report.passed ? "PASS" : "FAIL", report.max_error, o.tolerance);
    out << line;
    return report.passed ? 0 : 1;
  });
}

int cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const auto kv = KeyValueFile::load(spec_path);
    const data::SynthSpec spec = data::SynthSpec::from_config(kv);
    const data::SynthData synth = data::synth_generate(spec);
    write_text(out_dir / "train.csv", synth.train.to_csv());
    write_text(out_dir / "valid.csv", synth.valid.to_csv());
    write_text(out_dir / "test.csv", synth.test.to_csv());

    std::string fields;
    for (const auto& f : synth.schema.fields) fields += (fields.empty() ? "" : ",") + f.name;
    write_text(out_dir / "schema.cfg", "schema.fields = " + fields + "\nschema.label = label\n");

    std::string truth = "field,informative,importance\n";
    for (data::Index f = 0; f < spec.num_fields(); ++f) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", synth.truth.importance[f]);
      truth += synth.schema.fields[static_cast<std::size_t>(f)].name + "," + (spec.is_informative(f) ? "1" : "0") +
               "," + buf + "\n";
    }
    write_text(out_dir / "ground_truth.csv", truth);
    out << "rows train/valid/test: " << synth.train.rows.size() << "/" << synth.valid.rows.size() << "/"
        << synth.test.rows.size() << ", base rate " << num(synth.truth.base_rate) << ", bayes auc "
        << num(data::bayes_auc(spec, synth.truth)) << "\n";
    return 0;
  });
}

int cmd_inspect_checkpoint(const std::filesystem::path& checkpoint, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ckpt::Checkpoint c = ckpt::read(checkpoint);
    out << "format version " << ckpt::kFormatVersion << "\n";
    out << "config digest  " << c.digest << "\n";
    out << "parameters     " << c.manifest.size() << " tensors, " << c.payload.size() << " values\n";
    for (const auto& e : c.manifest) {
      char line[160];
      std::snprintf(line, sizeof line, "  %-28s %-14s offset %llu\n", e.name.c_str(), ag::shape_string(e.shape).c_str(),
                    static_cast<unsigned long long>(e.offset));
      out << line;
    }
    out << "config:\n" << c.config_text;
    return 0;
  });
}

}  // namespace mmb::cli
