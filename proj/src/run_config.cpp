#include "mmbattn/cli.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/random.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mmb::cli {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "data.source",         "data.schema",          "data.train",          "data.valid",
      "data.test",           "data.file",            "synth.rows",          "synth.cardinalities",
      "synth.informative",   "synth.weight_scale",   "synth.bias",          "synth.seed",
      "model.embedding_dim", "model.hidden_sizes",   "model.seed",          "attn.use_max",
      "attn.use_mean",       "attn.use_bitwise",     "attn.reduction_ratio", "attn.combine_mode",
      "train.learning_rate", "train.batch_size",     "train.max_epochs",    "train.early_stop_patience",
      "train.beta1",         "train.beta2",          "train.epsilon",       "run.seeds",
      "run.out",             "gradcheck.fields",     "gradcheck.rows",      "gradcheck.cardinality",
  };
  return keys;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<std::uint64_t> RunConfig::seeds() const {
  std::vector<std::uint64_t> out;
  if (auto v = kv.get("run.seeds")) {
    for (auto s : parse_int_list("run.seeds", *v)) out.push_back(static_cast<std::uint64_t>(s));
    if (out.empty()) throw ConfigError("run.seeds must list at least one seed");
    return out;
  }
  if (auto v = kv.get("model.seed")) return {static_cast<std::uint64_t>(parse_int("model.seed", *v))};
  return {0};
}

std::filesystem::path RunConfig::out_dir() const {
  if (kv.contains("run.out")) return resolve("run.out");
  return "mmbattn_out";
}

std::filesystem::path RunConfig::resolve(const std::string& key) const {
  auto v = kv.get(key);
  if (!v) throw ConfigError("missing required key '" + key + "'");
  std::filesystem::path p(*v);
  return p.is_absolute() ? p : base_dir / p;
}

KeyValueFile RunConfig::for_seed(std::uint64_t seed) const {
  KeyValueFile out = kv;
  out.erase("run.seeds");
  out.erase("run.out");
  out.set("model.seed", std::to_string(seed));
  return out;
}

void RunConfig::validate() const {
  for (const auto& [key, value] : kv.entries())
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  const std::string source = kv.get("data.source").value_or("csv");
  if (source == "csv") {
    std::vector<std::string> files{"data.schema"};
    if (kv.contains("data.file")) {
      files.push_back("data.file");
    } else if (kv.contains("data.train") || kv.contains("data.valid") || kv.contains("data.test")) {
      files.insert(files.end(), {"data.train", "data.valid", "data.test"});
    }
    for (const auto& key : files)
      if (!std::filesystem::exists(resolve(key)))
        throw ConfigError(key + ": file '" + resolve(key).string() + "' does not exist");
  } else if (source != "synth") {
    throw ConfigError("data.source: expected csv or synth, got '" + source + "'");
  }
  (void)seeds();
  (void)model::ModelConfig::from_config(kv);
  (void)train::TrainConfig::from_config(kv);
}

RunConfig RunConfig::from_kv(KeyValueFile kv, std::filesystem::path base_dir) {
  RunConfig c{std::move(kv), std::move(base_dir)};
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                          const std::vector<std::uint64_t>& seeds) {
  KeyValueFile kv = KeyValueFile::load(path);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--override expects section.key=value, got '" + item + "'");
    kv.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  if (!seeds.empty()) {
    std::string list;
    for (std::size_t i = 0; i < seeds.size(); ++i) list += (i ? "," : "") + std::to_string(seeds[i]);
    kv.set("run.seeds", list);
  }
  return from_kv(std::move(kv), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

std::uint64_t LoadedData::instances() const {
  return static_cast<std::uint64_t>(splits.train.rows() + splits.valid.rows() + splits.test.rows());
}

LoadedData load_data(const RunConfig& config) {
  LoadedData out;
  std::string train_csv, valid_csv, test_csv;
  if (config.kv.get("data.source").value_or("csv") == "synth") {
    data::SynthSpec spec = data::SynthSpec::from_config(config.kv);
    data::SynthData synth = data::synth_generate(spec);
    out.schema = synth.schema;
    train_csv = synth.train.to_csv();
    valid_csv = synth.valid.to_csv();
    test_csv = synth.test.to_csv();
    out.synth_spec = spec;
    out.synth_truth = std::move(synth.truth);
  } else {
    out.schema = data::FieldSchema::load(config.resolve("data.schema"));
    if (config.kv.contains("data.file")) {
      std::istringstream in(read_file(config.resolve("data.file")));
      std::string header, line;
      if (!std::getline(in, header)) throw DataError("empty CSV file " + config.resolve("data.file").string());
      train_csv = valid_csv = test_csv = header + "\n";
      std::uint64_t row = 0;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const std::uint64_t bucket = sub_seed(row++, "split.row") % 10;
        (bucket < 8 ? train_csv : bucket == 8 ? valid_csv : test_csv) += line + "\n";
      }
    } else {
      train_csv = read_file(config.resolve("data.train"));
      valid_csv = read_file(config.resolve("data.valid"));
      test_csv = read_file(config.resolve("data.test"));
    }
  }
  {
    std::istringstream in(train_csv);
    out.vocab = data::build_vocab(in, out.schema);
  }
  auto encode = [&](const std::string& csv) {
    std::istringstream in(csv);
    return data::encode(in, out.schema, out.vocab);
  };
  out.splits.train = encode(train_csv);
  out.splits.valid = encode(valid_csv);
  out.splits.test = encode(test_csv);
  return out;
}

}  // namespace mmb::cli
