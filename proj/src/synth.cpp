#include "mmbattn/synth.hpp"

#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"
#include "mmbattn/ops.hpp"
#include "mmbattn/random.hpp"

#include <algorithm>
#include <set>

namespace mmb::data {

bool SynthSpec::is_informative(Index field) const {
  return std::find(informative.begin(), informative.end(), field) != informative.end();
}

void SynthSpec::validate() const {
  if (rows < 10) throw SpecError("synth.rows must be >= 10");
  if (cardinalities.empty()) throw SpecError("synth spec declares no fields");
  for (auto c : cardinalities)
    if (c < 1) throw SpecError("synth.cardinalities entries must be >= 1");
  if (informative.empty()) throw SpecError("degenerate synth spec: no informative fields (label would be pure noise)");
  std::set<std::int64_t> seen;
  for (auto f : informative) {
    if (f < 0 || f >= num_fields()) throw SpecError("synth.informative index " + std::to_string(f) + " out of range");
    if (!seen.insert(f).second) throw SpecError("synth.informative lists field " + std::to_string(f) + " twice");
  }
  for (const auto& [f, w] : fixed_weights) {
    if (!is_informative(f)) throw SpecError("fixed weights given for non-informative field " + std::to_string(f));
    if (static_cast<std::int64_t>(w.size()) != cardinalities[static_cast<std::size_t>(f)])
      throw SpecError("fixed weights for field " + std::to_string(f) + " do not match its cardinality");
  }
  if (!(weight_scale >= 0.0)) throw SpecError("synth.weight_scale must be >= 0");
}

SynthSpec SynthSpec::from_config(const KeyValueFile& kv) {
  SynthSpec spec;
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("synth.", 0) != 0) continue;
    if (key == "synth.rows") spec.rows = parse_int(key, value);
    else if (key == "synth.cardinalities") spec.cardinalities = parse_int_list(key, value);
    else if (key == "synth.informative") spec.informative = parse_int_list(key, value);
    else if (key == "synth.weight_scale") spec.weight_scale = parse_double(key, value);
    else if (key == "synth.bias") spec.bias = parse_double(key, value);
    else if (key == "synth.seed") spec.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else throw ConfigError("unknown config key '" + key + "'");
  }
  spec.validate();
  return spec;
}

std::string RawTable::to_csv(char delim) const {
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += delim;
      out += cells[i];
    }
    out += '\n';
  };
  emit(columns);
  for (const auto& r : rows) emit(r);
  return out;
}

SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  const Index F = spec.num_fields();

  SynthData data;
  for (Index f = 0; f < F; ++f) data.schema.fields.push_back(Field{"f" + std::to_string(f), FieldKind::categorical});
  data.schema.label_column = "label";

  SynthTruth& truth = data.truth;
  truth.bias = spec.bias;
  truth.weights.resize(static_cast<std::size_t>(F));
  truth.importance = Eigen::VectorXd::Zero(F);
  Rng weight_rng = make_rng(spec.seed, "synth.weights");
  for (Index f = 0; f < F; ++f) {
    if (!spec.is_informative(f)) continue;
    Eigen::VectorXd& w = truth.weights[static_cast<std::size_t>(f)];
    w.resize(spec.cardinalities[static_cast<std::size_t>(f)]);
    if (auto it = spec.fixed_weights.find(f); it != spec.fixed_weights.end())
      w = Eigen::Map<const Eigen::VectorXd>(it->second.data(), w.size());
    else
      fill_normal(w, spec.weight_scale, weight_rng);
    truth.importance[f] = (w.array() - w.mean()).square().mean();
  }

  std::vector<std::string> columns;
  for (const Field& fld : data.schema.fields) columns.push_back(fld.name);
  columns.push_back("label");
  data.train.columns = data.valid.columns = data.test.columns = columns;

  const std::int64_t n_train = spec.rows * 8 / 10;
  const std::int64_t n_valid = spec.rows / 10;
  Rng row_rng = make_rng(spec.seed, "synth.rows");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::int64_t positives = 0;
  for (std::int64_t r = 0; r < spec.rows; ++r) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(F) + 1);
    double logit = spec.bias;
    for (Index f = 0; f < F; ++f) {
      std::uniform_int_distribution<std::int64_t> pick(0, spec.cardinalities[static_cast<std::size_t>(f)] - 1);
      const std::int64_t v = pick(row_rng);
      if (spec.is_informative(f)) logit += truth.weights[static_cast<std::size_t>(f)][v];
      row.push_back("v" + std::to_string(v));
    }
    const bool y = unit(row_rng) < ag::stable_sigmoid(logit);
    positives += y;
    row.push_back(y ? "1" : "0");
    RawTable& dst = r < n_train ? data.train : (r < n_train + n_valid ? data.valid : data.test);
    dst.rows.push_back(std::move(row));
  }
  truth.base_rate = static_cast<double>(positives) / static_cast<double>(spec.rows);
  if (!(truth.base_rate > 0.05 && truth.base_rate < 0.95))
    throw SpecError("generated label base rate " + std::to_string(truth.base_rate) + " is outside (0.05, 0.95)");
  return data;
}

double bayes_auc(const SynthSpec& spec, const SynthTruth& truth) {
  std::int64_t combos = 1;
  for (auto f : spec.informative) {
    combos *= spec.cardinalities[static_cast<std::size_t>(f)];
    if (combos > (1 << 22)) throw SpecError("too many informative value combinations to enumerate");
  }
  // (probability, mass) per combination; all combinations are equally likely.
  std::vector<std::pair<double, double>> cells;
  cells.reserve(static_cast<std::size_t>(combos));
  const double mass = 1.0 / static_cast<double>(combos);
  std::vector<std::int64_t> digit(spec.informative.size(), 0);
  for (std::int64_t c = 0; c < combos; ++c) {
    double logit = truth.bias;
    for (std::size_t i = 0; i < digit.size(); ++i)
      logit += truth.weights[static_cast<std::size_t>(spec.informative[i])][digit[i]];
    cells.emplace_back(ag::stable_sigmoid(logit), mass);
    for (std::size_t i = 0; i < digit.size(); ++i) {
      if (++digit[i] < spec.cardinalities[static_cast<std::size_t>(spec.informative[i])]) break;
      digit[i] = 0;
    }
  }
  std::sort(cells.begin(), cells.end());
  double pos_total = 0, neg_total = 0;
  for (const auto& [p, m] : cells) {
    pos_total += m * p;
    neg_total += m * (1 - p);
  }
  double neg_below = 0, num = 0;
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    double pos_g = 0, neg_g = 0;
    for (; j < cells.size() && cells[j].first == cells[i].first; ++j) {
      pos_g += cells[j].second * cells[j].first;
      neg_g += cells[j].second * (1 - cells[j].first);
    }
    num += pos_g * (neg_below + 0.5 * neg_g);
    neg_below += neg_g;
    i = j;
  }
  return num / (pos_total * neg_total);
}

}  // namespace mmb::data
