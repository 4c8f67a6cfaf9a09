#include "mmbattn/gradcheck.hpp"

#include "mmbattn/data.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/random.hpp"
#include "mmbattn/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mmb::gradcheck {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

const std::vector<Ablation>& ablation_rows() {
  static const std::vector<Ablation> rows{
      {"DNN", false, false, false},
      {"DNN + Mean", false, true, false},
      {"DNN + Max", true, false, false},
      {"DNN + Bit-wise", false, false, true},
      {"DNN + Max + Mean", true, true, false},
      {"DNN + Max + Mean + Bit-wise", true, true, true},
  };
  return rows;
}

std::vector<ParamError> check_model(const model::Model& model, const std::function<ag::Tensor(ag::Graph&)>& loss,
                                    double h, const std::optional<std::pair<std::string, double>>& fault) {
  for (const auto& p : model.parameters()) {
    ag::Tensor t = p.tensor;
    t.clear_grad();
  }
  {
    ag::Graph g;
    if (fault) g.inject_fault(fault->first, fault->second);
    g.backward(loss(g));
  }
  std::vector<ParamError> out;
  for (const auto& p : model.parameters()) {
    ag::Tensor t = p.tensor;
    const Eigen::VectorXd analytic = t.has_grad() ? t.grad() : Eigen::VectorXd::Zero(t.size());
    ParamError err{p.name, 0.0};
    for (Index i = 0; i < t.size(); ++i) {
      const double saved = t.value()[i];
      t.value()[i] = saved + h;
      ag::Graph up = ag::Graph::inference();
      const double f_up = loss(up).item();
      t.value()[i] = saved - h;
      ag::Graph down = ag::Graph::inference();
      const double f_down = loss(down).item();
      t.value()[i] = saved;
      err.max_error = std::max(err.max_error, relative_error(analytic[i], (f_up - f_down) / (2 * h)));
    }
    out.push_back(err);
  }
  return out;
}

namespace {

std::string group_of(const std::string& name) {
  if (name.rfind("attn.", 0) == 0) return name.substr(0, name.find('.', 5));
  return name.substr(0, name.find('.'));
}

}  // namespace

Report run(const Options& o) {
  if (o.fields < 1 || o.fields > 4 || o.embedding_dim < 1 || o.embedding_dim > 3)
    throw ConfigError("gradcheck needs a tiny model (1 <= fields <= 4, 1 <= embedding_dim <= 3)");

  data::FieldSchema schema;
  data::Vocabulary vocab;
  for (Index f = 0; f < o.fields; ++f) {
    schema.fields.push_back({"f" + std::to_string(f), data::FieldKind::categorical});
    data::FieldVocab fv;
    for (Index v = 0; v < o.cardinality; ++v) {
      fv.index.emplace("v" + std::to_string(v), static_cast<std::uint32_t>(fv.values.size()));
      fv.values.push_back("v" + std::to_string(v));
    }
    vocab.fields.push_back(std::move(fv));
  }

  Rng rng = make_rng(o.seed, "gradcheck.batch");
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(o.cardinality));
  data::Batch batch;
  batch.indices.resize(o.rows, o.fields);
  batch.labels.resize(o.rows);
  for (Index r = 0; r < o.rows; ++r) {
    for (Index f = 0; f < o.fields; ++f) batch.indices(r, f) = pick(rng);
    batch.labels[r] = static_cast<double>(r % 2);
  }

  Report report;
  std::map<std::string, double> groups;
  std::vector<std::string> group_order;
  for (auto mode : {attn::CombineMode::residual_product, attn::CombineMode::paper_literal}) {
    for (const Ablation& row : ablation_rows()) {
      model::ModelConfig cfg;
      cfg.embedding_dim = o.embedding_dim;
      cfg.tower.hidden_sizes = o.hidden_sizes;
      cfg.seed = o.seed;
      cfg.attn = attn::AttnConfig{row.use_max, row.use_mean, row.use_bitwise, o.reduction_ratio, mode};
      model::Model m = model::Model::build(schema, vocab, cfg);
      Rng init = make_rng(o.seed, "gradcheck.params");
      for (const auto& p : m.parameters()) {
        ag::Tensor t = p.tensor;
        fill_normal(t.value(), o.param_scale, init);
      }
      const auto errors = check_model(
          m, [&](ag::Graph& g) { return train::bce_loss(g, m.logits(g, batch), batch.labels); }, o.h, o.fault);

      ConfigResult result{row.label + " [" + attn::to_string(mode) + "]", 0.0};
      for (const auto& e : errors) {
        result.max_error = std::max(result.max_error, e.max_error);
        const std::string group = group_of(e.name);
        if (!groups.count(group)) group_order.push_back(group);
        groups[group] = std::max(groups[group], e.max_error);
      }
      report.max_error = std::max(report.max_error, result.max_error);
      report.configs.push_back(std::move(result));
    }
  }
  for (const auto& g : group_order) report.groups.push_back({g, groups[g]});
  report.passed = report.max_error < o.tolerance;
  return report;
}

}  // namespace mmb::gradcheck
