#include "mmbattn/model.hpp"

#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"
#include "mmbattn/ops.hpp"
#include "mmbattn/random.hpp"

#include <cmath>
#include <thread>

namespace mmb::model {

void ModelConfig::validate() const {
  if (embedding_dim < 1) throw ConfigError("model.embedding_dim must be >= 1");
  for (Index h : tower.hidden_sizes)
    if (h < 1) throw ConfigError("model.hidden_sizes entries must be >= 1");
  attn.validate();
}

ModelConfig ModelConfig::from_config(const KeyValueFile& kv) {
  ModelConfig c;
  if (auto v = kv.get("model.embedding_dim")) c.embedding_dim = parse_int("model.embedding_dim", *v);
  if (auto v = kv.get("model.hidden_sizes")) {
    c.tower.hidden_sizes.clear();
    for (auto h : parse_int_list("model.hidden_sizes", *v)) c.tower.hidden_sizes.push_back(h);
  }
  if (auto v = kv.get("model.seed")) c.seed = static_cast<std::uint64_t>(parse_int("model.seed", *v));
  c.attn = attn::AttnConfig::from_config(kv);
  c.validate();
  return c;
}

Model Model::build(const data::FieldSchema& schema, const data::Vocabulary& vocab, const ModelConfig& config) {
  config.validate();
  Model m;
  m.config_ = config;
  m.embedding_ = emb::init_embeddings(schema, vocab, config.embedding_dim, config.seed);
  for (Index f = 0; f < m.embedding_.num_fields(); ++f)
    m.registry_.push_back({"embedding." + m.embedding_.names[static_cast<std::size_t>(f)],
                           m.embedding_.tables[static_cast<std::size_t>(f)]});

  const Index F = schema.num_fields();
  const Index width = F * config.embedding_dim;
  if (config.attn.enabled()) {
    m.attn_ = attn::init_attention(config.attn, F, config.embedding_dim, config.seed);
    auto add_branch = [&](const std::optional<attn::BranchParams>& p, const std::string& name) {
      if (!p) return;
      m.registry_.push_back({"attn." + name + ".w1", p->w1});
      m.registry_.push_back({"attn." + name + ".w2", p->w2});
    };
    add_branch(m.attn_.max, "max");
    add_branch(m.attn_.mean, "mean");
    add_branch(m.attn_.bit, "bit");
  }

  std::vector<Index> sizes = config.tower.hidden_sizes;
  sizes.push_back(1);
  Index fan_in = width;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::string name = "tower." + std::to_string(i);
    Linear layer{Tensor::zeros({fan_in, sizes[i]}, true), Tensor::zeros({1, sizes[i]}, true)};
    Rng rng = make_rng(config.seed, name);
    fill_normal(layer.weight.value(), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    m.registry_.push_back({name + ".weight", layer.weight});
    m.registry_.push_back({name + ".bias", layer.bias});
    m.layers_.push_back(std::move(layer));
    fan_in = sizes[i];
  }
  return m;
}

attn::AttnOutputs Model::attention(Graph& g, const data::Batch& batch) const {
  Tensor e = emb::lookup(g, embedding_, batch);
  return attn::forward(g, e, attn_, config_.attn);
}

Tensor Model::tower(Graph& g, const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != layers_.front().weight.dim(0))
    throw DimensionError("tower input " + ag::shape_string(x.shape()) + " does not match width " +
                         std::to_string(layers_.front().weight.dim(0)));
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = ag::add(g, ag::matmul(g, h, layers_[i].weight), layers_[i].bias);
    if (i + 1 < layers_.size()) h = ag::relu(g, h);
  }
  return h;
}

Tensor Model::logits(Graph& g, const data::Batch& batch) const {
  Tensor x = attention(g, batch).output;
  return ag::reshape(g, tower(g, x), {batch.size()});
}

Tensor Model::forward(Graph& g, const data::Batch& batch) const { return ag::sigmoid(g, logits(g, batch)); }

Eigen::VectorXd Model::predict(const data::Dataset& ds, Index batch_size, int threads) const {
  return predict_logits(ds, batch_size, threads).unaryExpr([](double z) { return ag::stable_sigmoid(z); });
}

Eigen::VectorXd Model::predict_logits(const data::Dataset& ds, Index batch_size, int threads) const {
  const auto rows = data::batch_rows(ds.rows(), batch_size, std::nullopt, 0);
  Eigen::VectorXd out(ds.rows());
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t k = first; k < rows.size(); k += stride) {
      Graph g = Graph::inference();
      Tensor p = logits(g, ds.gather(rows[k]));
      out.segment(rows[k].front(), static_cast<Index>(rows[k].size())) = p.value();
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || rows.size() < 2) {
    run(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  for (auto& t : pool) t.join();
  return out;
}

Tensor Model::parameter(const std::string& name) const {
  for (const auto& p : registry_)
    if (p.name == name) return p.tensor;
  throw ContractError("no parameter named '" + name + "'");
}

Index Model::parameter_count() const {
  Index n = 0;
  for (const auto& p : registry_) n += p.tensor.size();
  return n;
}

Index parameter_count(const ModelConfig& config, const data::Vocabulary& vocab) {
  const Index F = vocab.num_fields();
  const Index d = config.embedding_dim;
  Index n = static_cast<Index>(vocab.total_features()) * d;
  if (config.attn.enabled()) n += attn::parameter_count(config.attn, F, d);
  Index fan_in = F * d;
  for (Index h : config.tower.hidden_sizes) {
    n += fan_in * h + h;
    fan_in = h;
  }
  return n + fan_in + 1;
}

}  // namespace mmb::model
