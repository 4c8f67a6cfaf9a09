#include "mmbattn/attention.hpp"

#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"
#include "mmbattn/ops.hpp"
#include "mmbattn/random.hpp"

#include <algorithm>
#include <cmath>

namespace mmb::attn {

std::string to_string(CombineMode mode) {
  return mode == CombineMode::paper_literal ? "paper_literal" : "residual_product";
}

CombineMode parse_combine_mode(const std::string& text) {
  if (text == "residual_product") return CombineMode::residual_product;
  if (text == "paper_literal") return CombineMode::paper_literal;
  throw ConfigError("attn.combine_mode: expected residual_product or paper_literal, got '" + text + "'");
}

void AttnConfig::validate() const {
  if (reduction_ratio < 1) throw ConfigError("attn.reduction_ratio must be >= 1");
}

AttnConfig AttnConfig::from_config(const KeyValueFile& kv) {
  AttnConfig c;
  if (auto v = kv.get("attn.use_max")) c.use_max = parse_bool("attn.use_max", *v);
  if (auto v = kv.get("attn.use_mean")) c.use_mean = parse_bool("attn.use_mean", *v);
  if (auto v = kv.get("attn.use_bitwise")) c.use_bitwise = parse_bool("attn.use_bitwise", *v);
  if (auto v = kv.get("attn.reduction_ratio")) c.reduction_ratio = parse_int("attn.reduction_ratio", *v);
  if (auto v = kv.get("attn.combine_mode")) c.combine_mode = parse_combine_mode(*v);
  c.validate();
  return c;
}

Index hidden_width(Index width, Index reduction_ratio) { return std::max<Index>(1, width / reduction_ratio); }

BranchParams init_branch(Index width, Index reduction_ratio, std::uint64_t seed, const char* purpose) {
  const Index h = hidden_width(width, reduction_ratio);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(width));
  Rng rng = make_rng(seed, purpose);
  BranchParams p{Tensor::zeros({h, width}, true), Tensor::zeros({width, h}, true)};
  fill_normal(p.w1.value(), stddev, rng);
  fill_normal(p.w2.value(), stddev, rng);
  return p;
}

AttnParams init_attention(const AttnConfig& config, Index num_fields, Index dim, std::uint64_t seed) {
  config.validate();
  AttnParams p;
  if (config.use_max) p.max = init_branch(num_fields, config.reduction_ratio, seed, "attn.max");
  if (config.use_mean) p.mean = init_branch(num_fields, config.reduction_ratio, seed, "attn.mean");
  if (config.use_bitwise) p.bit = init_branch(num_fields * dim, config.reduction_ratio, seed, "attn.bit");
  return p;
}

Index parameter_count(const AttnConfig& config, Index num_fields, Index dim) {
  const Index F = num_fields, Fd = num_fields * dim, R = config.reduction_ratio;
  Index n = 0;
  if (config.use_max) n += 2 * F * hidden_width(F, R);
  if (config.use_mean) n += 2 * F * hidden_width(F, R);
  if (config.use_bitwise) n += 2 * Fd * hidden_width(Fd, R);
  return n;
}

Tensor pool(Graph& g, const Tensor& e, PoolKind kind) {
  if (e.rank() != 3) throw DimensionError("pool expects (B x F x d), got " + ag::shape_string(e.shape()));
  return ag::reduce(g, kind == PoolKind::max ? ag::ReduceOp::max : ag::ReduceOp::mean, e, 2);
}

Tensor branch_attention(Graph& g, const Tensor& s, const BranchParams& params) {
  Tensor hidden = ag::relu(g, ag::matmul(g, s, ag::transpose(g, params.w1)));
  return ag::sigmoid(g, ag::matmul(g, hidden, ag::transpose(g, params.w2)));
}

Tensor mm_combine(Graph& g, const Tensor& w_max, const Tensor& w_mean) {
  if (w_max.defined() && w_mean.defined()) return ag::add(g, w_max, w_mean);
  if (w_max.defined()) return w_max;
  if (w_mean.defined()) return w_mean;
  throw ContractError("mm_combine needs at least one enabled branch");
}

Tensor mm_reweight(Graph& g, const Tensor& e, const Tensor& w_mm) {
  if (e.rank() != 3 || w_mm.rank() != 2 || w_mm.dim(0) != e.dim(0) || w_mm.dim(1) != e.dim(1))
    throw DimensionError("mm_reweight: weights " + ag::shape_string(w_mm.shape()) + " do not match embeddings " +
                         ag::shape_string(e.shape()));
  return ag::mul(g, e, ag::reshape(g, w_mm, {e.dim(0), e.dim(1), 1}));
}

Tensor bitwise_attention(Graph& g, const Tensor& e, const BranchParams& params) {
  return branch_attention(g, ag::reshape(g, e, {e.dim(0), e.dim(1) * e.dim(2)}), params);
}

Tensor mmb_combine(Graph& g, const Tensor& e, const Tensor& w_mm, const Tensor& w_b, CombineMode mode) {
  const Index B = e.dim(0), F = e.dim(1), d = e.dim(2);
  const ag::Shape flat{B, F * d};
  if (!w_mm.defined() && !w_b.defined()) return ag::reshape(g, e, flat);
  if (!w_b.defined()) return ag::reshape(g, mm_reweight(g, e, w_mm), flat);
  if (!w_mm.defined()) return ag::mul(g, ag::reshape(g, e, flat), w_b);

  if (mode == CombineMode::residual_product) {
    Tensor f_mm = ag::reshape(g, mm_reweight(g, e, w_mm), flat);
    Tensor f_b = ag::mul(g, f_mm, w_b);
    return ag::add(g, f_mm, f_b);
  }
  Tensor w_mm_col = ag::reshape(g, w_mm, {B, F, 1});
  Tensor f_b = ag::mul(g, ag::reshape(g, w_b, {B, F, d}), w_mm_col);
  Tensor gate = ag::add(g, f_b, w_mm_col);
  return ag::reshape(g, ag::mul(g, e, gate), flat);
}

AttnOutputs forward(Graph& g, const Tensor& e, const AttnParams& params, const AttnConfig& config) {
  AttnOutputs out;
  if (config.use_max) out.w_max = branch_attention(g, pool(g, e, PoolKind::max), params.max.value());
  if (config.use_mean) out.w_mean = branch_attention(g, pool(g, e, PoolKind::mean), params.mean.value());
  if (config.use_pooling()) out.w_mm = mm_combine(g, out.w_max, out.w_mean);
  if (config.use_bitwise) out.w_bit = bitwise_attention(g, e, params.bit.value());
  out.output = mmb_combine(g, e, out.w_mm, out.w_bit, config.combine_mode);
  return out;
}

}  // namespace mmb::attn
