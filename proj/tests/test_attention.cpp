#include "mmbattn/attention.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"
#include "mmbattn/ops.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mmb;
using namespace mmb::ag;
using namespace mmb::attn;
using support::random_vector;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

BranchParams branch(Index h, Index c, Vector w1, Vector w2) {
  return {Tensor::from({h, c}, std::move(w1), true), Tensor::from({c, h}, std::move(w2), true)};
}

AttnConfig toggles(bool mx, bool mn, bool bit, CombineMode mode = CombineMode::residual_product) {
  AttnConfig c;
  c.use_max = mx;
  c.use_mean = mn;
  c.use_bitwise = bit;
  c.combine_mode = mode;
  return c;
}

void zero(AttnParams& p) {
  for (auto* b : {&p.max, &p.mean, &p.bit})
    if (*b) {
      (*b)->w1.value().setZero();
      (*b)->w2.value().setZero();
    }
}

}  // namespace

TEST(Pool, MaxAndMean) {
  Graph g;
  Tensor e = Tensor::from({1, 2, 3}, {1, 2, 3, 7, 7, 7});
  Tensor mx = pool(g, e, PoolKind::max);
  Tensor mn = pool(g, e, PoolKind::mean);
  EXPECT_EQ(mx.shape(), (Shape{1, 2}));
  EXPECT_EQ(mx[0], 3.0);
  EXPECT_EQ(mn[0], 2.0);
  EXPECT_EQ(mx[1], 7.0);
  EXPECT_EQ(mn[1], 7.0);
}

TEST(Pool, MeanGradientIsUniform) {
  std::mt19937_64 rng(1);
  Tensor e = Tensor::from({2, 3, 4}, random_vector(24, rng), true);
  Graph g;
  g.backward(sum_all(g, pool(g, e, PoolKind::mean)));
  for (Index i = 0; i < 24; ++i) EXPECT_DOUBLE_EQ(e.grad()[i], 0.25);
  const Vector numeric = support::numeric_grad(e, [&] {
    Graph fg = Graph::inference();
    return sum_all(fg, pool(fg, e, PoolKind::mean)).item();
  });
  EXPECT_LT(support::max_relative_error(e.grad(), numeric), 1e-8);
}

TEST(Branch, ZeroWeightsGiveOneHalf) {
  std::mt19937_64 rng(2);
  Graph g;
  Tensor s = Tensor::from({5, 4}, random_vector(20, rng));
  Tensor w = branch_attention(g, s, branch(2, 4, Vector::Zero(8), Vector::Zero(8)));
  EXPECT_TRUE((w.value().array() == 0.5).all());
}

TEST(Branch, OutputsStrictlyInsideUnitInterval) {
  std::mt19937_64 rng(3);
  // Weights and inputs bounded so every logit stays below 36, where float64 sigmoid is still < 1.
  auto p = branch(3, 6, random_vector(18, rng, -1, 1), random_vector(18, rng, -1, 1));
  Graph g;
  Tensor w = branch_attention(g, Tensor::from({1000, 6}, random_vector(6000, rng, -2, 2)), p);
  EXPECT_GT(w.value().minCoeff(), 0.0);
  EXPECT_LT(w.value().maxCoeff(), 1.0);
}

TEST(Branch, TwoFieldHandComputation) {
  // s = [1, 0.25]; W1 = [[1, 2], [-1, 0.5]]; W2 = [[0.3, -0.2], [0.1, 0.4]].
  // s·W1ᵀ = [1.5, -0.875] -> relu [1.5, 0]; hidden·W2ᵀ = [0.45, 0.15].
  Graph g;
  auto p = branch(2, 2, (Vector(4) << 1, 2, -1, 0.5).finished(), (Vector(4) << 0.3, -0.2, 0.1, 0.4).finished());
  Tensor w = branch_attention(g, Tensor::from({1, 2}, {1.0, 0.25}), p);
  EXPECT_NEAR(w[0], sig(0.45), 1e-12);
  EXPECT_NEAR(w[1], sig(0.15), 1e-12);
}

TEST(Combine, ZeroInitGivesOneEverywhere) {
  std::mt19937_64 rng(4);
  AttnParams p = init_attention(toggles(true, true, false), 3, 2, 0);
  zero(p);
  Graph g;
  AttnOutputs out = forward(g, Tensor::from({4, 3, 2}, random_vector(24, rng)), p, toggles(true, true, false));
  EXPECT_TRUE((out.w_max.value().array() == 0.5).all());
  EXPECT_TRUE((out.w_mean.value().array() == 0.5).all());
  EXPECT_TRUE((out.w_mm.value().array() == 1.0).all());
}

TEST(Combine, SingleBranchPassesThrough) {
  std::mt19937_64 rng(5);
  Graph g;
  Tensor a = Tensor::from({2, 3}, random_vector(6, rng));
  Tensor b = Tensor::from({2, 3}, random_vector(6, rng));
  EXPECT_TRUE(mm_combine(g, a, Tensor()).same(a));
  EXPECT_TRUE(mm_combine(g, Tensor(), b).same(b));
  const Vector sum = mm_combine(g, a, b).value();
  for (Index i = 0; i < 6; ++i) EXPECT_EQ(sum[i], a[i] + b[i]);
  EXPECT_THROW(mm_combine(g, Tensor(), Tensor()), ContractError);
}

TEST(Reweight, BroadcastMatchesRepeatOracle) {
  std::mt19937_64 rng(6);
  const Index B = 3, F = 4, d = 5;
  Tensor e = Tensor::from({B, F, d}, random_vector(B * F * d, rng));
  Tensor w = Tensor::from({B, F}, random_vector(B * F, rng));
  Graph g;
  const Vector got = mm_reweight(g, e, w).value();
  for (Index b = 0; b < B; ++b)
    for (Index f = 0; f < F; ++f)
      for (Index j = 0; j < d; ++j) EXPECT_EQ(got[(b * F + f) * d + j], e[(b * F + f) * d + j] * w[b * F + f]);

  Tensor ones = Tensor::constant({B, F}, 1.0);
  EXPECT_EQ(mm_reweight(g, e, ones).value(), e.value());
  Vector zf = Vector::Ones(B * F);
  zf[1 * F + 2] = 0.0;
  const Vector z = mm_reweight(g, e, Tensor::from({B, F}, zf)).value();
  for (Index j = 0; j < d; ++j) EXPECT_EQ(z[(1 * F + 2) * d + j], 0.0);
}

TEST(Reweight, MonotoneGating) {
  std::mt19937_64 rng(7);
  Tensor e = Tensor::from({1, 2, 3}, random_vector(6, rng));
  Graph g;
  const Vector lo = mm_reweight(g, e, Tensor::from({1, 2}, {0.4, 0.5})).value();
  const Vector hi = mm_reweight(g, e, Tensor::from({1, 2}, {0.8, 0.5})).value();
  EXPECT_NEAR(hi.head(3).norm(), 2.0 * lo.head(3).norm(), 1e-15);
  EXPECT_EQ(hi.tail(3), lo.tail(3));
}

TEST(Bitwise, OneFieldHandComputation) {
  // flatten(e) = [2, -1]; W1 = [[0.5, 1], [1, 1]]; W2 = [[1, -1], [0.25, 0]].
  // s·W1ᵀ = [1 - 1, 2 - 1] = [0, 1] -> relu [0, 1]; logits = [-1, 0].
  Graph g;
  auto p = branch(2, 2, (Vector(4) << 0.5, 1, 1, 1).finished(), (Vector(4) << 1, -1, 0.25, 0).finished());
  Tensor w = bitwise_attention(g, Tensor::from({1, 1, 2}, {2, -1}), p);
  EXPECT_EQ(w.shape(), (Shape{1, 2}));
  EXPECT_NEAR(w[0], sig(-1.0), 1e-12);
  EXPECT_NEAR(w[1], 0.5, 1e-12);
}

TEST(Bitwise, FieldPermutationEquivariance) {
  std::mt19937_64 rng(8);
  const Index F = 3, d = 2, C = F * d, h = 2;
  Tensor e = Tensor::from({2, F, d}, random_vector(2 * C, rng));
  auto p = branch(h, C, random_vector(h * C, rng), random_vector(C * h, rng));
  // Swap fields 0 and 2: bit c of field f moves to field perm[f].
  const std::vector<Index> perm{2, 1, 0};
  auto bit = [&](Index c) { return perm[c / d] * d + c % d; };
  Vector pe(2 * C), w1(h * C), w2(C * h);
  for (Index b = 0; b < 2; ++b)
    for (Index c = 0; c < C; ++c) pe[b * C + bit(c)] = e[b * C + c];
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < C; ++c) w1[r * C + bit(c)] = p.w1[r * C + c];
  for (Index c = 0; c < C; ++c)
    for (Index r = 0; r < h; ++r) w2[bit(c) * h + r] = p.w2[c * h + r];
  Graph g;
  const Vector base = bitwise_attention(g, e, p).value();
  const Vector moved = bitwise_attention(g, Tensor::from({2, F, d}, pe), branch(h, C, w1, w2)).value();
  for (Index b = 0; b < 2; ++b)
    for (Index c = 0; c < C; ++c) EXPECT_NEAR(moved[b * C + bit(c)], base[b * C + c], 1e-14);
}

TEST(Module, PoolingBranchesPermutationEquivariant) {
  std::mt19937_64 rng(9);
  const Index F = 4, d = 3;
  AttnConfig cfg = toggles(true, true, false);
  cfg.reduction_ratio = 2;
  AttnParams p = init_attention(cfg, F, d, 1);
  Tensor e = Tensor::from({2, F, d}, random_vector(2 * F * d, rng));
  const std::vector<Index> perm{1, 3, 0, 2};
  Vector pe(e.size());
  for (Index b = 0; b < 2; ++b)
    for (Index f = 0; f < F; ++f) pe.segment((b * F + perm[f]) * d, d) = e.value().segment((b * F + f) * d, d);
  AttnParams q = p;
  for (auto* br : {&q.max, &q.mean}) {
    const BranchParams src = **br;
    const Index h = src.w1.dim(0);
    Vector w1(h * F), w2(F * h);
    for (Index r = 0; r < h; ++r)
      for (Index f = 0; f < F; ++f) w1[r * F + perm[f]] = src.w1[r * F + f];
    for (Index f = 0; f < F; ++f)
      for (Index r = 0; r < h; ++r) w2[perm[f] * h + r] = src.w2[f * h + r];
    *br = branch(h, F, w1, w2);
  }
  Graph g;
  const Vector base = forward(g, e, p, cfg).output.value();
  const Vector moved = forward(g, Tensor::from({2, F, d}, pe), q, cfg).output.value();
  for (Index b = 0; b < 2; ++b)
    for (Index f = 0; f < F; ++f)
      for (Index j = 0; j < d; ++j)
        EXPECT_NEAR(moved[(b * F + perm[f]) * d + j], base[(b * F + f) * d + j], 1e-14);
}

TEST(Module, AllTogglesOffIsIdentity) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor e = Tensor::from({3, 4, 5}, random_vector(60, rng, -10, 10));
    Graph g;
    AttnOutputs out = forward(g, e, AttnParams{}, toggles(false, false, false));
    EXPECT_EQ(out.output.shape(), (Shape{3, 20}));
    EXPECT_EQ(out.output.value(), e.value());
  }
}

TEST(Module, BitOnlyIsFlattenTimesWeights) {
  std::mt19937_64 rng(11);
  AttnConfig cfg = toggles(false, false, true);
  AttnParams p = init_attention(cfg, 2, 3, 5);
  Tensor e = Tensor::from({2, 2, 3}, random_vector(12, rng));
  Graph g;
  AttnOutputs out = forward(g, e, p, cfg);
  for (Index i = 0; i < 12; ++i) EXPECT_EQ(out.output[i], e[i] * out.w_bit[i]);
}

TEST(Module, ResidualIdentities) {
  std::mt19937_64 rng(12);
  Tensor e = Tensor::from({2, 3, 2}, random_vector(12, rng));
  Tensor w_mm = Tensor::from({2, 3}, random_vector(6, rng, 0.1, 2.0));
  Graph g;
  const Vector f_mm = mm_reweight(g, e, w_mm).value();
  EXPECT_EQ(mmb_combine(g, e, w_mm, Tensor::zeros({2, 6}), CombineMode::residual_product).value(), f_mm);
  const Vector twice =
      mmb_combine(g, e, Tensor::constant({2, 3}, 1.0), Tensor::constant({2, 6}, 1.0), CombineMode::residual_product)
          .value();
  EXPECT_EQ(twice, 2.0 * e.value());
}

TEST(Module, CombineModesAgreeUpToRounding) {
  std::mt19937_64 rng(13);
  Tensor e = Tensor::from({2, 3, 2}, random_vector(12, rng));
  Tensor w_mm = Tensor::from({2, 3}, random_vector(6, rng, 0.1, 2.0));
  Tensor w_b = Tensor::from({2, 6}, random_vector(12, rng, 0.0, 1.0));
  Graph g;
  const Vector a = mmb_combine(g, e, w_mm, w_b, CombineMode::residual_product).value();
  const Vector b = mmb_combine(g, e, w_mm, w_b, CombineMode::paper_literal).value();
  for (Index i = 0; i < 12; ++i) {
    const Index f = (i / 6) * 3 + (i % 6) / 2;
    EXPECT_NEAR(b[i], e[i] * (w_mm[f] + w_mm[f] * w_b[i]), 1e-15);
    EXPECT_NEAR(a[i], b[i], 1e-14);
  }
}

TEST(Module, GradientsMatchFiniteDifferencesBothModes) {
  std::mt19937_64 rng(14);
  for (auto mode : {CombineMode::residual_product, CombineMode::paper_literal}) {
    AttnConfig cfg = toggles(true, true, true, mode);
    cfg.reduction_ratio = 2;
    AttnParams p = init_attention(cfg, 3, 2, 2);
    for (auto* b : {&p.max, &p.mean, &p.bit}) {
      (*b)->w1.value() = random_vector((*b)->w1.size(), rng);
      (*b)->w2.value() = random_vector((*b)->w2.size(), rng);
    }
    Tensor e = Tensor::from({4, 3, 2}, random_vector(24, rng), true);
    Tensor probe = Tensor::from({4, 6}, random_vector(24, rng));
    auto loss = [&](Graph& g) { return sum_all(g, mul(g, forward(g, e, p, cfg).output, probe)); };
    Graph g;
    g.backward(loss(g));
    for (Tensor t : {e, p.max->w1, p.max->w2, p.mean->w1, p.mean->w2, p.bit->w1, p.bit->w2}) {
      const Vector numeric = support::numeric_grad(t, [&] {
        Graph fg = Graph::inference();
        return loss(fg).item();
      });
      EXPECT_LT(support::max_relative_error(t.grad(), numeric), 1e-4) << to_string(mode);
    }
  }
}

TEST(Params, BranchesAreDistinctAndCountMatches) {
  const AttnConfig cfg = toggles(true, true, true);
  for (Index F : {1, 3, 8, 22})
    for (Index d : {1, 4, 10}) {
      const AttnParams p = init_attention(cfg, F, d, 0);
      EXPECT_FALSE(p.max->w1.same(p.mean->w1));
      if (F > 1) EXPECT_NE(p.max->w1.value(), p.mean->w1.value());
      Index counted = 0;
      for (const auto* b : {&p.max, &p.mean, &p.bit}) counted += (*b)->w1.size() + (*b)->w2.size();
      const Index R = cfg.reduction_ratio, h = std::max<Index>(1, F / R), hb = std::max<Index>(1, F * d / R);
      EXPECT_EQ(counted, 2 * (2 * F * h) + 2 * (F * d * hb));
      EXPECT_EQ(parameter_count(cfg, F, d), counted);
      EXPECT_EQ(p.max->w1.shape(), (Shape{h, F}));
      EXPECT_EQ(p.bit->w2.shape(), (Shape{F * d, hb}));
    }
}

TEST(Config, ParsesAndValidates) {
  auto kv = KeyValueFile::parse(
      "attn.use_max = false\nattn.reduction_ratio = 2\nattn.combine_mode = paper_literal\nmodel.seed = 3\n");
  const AttnConfig c = AttnConfig::from_config(kv);
  EXPECT_FALSE(c.use_max);
  EXPECT_TRUE(c.use_mean);
  EXPECT_EQ(c.reduction_ratio, 2);
  EXPECT_EQ(c.combine_mode, CombineMode::paper_literal);
  EXPECT_EQ(AttnConfig{}.reduction_ratio, 3);
  EXPECT_THROW(AttnConfig::from_config(KeyValueFile::parse("attn.reduction_ratio = 0\n")), ConfigError);
  EXPECT_THROW(AttnConfig::from_config(KeyValueFile::parse("attn.combine_mode = other\n")), ConfigError);
}
