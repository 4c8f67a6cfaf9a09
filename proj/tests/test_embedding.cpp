#include "mmbattn/embedding.hpp"
#include "mmbattn/errors.hpp"
#include "mmbattn/ops.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mmb;
using namespace mmb::ag;

namespace {

data::Batch batch_of(std::initializer_list<std::initializer_list<std::uint32_t>> rows) {
  data::Batch b;
  b.indices.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  b.labels = Vector::Zero(static_cast<Index>(rows.size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (auto v : row) b.indices(r, c++) = v;
    ++r;
  }
  return b;
}

emb::EmbeddingTable single(Index rows, Index dim, Vector values) {
  emb::EmbeddingTable t;
  t.names = {"x"};
  t.tables = {Tensor::from({rows, dim}, std::move(values), true)};
  t.dim = dim;
  return t;
}

}  // namespace

TEST(Lookup, RowGather) {
  auto t = single(2, 2, (Vector(4) << 0, 0, 1, 2).finished());
  Graph g;
  Tensor out = emb::lookup(g, t, batch_of({{1}}));
  EXPECT_EQ(out.shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], 2.0);
}

TEST(Lookup, BackwardCountsMultiplicity) {
  auto t = single(4, 3, Vector::Zero(12));
  Graph g;
  g.backward(sum_all(g, emb::lookup(g, t, batch_of({{1}, {3}, {1}, {1}}))));
  const Vector& grad = t.tables[0].grad();
  for (Index j = 0; j < 3; ++j) {
    EXPECT_EQ(grad[0 * 3 + j], 0.0);
    EXPECT_EQ(grad[1 * 3 + j], 3.0);
    EXPECT_EQ(grad[2 * 3 + j], 0.0);
    EXPECT_EQ(grad[3 * 3 + j], 1.0);
  }
}

TEST(Lookup, EqualsOneHotMatmul) {
  std::mt19937_64 rng(1);
  const Index V = 7, d = 5;
  auto t = single(V, d, support::random_vector(V * d, rng));
  for (std::uint32_t i = 0; i < V; ++i) {
    Graph g;
    Vector onehot = Vector::Zero(V);
    onehot[i] = 1.0;
    const Vector want = matmul(g, Tensor::from({1, V}, onehot), t.tables[0]).value();
    const Vector got = emb::lookup(g, t, batch_of({{i}})).value();
    EXPECT_EQ(got, want);
  }
}

TEST(Lookup, OutOfRangeIsContractError) {
  auto t = single(2, 2, Vector::Zero(4));
  Graph g;
  EXPECT_THROW(emb::lookup(g, t, batch_of({{2}})), ContractError);
}

TEST(Lookup, GradientSparsityAndLinearity) {
  const auto tab = support::random_table(3, 6, 40, 2);
  auto emb = emb::init_embeddings(tab.schema, tab.vocab, 4, 3);
  const data::Batch batch = tab.data.slice(0, 3).all();
  std::mt19937_64 rng(4);
  Graph g;
  Tensor probe = Tensor::from({3, 3, 4}, support::random_vector(36, rng));
  Tensor e = emb::lookup(g, emb, batch);
  g.backward(sum_all(g, mul(g, e, probe)));
  for (Index f = 0; f < 3; ++f) {
    const Vector& grad = emb.tables[f].grad();
    for (Index row = 0; row < emb.tables[f].dim(0); ++row) {
      const bool touched = (batch.indices.col(f).array() == static_cast<std::uint32_t>(row)).any();
      if (!touched) EXPECT_TRUE(grad.segment(row * 4, 4).isZero(0.0)) << f << "/" << row;
    }
  }

  Graph g2;
  const Vector base = emb::lookup(g2, emb, batch).value();
  for (auto& t : emb.tables) t.value() *= 2.5;
  const Vector scaled = emb::lookup(g2, emb, batch).value();
  EXPECT_TRUE(scaled.isApprox(2.5 * base, 1e-15));
}

TEST(Init, SeededAndSmall) {
  const auto tab = support::random_table(2, 5, 20, 5);
  const auto a = emb::init_embeddings(tab.schema, tab.vocab, 3, 42);
  const auto b = emb::init_embeddings(tab.schema, tab.vocab, 3, 42);
  const auto c = emb::init_embeddings(tab.schema, tab.vocab, 3, 43);
  for (std::size_t f = 0; f < 2; ++f) {
    EXPECT_EQ(a.tables[f].value(), b.tables[f].value());
    EXPECT_NE(a.tables[f].value(), c.tables[f].value());
    EXPECT_EQ(a.tables[f].shape(), (Shape{6, 3}));
  }
}

TEST(Init, SampleMomentsMatchNormal) {
  data::FieldSchema schema;
  schema.fields = {{"big", data::FieldKind::categorical}};
  data::Vocabulary vocab;
  vocab.fields.resize(1);
  for (int i = 0; i < 999; ++i) vocab.fields[0].values.push_back("v" + std::to_string(i));
  const auto t = emb::init_embeddings(schema, vocab, 10, 7);
  const Vector& v = t.tables[0].value();
  ASSERT_EQ(v.size(), 10000);
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().sum() / (v.size() - 1));
  EXPECT_LT(std::abs(mean), 3.0 * emb::kInitStddev / std::sqrt(10000.0));
  EXPECT_NEAR(sd, emb::kInitStddev, 0.05 * emb::kInitStddev);
}

TEST(Init, DimensionOneAndInvalid) {
  const auto tab = support::random_table(2, 3, 10, 8);
  const auto t = emb::init_embeddings(tab.schema, tab.vocab, 1, 0);
  EXPECT_EQ(t.tables[0].shape(), (Shape{4, 1}));
  EXPECT_THROW(emb::init_embeddings(tab.schema, tab.vocab, 0, 0), ContractError);
}
