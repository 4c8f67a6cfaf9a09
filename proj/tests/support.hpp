#pragma once

#include "mmbattn/data.hpp"
#include "mmbattn/model.hpp"
#include "mmbattn/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace support {

using mmb::ag::Index;
using mmb::ag::Tensor;
using mmb::ag::Vector;

inline Vector random_vector(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Naive row-major triple loop.
inline Vector naive_matmul(const Vector& a, const Vector& b, Index m, Index k, Index n) {
  Vector c = Vector::Zero(m * n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Index p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

// O(n²) all-pairs AUC with ties counted as one half, in doubled integers.
inline double pairwise_auc(const Vector& scores, const Vector& labels) {
  long long doubled = 0, pos = 0, neg = 0;
  for (Index i = 0; i < scores.size(); ++i) (labels[i] > 0.5 ? pos : neg)++;
  for (Index i = 0; i < scores.size(); ++i) {
    if (labels[i] < 0.5) continue;
    for (Index j = 0; j < scores.size(); ++j) {
      if (labels[j] > 0.5) continue;
      if (scores[i] > scores[j]) doubled += 2;
      else if (scores[i] == scores[j]) doubled += 1;
    }
  }
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// −(1/N)Σ[y·log(ŷ) + (1−y)·log(1−ŷ)] evaluated literally.
inline double direct_bce(const Vector& probs, const Vector& labels) {
  double s = 0.0;
  for (Index i = 0; i < probs.size(); ++i)
    s += labels[i] * std::log(probs[i]) + (1.0 - labels[i]) * std::log(1.0 - probs[i]);
  return -s / static_cast<double>(probs.size());
}

// Central differences of a scalar function of `x`'s values.
inline Vector numeric_grad(Tensor x, const std::function<double()>& f, double h = 1e-5) {
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.value()[i];
    x.value()[i] = saved + h;
    const double up = f();
    x.value()[i] = saved - h;
    const double down = f();
    x.value()[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

inline double max_relative_error(const Vector& a, const Vector& n) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

// A categorical table with `fields` columns named f0.., values "v<k>", and a
// label column; every value of every field appears at least once.
struct Table {
  mmb::data::FieldSchema schema;
  mmb::data::Vocabulary vocab;
  mmb::data::Dataset data;
  std::string csv;
};

inline Table random_table(Index fields, Index cardinality, Index rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, cardinality - 1);
  std::ostringstream csv;
  Table t;
  for (Index f = 0; f < fields; ++f) {
    t.schema.fields.push_back({"f" + std::to_string(f), mmb::data::FieldKind::categorical});
    csv << "f" << f << ",";
  }
  csv << "label\n";
  for (Index r = 0; r < rows; ++r) {
    for (Index f = 0; f < fields; ++f) csv << "v" << (r < cardinality ? r : pick(rng)) << ",";
    csv << ((r % 2 == 0) != (pick(rng) == 0) ? 1 : 0) << "\n";
  }
  t.csv = csv.str();
  std::istringstream in1(t.csv);
  t.vocab = mmb::data::build_vocab(in1, t.schema);
  std::istringstream in2(t.csv);
  t.data = mmb::data::encode(in2, t.schema, t.vocab);
  return t;
}

inline void set_all(const mmb::model::Model& m, double value) {
  for (const auto& p : m.parameters()) {
    Tensor t = p.tensor;
    t.value().setConstant(value);
  }
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mmbattn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path config_dir() { return std::filesystem::path(MMBATTN_SOURCE_DIR) / "configs"; }

}  // namespace support
