#include "mmbattn/ops.hpp"

#include "mmbattn/errors.hpp"

#include <cmath>

namespace mmb::ag {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Vector& v, Index rows, Index cols) { return ConstMatrixMap(v.data(), rows, cols); }

void require_rank(const Tensor& t, Index rank, const char* op) {
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
}

// For each flat index of `a`, the flat index of the broadcast element of `b`.
std::vector<Index> broadcast_offsets(const Shape& a, const Shape& b) {
  const std::size_t rank = a.size();
  std::vector<Index> b_stride(rank);
  Index stride = 1;
  for (std::size_t i = rank; i-- > 0;) {
    b_stride[i] = b[i] == 1 ? 0 : stride;
    stride *= b[i];
  }
  const Index n = shape_size(a);
  std::vector<Index> offsets(static_cast<std::size_t>(n));
  std::vector<Index> counter(rank, 0);
  Index off = 0;
  for (Index flat = 0; flat < n; ++flat) {
    offsets[static_cast<std::size_t>(flat)] = off;
    for (std::size_t i = rank; i-- > 0;) {
      off += b_stride[i];
      if (++counter[i] < a[i]) break;
      off -= b_stride[i] * a[i];
      counter[i] = 0;
    }
  }
  return offsets;
}

bool broadcastable(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (b[i] != a[i] && b[i] != 1) return false;
  return true;
}

struct AxisSplit {
  Index outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, Index axis) {
  AxisSplit s;
  for (Index i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.extent = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

const char* binary_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return "add";
    case BinaryOp::sub: return "sub";
    case BinaryOp::mul: return "mul";
  }
  return "?";
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void accumulate_grad(Tensor& t, const Vector& delta) {
  if (t.requires_grad()) t.grad() += delta;
}

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul inner dimensions disagree: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  Vector out(m * n);
  MatrixMap(out.data(), m, n).noalias() = as_matrix(a.value(), m, k) * as_matrix(b.value(), k, n);
  return g.record("matmul", {a, b}, Tensor::from({m, n}, std::move(out)),
                  [m, k, n](const Tensor& c, std::span<Tensor> in) {
                    auto dc = as_matrix(c.grad(), m, n);
                    if (in[0].requires_grad())
                      MatrixMap(in[0].grad().data(), m, k).noalias() += dc * as_matrix(in[1].value(), k, n).transpose();
                    if (in[1].requires_grad())
                      MatrixMap(in[1].grad().data(), k, n).noalias() += as_matrix(in[0].value(), m, k).transpose() * dc;
                  });
}

Tensor transpose(Graph& g, const Tensor& a) {
  require_rank(a, 2, "transpose");
  const Index m = a.dim(0), n = a.dim(1);
  Vector out(m * n);
  MatrixMap(out.data(), n, m) = as_matrix(a.value(), m, n).transpose();
  return g.record("transpose", {a}, Tensor::from({n, m}, std::move(out)),
                  [m, n](const Tensor& c, std::span<Tensor> in) {
                    if (in[0].requires_grad())
                      MatrixMap(in[0].grad().data(), m, n) += as_matrix(c.grad(), n, m).transpose();
                  });
}

Tensor elementwise(Graph& g, BinaryOp op, const Tensor& a, const Tensor& b) {
  const char* name = binary_name(op);
  if (a.shape() == b.shape()) {
    Vector out;
    switch (op) {
      case BinaryOp::add: out = a.value() + b.value(); break;
      case BinaryOp::sub: out = a.value() - b.value(); break;
      case BinaryOp::mul: out = a.value().cwiseProduct(b.value()); break;
    }
    return g.record(name, {a, b}, Tensor::from(a.shape(), std::move(out)), [op](const Tensor& c, std::span<Tensor> in) {
      const Vector& dc = c.grad();
      switch (op) {
        case BinaryOp::add:
          accumulate_grad(in[0], dc);
          accumulate_grad(in[1], dc);
          break;
        case BinaryOp::sub:
          accumulate_grad(in[0], dc);
          if (in[1].requires_grad()) in[1].grad() -= dc;
          break;
        case BinaryOp::mul:
          if (in[0].requires_grad()) in[0].grad() += dc.cwiseProduct(in[1].value());
          if (in[1].requires_grad()) in[1].grad() += dc.cwiseProduct(in[0].value());
          break;
      }
    });
  }

  if (!broadcastable(a.shape(), b.shape()))
    throw DimensionError(std::string(name) + ": cannot broadcast " + shape_string(b.shape()) + " to " +
                         shape_string(a.shape()));
  auto offsets = std::make_shared<const std::vector<Index>>(broadcast_offsets(a.shape(), b.shape()));
  const Index n = a.size();
  Vector out(n);
  const Vector& av = a.value();
  const Vector& bv = b.value();
  for (Index i = 0; i < n; ++i) {
    const double y = bv[(*offsets)[static_cast<std::size_t>(i)]];
    switch (op) {
      case BinaryOp::add: out[i] = av[i] + y; break;
      case BinaryOp::sub: out[i] = av[i] - y; break;
      case BinaryOp::mul: out[i] = av[i] * y; break;
    }
  }
  return g.record(name, {a, b}, Tensor::from(a.shape(), std::move(out)),
                  [op, offsets, n](const Tensor& c, std::span<Tensor> in) {
                    const Vector& dc = c.grad();
                    if (in[0].requires_grad()) {
                      if (op == BinaryOp::mul) {
                        Vector& da = in[0].grad();
                        const Vector& bv = in[1].value();
                        for (Index i = 0; i < n; ++i) da[i] += dc[i] * bv[(*offsets)[static_cast<std::size_t>(i)]];
                      } else {
                        in[0].grad() += dc;
                      }
                    }
                    if (in[1].requires_grad()) {
                      Vector& db = in[1].grad();
                      const Vector& av = in[0].value();
                      for (Index i = 0; i < n; ++i) {
                        const Index j = (*offsets)[static_cast<std::size_t>(i)];
                        switch (op) {
                          case BinaryOp::add: db[j] += dc[i]; break;
                          case BinaryOp::sub: db[j] -= dc[i]; break;
                          case BinaryOp::mul: db[j] += dc[i] * av[i]; break;
                        }
                      }
                    }
                  });
}

Tensor reduce(Graph& g, ReduceOp op, const Tensor& a, Index axis) {
  if (axis < 0 || axis >= a.rank())
    throw DimensionError("reduce axis " + std::to_string(axis) + " out of range for " + shape_string(a.shape()));
  const AxisSplit s = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + axis);
  if (out_shape.empty()) out_shape = {1};

  const Vector& x = a.value();
  Vector out(s.outer * s.inner);
  auto at = [&](Index o, Index j, Index i) { return (o * s.extent + j) * s.inner + i; };

  if (op == ReduceOp::max) {
    auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out.size()));
    for (Index o = 0; o < s.outer; ++o)
      for (Index i = 0; i < s.inner; ++i) {
        Index best = at(o, 0, i);
        for (Index j = 1; j < s.extent; ++j)
          if (x[at(o, j, i)] > x[best]) best = at(o, j, i);  // strict: lowest index wins ties
        out[o * s.inner + i] = x[best];
        (*argmax)[static_cast<std::size_t>(o * s.inner + i)] = best;
      }
    return g.record("reduce_max", {a}, Tensor::from(std::move(out_shape), std::move(out)),
                    [argmax](const Tensor& c, std::span<Tensor> in) {
                      if (!in[0].requires_grad()) return;
                      Vector& da = in[0].grad();
                      const Vector& dc = c.grad();
                      for (std::size_t k = 0; k < argmax->size(); ++k) da[(*argmax)[k]] += dc[static_cast<Index>(k)];
                    });
  }

  const double scale = op == ReduceOp::mean ? 1.0 / static_cast<double>(s.extent) : 1.0;
  for (Index o = 0; o < s.outer; ++o)
    for (Index i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (Index j = 0; j < s.extent; ++j) acc += x[at(o, j, i)];
      out[o * s.inner + i] = acc * scale;
    }
  return g.record(op == ReduceOp::mean ? "reduce_mean" : "reduce_sum", {a},
                  Tensor::from(std::move(out_shape), std::move(out)), [s, scale](const Tensor& c, std::span<Tensor> in) {
                    if (!in[0].requires_grad()) return;
                    Vector& da = in[0].grad();
                    const Vector& dc = c.grad();
                    for (Index o = 0; o < s.outer; ++o)
                      for (Index j = 0; j < s.extent; ++j)
                        for (Index i = 0; i < s.inner; ++i)
                          da[(o * s.extent + j) * s.inner + i] += dc[o * s.inner + i] * scale;
                  });
}

Tensor sum_all(Graph& g, const Tensor& a) {
  return g.record("sum_all", {a}, Tensor::scalar(a.value().sum()), [](const Tensor& c, std::span<Tensor> in) {
    if (in[0].requires_grad()) in[0].grad().array() += c.grad()[0];
  });
}

Tensor activation(Graph& g, Activation op, const Tensor& a) {
  if (op == Activation::relu) {
    Vector out = a.value().cwiseMax(0.0);
    return g.record("relu", {a}, Tensor::from(a.shape(), std::move(out)), [](const Tensor& c, std::span<Tensor> in) {
      if (!in[0].requires_grad()) return;
      in[0].grad().array() += (in[0].value().array() > 0.0).select(c.grad().array(), 0.0);
    });
  }
  Vector out = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  return g.record("sigmoid", {a}, Tensor::from(a.shape(), std::move(out)), [](const Tensor& c, std::span<Tensor> in) {
    if (!in[0].requires_grad()) return;
    const auto y = c.value().array();
    in[0].grad().array() += c.grad().array() * y * (1.0 - y);
  });
}

Tensor concat(Graph& g, std::span<const Tensor> parts, Index axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis < 0 || axis >= parts[0].rank())
    throw DimensionError("concat axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  Index total = 0;
  for (const Tensor& p : parts) {
    bool ok = p.rank() == parts[0].rank();
    for (Index i = 0; ok && i < p.rank(); ++i)
      ok = i == axis || p.dim(i) == parts[0].dim(i);
    if (!ok) throw DimensionError("concat shape mismatch: " + shape_string(first) + " vs " + shape_string(p.shape()));
    total += p.dim(axis);
  }
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(axis)] = total;
  const AxisSplit s = split_at(out_shape, axis);

  std::vector<Index> extents;
  Vector out(shape_size(out_shape));
  Index offset = 0;
  for (const Tensor& p : parts) {
    const Index e = p.dim(axis);
    for (Index o = 0; o < s.outer; ++o)
      out.segment((o * total + offset) * s.inner, e * s.inner) = p.value().segment(o * e * s.inner, e * s.inner);
    extents.push_back(e);
    offset += e;
  }
  return g.record("concat", std::vector<Tensor>(parts.begin(), parts.end()), Tensor::from(out_shape, std::move(out)),
                  [s, total, extents](const Tensor& c, std::span<Tensor> in) {
                    Index offset = 0;
                    for (std::size_t k = 0; k < in.size(); ++k) {
                      const Index e = extents[k];
                      if (in[k].requires_grad()) {
                        Vector& dp = in[k].grad();
                        for (Index o = 0; o < s.outer; ++o)
                          dp.segment(o * e * s.inner, e * s.inner) +=
                              c.grad().segment((o * total + offset) * s.inner, e * s.inner);
                      }
                      offset += e;
                    }
                  });
}

Tensor reshape(Graph& g, const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  return g.record("reshape", {a}, Tensor::from(std::move(shape), a.value()), [](const Tensor& c, std::span<Tensor> in) {
    accumulate_grad(in[0], c.grad());
  });
}

}  // namespace mmb::ag
