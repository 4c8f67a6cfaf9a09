#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmb::ag {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vector = Eigen::VectorXd;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/**
 * Dense row-major float64 buffer with an optional gradient slot.
 *
 * Tensor is a shared handle: copies alias the same storage, which is what lets
 * a parameter appear both in the model registry and on a graph tape. Use
 * clone() for an independent copy.
 */
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, Vector values, bool requires_grad = false);
  static Tensor from(Shape shape, std::initializer_list<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }

  const Shape& shape() const { return impl_->shape; }
  Index rank() const { return static_cast<Index>(impl_->shape.size()); }
  Index dim(Index axis) const { return impl_->shape.at(static_cast<std::size_t>(axis)); }
  Index size() const { return impl_->value.size(); }

  Vector& value() { return impl_->value; }
  const Vector& value() const { return impl_->value; }
  double item() const;
  double operator[](Index i) const { return impl_->value[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  bool has_grad() const { return impl_->grad.size() != 0; }
  // Lazily allocates a zero gradient buffer.
  Vector& grad();
  const Vector& grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.setZero(impl_->value.size()); }
  void clear_grad() { impl_->grad.resize(0); }

  Tensor clone() const;
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    Vector value;
    Vector grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/**
 * Append-only tape of executed operations.
 *
 * Nodes are recorded in execution order; backward() walks them once in
 * reverse. A graph built with recording disabled evaluates forward only.
 * One graph per forward pass; graphs are not shared across threads.
 */
class Graph {
 public:
  // Accumulates into inputs[i].grad() from out.grad().
  using BackwardFn = std::function<void(const Tensor& out, std::span<Tensor> inputs)>;

  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Graph() = default;
  static Graph inference() {
    Graph g;
    g.recording_ = false;
    return g;
  }

  bool recording() const { return recording_; }

  // Registers an op result. Throws NumericError when `out` holds NaN/Inf. The
  // node is kept only if recording and some input requires a gradient, in
  // which case `out` is marked as requiring one too.
  Tensor record(std::string_view op, std::vector<Tensor> inputs, Tensor out, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor that
  // requires a gradient. Gradients add onto whatever is already stored.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Test hook: scales the upstream gradient entering every node named `op`.
  // Used to prove that gradient checking detects a wrong backward rule.
  void inject_fault(std::string op, double scale) { fault_ = Fault{std::move(op), scale}; }

 private:
  struct Fault {
    std::string op;
    double scale;
  };
  std::vector<Node> nodes_;
  bool recording_ = true;
  std::optional<Fault> fault_;
};

}  // namespace mmb::ag
