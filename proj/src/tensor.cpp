#include "mmbattn/tensor.hpp"

#include "mmbattn/errors.hpp"

#include <sstream>

namespace mmb::ag {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (Index e : shape)
    if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return constant(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::constant(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  Index n = shape_size(shape);
  return from(std::move(shape), Vector::Constant(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, Vector values, bool requires_grad) {
  check_shape(shape);
  if (shape_size(shape) != values.size())
    throw DimensionError("shape " + shape_string(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->value = std::move(values);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values, bool requires_grad) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return constant({1}, value, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return impl_->value[0];
}

Vector& Tensor::grad() {
  if (impl_->grad.size() != impl_->value.size()) impl_->grad.setZero(impl_->value.size());
  return impl_->grad;
}

Tensor Tensor::clone() const {
  Tensor t = from(impl_->shape, impl_->value, impl_->requires_grad);
  t.impl_->grad = impl_->grad;
  return t;
}

Tensor Graph::record(std::string_view op, std::vector<Tensor> inputs, Tensor out, BackwardFn backward) {
  if (!out.value().allFinite()) throw NumericError("non-finite value produced by " + std::string(op));
  if (!recording_) return out;
  bool needs_grad = false;
  for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (!needs_grad) return out;
  out.set_requires_grad(true);
  nodes_.push_back(Node{std::string(op), std::move(inputs), out, std::move(backward)});
  return out;
}

void Graph::backward(const Tensor& loss) {
  if (loss.size() != 1) throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& node = *it;
    if (!node.output.has_grad()) continue;
    if (fault_ && fault_->op == node.op) node.output.grad() *= fault_->scale;
    if (!node.output.grad().allFinite()) throw NumericError("non-finite gradient entering " + node.op);
    node.backward(node.output, node.inputs);
  }
}

}  // namespace mmb::ag
