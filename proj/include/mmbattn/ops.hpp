#pragma once

#include "mmbattn/tensor.hpp"

#include <span>
#include <vector>

// Differentiable operations on Tensor. Every op either returns the documented
// shape or throws DimensionError; none returns a mis-shaped result.
namespace mmb::ag {

enum class BinaryOp { add, sub, mul };
enum class ReduceOp { max, mean, sum };
enum class Activation { relu, sigmoid };

// (m×k)·(k×n). Backward: dA = dC·Bᵀ, dB = Aᵀ·dC.
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
Tensor transpose(Graph& g, const Tensor& a);

// `b` must have the shape of `a`, or the same rank with length-1 axes that
// broadcast against `a`. Gradients for `b` are reduced over broadcast axes.
Tensor elementwise(Graph& g, BinaryOp op, const Tensor& a, const Tensor& b);
inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) { return elementwise(g, BinaryOp::add, a, b); }
inline Tensor sub(Graph& g, const Tensor& a, const Tensor& b) { return elementwise(g, BinaryOp::sub, a, b); }
inline Tensor mul(Graph& g, const Tensor& a, const Tensor& b) { return elementwise(g, BinaryOp::mul, a, b); }

// Removes `axis`. Max routes the gradient to the first (lowest-index) maximum.
// A rank-1 input reduces to shape (1).
Tensor reduce(Graph& g, ReduceOp op, const Tensor& a, Index axis);
Tensor sum_all(Graph& g, const Tensor& a);

Tensor activation(Graph& g, Activation op, const Tensor& a);
inline Tensor relu(Graph& g, const Tensor& a) { return activation(g, Activation::relu, a); }
inline Tensor sigmoid(Graph& g, const Tensor& a) { return activation(g, Activation::sigmoid, a); }

Tensor concat(Graph& g, std::span<const Tensor> parts, Index axis);
Tensor reshape(Graph& g, const Tensor& a, Shape shape);

// Numerically stable logistic function, branch-split on sign(x).
double stable_sigmoid(double x);

// Adds `delta` into t.grad() if t requires a gradient.
void accumulate_grad(Tensor& t, const Vector& delta);

}  // namespace mmb::ag
