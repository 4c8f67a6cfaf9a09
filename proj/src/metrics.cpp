#include "mmbattn/errors.hpp"
#include "mmbattn/ops.hpp"
#include "mmbattn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmb::train {

namespace {

void check_labels(const VectorRef& labels, Index n) {
  if (labels.size() != n)
    throw ContractError("expected " + std::to_string(n) + " labels, got " + std::to_string(labels.size()));
  for (Index i = 0; i < n; ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw ContractError("label " + std::to_string(labels[i]) + " at position " + std::to_string(i) +
                          " is not in {0, 1}");
}

double stable_bce(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

ag::Tensor bce_loss(ag::Graph& g, const ag::Tensor& logits, const VectorRef& labels) {
  const Index n = logits.size();
  check_labels(labels, n);
  if (n == 0) throw ContractError("bce_loss on an empty batch");
  Eigen::VectorXd y = labels;
  double total = 0.0;
  for (Index i = 0; i < n; ++i) total += stable_bce(logits[i], y[i]);
  return g.record("bce_loss", {logits}, ag::Tensor::scalar(total / static_cast<double>(n)),
                  [y = std::move(y), n](const ag::Tensor& c, std::span<ag::Tensor> in) {
                    if (!in[0].requires_grad()) return;
                    const double scale = c.grad()[0] / static_cast<double>(n);
                    Eigen::VectorXd& dz = in[0].grad();
                    for (Index i = 0; i < n; ++i) dz[i] += (ag::stable_sigmoid(in[0].value()[i]) - y[i]) * scale;
                  });
}

double log_loss_from_logits(const VectorRef& logits, const VectorRef& labels) {
  check_labels(labels, logits.size());
  double total = 0.0;
  for (Index i = 0; i < logits.size(); ++i) total += stable_bce(logits[i], labels[i]);
  return total / static_cast<double>(logits.size());
}

double log_loss(const VectorRef& p, const VectorRef& labels) {
  check_labels(labels, p.size());
  double total = 0.0;
  for (Index i = 0; i < p.size(); ++i) total += labels[i] * std::log(p[i]) + (1 - labels[i]) * std::log(1 - p[i]);
  return -total / static_cast<double>(p.size());
}

double auc(const VectorRef& scores, const VectorRef& labels) {
  const Index n = scores.size();
  check_labels(labels, n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] < scores[b]; });

  // Sum of 1-based ranks of positives, with tied groups sharing their average
  // rank. Kept doubled so every quantity stays an exact integer.
  double doubled_rank_sum = 0.0;
  double positives = 0.0;
  for (Index i = 0; i < n;) {
    Index j = i;
    double group_pos = 0.0;
    while (j < n && scores[order[static_cast<std::size_t>(j)]] == scores[order[static_cast<std::size_t>(i)]]) {
      group_pos += labels[order[static_cast<std::size_t>(j)]];
      ++j;
    }
    doubled_rank_sum += group_pos * static_cast<double>(i + 1 + j);
    positives += group_pos;
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw MetricError("AUC is undefined when only one class is present");
  const double doubled_u = doubled_rank_sum - positives * (positives + 1.0);
  return doubled_u / (2.0 * positives * negatives);
}

}  // namespace mmb::train
