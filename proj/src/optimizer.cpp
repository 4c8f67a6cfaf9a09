#include "mmbattn/train.hpp"

#include <cmath>

namespace mmb::train {

Adam::Adam(model::ParameterRegistry params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.push_back(Eigen::VectorXd::Zero(p.tensor.size()));
    v_.push_back(Eigen::VectorXd::Zero(p.tensor.size()));
  }
}

void Adam::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Tensor& p = params_[i].tensor;
    Eigen::VectorXd& m = m_[i];
    Eigen::VectorXd& v = v_[i];
    if (p.has_grad()) {
      const Eigen::VectorXd& g = p.grad();
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    } else {
      m *= b1;
      v *= b2;
    }
    p.value().array() -= config_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace mmb::train
