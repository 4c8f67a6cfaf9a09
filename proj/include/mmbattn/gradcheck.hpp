#pragma once

#include "mmbattn/attention.hpp"
#include "mmbattn/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mmb::gradcheck {

using ag::Index;

// |analytic − numeric| / max(|analytic|, |numeric|, 1e-6). The floor keeps
// entries whose true gradient is ~0 from dividing roundoff by roundoff.
double relative_error(double analytic, double numeric);

struct ParamError {
  std::string name;
  double max_error = 0.0;
};

// Central differences with step `h` over every entry of every registered
// parameter of `model`, against the analytic gradient of `loss`.
std::vector<ParamError> check_model(const model::Model& model,
                                    const std::function<ag::Tensor(ag::Graph&)>& loss, double h = 1e-5,
                                    const std::optional<std::pair<std::string, double>>& fault = std::nullopt);

struct Options {
  Index fields = 3;
  Index embedding_dim = 2;
  std::vector<Index> hidden_sizes{4};
  Index reduction_ratio = 3;
  Index cardinality = 4;
  Index rows = 8;
  double h = 1e-5;
  double tolerance = 1e-4;
  // Parameters are redrawn from Normal(0, param_scale²) so that every path
  // carries signal.
  double param_scale = 0.5;
  std::uint64_t seed = 0;
  // Scales the gradient flowing into every node of this op (test fixture).
  std::optional<std::pair<std::string, double>> fault;
};

struct ConfigResult {
  std::string label;  // e.g. "DNN + Max + Mean [residual_product]"
  double max_error = 0.0;
};

struct Report {
  std::vector<ConfigResult> configs;
  std::vector<ParamError> groups;  // embedding, attn.max, attn.mean, attn.bit, tower
  double max_error = 0.0;
  bool passed = false;
};

// Both combine modes × all six ablation rows on a tiny random model.
Report run(const Options& options);

// The six component combinations, base first.
struct Ablation {
  std::string label;
  bool use_max, use_mean, use_bitwise;
};
const std::vector<Ablation>& ablation_rows();

}  // namespace mmb::gradcheck
