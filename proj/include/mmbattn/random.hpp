#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string_view>

namespace mmb {

using Rng = std::mt19937_64;

// Named sub-seed: a stable hash of (seed, purpose). Components draw from
// their own stream so toggling one never shifts another's randomness.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view purpose);

inline Rng make_rng(std::uint64_t seed, std::string_view purpose) { return Rng(sub_seed(seed, purpose)); }

// Fills `out` with Normal(0, stddev²) draws.
void fill_normal(Eigen::Ref<Eigen::VectorXd> out, double stddev, Rng& rng);

}  // namespace mmb
