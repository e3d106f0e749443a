#pragma once

#include "mfnet/kernel.hpp"
#include "mfnet/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace mfnet::testing {

/// Kernel whose row depends only on the current state.
class ConstantKernel final : public TransitionKernel {
 public:
  explicit ConstantKernel(Eigen::MatrixXd rows) : rows_(std::move(rows)) {}
  int num_states() const override { return static_cast<int>(rows_.rows()); }
  Eigen::VectorXd row(double, std::span<const int>, int current) const override {
    return rows_.row(current).transpose();
  }

 private:
  Eigen::MatrixXd rows_;
};

inline double normal(Rng& rng) {
  double u1;
  do {
    u1 = rng.uniform();
  } while (u1 == 0.0);
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace mfnet::testing
