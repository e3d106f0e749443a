#pragma once

#include <Eigen/Core>

#include <span>

namespace mfnet {

/// Transition law kappa_{z1, .}(u, l, n) of an activating agent.
///
/// `counts` is the composition n of the agent's in-neighborhood over the
/// state space; l is its sum. Implementations must be safe to call
/// concurrently.
class TransitionKernel {
 public:
  virtual ~TransitionKernel() = default;
  virtual int num_states() const = 0;
  virtual Eigen::VectorXd row(double u, std::span<const int> counts, int current) const = 0;
};

}  // namespace mfnet
