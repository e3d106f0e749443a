#pragma once

#include "mfnet/abm.hpp"
#include "mfnet/graph.hpp"
#include "mfnet/mfd.hpp"
#include "mfnet/population.hpp"
#include "mfnet/rum.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace mfnet {

class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Linear interpolation of every state column onto `times`. Times outside
/// the trajectory's range are clamped to its end points.
Trajectory resample(const Trajectory& traj, const std::vector<double>& times);

/// Pair of trajectories on a common grid: a's times inside the overlap of
/// both time ranges, with b interpolated there.
std::pair<Trajectory, Trajectory> align(const Trajectory& a, const Trajectory& b);

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Pearson correlation of one state's fraction after alignment.
double pearson_correlation(const Trajectory& a, const Trajectory& b, const std::string& state);

/// KL(p || q) with both vectors floored at eps and renormalized.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double eps = 1e-9);

/// Time average of KL(a_t || b_t) after alignment; a is the reference law.
double mean_kl(const Trajectory& a, const Trajectory& b, double eps = 1e-9);

/// Pointwise mean over trajectories that share a time grid.
Trajectory mean_trajectory(const std::vector<Trajectory>& runs);

struct ValidationSpec {
  long long steps = 2000;
  long long fit_window = 150;
  FitMethod method = FitMethod::rum;
  int seeds = 10;
  std::uint64_t base_seed = 0;
  double u = 0.0;
  FeatureMapSpec features;  // rum method; empty: default_features(space)
  double l2 = 1e-6;
  int buckets = 5;
  double h = 0.01;
  Activation activation = Activation::in_degree;
  std::string state = "T";
};

struct SeedScore {
  std::uint64_t seed = 0;
  double correlation = 0.0;
  double kl = 0.0;
};

struct ValidationReport {
  std::vector<SeedScore> seeds;
  double correlation_mean = 0.0;
  double correlation_std = 0.0;
  double kl_mean = 0.0;
  double kl_std = 0.0;
};

/// Fit-and-predict protocol: per seed, run the sequential simulation, fit
/// on the first `fit_window` transitions and integrate the mean-field ODE
/// from the empirical per-degree state at the window boundary. Each
/// prediction is scored against the held-out trajectory averaged over all
/// seeds (every run shares the graph, so the time grids coincide).
ValidationReport validate_protocol(const DirectedGraph& g, const AgentModels& truth,
                                   const StateSpace& space, const InitSpec& init,
                                   const ValidationSpec& spec);

}  // namespace mfnet
