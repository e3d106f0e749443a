#pragma once

#include "mfnet/graph.hpp"
#include "mfnet/kernel.hpp"
#include "mfnet/population.hpp"
#include "mfnet/rum.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace mfnet {

class ZeroEdgeError : public std::domain_error {
 public:
  ZeroEdgeError() : std::domain_error("degree distribution has no edges") {}
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Size-biased edge-source law: theta_z = sum_l w_l rho^l(z), with
/// w_l = sum_m m Q(l, m) / sum_{l,m} m Q(l, m). Throws ZeroEdgeError when
/// Q carries no edges.
Eigen::VectorXd theta_z(const JointDegreeDistribution& q, const PopulationVector& rho);

/// Same law with shares resolved by (l, m) class, where Q(l | m) weights
/// rho^{l,m}. This is exact for a concrete network state; the per-l form
/// equals it when states are independent of out-degree within each l.
Eigen::VectorXd theta_z(const JointDegreeDistribution& q, const JointPopulation& rho);

/// All n in N_0^k with |n| = l, lexicographically ascending.
std::vector<std::vector<int>> compositions(int l, int k);
void for_each_composition(int l, int k, const std::function<void(std::span<const int>)>& f);

/// Per-node activation rate in the ODE. `uniform` gives every class rate 1
/// (literal mean-field equation); `in_degree` gives class l rate l, which
/// matches uniform edge sampling with t = step / |E| and freezes l = 0.
enum class Activation { uniform, in_degree };
std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

struct GAvgOptions {
  int l_exact = 60;
  int mc_samples = 20000;
  std::uint64_t mc_seed = 0x5eed;
};

/// G^l_{z1,z2} = sum_{|n| = l} kappa_{z1,z2}(u, l, n) Mult(n; l, theta).
/// Exact enumeration for l <= l_exact, seeded Monte Carlo otherwise.
Eigen::MatrixXd g_avg(const TransitionKernel& kernel, double u, int l,
                      const Eigen::VectorXd& theta, const GAvgOptions& options = {});

/// Generator with off-diagonal G and rows summing to zero.
Eigen::MatrixXd rate_matrix(const Eigen::MatrixXd& g);
Eigen::MatrixXd rate_matrix(const TransitionKernel& kernel, double u, int l,
                            const Eigen::VectorXd& theta, const GAvgOptions& options = {});

struct OdeSpec {
  double t_end = 10.0;
  double h = 0.01;
  double u = 0.0;
  Activation activation = Activation::uniform;
  GAvgOptions g_options;
  /// Output times; empty means 0, h, 2h, ..., t_end.
  std::vector<double> times;

  void validate() const;
};

/// Coupled per-degree master equation, with theta recomputed from the
/// current state at every evaluation. Kernel rows for enumerated
/// compositions are cached, so only the multinomial weights depend on rho.
class MeanFieldSystem {
 public:
  MeanFieldSystem(const JointDegreeDistribution& q, std::shared_ptr<const TransitionKernel> kernel,
                  double u, Activation activation = Activation::uniform,
                  GAvgOptions options = {});

  const std::vector<int>& degrees() const { return degrees_; }
  const Eigen::VectorXd& node_weights() const { return node_weights_; }
  const Eigen::VectorXd& edge_weights() const { return edge_weights_; }
  bool has_edges() const { return has_edges_; }

  Eigen::RowVectorXd theta(const Eigen::MatrixXd& shares) const;
  Eigen::MatrixXd g_matrix(int row, const Eigen::RowVectorXd& theta) const;
  Eigen::MatrixXd derivative(const Eigen::MatrixXd& shares) const;
  Eigen::RowVectorXd overall(const Eigen::MatrixXd& shares) const {
    return node_weights_.transpose() * shares;
  }

 private:
  struct ExactCache {
    Eigen::MatrixXd counts;     // compositions x K
    Eigen::VectorXd log_coeff;  // log multinomial coefficients
    std::vector<Eigen::MatrixXd> rows;  // per composition, K x K kernel rows
  };

  std::shared_ptr<const TransitionKernel> kernel_;
  double u_;
  GAvgOptions options_;
  int k_;
  bool has_edges_;
  std::vector<int> degrees_;
  Eigen::VectorXd node_weights_;
  Eigen::VectorXd edge_weights_;
  Eigen::VectorXd rates_;
  std::vector<std::unique_ptr<ExactCache>> cache_;
};

/// Classical RK4 with fixed step. Negative entries down to -1e-6 are
/// clamped and each row renormalized after every step; larger violations
/// throw IntegrationError.
Trajectory integrate(const JointDegreeDistribution& q, const PopulationVector& rho0,
                     std::shared_ptr<const TransitionKernel> kernel, const OdeSpec& ode,
                     const std::vector<std::string>& labels);

enum class FitMethod { rum, plugin };
std::string_view to_string(FitMethod m);
FitMethod parse_fit_method(std::string_view s);

struct PredictSpec {
  FitMethod method = FitMethod::rum;
  StateSpace space;
  FeatureMapSpec features;  // empty: default_features(space)
  double l2 = 1e-6;
  int buckets = 10;
  OdeSpec ode;
};

struct Prediction {
  std::shared_ptr<const TransitionKernel> kernel;
  Trajectory trajectory;
};

std::shared_ptr<const TransitionKernel> fit_kernel(std::span<const TransitionRecord> records,
                                                   const PredictSpec& spec);

/// Fits a kernel to the records and integrates from rho0 over spec.ode.times.
Prediction predict_from_fit(std::span<const TransitionRecord> records,
                            const JointDegreeDistribution& q, const PopulationVector& rho0,
                            const PredictSpec& spec);

/// Same-valued rho^l for every support degree of q.
PopulationVector uniform_population(const JointDegreeDistribution& q,
                                    const Eigen::VectorXd& rho);

}  // namespace mfnet
