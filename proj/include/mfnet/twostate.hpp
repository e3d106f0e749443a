#pragma once

#include "mfnet/graph.hpp"
#include "mfnet/rum.hpp"

#include <Eigen/Dense>

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfnet::twostate {

/// Delta(u, q) = c0 + cu * u + cq * q.
struct AffineLogit {
  double c0 = 0.0;
  double cu = 0.0;
  double cq = 0.0;
  double operator()(double u, double q) const { return c0 + cu * u + cq * q; }
  bool operator==(const AffineLogit&) const = default;
};

/// Log-odds of choosing T over H, conditioned on the current state.
struct TwoStateLogits {
  AffineLogit h;  // current state H
  AffineLogit t;  // current state T

  /// Order: c0H, cuH, cqH, c0T, cuT, cqT.
  static TwoStateLogits from_array(const std::array<double, 6>& c);
  std::array<double, 6> to_array() const;
  bool operator==(const TwoStateLogits&) const = default;
};

class DegenerateSwitching : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UnstableFixedPoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Share of neighbors in T; zero when l = 0.
inline double truthful_share(int l, int m) { return l == 0 ? 0.0 : static_cast<double>(m) / l; }

/// (kappa_{H,T}, kappa_{T,H}) for an agent with m truthful neighbors out of l.
std::pair<double, double> kernel_rates(const TwoStateLogits& logits, double u, int l, int m);

/// (A_l, B_l): expectations of the two switching rates over M ~ Bin(l, theta).
std::pair<double, double> a_b(const TwoStateLogits& logits, double u, int l, double theta);

/// Equivalent K = 2 choice model over {T, H} with H as reference.
ChoiceModel to_choice_model(const TwoStateLogits& logits);

struct PhiContext {
  JointDegreeDistribution q;
  TwoStateLogits logits;
  double u = 0.0;
  /// In-degree classes whose truthful share is held fixed (stubborn agents);
  /// e.g. in-degree-0 nodes, which never update in the agent simulation.
  std::map<int, double> pinned;
};

/// Precomputed edge-weighted map Phi(theta) = sum_l w_l rho_l(theta).
class PhiMap {
 public:
  explicit PhiMap(const PhiContext& ctx);

  double operator()(double theta) const;
  /// Analytic d Phi / d theta.
  double derivative(double theta) const;
  /// Partial derivative in u at fixed theta.
  double derivative_u(double theta) const;

  const std::vector<int>& degrees() const { return degrees_; }
  const std::vector<double>& weights() const { return weights_; }
  /// Minimum of A_l + B_l over all support degrees at this theta.
  double min_switching(double theta) const;

 private:
  struct Degree {
    int l;
    double weight;
    bool pinned;
    double pinned_share;
    Eigen::VectorXd k_ht, k_th;    // rates at M = 0..l
    Eigen::VectorXd dk_ht, dk_th;  // sigma'(Delta_H) cuH and sigma'(-Delta_T) cuT
  };
  std::pair<double, double> ab(const Degree& d, const Eigen::VectorXd& pmf) const;

  std::vector<Degree> table_;
  std::vector<int> degrees_;
  std::vector<double> weights_;
};

double phi(const PhiContext& ctx, double theta);

struct FixedPointReport {
  double theta_star = 0.0;
  double residual = 0.0;
  std::string method;  // "picard" or "bisection"
  int iterations = 0;
  /// Roots bracketed by sign changes of Phi(theta) - theta on a 1e-3 grid.
  std::vector<double> bracketed_roots;
};

FixedPointReport solve_fixed_point(const PhiContext& ctx, double start = 0.5);

struct ContractionReport {
  double s_h = 0.0;
  double s_t = 0.0;
  double eta = 0.0;
  double bound = 0.0;
  bool is_contraction = false;
  double measured_sup_derivative = 0.0;
};

ContractionReport contraction_check(const PhiContext& ctx);

struct ComparativeStatics {
  double dtheta_du = 0.0;
  double phi_u = 0.0;
  double phi_theta = 0.0;
};

/// Implicit-function derivative of the fixed point in u. Throws
/// UnstableFixedPoint when 1 - Phi'(theta*) <= 0.
ComparativeStatics comparative_statics(const PhiContext& ctx, double theta_star);

struct AssumptionReport {
  bool a1 = false;
  bool a2 = false;
  bool a3 = false;
  bool a4 = false;
  std::vector<std::string> witnesses;
};

AssumptionReport check_assumptions(const TwoStateLogits& logits, const PhiContext& ctx);

}  // namespace mfnet::twostate
