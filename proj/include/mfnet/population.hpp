#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mfnet {

/// Per-in-degree state distributions rho^l; one row per in-degree class.
struct PopulationVector {
  std::vector<int> degrees;
  Eigen::MatrixXd shares;

  int num_states() const { return static_cast<int>(shares.cols()); }
  int row_of(int degree) const;
  /// Largest deviation of a row sum from 1, or of an entry below 0.
  double simplex_violation() const;
};

/// State shares resolved by (in-degree, out-degree) class.
using JointPopulation = std::map<std::pair<int, int>, Eigen::VectorXd>;

/// Time series of overall state fractions, optionally with per-degree
/// fractions stored degree-major (column d * K + z for degrees[d]).
struct Trajectory {
  std::vector<std::string> labels;
  std::vector<double> times;
  Eigen::MatrixXd values;
  std::vector<int> degrees;
  Eigen::MatrixXd per_degree;

  Eigen::Index size() const { return static_cast<Eigen::Index>(times.size()); }
  int num_states() const { return static_cast<int>(labels.size()); }
  int state_index(const std::string& label) const;
  void validate() const;
};

}  // namespace mfnet
