#include "mfnet/population.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfnet {

int PopulationVector::row_of(int degree) const {
  auto it = std::lower_bound(degrees.begin(), degrees.end(), degree);
  if (it == degrees.end() || *it != degree) return -1;
  return static_cast<int>(it - degrees.begin());
}

double PopulationVector::simplex_violation() const {
  double v = 0.0;
  for (Eigen::Index r = 0; r < shares.rows(); ++r) {
    v = std::max(v, std::abs(shares.row(r).sum() - 1.0));
    v = std::max(v, -shares.row(r).minCoeff());
  }
  return v;
}

int Trajectory::state_index(const std::string& label) const {
  for (int k = 0; k < num_states(); ++k)
    if (labels[k] == label) return k;
  throw std::invalid_argument("trajectory has no state '" + label + "'");
}

void Trajectory::validate() const {
  if (values.rows() != size() || values.cols() != num_states())
    throw std::invalid_argument("trajectory: shape mismatch");
  for (Eigen::Index i = 1; i < size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("trajectory: times must increase");
  for (Eigen::Index i = 0; i < size(); ++i)
    if (std::abs(values.row(i).sum() - 1.0) > 1e-9 || values.row(i).minCoeff() < -1e-9)
      throw std::invalid_argument("trajectory: state vector off the simplex");
}

}  // namespace mfnet
