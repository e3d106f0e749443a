#include "mfnet/mfd.hpp"

#include "mfnet/math.hpp"
#include "mfnet/random.hpp"

#include <algorithm>
#include <cmath>

namespace mfnet {

namespace {

void check_theta(const Eigen::VectorXd& theta, int k) {
  if (theta.size() != k) throw std::invalid_argument("theta size differs from the state count");
  if ((theta.array() < -1e-12).any() || std::abs(theta.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("theta must lie on the simplex");
}

// Weights of the multinomial law with given log-coefficients; zero-probability
// states contribute exactly zero unless their count is zero.
Eigen::VectorXd multinomial_weights(const Eigen::MatrixXd& counts, const Eigen::VectorXd& log_coeff,
                                    const Eigen::RowVectorXd& theta) {
  Eigen::VectorXd w(counts.rows());
  for (Eigen::Index c = 0; c < counts.rows(); ++c) {
    double lw = log_coeff(c);
    for (Eigen::Index z = 0; z < counts.cols(); ++z) {
      const double n = counts(c, z);
      if (n == 0.0) continue;
      lw += theta(z) > 0.0 ? n * std::log(theta(z)) : -INFINITY;
    }
    w(c) = std::exp(lw);
  }
  return w;
}

Eigen::MatrixXd g_monte_carlo(const TransitionKernel& kernel, double u, int l,
                              const Eigen::RowVectorXd& theta, const GAvgOptions& opt) {
  const int k = kernel.num_states();
  Rng rng(derive_seed(opt.mc_seed, static_cast<std::uint64_t>(l)));
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
  std::vector<int> counts(k);
  const std::span<const double> probs(theta.data(), static_cast<std::size_t>(k));
  for (int s = 0; s < opt.mc_samples; ++s) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < l; ++i) ++counts[rng.categorical(probs)];
    for (int z1 = 0; z1 < k; ++z1) g.row(z1) += kernel.row(u, counts, z1).transpose();
  }
  return g / static_cast<double>(opt.mc_samples);
}

}  // namespace

Eigen::VectorXd theta_z(const JointDegreeDistribution& q, const PopulationVector& rho) {
  const double total = q.total_edge_weight();
  if (total <= 0.0) throw ZeroEdgeError();
  const auto support = q.in_degree_support();
  const auto weights = q.edge_weights();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(rho.num_states());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const int row = rho.row_of(support[i]);
    if (row < 0) throw std::invalid_argument("theta_z: rho lacks an in-degree class of Q");
    theta += weights[i] * rho.shares.row(row).transpose();
  }
  return theta / total;
}

Eigen::VectorXd theta_z(const JointDegreeDistribution& q, const JointPopulation& rho) {
  const double total = q.total_edge_weight();
  if (total <= 0.0) throw ZeroEdgeError();
  Eigen::VectorXd theta;
  for (const auto& [key, mass] : q.entries()) {
    if (key.second == 0 || mass == 0.0) continue;
    const auto it = rho.find(key);
    if (it == rho.end()) throw std::invalid_argument("theta_z: rho lacks a (l, m) class of Q");
    if (theta.size() == 0) theta = Eigen::VectorXd::Zero(it->second.size());
    theta += key.second * mass * it->second;
  }
  return theta / total;
}

void for_each_composition(int l, int k, const std::function<void(std::span<const int>)>& f) {
  if (l < 0 || k < 1) throw std::invalid_argument("compositions: need l >= 0 and k >= 1");
  std::vector<int> n(k, 0);
  // Lexicographic order: recurse over leading coordinates, last takes the rest.
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == k - 1) {
      n[pos] = remaining;
      f(n);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      n[pos] = v;
      rec(pos + 1, remaining - v);
    }
  };
  rec(0, l);
}

std::vector<std::vector<int>> compositions(int l, int k) {
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(composition_count(l, k)));
  for_each_composition(l, k, [&](std::span<const int> n) { out.emplace_back(n.begin(), n.end()); });
  return out;
}

std::string_view to_string(Activation a) {
  return a == Activation::uniform ? "uniform" : "in_degree";
}

Activation parse_activation(std::string_view s) {
  if (s == "uniform") return Activation::uniform;
  if (s == "in_degree") return Activation::in_degree;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

Eigen::MatrixXd g_avg(const TransitionKernel& kernel, double u, int l,
                      const Eigen::VectorXd& theta, const GAvgOptions& options) {
  const int k = kernel.num_states();
  check_theta(theta, k);
  if (l > options.l_exact) return g_monte_carlo(kernel, u, l, theta.transpose(), options);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
  for_each_composition(l, k, [&](std::span<const int> n) {
    double lw = log_multinomial_coefficient(n);
    for (int z = 0; z < k; ++z)
      if (n[z] > 0) lw += theta(z) > 0.0 ? n[z] * std::log(theta(z)) : -INFINITY;
    const double w = std::exp(lw);
    if (w == 0.0) return;
    for (int z1 = 0; z1 < k; ++z1) g.row(z1) += w * kernel.row(u, n, z1).transpose();
  });
  return g;
}

Eigen::MatrixXd rate_matrix(const Eigen::MatrixXd& g) {
  Eigen::MatrixXd f = g;
  for (Eigen::Index z = 0; z < f.rows(); ++z) {
    f(z, z) = 0.0;
    f(z, z) = -f.row(z).sum();
  }
  return f;
}

Eigen::MatrixXd rate_matrix(const TransitionKernel& kernel, double u, int l,
                            const Eigen::VectorXd& theta, const GAvgOptions& options) {
  return rate_matrix(g_avg(kernel, u, l, theta, options));
}

void OdeSpec::validate() const {
  if (!(h > 0.0)) throw std::invalid_argument("ode: step size must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("ode: t_end must be >= 0");
  if (g_options.l_exact < 0) throw std::invalid_argument("ode: l_exact must be >= 0");
  if (g_options.mc_samples < 1) throw std::invalid_argument("ode: mc_samples must be >= 1");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) throw std::invalid_argument("ode: output times must be >= 0");
    if (i > 0 && !(times[i] > times[i - 1]))
      throw std::invalid_argument("ode: output times must increase");
  }
}

MeanFieldSystem::MeanFieldSystem(const JointDegreeDistribution& q,
                                 std::shared_ptr<const TransitionKernel> kernel, double u,
                                 Activation activation, GAvgOptions options)
    : kernel_(std::move(kernel)), u_(u), options_(options), k_(kernel_->num_states()) {
  degrees_ = q.in_degree_support();
  const auto n = static_cast<Eigen::Index>(degrees_.size());
  const auto ew = q.edge_weights();
  const double total = q.total_edge_weight();
  has_edges_ = total > 0.0;
  node_weights_.resize(n);
  edge_weights_.resize(n);
  rates_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    node_weights_(i) = q.in_degree_marginal(degrees_[i]);
    edge_weights_(i) = has_edges_ ? ew[i] / total : 0.0;
    rates_(i) = activation == Activation::uniform ? 1.0 : static_cast<double>(degrees_[i]);
  }
  cache_.resize(degrees_.size());
  for (std::size_t i = 0; i < degrees_.size(); ++i) {
    const int l = degrees_[i];
    if (l > options_.l_exact || rates_(static_cast<Eigen::Index>(i)) == 0.0) continue;
    auto c = std::make_unique<ExactCache>();
    const auto count = static_cast<Eigen::Index>(composition_count(l, k_));
    c->counts.resize(count, k_);
    c->log_coeff.resize(count);
    c->rows.reserve(static_cast<std::size_t>(count));
    Eigen::Index idx = 0;
    for_each_composition(l, k_, [&](std::span<const int> nn) {
      Eigen::MatrixXd rows(k_, k_);
      for (int z1 = 0; z1 < k_; ++z1) rows.row(z1) = kernel_->row(u_, nn, z1).transpose();
      for (int z = 0; z < k_; ++z) c->counts(idx, z) = nn[z];
      c->log_coeff(idx) = log_multinomial_coefficient(nn);
      c->rows.push_back(std::move(rows));
      ++idx;
    });
    cache_[i] = std::move(c);
  }
}

Eigen::RowVectorXd MeanFieldSystem::theta(const Eigen::MatrixXd& shares) const {
  if (!has_edges_) return Eigen::RowVectorXd::Constant(k_, 1.0 / k_);
  return edge_weights_.transpose() * shares;
}

Eigen::MatrixXd MeanFieldSystem::g_matrix(int row, const Eigen::RowVectorXd& theta) const {
  const auto& c = cache_[static_cast<std::size_t>(row)];
  if (!c) return g_avg(*kernel_, u_, degrees_[row], theta.transpose(), options_);
  const Eigen::VectorXd w = multinomial_weights(c->counts, c->log_coeff, theta);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k_, k_);
  for (std::size_t i = 0; i < c->rows.size(); ++i)
    if (w(static_cast<Eigen::Index>(i)) != 0.0) g += w(static_cast<Eigen::Index>(i)) * c->rows[i];
  return g;
}

Eigen::MatrixXd MeanFieldSystem::derivative(const Eigen::MatrixXd& shares) const {
  // Clamp tiny negative round-off so theta stays a valid law within a stage.
  Eigen::RowVectorXd th = theta(shares).cwiseMax(0.0);
  th /= th.sum();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(shares.rows(), shares.cols());
  for (Eigen::Index i = 0; i < shares.rows(); ++i) {
    if (rates_(i) == 0.0) continue;
    // Master equation in row form: d rho / dt = rho F.
    d.row(i) = rates_(i) * shares.row(i) * rate_matrix(g_matrix(static_cast<int>(i), th));
  }
  return d;
}

namespace {

Eigen::MatrixXd rk4_step(const MeanFieldSystem& sys, const Eigen::MatrixXd& y, double h) {
  const Eigen::MatrixXd k1 = sys.derivative(y);
  const Eigen::MatrixXd k2 = sys.derivative(y + 0.5 * h * k1);
  const Eigen::MatrixXd k3 = sys.derivative(y + 0.5 * h * k2);
  const Eigen::MatrixXd k4 = sys.derivative(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void project_to_simplex(Eigen::MatrixXd& y, double t) {
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double lo = y.row(r).minCoeff();
    const double drift = std::abs(y.row(r).sum() - 1.0);
    if (lo < -1e-6 || drift > 1e-6 || !y.row(r).allFinite())
      throw IntegrationError("integration left the simplex at t = " + std::to_string(t) +
                             "; use a smaller step size");
    y.row(r) = y.row(r).cwiseMax(0.0);
    y.row(r) /= y.row(r).sum();
  }
}

}  // namespace

Trajectory integrate(const JointDegreeDistribution& q, const PopulationVector& rho0,
                     std::shared_ptr<const TransitionKernel> kernel, const OdeSpec& ode,
                     const std::vector<std::string>& labels) {
  ode.validate();
  const int k = kernel->num_states();
  if (rho0.num_states() != k) throw std::invalid_argument("integrate: rho0 has the wrong state count");
  if (static_cast<int>(labels.size()) != k)
    throw std::invalid_argument("integrate: label count differs from the state count");
  if (rho0.simplex_violation() > 1e-9)
    throw std::invalid_argument("integrate: rho0 rows must lie on the simplex");

  const MeanFieldSystem sys(q, std::move(kernel), ode.u, ode.activation, ode.g_options);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(sys.degrees().size()), k);
  for (std::size_t i = 0; i < sys.degrees().size(); ++i) {
    const int row = rho0.row_of(sys.degrees()[i]);
    if (row < 0) throw std::invalid_argument("integrate: rho0 lacks an in-degree class of Q");
    y.row(static_cast<Eigen::Index>(i)) = rho0.shares.row(row);
  }

  std::vector<double> times = ode.times;
  if (times.empty()) {
    const auto steps = static_cast<long long>(std::llround(ode.t_end / ode.h));
    for (long long s = 0; s <= steps; ++s) times.push_back(std::min(s * ode.h, ode.t_end));
    times.erase(std::unique(times.begin(), times.end()), times.end());
  }

  Trajectory traj;
  traj.labels = labels;
  traj.times = times;
  traj.degrees = sys.degrees();
  traj.values.resize(static_cast<Eigen::Index>(times.size()), k);
  traj.per_degree.resize(static_cast<Eigen::Index>(times.size()), y.size());

  double t = 0.0;
  constexpr double slack = 1e-12;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double target = times[i];
    while (t + ode.h <= target + slack) {
      y = rk4_step(sys, y, ode.h);
      t += ode.h;
      project_to_simplex(y, t);
    }
    Eigen::MatrixXd out = y;
    if (target - t > slack) {
      out = rk4_step(sys, y, target - t);
      project_to_simplex(out, target);
    }
    const auto row = static_cast<Eigen::Index>(i);
    traj.values.row(row) = sys.overall(out);
    for (Eigen::Index d = 0; d < out.rows(); ++d) traj.per_degree.block(row, d * k, 1, k) = out.row(d);
  }
  return traj;
}

std::string_view to_string(FitMethod m) { return m == FitMethod::rum ? "rum" : "plugin"; }

FitMethod parse_fit_method(std::string_view s) {
  if (s == "rum") return FitMethod::rum;
  if (s == "plugin") return FitMethod::plugin;
  throw std::invalid_argument("unknown fit method '" + std::string(s) + "'");
}

std::shared_ptr<const TransitionKernel> fit_kernel(std::span<const TransitionRecord> records,
                                                   const PredictSpec& spec) {
  if (spec.method == FitMethod::plugin)
    return std::make_shared<PluginKernel>(fit_plugin(records, spec.space, spec.buckets));
  FitOptions opt;
  opt.l2 = spec.l2;
  const FeatureMapSpec features = spec.features.terms.empty() ? default_features(spec.space) : spec.features;
  FitResult fit = fit_mle(records, features, spec.space, opt);
  return std::make_shared<ChoiceKernel>(std::move(fit.model));
}

Prediction predict_from_fit(std::span<const TransitionRecord> records,
                            const JointDegreeDistribution& q, const PopulationVector& rho0,
                            const PredictSpec& spec) {
  Prediction p;
  p.kernel = fit_kernel(records, spec);
  p.trajectory = integrate(q, rho0, p.kernel, spec.ode, spec.space.labels);
  return p;
}

PopulationVector uniform_population(const JointDegreeDistribution& q, const Eigen::VectorXd& rho) {
  PopulationVector pop;
  pop.degrees = q.in_degree_support();
  pop.shares = rho.transpose().replicate(static_cast<Eigen::Index>(pop.degrees.size()), 1);
  return pop;
}

}  // namespace mfnet
