#include "mfnet/metrics.hpp"

#include "mfnet/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mfnet {

Trajectory resample(const Trajectory& traj, const std::vector<double>& times) {
  if (traj.size() == 0) throw std::invalid_argument("resample: empty trajectory");
  Trajectory out;
  out.labels = traj.labels;
  out.times = times;
  out.values.resize(static_cast<Eigen::Index>(times.size()), traj.values.cols());
  const auto& src = traj.times;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const auto row = static_cast<Eigen::Index>(i);
    auto hi = std::lower_bound(src.begin(), src.end(), t);
    if (hi == src.begin()) {
      out.values.row(row) = traj.values.row(0);
    } else if (hi == src.end()) {
      out.values.row(row) = traj.values.row(traj.size() - 1);
    } else {
      const auto j = static_cast<Eigen::Index>(hi - src.begin());
      const double t0 = src[j - 1], t1 = src[j];
      const double a = (t - t0) / (t1 - t0);
      out.values.row(row) = (1.0 - a) * traj.values.row(j - 1) + a * traj.values.row(j);
    }
  }
  return out;
}

std::pair<Trajectory, Trajectory> align(const Trajectory& a, const Trajectory& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("align: empty trajectory");
  if (a.labels != b.labels) throw std::invalid_argument("align: state labels differ");
  const double lo = std::max(a.times.front(), b.times.front());
  const double hi = std::min(a.times.back(), b.times.back());
  std::vector<double> grid;
  for (double t : a.times)
    if (t >= lo - 1e-12 && t <= hi + 1e-12) grid.push_back(t);
  return {resample(a, grid), resample(b, grid)};
}

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw UndefinedCorrelation("correlation needs two equally long series of length >= 2");
  const Eigen::ArrayXd dx = x.array() - x.mean();
  const Eigen::ArrayXd dy = y.array() - y.mean();
  const double sxx = dx.square().sum(), syy = dy.square().sum();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelation("zero variance series");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_correlation(const Trajectory& a, const Trajectory& b, const std::string& state) {
  const auto [ra, rb] = align(a, b);
  const int z = ra.state_index(state);
  return pearson(ra.values.col(z), rb.values.col(z));
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double eps) {
  if (p.size() != q.size()) throw std::invalid_argument("kl: size mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("kl: eps must be positive");
  Eigen::ArrayXd pp = p.array().max(eps);
  Eigen::ArrayXd qq = q.array().max(eps);
  pp /= pp.sum();
  qq /= qq.sum();
  return std::max(0.0, (pp * (pp / qq).log()).sum());
}

double mean_kl(const Trajectory& a, const Trajectory& b, double eps) {
  const auto [ra, rb] = align(a, b);
  if (ra.size() == 0) throw std::invalid_argument("mean_kl: trajectories do not overlap");
  double s = 0.0;
  for (Eigen::Index i = 0; i < ra.size(); ++i)
    s += kl_divergence(ra.values.row(i).transpose(), rb.values.row(i).transpose(), eps);
  return s / static_cast<double>(ra.size());
}

Trajectory mean_trajectory(const std::vector<Trajectory>& runs) {
  if (runs.empty()) throw std::invalid_argument("mean_trajectory: no runs");
  Trajectory out = runs.front();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].times != out.times) throw std::invalid_argument("mean_trajectory: grids differ");
    out.values += runs[i].values;
    if (out.per_degree.size() == runs[i].per_degree.size()) out.per_degree += runs[i].per_degree;
  }
  out.values /= static_cast<double>(runs.size());
  out.per_degree /= static_cast<double>(runs.size());
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace

ValidationReport validate_protocol(const DirectedGraph& g, const AgentModels& truth,
                                   const StateSpace& space, const InitSpec& init,
                                   const ValidationSpec& spec) {
  if (spec.seeds < 1) throw std::invalid_argument("validate: need at least one seed");
  if (spec.fit_window < 1) throw std::invalid_argument("validate: fit window must be >= 1");
  if (spec.fit_window >= spec.steps)
    throw std::invalid_argument("validate: fewer transitions than the fit window plus a hold-out");

  const JointDegreeDistribution q = degree_distribution(g);
  const auto n_seeds = static_cast<std::size_t>(spec.seeds);
  std::vector<Trajectory> held(n_seeds), predicted(n_seeds);
  std::vector<std::uint64_t> seeds(n_seeds);

  parallel_for(n_seeds, [&](std::size_t i) {
    SimSpec sim;
    sim.mode = SimMode::sequential;
    sim.steps = spec.steps;
    sim.u = spec.u;
    sim.seed = derive_seed(spec.base_seed, i);
    sim.log_transitions = true;
    sim.per_degree = true;
    const RunResult res = run(g, init, truth, space.labels, sim);
    const auto window = static_cast<std::size_t>(spec.fit_window);

    PredictSpec ps;
    ps.method = spec.method;
    ps.space = space;
    ps.features = spec.features;
    ps.l2 = spec.l2;
    ps.buckets = spec.buckets;
    ps.ode.h = spec.h;
    ps.ode.u = spec.u;
    ps.ode.activation = spec.activation;

    // Times restart at the window boundary, where the prediction starts.
    const Trajectory& emp = res.trajectory;
    const auto w = static_cast<Eigen::Index>(window);
    const double t0 = emp.times[window];
    Trajectory& h = held[i];
    h.labels = emp.labels;
    h.values = emp.values.bottomRows(emp.size() - w);
    for (std::size_t k = window; k < emp.times.size(); ++k) h.times.push_back(emp.times[k] - t0);
    ps.ode.times = h.times;

    PopulationVector rho0;
    rho0.degrees = emp.degrees;
    rho0.shares = emp.per_degree.row(w).reshaped(space.size(), static_cast<Eigen::Index>(emp.degrees.size())).transpose();

    predicted[i] = predict_from_fit(std::span<const TransitionRecord>(res.log.data(), window), q, rho0, ps).trajectory;
    seeds[i] = sim.seed;
  });

  // Each prediction is scored against the held-out trajectory averaged over runs.
  const Trajectory mean_held = mean_trajectory(held);
  const int z = mean_held.state_index(spec.state);
  ValidationReport report;
  for (std::size_t i = 0; i < n_seeds; ++i)
    report.seeds.push_back({seeds[i], pearson(mean_held.values.col(z), predicted[i].values.col(z)),
                            mean_kl(mean_held, predicted[i])});

  std::vector<double> corr, kl;
  for (const auto& s : report.seeds) {
    corr.push_back(s.correlation);
    kl.push_back(s.kl);
  }
  std::tie(report.correlation_mean, report.correlation_std) = mean_std(corr);
  std::tie(report.kl_mean, report.kl_std) = mean_std(kl);
  return report;
}

}  // namespace mfnet
