#include "mfnet/twostate.hpp"

#include "mfnet/math.hpp"
#include "mfnet/mfd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfnet::twostate {

namespace {
// A_l + B_l at or below this is treated as no switching at all.
constexpr double kDegenerate = 1e-12;
}  // namespace

TwoStateLogits TwoStateLogits::from_array(const std::array<double, 6>& c) {
  return {{c[0], c[1], c[2]}, {c[3], c[4], c[5]}};
}

std::array<double, 6> TwoStateLogits::to_array() const {
  return {h.c0, h.cu, h.cq, t.c0, t.cu, t.cq};
}

std::pair<double, double> kernel_rates(const TwoStateLogits& logits, double u, int l, int m) {
  if (l < 0 || m < 0 || m > l) throw std::invalid_argument("kernel_rates: need 0 <= M <= l");
  const double q = truthful_share(l, m);
  return {logistic(logits.h(u, q)), logistic(-logits.t(u, q))};
}

std::pair<double, double> a_b(const TwoStateLogits& logits, double u, int l, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("a_b: theta must lie in [0, 1]");
  const Eigen::VectorXd pmf = binomial_pmf(l, theta);
  double a = 0.0, b = 0.0;
  for (int m = 0; m <= l; ++m) {
    const auto [ht, th] = kernel_rates(logits, u, l, m);
    a += pmf(m) * ht;
    b += pmf(m) * th;
  }
  return {a, b};
}

ChoiceModel to_choice_model(const TwoStateLogits& logits) {
  const StateSpace space = StateSpace::two_state();
  const FeatureMapSpec features = parse_features(
      {"state:H", "u@H", "frac:T@H", "state:T", "u@T", "frac:T@T"}, space);
  Eigen::VectorXd coeffs(6);
  coeffs << logits.h.c0, logits.h.cu, logits.h.cq, logits.t.c0, logits.t.cu, logits.t.cq;
  return ChoiceModel(space, features, coeffs);
}

PhiMap::PhiMap(const PhiContext& ctx) {
  const double total = ctx.q.total_edge_weight();
  if (total <= 0.0) throw ZeroEdgeError();
  const auto support = ctx.q.in_degree_support();
  const auto ew = ctx.q.edge_weights();
  const auto& lg = ctx.logits;
  for (std::size_t i = 0; i < support.size(); ++i) {
    Degree d;
    d.l = support[i];
    d.weight = ew[i] / total;
    auto pin = ctx.pinned.find(d.l);
    d.pinned = pin != ctx.pinned.end();
    d.pinned_share = d.pinned ? pin->second : 0.0;
    d.k_ht.resize(d.l + 1);
    d.k_th.resize(d.l + 1);
    d.dk_ht.resize(d.l + 1);
    d.dk_th.resize(d.l + 1);
    for (int m = 0; m <= d.l; ++m) {
      const double q = truthful_share(d.l, m);
      d.k_ht(m) = logistic(lg.h(ctx.u, q));
      d.k_th(m) = logistic(-lg.t(ctx.u, q));
      d.dk_ht(m) = logistic_prime(lg.h(ctx.u, q)) * lg.h.cu;
      d.dk_th(m) = logistic_prime(-lg.t(ctx.u, q)) * lg.t.cu;
    }
    degrees_.push_back(d.l);
    weights_.push_back(d.weight);
    table_.push_back(std::move(d));
  }
}

std::pair<double, double> PhiMap::ab(const Degree& d, const Eigen::VectorXd& pmf) const {
  return {pmf.dot(d.k_ht), pmf.dot(d.k_th)};
}

double PhiMap::operator()(double theta) const {
  double s = 0.0;
  for (const Degree& d : table_) {
    if (d.weight == 0.0) continue;
    if (d.pinned) {
      s += d.weight * d.pinned_share;
      continue;
    }
    const auto [a, b] = ab(d, binomial_pmf(d.l, theta));
    if (!(a + b > kDegenerate))
      throw DegenerateSwitching("A_l + B_l = 0 at in-degree " + std::to_string(d.l));
    s += d.weight * a / (a + b);
  }
  return std::clamp(s, 0.0, 1.0);
}

double PhiMap::derivative(double theta) const {
  double s = 0.0;
  for (const Degree& d : table_) {
    if (d.weight == 0.0 || d.pinned || d.l == 0) continue;
    const auto [a, b] = ab(d, binomial_pmf(d.l, theta));
    // d/dtheta E f(M) = l E[f(M' + 1) - f(M')] with M' ~ Bin(l - 1, theta).
    const Eigen::VectorXd pmf = binomial_pmf(d.l - 1, theta);
    const double da = d.l * pmf.dot(d.k_ht.tail(d.l) - d.k_ht.head(d.l));
    const double db = d.l * pmf.dot(d.k_th.tail(d.l) - d.k_th.head(d.l));
    const double ab_sum = a + b;
    if (!(ab_sum > kDegenerate))
      throw DegenerateSwitching("A_l + B_l = 0 at in-degree " + std::to_string(d.l));
    s += d.weight * (da * b - a * db) / (ab_sum * ab_sum);
  }
  return s;
}

double PhiMap::derivative_u(double theta) const {
  double s = 0.0;
  for (const Degree& d : table_) {
    if (d.weight == 0.0 || d.pinned) continue;
    const Eigen::VectorXd pmf = binomial_pmf(d.l, theta);
    const auto [a, b] = ab(d, pmf);
    const double a_u = pmf.dot(d.dk_ht);
    const double b_tilde_u = pmf.dot(d.dk_th);
    const double ab_sum = a + b;
    if (!(ab_sum > kDegenerate))
      throw DegenerateSwitching("A_l + B_l = 0 at in-degree " + std::to_string(d.l));
    s += d.weight * (a_u * b + a * b_tilde_u) / (ab_sum * ab_sum);
  }
  return s;
}

double PhiMap::min_switching(double theta) const {
  double eta = INFINITY;
  for (const Degree& d : table_) {
    const auto [a, b] = ab(d, binomial_pmf(d.l, theta));
    eta = std::min(eta, a + b);
  }
  return eta;
}

double phi(const PhiContext& ctx, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("phi: theta must lie in [0, 1]");
  return PhiMap(ctx)(theta);
}

namespace {

constexpr int kGridPoints = 1001;

double grid_point(int i) { return static_cast<double>(i) / (kGridPoints - 1); }

double bisect(const PhiMap& map, double lo, double hi) {
  // Invariant: g(lo) >= 0 >= g(hi) with g = Phi - id.
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (map(mid) - mid >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

FixedPointReport solve_fixed_point(const PhiContext& ctx, double start) {
  const PhiMap map(ctx);
  FixedPointReport report;

  double theta = std::clamp(start, 0.0, 1.0);
  bool converged = false;
  int it = 0;
  for (; it < 100000; ++it) {
    const double next = map(theta);
    const double step = std::abs(next - theta);
    theta = next;
    if (step < 1e-10) {
      converged = true;
      break;
    }
  }
  report.iterations = it;
  report.method = "picard";
  if (!converged || std::abs(map(theta) - theta) >= 1e-9) {
    report.method = "bisection";
    theta = bisect(map, 0.0, 1.0);
  }
  report.theta_star = theta;
  report.residual = std::abs(map(theta) - theta);

  double prev_g = map(0.0);
  if (prev_g == 0.0) report.bracketed_roots.push_back(0.0);
  for (int i = 1; i < kGridPoints; ++i) {
    const double x = grid_point(i);
    const double g = map(x) - x;
    if (g == 0.0)
      report.bracketed_roots.push_back(x);
    else if (prev_g > 0.0 && g < 0.0)
      report.bracketed_roots.push_back(bisect(map, grid_point(i - 1), x));
    else if (prev_g < 0.0 && g > 0.0) {
      // Upward crossing (unstable root): bisect on the negated residual.
      double lo = grid_point(i - 1), hi = x;
      for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
        const double mid = 0.5 * (lo + hi);
        (map(mid) - mid < 0.0 ? lo : hi) = mid;
      }
      report.bracketed_roots.push_back(0.5 * (lo + hi));
    }
    prev_g = g;
  }
  return report;
}

ContractionReport contraction_check(const PhiContext& ctx) {
  const PhiMap map(ctx);
  ContractionReport r;
  r.s_h = std::abs(ctx.logits.h.cq);
  r.s_t = std::abs(ctx.logits.t.cq);
  r.eta = INFINITY;
  constexpr double delta = 1e-5;
  for (int i = 0; i < kGridPoints; ++i) {
    const double x = grid_point(i);
    r.eta = std::min(r.eta, map.min_switching(x));
    const double lo = std::max(0.0, x - delta), hi = std::min(1.0, x + delta);
    r.measured_sup_derivative =
        std::max(r.measured_sup_derivative, std::abs(map(hi) - map(lo)) / (hi - lo));
  }
  const double s = std::max(r.s_h, r.s_t);
  r.bound = s == 0.0 ? 0.0 : s / (4.0 * r.eta);
  r.is_contraction = r.bound < 1.0;
  return r;
}

ComparativeStatics comparative_statics(const PhiContext& ctx, double theta_star) {
  const PhiMap map(ctx);
  ComparativeStatics cs;
  cs.phi_theta = map.derivative(theta_star);
  cs.phi_u = map.derivative_u(theta_star);
  const double denom = 1.0 - cs.phi_theta;
  if (!(denom > 0.0))
    throw UnstableFixedPoint("1 - Phi'(theta*) <= 0; the fixed point is not stable");
  cs.dtheta_du = cs.phi_u / denom;
  return cs;
}

AssumptionReport check_assumptions(const TwoStateLogits& logits, const PhiContext& ctx) {
  AssumptionReport r;
  auto note = [&](const std::string& s) { r.witnesses.push_back(s); };
  r.a1 = logits.h.cq >= 0.0 && logits.t.cq >= 0.0;
  if (logits.h.cq < 0.0) note("A1: cq of Delta_H = " + std::to_string(logits.h.cq) + " < 0");
  if (logits.t.cq < 0.0) note("A1: cq of Delta_T = " + std::to_string(logits.t.cq) + " < 0");
  r.a2 = std::isfinite(logits.h.cq) && std::isfinite(logits.t.cq);
  if (!r.a2) note("A2: non-finite social slope");
  r.a4 = logits.h.cu >= 0.0 && logits.t.cu >= 0.0;
  if (logits.h.cu < 0.0) note("A4: cu of Delta_H = " + std::to_string(logits.h.cu) + " < 0");
  if (logits.t.cu < 0.0) note("A4: cu of Delta_T = " + std::to_string(logits.t.cu) + " < 0");

  PhiContext c = ctx;
  c.logits = logits;
  const PhiMap map(c);
  double eta = INFINITY, argmin = 0.0;
  for (int i = 0; i < kGridPoints; ++i) {
    const double v = map.min_switching(grid_point(i));
    if (v < eta) {
      eta = v;
      argmin = grid_point(i);
    }
  }
  r.a3 = eta > kDegenerate;
  if (!r.a3) {
    std::ostringstream os;
    os << "A3: min_l (A_l + B_l) = " << eta << " at theta = " << argmin;
    note(os.str());
  }
  return r;
}

}  // namespace mfnet::twostate
