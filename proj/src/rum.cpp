#include "mfnet/rum.hpp"

#include "mfnet/math.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

namespace mfnet {

int StateSpace::index_of(std::string_view label) const {
  for (int k = 0; k < size(); ++k)
    if (labels[k] == label) return k;
  throw ModelError("unknown state label '" + std::string(label) + "'");
}

void StateSpace::validate() const {
  if (size() < 2 || size() > 8) throw ModelError("state space: need 2..8 states");
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (static_cast<int>(distinct.size()) != size()) throw ModelError("state space: duplicate labels");
  for (const auto& l : labels)
    if (l.empty() || l.find_first_of("@:*,") != std::string::npos)
      throw ModelError("state space: invalid label '" + l + "'");
  if (reference < 0 || reference >= size()) throw ModelError("state space: invalid reference");
}

Feature parse_feature(std::string_view text, const StateSpace& space) {
  Feature f;
  std::string_view body = text;
  if (auto at = text.find('@'); at != std::string_view::npos) {
    f.gate = space.index_of(text.substr(at + 1));
    body = text.substr(0, at);
  }
  auto with_state = [&](std::string_view prefix, FeatureKind kind) {
    if (!body.starts_with(prefix)) return false;
    f.kind = kind;
    f.state = space.index_of(body.substr(prefix.size()));
    return true;
  };
  if (body == "const") {
    f.kind = FeatureKind::constant;
  } else if (body == "u") {
    f.kind = FeatureKind::control;
  } else if (body == "log1p_l") {
    f.kind = FeatureKind::log_degree;
  } else if (with_state("frac:", FeatureKind::fraction) ||
             with_state("count:", FeatureKind::count) ||
             with_state("state:", FeatureKind::state) ||
             with_state("u*frac:", FeatureKind::control_fraction)) {
  } else if (body.starts_with("w:")) {
    f.kind = FeatureKind::context;
    const auto digits = body.substr(2);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), f.index);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || f.index < 0)
      throw ModelError("invalid context feature '" + std::string(text) + "'");
  } else {
    throw ModelError("unknown feature '" + std::string(text) + "'");
  }
  return f;
}

std::string format_feature(const Feature& f, const StateSpace& space) {
  std::string s;
  switch (f.kind) {
    case FeatureKind::constant: s = "const"; break;
    case FeatureKind::control: s = "u"; break;
    case FeatureKind::fraction: s = "frac:" + space.labels.at(f.state); break;
    case FeatureKind::count: s = "count:" + space.labels.at(f.state); break;
    case FeatureKind::state: s = "state:" + space.labels.at(f.state); break;
    case FeatureKind::log_degree: s = "log1p_l"; break;
    case FeatureKind::context: s = "w:" + std::to_string(f.index); break;
    case FeatureKind::control_fraction: s = "u*frac:" + space.labels.at(f.state); break;
  }
  if (f.gate >= 0) s += "@" + space.labels.at(f.gate);
  return s;
}

FeatureMapSpec parse_features(const std::vector<std::string>& texts, const StateSpace& space) {
  FeatureMapSpec spec;
  for (const auto& t : texts) spec.terms.push_back(parse_feature(t, space));
  spec.validate(space);
  return spec;
}

FeatureMapSpec default_features(const StateSpace& space) {
  std::vector<std::string> texts;
  for (const auto& l : space.labels) texts.push_back("state:" + l);
  for (int z = 0; z < space.size(); ++z)
    if (z != space.reference) texts.push_back("frac:" + space.labels[z]);
  return parse_features(texts, space);
}

int FeatureMapSpec::context_dim() const {
  int d = 0;
  for (const auto& f : terms)
    if (f.kind == FeatureKind::context) d = std::max(d, f.index + 1);
  return d;
}

void FeatureMapSpec::validate(const StateSpace& space) const {
  for (const auto& f : terms) {
    const bool needs_state = f.kind == FeatureKind::fraction || f.kind == FeatureKind::count ||
                             f.kind == FeatureKind::state ||
                             f.kind == FeatureKind::control_fraction;
    if (needs_state && (f.state < 0 || f.state >= space.size()))
      throw ModelError("feature references an invalid state");
    if (f.gate >= space.size()) throw ModelError("feature gate references an invalid state");
    if (f.kind == FeatureKind::context && f.index < 0)
      throw ModelError("context feature needs an index");
  }
}

void FeatureMapSpec::evaluate(double u, std::span<const int> counts, std::span<const double> w,
                              int current, Eigen::Ref<Eigen::VectorXd> out) const {
  const int l = std::accumulate(counts.begin(), counts.end(), 0);
  auto fraction = [&](int z) { return l == 0 ? 0.0 : static_cast<double>(counts[z]) / l; };
  for (int j = 0; j < dimension(); ++j) {
    const Feature& f = terms[j];
    double v = 0.0;
    switch (f.kind) {
      case FeatureKind::constant: v = 1.0; break;
      case FeatureKind::control: v = u; break;
      case FeatureKind::fraction: v = fraction(f.state); break;
      case FeatureKind::count: v = counts[f.state]; break;
      case FeatureKind::state: v = current == f.state ? 1.0 : 0.0; break;
      case FeatureKind::log_degree: v = std::log1p(static_cast<double>(l)); break;
      case FeatureKind::context: v = w[f.index]; break;
      case FeatureKind::control_fraction: v = u * fraction(f.state); break;
    }
    if (f.gate >= 0 && current != f.gate) v = 0.0;
    out(j) = v;
  }
}

ChoiceModel::ChoiceModel(StateSpace space, FeatureMapSpec features, Eigen::VectorXd coeffs)
    : space_(std::move(space)), features_(std::move(features)), coeffs_(std::move(coeffs)) {
  space_.validate();
  features_.validate(space_);
  if (coeffs_.size() != static_cast<Eigen::Index>(features_.dimension()) * (space_.size() - 1))
    throw ModelError("choice model: coefficient count must equal d * (K - 1)");
  if (!coeffs_.allFinite()) throw ModelError("choice model: non-finite coefficient");
}

void ChoiceModel::check_inputs(std::span<const int> counts, std::span<const double> w,
                               int current) const {
  if (static_cast<int>(counts.size()) != num_states())
    throw ModelError("composition size does not match the state space");
  for (int c : counts)
    if (c < 0) throw ModelError("composition has a negative count");
  if (static_cast<int>(w.size()) < features_.context_dim())
    throw ModelError("context vector dimension mismatch");
  if (current < 0 || current >= num_states()) throw ModelError("invalid current state");
}

Eigen::VectorXd ChoiceModel::utilities(double u, std::span<const int> counts,
                                       std::span<const double> w, int current) const {
  check_inputs(counts, w, current);
  Eigen::VectorXd x(features_.dimension());
  features_.evaluate(u, counts, w, current, x);
  const Eigen::VectorXd free = coefficient_matrix().transpose() * x;
  Eigen::VectorXd r(num_states());
  for (int z = 0, b = 0; z < num_states(); ++z) r(z) = z == space_.reference ? 0.0 : free(b++);
  return r;
}

Eigen::VectorXd ChoiceModel::choice_probs(double u, std::span<const int> counts,
                                          std::span<const double> w, int current) const {
  return softmax(utilities(u, counts, w, current));
}

int ChoiceModel::sample_next_state(double u, std::span<const int> counts,
                                   std::span<const double> w, int current, Rng& rng) const {
  const Eigen::VectorXd p = choice_probs(u, counts, w, current);
  return static_cast<int>(rng.categorical({p.data(), static_cast<std::size_t>(p.size())}));
}

ChoiceKernel::ChoiceKernel(ChoiceModel model, std::vector<double> context)
    : model_(std::move(model)), context_(std::move(context)) {
  if (static_cast<int>(context_.size()) < model_.features().context_dim())
    context_.resize(model_.features().context_dim(), 0.0);
}

void validate_record(const TransitionRecord& r, const StateSpace& space) {
  if (static_cast<int>(r.n.size()) != space.size())
    throw ModelError("record: composition size does not match the state space");
  int total = 0;
  for (int c : r.n) {
    if (c < 0) throw ModelError("record: negative neighbor count");
    total += c;
  }
  if (total != r.l) throw ModelError("record: composition total differs from l");
  if (r.prev < 0 || r.prev >= space.size() || r.next < 0 || r.next >= space.size())
    throw ModelError("record: invalid state");
}

double log_likelihood(const ChoiceModel& model, std::span<const TransitionRecord> records) {
  double ll = 0.0;
  for (const auto& r : records) {
    const Eigen::VectorXd util = model.utilities(r.u, r.n, r.w, r.prev);
    ll += util(r.next) - log_sum_exp(util);
  }
  return ll;
}

namespace {

// Neumaier summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    carry_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Full-batch evaluation of the penalized log-likelihood and its gradient.
class MleObjective {
 public:
  MleObjective(std::span<const TransitionRecord> records, const FeatureMapSpec& features,
               const StateSpace& space, double l2)
      : dim_(features.dimension()), states_(space.size()), reference_(space.reference), l2_(l2) {
    const auto n = static_cast<Eigen::Index>(records.size());
    design_.resize(n, dim_);
    choices_.resize(n);
    Eigen::VectorXd x(dim_);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = records[i];
      features.evaluate(r.u, r.n, r.w, r.prev, x);
      design_.row(i) = x.transpose();
      choices_[i] = r.next;
    }
  }

  Eigen::Index parameter_count() const { return static_cast<Eigen::Index>(dim_) * (states_ - 1); }

  /// Returns (objective, log-likelihood) and writes the gradient.
  std::pair<double, double> evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const Eigen::Map<const Eigen::MatrixXd> beta(theta.data(), dim_, states_ - 1);
    const Eigen::MatrixXd free = design_ * beta;
    Eigen::MatrixXd util = Eigen::MatrixXd::Zero(design_.rows(), states_);
    for (int z = 0, b = 0; z < states_; ++z)
      if (z != reference_) util.col(z) = free.col(b++);

    // Compensated sums: the gradient is a large sum of O(1) terms that
    // cancel at the optimum, and plain summation leaves an error above the
    // convergence tolerance on big logs.
    CompensatedSum ll;
    std::vector<CompensatedSum> acc(static_cast<std::size_t>(parameter_count()));
    for (Eigen::Index i = 0; i < util.rows(); ++i) {
      const double m = util.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (util.row(i).array() - m).exp().matrix();
      const double s = e.sum();
      ll.add(util(i, choices_[i]) - m - std::log(s));
      for (int z = 0, b = 0; z < states_; ++z) {
        if (z == reference_) continue;
        const double residual = (choices_[i] == z ? 1.0 : 0.0) - e(z) / s;
        for (int j = 0; j < dim_; ++j) acc[b * dim_ + j].add(residual * design_(i, j));
        ++b;
      }
    }
    grad.resize(parameter_count());
    for (Eigen::Index p = 0; p < grad.size(); ++p) grad(p) = acc[p].value() - 2.0 * l2_ * theta(p);
    const double total = ll.value();
    return {total - l2_ * theta.squaredNorm(), total};
  }

  /// Negative Hessian of the objective: sum_i (diag(p) - p p^T) (x) x x^T + 2 l2 I.
  Eigen::MatrixXd information(const Eigen::VectorXd& theta) const {
    const Eigen::Map<const Eigen::MatrixXd> beta(theta.data(), dim_, states_ - 1);
    const Eigen::MatrixXd free = design_ * beta;
    const int k = states_ - 1;
    Eigen::MatrixXd probs(design_.rows(), k);
    for (Eigen::Index i = 0; i < design_.rows(); ++i) {
      const double m = std::max(0.0, free.row(i).maxCoeff());
      const Eigen::RowVectorXd e = (free.row(i).array() - m).exp().matrix();
      probs.row(i) = e / (e.sum() + std::exp(-m));
    }
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(parameter_count(), parameter_count());
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        Eigen::VectorXd weight = -probs.col(a).cwiseProduct(probs.col(b));
        if (a == b) weight += probs.col(a);
        const Eigen::MatrixXd block = design_.transpose() * weight.asDiagonal() * design_;
        info.block(a * dim_, b * dim_, dim_, dim_) = block;
        if (a != b) info.block(b * dim_, a * dim_, dim_, dim_) = block.transpose();
      }
    info.diagonal().array() += 2.0 * l2_;
    return info;
  }

 private:
  int dim_;
  int states_;
  int reference_;
  double l2_;
  Eigen::MatrixXd design_;
  std::vector<int> choices_;
};

}  // namespace

FitResult fit_mle(std::span<const TransitionRecord> records, const FeatureMapSpec& features,
                  const StateSpace& space, const FitOptions& options) {
  space.validate();
  features.validate(space);
  if (records.empty()) throw ModelError("fit_mle: no records");
  if (options.l2 < 0.0) throw ModelError("fit_mle: l2 must be nonnegative");
  for (const auto& r : records) {
    validate_record(r, space);
    if (static_cast<int>(r.w.size()) < features.context_dim())
      throw ModelError("fit_mle: record context vector too short");
  }

  const MleObjective objective(records, features, space, options.l2);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(objective.parameter_count());
  Eigen::VectorXd grad;
  auto [f, ll] = objective.evaluate(theta, grad);

  FitReport report;
  constexpr double armijo = 1e-4;
  // Ascent direction preconditioned by the curvature; plain gradient when
  // the information matrix is not positive definite.
  auto direction = [&](bool& curved) {
    Eigen::MatrixXd info = objective.information(theta);
    info.diagonal().array() += 1e-12 * std::max(1.0, info.diagonal().maxCoeff());
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    curved = false;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      Eigen::VectorXd newton = ldlt.solve(grad);
      if (newton.allFinite() && newton.dot(grad) > 0.0) {
        curved = true;
        return newton;
      }
    }
    return Eigen::VectorXd(grad);
  };

  // Under complete separation the gradient vanishes only as the coefficients
  // diverge; the curvature-scaled step then stays O(1) instead of shrinking.
  bool diverging = false;
  int stalled = 0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    bool curved = false;
    const Eigen::VectorXd dir = direction(curved);
    if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      diverging = curved && dir.lpNorm<Eigen::Infinity>() > 1e-3;
      break;
    }
    const double slope = dir.dot(grad);
    const double g_inf = grad.lpNorm<Eigen::Infinity>();
    double step = 1.0;
    Eigen::VectorXd trial, trial_grad;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = theta + step * dir;
      auto [ft, llt] = objective.evaluate(trial, trial_grad);
      const bool sufficient = ft >= f + armijo * step * slope;
      // Near the optimum the increase falls below round-off; accept steps that
      // do not measurably lose objective and shrink the gradient.
      const bool roundoff = ft >= f - 1e-13 * std::max(1.0, std::abs(f)) &&
                            trial_grad.lpNorm<Eigen::Infinity>() < g_inf;
      if (std::isfinite(ft) && (sufficient || roundoff)) {
        // Steps that neither raise the objective nor shrink the gradient
        // mean the iterate sits at the round-off floor.
        stalled = ft > f || trial_grad.lpNorm<Eigen::Infinity>() < 0.5 * g_inf ? 0 : stalled + 1;
        theta = trial;
        grad = trial_grad;
        f = ft;
        ll = llt;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || stalled >= 20) break;
  }

  report.iterations = it;
  report.log_likelihood = ll;
  report.objective = f;
  report.gradient_inf_norm = grad.lpNorm<Eigen::Infinity>();
  report.converged = report.gradient_inf_norm < options.gradient_tolerance && !diverging;
  return {ChoiceModel(space, features, theta), report};
}

PluginKernel::PluginKernel(StateSpace space, int buckets)
    : space_(std::move(space)), buckets_(buckets) {
  space_.validate();
  if (buckets_ < 1) throw ModelError("plugin: buckets must be >= 1");
  counts_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(buckets_ + 1) * space_.size(),
                                  space_.size());
}

int PluginKernel::bucket_of(std::span<const int> counts) const {
  const int l = std::accumulate(counts.begin(), counts.end(), 0);
  if (l == 0) return buckets_;
  const double q = static_cast<double>(counts[0]) / l;
  return std::min(static_cast<int>(q * buckets_), buckets_ - 1);
}

void PluginKernel::add(const TransitionRecord& r) {
  validate_record(r, space_);
  counts_(static_cast<Eigen::Index>(bucket_of(r.n)) * space_.size() + r.prev, r.next) += 1.0;
}

void PluginKernel::set_counts(Eigen::MatrixXd counts) {
  if (counts.rows() != counts_.rows() || counts.cols() != counts_.cols())
    throw ModelError("plugin: count table has the wrong shape");
  if ((counts.array() < 0.0).any()) throw ModelError("plugin: negative count");
  counts_ = std::move(counts);
}

Eigen::VectorXd PluginKernel::bin_row(int bin, int current) const {
  const Eigen::VectorXd c =
      counts_.row(static_cast<Eigen::Index>(bin) * space_.size() + current).transpose();
  return (c.array() + 1.0) / (c.sum() + space_.size());
}

Eigen::VectorXd PluginKernel::row(double, std::span<const int> counts, int current) const {
  if (static_cast<int>(counts.size()) != space_.size())
    throw ModelError("composition size does not match the state space");
  return bin_row(bucket_of(counts), current);
}

PluginKernel fit_plugin(std::span<const TransitionRecord> records, const StateSpace& space,
                        int buckets) {
  PluginKernel kernel(space, buckets);
  for (const auto& r : records) kernel.add(r);
  return kernel;
}

}  // namespace mfnet
