#pragma once

#include "mfnet/kernel.hpp"
#include "mfnet/random.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mfnet {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered state labels. The reference state's utility is pinned to zero.
struct StateSpace {
  std::vector<std::string> labels{"T", "H", "D"};
  int reference = 2;

  static StateSpace three_state() { return {}; }
  static StateSpace two_state() { return {{"T", "H"}, 1}; }

  int size() const { return static_cast<int>(labels.size()); }
  int index_of(std::string_view label) const;
  void validate() const;
  bool operator==(const StateSpace&) const = default;
};

enum class FeatureKind {
  constant,          // "const"
  control,           // "u"
  fraction,          // "frac:Z"      n_Z / l, 0 when l = 0
  count,             // "count:Z"     n_Z
  state,             // "state:Z"     1{z1 = Z}
  log_degree,        // "log1p_l"     log(1 + l)
  context,           // "w:i"         i-th entry of the context vector
  control_fraction,  // "u*frac:Z"    u * n_Z / l
};

/// One column of the design. An optional gate "@Z" multiplies the value by
/// 1{z1 = Z}, which lets utilities depend on the current state.
struct Feature {
  FeatureKind kind = FeatureKind::constant;
  int state = -1;
  int index = -1;
  int gate = -1;
  bool operator==(const Feature&) const = default;
};

Feature parse_feature(std::string_view text, const StateSpace& space);
std::string format_feature(const Feature& f, const StateSpace& space);

/// Shared feature map x(u, l, n, w, z1); every non-reference alternative z
/// owns its own coefficient block so r_z = beta_z . x.
struct FeatureMapSpec {
  std::vector<Feature> terms;

  int dimension() const { return static_cast<int>(terms.size()); }
  int context_dim() const;
  void validate(const StateSpace& space) const;
  void evaluate(double u, std::span<const int> counts, std::span<const double> w, int current,
                Eigen::Ref<Eigen::VectorXd> out) const;
  bool operator==(const FeatureMapSpec&) const = default;
};

FeatureMapSpec parse_features(const std::vector<std::string>& texts, const StateSpace& space);

/// state:Z for every label and frac:Z for every non-reference label.
FeatureMapSpec default_features(const StateSpace& space);

class ChoiceModel {
 public:
  ChoiceModel() = default;
  ChoiceModel(StateSpace space, FeatureMapSpec features, Eigen::VectorXd coeffs);

  const StateSpace& space() const { return space_; }
  const FeatureMapSpec& features() const { return features_; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  int num_states() const { return space_.size(); }

  /// Deterministic utilities; the reference entry is exactly zero.
  Eigen::VectorXd utilities(double u, std::span<const int> counts, std::span<const double> w,
                            int current) const;
  /// Multinomial-logit transition probabilities kappa_{current, .}.
  Eigen::VectorXd choice_probs(double u, std::span<const int> counts, std::span<const double> w,
                               int current) const;
  int sample_next_state(double u, std::span<const int> counts, std::span<const double> w,
                        int current, Rng& rng) const;

  /// Coefficient matrix with one column per non-reference alternative.
  Eigen::Map<const Eigen::MatrixXd> coefficient_matrix() const {
    return {coeffs_.data(), features_.dimension(), num_states() - 1};
  }

 private:
  void check_inputs(std::span<const int> counts, std::span<const double> w, int current) const;

  StateSpace space_;
  FeatureMapSpec features_;
  Eigen::VectorXd coeffs_;
};

/// Adapts a ChoiceModel with a fixed context vector to the kernel interface.
class ChoiceKernel final : public TransitionKernel {
 public:
  explicit ChoiceKernel(ChoiceModel model, std::vector<double> context = {});
  int num_states() const override { return model_.num_states(); }
  Eigen::VectorXd row(double u, std::span<const int> counts, int current) const override {
    return model_.choice_probs(u, counts, context_, current);
  }
  const ChoiceModel& model() const { return model_; }

 private:
  ChoiceModel model_;
  std::vector<double> context_;
};

/// One observed agent update.
struct TransitionRecord {
  long long step = 0;
  int node = 0;
  double u = 0.0;
  int l = 0;
  std::vector<int> n;
  std::vector<double> w;
  int prev = 0;
  int next = 0;
  bool operator==(const TransitionRecord&) const = default;
};

void validate_record(const TransitionRecord& r, const StateSpace& space);

double log_likelihood(const ChoiceModel& model, std::span<const TransitionRecord> records);

struct FitOptions {
  double l2 = 0.0;
  double gradient_tolerance = 1e-8;
  int max_iterations = 10000;
};

struct FitReport {
  double log_likelihood = 0.0;
  double objective = 0.0;
  double gradient_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  ChoiceModel model;
  FitReport report;
};

/// Penalized conditional maximum likelihood,
///   max sum_r log kappa_{prev_r, next_r} - l2 * |theta|^2,
/// by full-batch Newton-preconditioned ascent with a backtracking line
/// search. Diverging coefficients (separable data, l2 = 0) are reported as
/// not converged.
FitResult fit_mle(std::span<const TransitionRecord> records, const FeatureMapSpec& features,
                  const StateSpace& space, const FitOptions& options = {});

/// Laplace-smoothed transition frequencies bucketed by the share q of
/// neighbors in the first-listed state. Records with l = 0 use a dedicated
/// bin after the `buckets` equal-width bins.
class PluginKernel final : public TransitionKernel {
 public:
  PluginKernel(StateSpace space, int buckets);

  void add(const TransitionRecord& r);
  int bucket_of(std::span<const int> counts) const;
  int buckets() const { return buckets_; }
  const StateSpace& space() const { return space_; }

  int num_states() const override { return space_.size(); }
  Eigen::VectorXd row(double u, std::span<const int> counts, int current) const override;
  /// Smoothed kernel for an explicit bin.
  Eigen::VectorXd bin_row(int bin, int current) const;
  /// Raw transition counts; rows index (bin * K + prev), columns next.
  const Eigen::MatrixXd& counts() const { return counts_; }
  void set_counts(Eigen::MatrixXd counts);

 private:
  StateSpace space_;
  int buckets_;
  Eigen::MatrixXd counts_;
};

PluginKernel fit_plugin(std::span<const TransitionRecord> records, const StateSpace& space,
                        int buckets);

}  // namespace mfnet
