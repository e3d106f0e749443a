#pragma once

#include "mfnet/graph.hpp"
#include "mfnet/kernel.hpp"
#include "mfnet/population.hpp"
#include "mfnet/random.hpp"
#include "mfnet/rum.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace mfnet {

struct NetworkState {
  std::vector<int> states;
  long long step = 0;
  long long round = 0;
  bool operator==(const NetworkState&) const = default;
};

/// Which nodes receive the first-listed state's quota.
enum class Placement {
  random,
  top_in_degree,
  top_out_degree,
  peripheral,  // lowest out-degree first
  chain_head,
  tree_root,
  explicit_nodes,
};

std::string_view to_string(Placement p);
Placement parse_placement(std::string_view s);

struct InitSpec {
  std::vector<double> distribution;
  Placement placement = Placement::random;
  std::vector<NodeId> nodes;  // used by Placement::explicit_nodes

  void validate() const;
  bool operator==(const InitSpec&) const = default;
};

/// Largest-remainder apportionment of n items over a probability vector;
/// ties in the remainder go to the lower index.
std::vector<int> apportion(const std::vector<double>& distribution, int n);

/// Node order used to fill the first category's quota under a placement.
std::vector<NodeId> placement_order(const DirectedGraph& g, Placement p);

/// Labels every node with a category so that category counts follow
/// `apportion`. The first category fills nodes in placement order; the
/// rest are shuffled over the remaining nodes.
std::vector<int> assign_by_quota(const DirectedGraph& g, const InitSpec& spec, Rng& rng);

NetworkState init_states(const DirectedGraph& g, const InitSpec& init, Rng& rng);

/// Kernel per node: a list of capability classes and each node's class.
struct AgentModels {
  std::vector<std::shared_ptr<const TransitionKernel>> classes;
  std::vector<int> node_class;  // empty means every node uses class 0

  static AgentModels uniform(std::shared_ptr<const TransitionKernel> kernel) {
    return {{std::move(kernel)}, {}};
  }
  const TransitionKernel& of(NodeId v) const {
    return *classes[node_class.empty() ? 0 : node_class[v]];
  }
  int num_states() const { return classes.front()->num_states(); }
  void validate(const DirectedGraph& g) const;
};

/// In-neighborhood composition of node v over `num_states` states.
std::vector<int> neighbor_composition(const DirectedGraph& g, const std::vector<int>& states,
                                      NodeId v, int num_states);

/// One edge event: the sampled listener redraws its state from its kernel
/// given its full in-neighborhood. Returns the transition.
TransitionRecord step_sequential(const DirectedGraph& g, NetworkState& state,
                                 const AgentModels& models, double u, Rng& rng);

/// Synchronous round on the previous round's states; nodes with in-degree 0
/// keep their state. Returns one record per updating node, in node order.
std::vector<TransitionRecord> step_parallel_round(const DirectedGraph& g, NetworkState& state,
                                                  const AgentModels& models, double u, Rng& rng);

PopulationVector population_state(const NetworkState& state, const DirectedGraph& g,
                                  int num_states);
/// Shares per (in-degree, out-degree) class of the nodes present.
JointPopulation joint_population_state(const NetworkState& state, const DirectedGraph& g,
                                       int num_states);
Eigen::VectorXd overall_fractions(const NetworkState& state, int num_states);

enum class SimMode { sequential, parallel };
std::string_view to_string(SimMode m);
SimMode parse_sim_mode(std::string_view s);

struct SimSpec {
  SimMode mode = SimMode::parallel;
  long long steps = 0;
  int rounds = 10;
  double u = 0.0;
  std::uint64_t seed = 0;
  bool log_transitions = false;
  bool per_degree = false;
  /// Sequential mode only: record every k-th step (the last step is always kept).
  long long record_every = 1;

  void validate() const;
  bool operator==(const SimSpec&) const = default;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<TransitionRecord> log;
  NetworkState final_state;
};

/// Full run from initialization. Time is step / |E| in sequential mode and
/// the round index in parallel mode.
RunResult run(const DirectedGraph& g, const InitSpec& init, const AgentModels& models,
              const std::vector<std::string>& labels, const SimSpec& sim);

/// Independent runs, one per seed, executed concurrently; results are in
/// seed order.
std::vector<RunResult> run_many(const DirectedGraph& g, const InitSpec& init,
                                const AgentModels& models, const std::vector<std::string>& labels,
                                const SimSpec& sim, const std::vector<std::uint64_t>& seeds);

}  // namespace mfnet
