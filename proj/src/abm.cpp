#include "mfnet/abm.hpp"

#include "mfnet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace mfnet {

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::random: return "random";
    case Placement::top_in_degree: return "top_in_degree";
    case Placement::top_out_degree: return "top_out_degree";
    case Placement::peripheral: return "peripheral";
    case Placement::chain_head: return "chain_head";
    case Placement::tree_root: return "tree_root";
    case Placement::explicit_nodes: return "explicit";
  }
  return "?";
}

Placement parse_placement(std::string_view s) {
  if (s == "influential") return Placement::top_out_degree;
  for (Placement p : {Placement::random, Placement::top_in_degree, Placement::top_out_degree,
                      Placement::peripheral, Placement::chain_head, Placement::tree_root,
                      Placement::explicit_nodes})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown placement '" + std::string(s) + "'");
}

void InitSpec::validate() const {
  if (distribution.empty()) throw std::invalid_argument("init: empty distribution");
  double total = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0)) throw std::invalid_argument("init: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("init: distribution must sum to 1");
}

std::vector<int> apportion(const std::vector<double>& distribution, int n) {
  const auto k = distribution.size();
  std::vector<int> counts(k);
  std::vector<double> remainder(k);
  int assigned = 0;
  for (std::size_t z = 0; z < k; ++z) {
    const double exact = distribution[z] * n;
    counts[z] = static_cast<int>(std::floor(exact + 1e-9));
    remainder[z] = exact - counts[z];
    assigned += counts[z];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % k]];
  // Only reachable through the tolerance on the distribution's sum.
  for (std::size_t i = k; assigned > n && i > 0; --i)
    while (assigned > n && counts[order[i - 1]] > 0) {
      --counts[order[i - 1]];
      --assigned;
    }
  return counts;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

// Breadth-first distance from in-degree-0 nodes along influence edges.
std::vector<NodeId> source_distance_order(const DirectedGraph& g) {
  const int n = g.node_count();
  std::vector<std::vector<NodeId>> listeners(n);
  for (const Edge& e : g.edges()) listeners[e.influencer].push_back(e.listener);
  std::vector<int> dist(n, -1);
  std::deque<NodeId> queue;
  for (NodeId v = 0; v < n; ++v)
    if (g.in_degree(v) == 0) {
      dist[v] = 0;
      queue.push_back(v);
    }
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId w : listeners[v])
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
  }
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](NodeId v) { return dist[v] < 0 ? n + 1 : dist[v]; };
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return key(a) < key(b); });
  return order;
}

}  // namespace

std::vector<NodeId> placement_order(const DirectedGraph& g, Placement p) {
  const int n = g.node_count();
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0);
  switch (p) {
    case Placement::top_in_degree:
      std::stable_sort(order.begin(), order.end(),
                       [&](NodeId a, NodeId b) { return g.in_degree(a) > g.in_degree(b); });
      break;
    case Placement::top_out_degree:
      std::stable_sort(order.begin(), order.end(),
                       [&](NodeId a, NodeId b) { return g.out_degree(a) > g.out_degree(b); });
      break;
    case Placement::peripheral:
      std::stable_sort(order.begin(), order.end(),
                       [&](NodeId a, NodeId b) { return g.out_degree(a) < g.out_degree(b); });
      break;
    case Placement::chain_head:
    case Placement::tree_root:
      order = source_distance_order(g);
      break;
    case Placement::random:
    case Placement::explicit_nodes:
      break;
  }
  return order;
}

std::vector<int> assign_by_quota(const DirectedGraph& g, const InitSpec& spec, Rng& rng) {
  spec.validate();
  const int n = g.node_count();
  const std::vector<int> counts = apportion(spec.distribution, n);

  if (spec.placement == Placement::random) {
    std::vector<int> labels;
    labels.reserve(n);
    for (std::size_t z = 0; z < counts.size(); ++z) labels.insert(labels.end(), counts[z], static_cast<int>(z));
    shuffle(labels, rng);
    return labels;
  }

  std::vector<NodeId> head;
  if (spec.placement == Placement::explicit_nodes) {
    if (static_cast<int>(spec.nodes.size()) != counts[0])
      throw std::invalid_argument("init: explicit node list length " +
                                  std::to_string(spec.nodes.size()) + " does not match quota " +
                                  std::to_string(counts[0]));
    head = spec.nodes;
  } else {
    const auto order = placement_order(g, spec.placement);
    head.assign(order.begin(), order.begin() + counts[0]);
  }

  std::vector<int> labels(n, -1);
  for (NodeId v : head) {
    if (v < 0 || v >= n || labels[v] >= 0)
      throw std::invalid_argument("init: explicit node list has an invalid or repeated node");
    labels[v] = 0;
  }
  std::vector<int> rest;
  for (std::size_t z = 1; z < counts.size(); ++z) rest.insert(rest.end(), counts[z], static_cast<int>(z));
  shuffle(rest, rng);
  std::size_t next = 0;
  for (NodeId v = 0; v < n; ++v)
    if (labels[v] < 0) labels[v] = rest[next++];
  return labels;
}

NetworkState init_states(const DirectedGraph& g, const InitSpec& init, Rng& rng) {
  return {assign_by_quota(g, init, rng), 0, 0};
}

void AgentModels::validate(const DirectedGraph& g) const {
  if (classes.empty()) throw std::invalid_argument("agent models: no kernel");
  for (const auto& k : classes)
    if (!k || k->num_states() != classes.front()->num_states())
      throw std::invalid_argument("agent models: kernels disagree on the state count");
  if (!node_class.empty()) {
    if (static_cast<int>(node_class.size()) != g.node_count())
      throw std::invalid_argument("agent models: class list size differs from node count");
    for (int c : node_class)
      if (c < 0 || c >= static_cast<int>(classes.size()))
        throw std::invalid_argument("agent models: invalid class index");
  }
}

std::vector<int> neighbor_composition(const DirectedGraph& g, const std::vector<int>& states,
                                      NodeId v, int num_states) {
  std::vector<int> counts(num_states, 0);
  for (NodeId j : g.influencers(v)) ++counts[states[j]];
  return counts;
}

namespace {

TransitionRecord activate(const DirectedGraph& g, const std::vector<int>& observed, NodeId v,
                          const AgentModels& models, double u, Rng& rng) {
  const TransitionKernel& kernel = models.of(v);
  TransitionRecord rec;
  rec.node = v;
  rec.u = u;
  rec.n = neighbor_composition(g, observed, v, kernel.num_states());
  rec.l = g.in_degree(v);
  rec.prev = observed[v];
  const Eigen::VectorXd p = kernel.row(u, rec.n, rec.prev);
  rec.next = static_cast<int>(rng.categorical({p.data(), static_cast<std::size_t>(p.size())}));
  return rec;
}

}  // namespace

TransitionRecord step_sequential(const DirectedGraph& g, NetworkState& state,
                                 const AgentModels& models, double u, Rng& rng) {
  const Edge e = sample_edge(g, rng);
  TransitionRecord rec = activate(g, state.states, e.listener, models, u, rng);
  rec.step = state.step;
  state.states[e.listener] = rec.next;
  ++state.step;
  return rec;
}

std::vector<TransitionRecord> step_parallel_round(const DirectedGraph& g, NetworkState& state,
                                                  const AgentModels& models, double u, Rng& rng) {
  const std::vector<int> previous = state.states;
  std::vector<TransitionRecord> records;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (g.in_degree(v) == 0) continue;
    TransitionRecord rec = activate(g, previous, v, models, u, rng);
    rec.step = state.round;
    state.states[v] = rec.next;
    records.push_back(std::move(rec));
  }
  ++state.round;
  return records;
}

Eigen::VectorXd overall_fractions(const NetworkState& state, int num_states) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(num_states);
  for (int s : state.states) rho(s) += 1.0;
  return rho / static_cast<double>(state.states.size());
}

PopulationVector population_state(const NetworkState& state, const DirectedGraph& g,
                                  int num_states) {
  PopulationVector pop;
  for (NodeId v = 0; v < g.node_count(); ++v) pop.degrees.push_back(g.in_degree(v));
  std::sort(pop.degrees.begin(), pop.degrees.end());
  pop.degrees.erase(std::unique(pop.degrees.begin(), pop.degrees.end()), pop.degrees.end());
  pop.shares = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pop.degrees.size()), num_states);
  for (NodeId v = 0; v < g.node_count(); ++v)
    pop.shares(pop.row_of(g.in_degree(v)), state.states[v]) += 1.0;
  for (Eigen::Index r = 0; r < pop.shares.rows(); ++r) pop.shares.row(r) /= pop.shares.row(r).sum();
  return pop;
}

JointPopulation joint_population_state(const NetworkState& state, const DirectedGraph& g,
                                       int num_states) {
  JointPopulation pop;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    auto [it, fresh] = pop.try_emplace({g.in_degree(v), g.out_degree(v)}, Eigen::VectorXd::Zero(num_states));
    it->second(state.states[v]) += 1.0;
  }
  for (auto& [key, shares] : pop) shares /= shares.sum();
  return pop;
}

std::string_view to_string(SimMode m) {
  return m == SimMode::sequential ? "sequential" : "parallel";
}

SimMode parse_sim_mode(std::string_view s) {
  if (s == "sequential") return SimMode::sequential;
  if (s == "parallel") return SimMode::parallel;
  throw std::invalid_argument("unknown simulation mode '" + std::string(s) + "'");
}

void SimSpec::validate() const {
  if (steps < 0 || rounds < 0) throw std::invalid_argument("sim: steps and rounds must be >= 0");
  if (record_every < 1) throw std::invalid_argument("sim: record_every must be >= 1");
}

namespace {

// Incrementally maintained node counts per (in-degree class, state).
class PopulationTracker {
 public:
  PopulationTracker(const DirectedGraph& g, const std::vector<int>& states, int k, bool per_degree)
      : g_(g), k_(k), per_degree_(per_degree), overall_(Eigen::VectorXd::Zero(k)) {
    for (int s : states) overall_(s) += 1.0;
    if (per_degree_) {
      NetworkState tmp{states, 0, 0};
      const PopulationVector pop = population_state(tmp, g, k);
      degrees_ = pop.degrees;
      class_size_.assign(degrees_.size(), 0.0);
      node_row_.resize(g.node_count());
      counts_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(degrees_.size()), k);
      for (NodeId v = 0; v < g.node_count(); ++v) {
        node_row_[v] = pop.row_of(g.in_degree(v));
        counts_(node_row_[v], states[v]) += 1.0;
        class_size_[node_row_[v]] += 1.0;
      }
    }
  }

  void move(NodeId v, int from, int to) {
    if (from == to) return;
    overall_(from) -= 1.0;
    overall_(to) += 1.0;
    if (per_degree_) {
      counts_(node_row_[v], from) -= 1.0;
      counts_(node_row_[v], to) += 1.0;
    }
  }

  void record(Trajectory& traj, double t, std::vector<Eigen::RowVectorXd>& rows,
              std::vector<Eigen::RowVectorXd>& degree_rows) const {
    traj.times.push_back(t);
    rows.push_back((overall_ / static_cast<double>(g_.node_count())).transpose());
    if (per_degree_) {
      Eigen::RowVectorXd r(counts_.size());
      for (Eigen::Index d = 0; d < counts_.rows(); ++d)
        r.segment(d * k_, k_) = counts_.row(d) / class_size_[d];
      degree_rows.push_back(std::move(r));
    }
  }

  const std::vector<int>& degrees() const { return degrees_; }

 private:
  const DirectedGraph& g_;
  int k_;
  bool per_degree_;
  Eigen::VectorXd overall_;
  std::vector<int> degrees_;
  std::vector<double> class_size_;
  std::vector<int> node_row_;
  Eigen::MatrixXd counts_;
};

Eigen::MatrixXd stack(const std::vector<Eigen::RowVectorXd>& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
  return m;
}

}  // namespace

RunResult run(const DirectedGraph& g, const InitSpec& init, const AgentModels& models,
              const std::vector<std::string>& labels, const SimSpec& sim) {
  sim.validate();
  models.validate(g);
  const int k = models.num_states();
  if (static_cast<int>(labels.size()) != k)
    throw std::invalid_argument("run: label count differs from the kernel state count");
  if (static_cast<int>(init.distribution.size()) != k)
    throw std::invalid_argument("run: init distribution size differs from the state count");

  Rng rng(sim.seed);
  RunResult result;
  result.final_state = init_states(g, init, rng);
  NetworkState& state = result.final_state;

  Trajectory& traj = result.trajectory;
  traj.labels = labels;
  std::vector<Eigen::RowVectorXd> rows, degree_rows;
  PopulationTracker tracker(g, state.states, k, sim.per_degree);
  traj.degrees = tracker.degrees();
  tracker.record(traj, 0.0, rows, degree_rows);

  if (sim.mode == SimMode::sequential) {
    if (sim.steps > 0 && g.edge_count() == 0)
      throw std::invalid_argument("run: sequential mode needs at least one edge");
    const double edges = static_cast<double>(g.edge_count());
    for (long long s = 1; s <= sim.steps; ++s) {
      TransitionRecord rec = step_sequential(g, state, models, sim.u, rng);
      tracker.move(rec.node, rec.prev, rec.next);
      if (sim.log_transitions) result.log.push_back(std::move(rec));
      if (s % sim.record_every == 0 || s == sim.steps)
        tracker.record(traj, static_cast<double>(s) / edges, rows, degree_rows);
    }
  } else {
    for (int r = 1; r <= sim.rounds; ++r) {
      auto records = step_parallel_round(g, state, models, sim.u, rng);
      for (const auto& rec : records) tracker.move(rec.node, rec.prev, rec.next);
      if (sim.log_transitions)
        result.log.insert(result.log.end(), std::make_move_iterator(records.begin()),
                          std::make_move_iterator(records.end()));
      tracker.record(traj, static_cast<double>(r), rows, degree_rows);
    }
  }
  traj.values = stack(rows, k);
  if (sim.per_degree)
    traj.per_degree = stack(degree_rows, static_cast<Eigen::Index>(traj.degrees.size()) * k);
  return result;
}

std::vector<RunResult> run_many(const DirectedGraph& g, const InitSpec& init,
                                const AgentModels& models, const std::vector<std::string>& labels,
                                const SimSpec& sim, const std::vector<std::uint64_t>& seeds) {
  std::vector<RunResult> results(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    SimSpec s = sim;
    s.seed = seeds[i];
    results[i] = run(g, init, models, labels, s);
  });
  return results;
}

}  // namespace mfnet
