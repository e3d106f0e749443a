#pragma once

#include "mfnet/random.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mfnet {

using NodeId = int;

/// Edge (listener, influencer): the influencer's state is visible to the listener.
struct Edge {
  NodeId listener = 0;
  NodeId influencer = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

class InvalidSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Directed influence network. Immutable once built; adjacency is cached.
class DirectedGraph {
 public:
  DirectedGraph() = default;
  /// Validates the edge list: indices in range, no self-loops, no duplicates.
  DirectedGraph(int node_count, std::vector<Edge> edges);

  int node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  int in_degree(NodeId i) const { return static_cast<int>(influencers_[i].size()); }
  int out_degree(NodeId j) const { return out_degree_[j]; }
  /// Influencers of node i (the nodes i listens to), in edge-list order.
  const std::vector<NodeId>& influencers(NodeId i) const { return influencers_[i]; }

  bool operator==(const DirectedGraph& o) const {
    return node_count_ == o.node_count_ && edges_ == o.edges_;
  }

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> influencers_;
  std::vector<int> out_degree_;
};

enum class GraphModel { powerlaw, ba, er, chain, tree };

std::string_view to_string(GraphModel m);
GraphModel parse_graph_model(std::string_view s);

struct GraphGenSpec {
  GraphModel model = GraphModel::powerlaw;
  int node_count = 100;
  double gamma = 2.7;
  int edge_clip = 50;
  double er_p = 0.05;
  int tree_branching = 2;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const GraphGenSpec&) const = default;
};

DirectedGraph generate(const GraphGenSpec& spec);

/// Empirical joint law Q(l, m) of (in-degree, out-degree).
class JointDegreeDistribution {
 public:
  using Key = std::pair<int, int>;

  JointDegreeDistribution() = default;
  /// Masses must be nonnegative and sum to 1 within 1e-12 (renormalized exactly).
  explicit JointDegreeDistribution(std::map<Key, double> entries);

  const std::map<Key, double>& entries() const { return entries_; }
  double mass(int l, int m) const;
  int l_max() const { return l_max_; }
  int m_max() const { return m_max_; }

  /// Distinct in-degrees with positive marginal mass, ascending.
  std::vector<int> in_degree_support() const;
  double in_degree_marginal(int l) const;
  double out_degree_marginal(int m) const;
  /// Q(l | m); zero when the out-degree marginal is zero.
  double conditional(int l, int m) const;

  /// Sum over (l, m) of m Q(l, m); equals |E| / N for an empirical graph.
  double total_edge_weight() const;
  /// Sum over m of m Q(l, m) for each support in-degree (same order as support).
  std::vector<double> edge_weights() const;
  double mean_in_degree() const;
  double mean_out_degree() const;

 private:
  std::map<Key, double> entries_;
  int l_max_ = 0;
  int m_max_ = 0;
};

JointDegreeDistribution degree_distribution(const DirectedGraph& g);

/// Uniform draw from the edge list.
Edge sample_edge(const DirectedGraph& g, Rng& rng);

}  // namespace mfnet
