#include "mfnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mfnet {

DirectedGraph::DirectedGraph(int node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  if (node_count_ < 1) throw InvalidSpec("graph: node_count must be positive");
  influencers_.assign(node_count_, {});
  out_degree_.assign(node_count_, 0);
  std::set<Edge> seen;
  for (const Edge& e : edges_) {
    if (e.listener < 0 || e.listener >= node_count_ || e.influencer < 0 ||
        e.influencer >= node_count_)
      throw InvalidSpec("graph: node index out of range");
    if (e.listener == e.influencer) throw InvalidSpec("graph: self-loop");
    if (!seen.insert(e).second) throw InvalidSpec("graph: duplicate edge");
    influencers_[e.listener].push_back(e.influencer);
    ++out_degree_[e.influencer];
  }
}

std::string_view to_string(GraphModel m) {
  switch (m) {
    case GraphModel::powerlaw: return "powerlaw";
    case GraphModel::ba: return "ba";
    case GraphModel::er: return "er";
    case GraphModel::chain: return "chain";
    case GraphModel::tree: return "tree";
  }
  return "?";
}

GraphModel parse_graph_model(std::string_view s) {
  for (GraphModel m : {GraphModel::powerlaw, GraphModel::ba, GraphModel::er,
                       GraphModel::chain, GraphModel::tree})
    if (to_string(m) == s) return m;
  throw InvalidSpec("unknown graph model '" + std::string(s) + "'");
}

void GraphGenSpec::validate() const {
  if (node_count < 1) throw InvalidSpec("graph spec: node_count must be >= 1");
  if (!(gamma > 1.0)) throw InvalidSpec("graph spec: gamma must be > 1");
  if (edge_clip < 1) throw InvalidSpec("graph spec: edge_clip must be >= 1");
  if (!(er_p >= 0.0 && er_p <= 1.0)) throw InvalidSpec("graph spec: er_p must lie in [0, 1]");
  if (tree_branching < 1) throw InvalidSpec("graph spec: tree_branching must be >= 1");
}

namespace {

// Out-degrees drawn from P(k) ∝ k^-gamma on {1..clip}; each node then picks k
// distinct listeners uniformly, resampling on collision.
std::vector<Edge> powerlaw_edges(const GraphGenSpec& spec, Rng& rng) {
  const int n = spec.node_count;
  const int clip = std::min(spec.edge_clip, n - 1);
  std::vector<Edge> edges;
  if (clip < 1) return edges;

  std::vector<double> cdf(clip);
  double acc = 0.0;
  for (int k = 1; k <= clip; ++k) {
    acc += std::pow(static_cast<double>(k), -spec.gamma);
    cdf[k - 1] = acc;
  }
  for (double& c : cdf) c /= acc;

  std::vector<NodeId> picked;
  for (NodeId src = 0; src < n; ++src) {
    const double x = rng.uniform();
    const int k = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin()) + 1;
    const int degree = std::min(k, clip);
    picked.clear();
    while (static_cast<int>(picked.size()) < degree) {
      // Draw from the n-1 nodes other than src.
      auto v = static_cast<NodeId>(rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
      if (v >= src) ++v;
      if (std::find(picked.begin(), picked.end(), v) != picked.end()) continue;
      picked.push_back(v);
    }
    for (NodeId v : picked) edges.push_back({v, src});
  }
  return edges;
}

// m = 1 preferential attachment. The seed pair is one edge; each new node
// listens to an existing node chosen with probability ∝ its total degree.
std::vector<Edge> ba_edges(const GraphGenSpec& spec, Rng& rng) {
  const int n = spec.node_count;
  std::vector<Edge> edges;
  if (n < 2) return edges;
  edges.push_back({1, 0});
  std::vector<NodeId> endpoints{0, 1};
  endpoints.reserve(2 * static_cast<std::size_t>(n));
  for (NodeId v = 2; v < n; ++v) {
    const NodeId target = endpoints[rng.uniform_index(endpoints.size())];
    edges.push_back({v, target});
    endpoints.push_back(v);
    endpoints.push_back(target);
  }
  return edges;
}

std::vector<Edge> er_edges(const GraphGenSpec& spec, Rng& rng) {
  const int n = spec.node_count;
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rng.uniform() < spec.er_p) edges.push_back({i, j});
    }
  return edges;
}

}  // namespace

DirectedGraph generate(const GraphGenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int n = spec.node_count;
  std::vector<Edge> edges;
  switch (spec.model) {
    case GraphModel::powerlaw: edges = powerlaw_edges(spec, rng); break;
    case GraphModel::ba: edges = ba_edges(spec, rng); break;
    case GraphModel::er: edges = er_edges(spec, rng); break;
    case GraphModel::chain:
      for (NodeId i = 1; i < n; ++i) edges.push_back({i, i - 1});
      break;
    case GraphModel::tree:
      for (NodeId i = 1; i < n; ++i) edges.push_back({i, (i - 1) / spec.tree_branching});
      break;
  }
  return DirectedGraph(n, std::move(edges));
}

JointDegreeDistribution::JointDegreeDistribution(std::map<Key, double> entries) {
  double total = 0.0;
  for (const auto& [key, mass] : entries) {
    if (key.first < 0 || key.second < 0)
      throw InvalidSpec("degree distribution: negative degree");
    if (!(mass >= 0.0) || !std::isfinite(mass))
      throw InvalidSpec("degree distribution: masses must be nonnegative");
    total += mass;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidSpec("degree distribution: masses must sum to 1");
  for (const auto& [key, mass] : entries) {
    if (mass == 0.0) continue;
    entries_.emplace(key, mass);
    l_max_ = std::max(l_max_, key.first);
    m_max_ = std::max(m_max_, key.second);
  }
}

double JointDegreeDistribution::mass(int l, int m) const {
  auto it = entries_.find({l, m});
  return it == entries_.end() ? 0.0 : it->second;
}

std::vector<int> JointDegreeDistribution::in_degree_support() const {
  std::vector<int> out;
  for (const auto& [key, mass] : entries_)
    if (out.empty() || out.back() != key.first) out.push_back(key.first);
  return out;
}

double JointDegreeDistribution::in_degree_marginal(int l) const {
  double s = 0.0;
  for (const auto& [key, mass] : entries_)
    if (key.first == l) s += mass;
  return s;
}

double JointDegreeDistribution::out_degree_marginal(int m) const {
  double s = 0.0;
  for (const auto& [key, mass] : entries_)
    if (key.second == m) s += mass;
  return s;
}

double JointDegreeDistribution::conditional(int l, int m) const {
  const double pm = out_degree_marginal(m);
  return pm > 0.0 ? mass(l, m) / pm : 0.0;
}

double JointDegreeDistribution::total_edge_weight() const {
  double s = 0.0;
  for (const auto& [key, mass] : entries_) s += key.second * mass;
  return s;
}

std::vector<double> JointDegreeDistribution::edge_weights() const {
  std::vector<double> w;
  int current = -1;
  for (const auto& [key, mass] : entries_) {
    if (key.first != current) {
      w.push_back(0.0);
      current = key.first;
    }
    w.back() += key.second * mass;
  }
  return w;
}

double JointDegreeDistribution::mean_in_degree() const {
  double s = 0.0;
  for (const auto& [key, mass] : entries_) s += key.first * mass;
  return s;
}

double JointDegreeDistribution::mean_out_degree() const { return total_edge_weight(); }

JointDegreeDistribution degree_distribution(const DirectedGraph& g) {
  std::map<std::pair<int, int>, long long> counts;
  for (NodeId v = 0; v < g.node_count(); ++v) ++counts[{g.in_degree(v), g.out_degree(v)}];
  std::map<JointDegreeDistribution::Key, double> entries;
  const double n = g.node_count();
  for (const auto& [key, c] : counts) entries[key] = static_cast<double>(c) / n;
  return JointDegreeDistribution(std::move(entries));
}

Edge sample_edge(const DirectedGraph& g, Rng& rng) {
  if (g.edge_count() == 0) throw std::logic_error("sample_edge: graph has no edges");
  return g.edges()[rng.uniform_index(g.edge_count())];
}

}  // namespace mfnet
