#include "mfnet/graph.hpp"

#include <doctest.h>

#include <cmath>
#include <array>
#include <queue>
#include <set>

using namespace mfnet;

namespace {

GraphGenSpec spec_of(GraphModel m, int n, std::uint64_t seed = 1) {
  GraphGenSpec s;
  s.model = m;
  s.node_count = n;
  s.seed = seed;
  return s;
}

// Discrete power-law log-likelihood on {1..clip}.
double powerlaw_loglik(const std::vector<int>& ks, double gamma, int clip) {
  double z = 0.0;
  for (int k = 1; k <= clip; ++k) z += std::pow(k, -gamma);
  double s = 0.0;
  for (int k : ks) s += -gamma * std::log(k);
  return s - static_cast<double>(ks.size()) * std::log(z);
}

}  // namespace

TEST_CASE("chain of four") {
  const DirectedGraph g = generate(spec_of(GraphModel::chain, 4));
  CHECK(g.edges() == std::vector<Edge>{{1, 0}, {2, 1}, {3, 2}});
  CHECK(g.in_degree(0) == 0);
  const auto q = degree_distribution(g);
  CHECK(q.mass(0, 1) == doctest::Approx(0.25));
  CHECK(q.mass(1, 1) == doctest::Approx(0.5));
  CHECK(q.mass(1, 0) == doctest::Approx(0.25));
}

TEST_CASE("ba with m = 1 is a tree") {
  const DirectedGraph g = generate(spec_of(GraphModel::ba, 50, 9));
  REQUIRE(g.edge_count() == 49);
  // Every node but the first listens to exactly one older node.
  for (int v = 1; v < 50; ++v) {
    CHECK(g.in_degree(v) == 1);
    CHECK(g.influencers(v)[0] < v);
  }
  std::vector<std::vector<int>> adj(50);
  for (const Edge& e : g.edges()) {
    adj[e.listener].push_back(e.influencer);
    adj[e.influencer].push_back(e.listener);
  }
  std::vector<bool> seen(50, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int reached = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[v])
      if (!seen[w]) seen[w] = true, ++reached, q.push(w);
  }
  CHECK(reached == 50);
}

TEST_CASE("powerlaw exponent recovered by discrete MLE") {
  GraphGenSpec s = spec_of(GraphModel::powerlaw, 100000, 3);
  const DirectedGraph g = generate(s);
  std::vector<int> ks;
  for (int v = 0; v < g.node_count(); ++v) {
    REQUIRE(g.out_degree(v) >= 1);
    REQUIRE(g.out_degree(v) <= 50);
    ks.push_back(g.out_degree(v));
  }
  double lo = 1.01, hi = 6.0;
  for (int i = 0; i < 200; ++i) {
    const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
    if (powerlaw_loglik(ks, a, 50) < powerlaw_loglik(ks, b, 50))
      lo = a;
    else
      hi = b;
  }
  const double gamma_hat = 0.5 * (lo + hi);
  CHECK(gamma_hat >= 2.5);
  CHECK(gamma_hat <= 2.9);
}

TEST_CASE("degree distribution identities") {
  SUBCASE("no edges") {
    const DirectedGraph g(5, {});
    const auto q = degree_distribution(g);
    CHECK(q.mass(0, 0) == 1.0);
    CHECK(q.total_edge_weight() == 0.0);
  }
  SUBCASE("er means") {
    GraphGenSpec s = spec_of(GraphModel::er, 200, 4);
    s.er_p = 0.05;
    const DirectedGraph g = generate(s);
    const auto q = degree_distribution(g);
    const double per_node = static_cast<double>(g.edge_count()) / 200.0;
    CHECK(q.mean_in_degree() == doctest::Approx(per_node).epsilon(1e-12));
    CHECK(q.mean_out_degree() == doctest::Approx(per_node).epsilon(1e-12));
    CHECK(q.total_edge_weight() == doctest::Approx(per_node).epsilon(1e-12));
  }
  SUBCASE("conditional sums to one") {
    const auto q = degree_distribution(generate(spec_of(GraphModel::powerlaw, 300, 5)));
    double total = 0.0;
    for (const auto& [k, mass] : q.entries()) total += mass;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    for (int m = 0; m <= q.m_max(); ++m) {
      if (q.out_degree_marginal(m) == 0.0) continue;
      double s = 0.0;
      for (int l = 0; l <= q.l_max(); ++l) s += q.conditional(l, m);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("generator invariants hold across random specs") {
  Rng rng(77);
  for (int i = 0; i < 60; ++i) {
    GraphGenSpec s;
    s.model = static_cast<GraphModel>(rng.uniform_index(5));
    s.node_count = 1 + static_cast<int>(rng.uniform_index(80));
    s.gamma = 1.2 + 3.0 * rng.uniform();
    s.edge_clip = 1 + static_cast<int>(rng.uniform_index(60));
    s.er_p = rng.uniform();
    s.tree_branching = 1 + static_cast<int>(rng.uniform_index(4));
    s.seed = rng.next_u64();
    const DirectedGraph g = generate(s);
    std::set<Edge> seen;
    for (const Edge& e : g.edges()) {
      CHECK(e.listener != e.influencer);
      CHECK(e.listener >= 0);
      CHECK(e.influencer < g.node_count());
      CHECK(seen.insert(e).second);
    }
    CHECK(generate(s) == g);
    if (s.model == GraphModel::powerlaw)
      for (int v = 0; v < g.node_count(); ++v) CHECK(g.out_degree(v) <= s.edge_clip);
  }
}

TEST_CASE("tree structure") {
  GraphGenSpec s = spec_of(GraphModel::tree, 7);
  s.tree_branching = 2;
  const DirectedGraph g = generate(s);
  CHECK(g.edges() == std::vector<Edge>{{1, 0}, {2, 0}, {3, 1}, {4, 1}, {5, 2}, {6, 2}});
}

TEST_CASE("invalid specs") {
  GraphGenSpec s;
  s.node_count = 0;
  CHECK_THROWS_AS(generate(s), InvalidSpec);
  s.node_count = 10;
  s.gamma = 1.0;
  CHECK_THROWS_AS(generate(s), InvalidSpec);
  CHECK_THROWS_AS(DirectedGraph(3, {{0, 0}}), InvalidSpec);
  CHECK_THROWS_AS(DirectedGraph(3, {{0, 1}, {0, 1}}), InvalidSpec);
  CHECK_THROWS_AS(DirectedGraph(3, {{0, 3}}), InvalidSpec);
  CHECK_THROWS_AS(JointDegreeDistribution({{{0, 0}, 0.5}}), InvalidSpec);
}

TEST_CASE("edge sampling") {
  Rng rng(1);
  SUBCASE("single edge") {
    const DirectedGraph g(2, {{1, 0}});
    for (int i = 0; i < 100; ++i) CHECK(sample_edge(g, rng) == Edge{1, 0});
  }
  SUBCASE("uniform over the chain's edges") {
    const DirectedGraph g = generate(spec_of(GraphModel::chain, 4));
    std::array<int, 4> hits{};
    for (int i = 0; i < 30000; ++i) ++hits[sample_edge(g, rng).listener];
    for (int v = 1; v < 4; ++v) CHECK(std::abs(hits[v] / 30000.0 - 1.0 / 3.0) <= 0.01);
  }
  SUBCASE("deterministic") {
    const DirectedGraph g = generate(spec_of(GraphModel::er, 30, 2));
    Rng a(5), b(5);
    for (int i = 0; i < 50; ++i) CHECK(sample_edge(g, a) == sample_edge(g, b));
  }
  SUBCASE("empty") { CHECK_THROWS(sample_edge(DirectedGraph(3, {}), rng)); }
}
