#include "mfnet/io.hpp"
#include "mfnet/math.hpp"
#include "mfnet/twostate.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace mfnet;
using io::json;

TEST_CASE("graph round trip") {
  GraphGenSpec s;
  s.node_count = 40;
  s.seed = 7;
  const DirectedGraph g = generate(s);
  const json j = io::graph_to_json(g);
  CHECK(j["node_count"] == 40);
  CHECK(io::graph_from_json(json::parse(j.dump())) == g);

  CHECK_THROWS_AS(io::graph_from_json(json::parse(R"({"node_count": 2, "edges": [[0, 1, 2]]})")), io::FormatError);
  CHECK_THROWS_AS(io::graph_from_json(json::parse(R"({"node_count": 2, "edges": [[0, 0]]})")), io::FormatError);
  CHECK_THROWS_AS(io::graph_from_json(json::parse(R"({"edges": []})")), io::FormatError);
  CHECK_THROWS_AS(io::graph_from_json(json::parse(R"({"node_count": "2", "edges": []})")), io::FormatError);
}

TEST_CASE("degree distribution round trip") {
  GraphGenSpec s;
  s.node_count = 200;
  s.seed = 1;
  const auto q = degree_distribution(generate(s));
  const auto back = io::degree_distribution_from_json(json::parse(io::degree_distribution_to_json(q).dump()));
  REQUIRE(back.entries().size() == q.entries().size());
  for (const auto& [k, mass] : q.entries()) CHECK(back.mass(k.first, k.second) == doctest::Approx(mass).epsilon(1e-15));
  CHECK_THROWS_AS(io::degree_distribution_from_json(json::parse(R"({"entries": [[1, 1, 0.5]]})")), io::FormatError);
}

TEST_CASE("model round trips") {
  const StateSpace space = StateSpace::three_state();
  SUBCASE("choice model") {
    Eigen::VectorXd c(6);
    c << 0.1, -2.5, 1.0 / 3.0, 4.0, 1e-300, -7.25;
    const ChoiceModel m(space, parse_features({"const", "frac:T@H", "u*frac:D"}, space), c);
    const json j = io::choice_model_to_json(m);
    CHECK(j["reference"] == "D");
    const ChoiceModel back = io::choice_model_from_json(json::parse(j.dump()));
    CHECK(back.space() == m.space());
    CHECK(back.features() == m.features());
    CHECK(back.coeffs() == m.coeffs());
  }
  SUBCASE("plugin") {
    PluginKernel k(space, 3);
    TransitionRecord r;
    r.l = 2;
    r.n = {1, 1, 0};
    r.prev = 1;
    r.next = 0;
    k.add(r);
    k.add(r);
    const PluginKernel back = io::plugin_from_json(json::parse(io::plugin_to_json(k).dump()));
    CHECK(back.counts() == k.counts());
    CHECK(back.row(0.0, r.n, 1).isApprox(k.row(0.0, r.n, 1)));
    const io::LoadedModel loaded = io::model_from_json(io::plugin_to_json(k));
    CHECK_FALSE(loaded.choice.has_value());
    CHECK(loaded.space == space);
  }
  SUBCASE("two-state logits") {
    const io::LoadedModel loaded = io::model_from_json(json::parse(R"({"logits": [-1, 0.5, 2, 0.3, 0, 1]})"));
    REQUIRE(loaded.choice.has_value());
    CHECK(loaded.space == StateSpace::two_state());
    const auto lg = twostate::TwoStateLogits::from_array({-1, 0.5, 2, 0.3, 0, 1});
    const std::vector<int> n{1, 2};
    CHECK(loaded.kernel->row(0.4, n, 1)(0) == doctest::Approx(twostate::kernel_rates(lg, 0.4, 3, 1).first));
    CHECK_THROWS_AS(io::model_from_json(json::parse(R"({"logits": [1, 2]})")), io::FormatError);
  }
  SUBCASE("context vector") {
    const json j = json::parse(R"({"labels": ["T", "H"], "reference": "H", "features": ["w:0"],
                                  "coeffs": [2.0], "w": [0.5]})");
    const io::LoadedModel loaded = io::model_from_json(j);
    const std::vector<int> n{0, 1};
    CHECK(loaded.kernel->row(0.0, n, 0)(0) == doctest::Approx(logistic(1.0)));
  }
}

TEST_CASE("transition log") {
  const StateSpace space = StateSpace::three_state();
  Rng rng(5);
  std::vector<TransitionRecord> log;
  for (int i = 0; i < 30; ++i) {
    TransitionRecord r;
    r.step = i;
    r.node = static_cast<int>(rng.uniform_index(50));
    r.u = rng.uniform();
    r.l = static_cast<int>(rng.uniform_index(6));
    r.n.assign(3, 0);
    for (int k = 0; k < r.l; ++k) ++r.n[rng.uniform_index(3)];
    if (i % 3 == 0) r.w = {rng.uniform(), -rng.uniform()};
    r.prev = static_cast<int>(rng.uniform_index(3));
    r.next = static_cast<int>(rng.uniform_index(3));
    log.push_back(r);
  }
  std::stringstream ss;
  io::write_transition_log(ss, log, space);
  CHECK(io::read_transition_log(ss, space) == log);

  const json line = io::record_to_json(log[0], space);
  CHECK(line["n"].is_object());
  CHECK(line["prev"].is_string());

  std::stringstream bad(R"({"step": 0, "node": 0, "u": 0, "l": 2, "n": {"T": 1}, "prev": "T", "next": "H"})");
  CHECK_THROWS(io::read_transition_log(bad, space));
  std::stringstream unknown(R"({"step": 0, "node": 0, "u": 0, "l": 1, "n": {"X": 1}, "prev": "T", "next": "H"})");
  CHECK_THROWS(io::read_transition_log(unknown, space));
  std::stringstream blank("\n\n");
  CHECK(io::read_transition_log(blank, space).empty());
}

TEST_CASE("trajectory csv") {
  Trajectory t;
  t.labels = {"T", "H"};
  t.times = {0.0, 0.1, 1.0 / 3.0};
  t.values.resize(3, 2);
  t.values << 0.35, 0.65, 0.4, 0.6, 1.0 / 7.0, 6.0 / 7.0;
  t.degrees = {0, 3};
  t.per_degree.resize(3, 4);
  t.per_degree.setConstant(0.5);
  t.per_degree(2, 0) = 0.1;
  t.per_degree(2, 1) = 0.9;
  std::stringstream ss;
  io::write_trajectory_csv(ss, t);
  const std::string text = ss.str();
  CHECK(text.rfind("t,T,H,rho_l0_T,rho_l0_H,rho_l3_T,rho_l3_H\n", 0) == 0);
  const Trajectory back = io::read_trajectory_csv(ss);
  CHECK(back.labels == t.labels);
  CHECK(back.times == t.times);
  CHECK(back.values == t.values);
  CHECK(back.degrees == t.degrees);
  CHECK(back.per_degree == t.per_degree);

  std::stringstream bad("x,T\n0,1\n");
  CHECK_THROWS_AS(io::read_trajectory_csv(bad), io::FormatError);
  std::stringstream ragged("t,T,H\n0,1\n");
  CHECK_THROWS_AS(io::read_trajectory_csv(ragged), io::FormatError);
}

TEST_CASE("number formatting round trips") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = testing::normal(rng) * std::pow(10.0, static_cast<int>(rng.uniform_index(20)) - 10);
    CHECK(std::stod(io::format_double(x)) == x);
  }
  CHECK(io::format_double(0.5) == "0.5");
}
