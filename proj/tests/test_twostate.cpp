#include "mfnet/math.hpp"
#include "mfnet/twostate.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace mfnet;
using namespace mfnet::twostate;

namespace {

// Mixed in-degrees 1 and 2, no l = 0 mass.
JointDegreeDistribution tiny_q() {
  return JointDegreeDistribution({{{1, 1}, 0.3}, {{2, 1}, 0.2}, {{1, 2}, 0.25}, {{2, 0}, 0.25}});
}

JointDegreeDistribution powerlaw_q(std::uint64_t seed, int n = 500) {
  GraphGenSpec s;
  s.node_count = n;
  s.seed = seed;
  return degree_distribution(generate(s));
}

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct re-summation of Phi from the binomial definition.
double phi_direct(const JointDegreeDistribution& q, const TwoStateLogits& lg, double u, double theta) {
  double num = 0.0, den = 0.0;
  for (const auto& [key, mass] : q.entries()) {
    const auto [l, m] = key;
    double a = 0.0, b = 0.0;
    for (int k = 0; k <= l; ++k) {
      const double w = std::tgamma(l + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(l - k + 1.0)) *
                       std::pow(theta, k) * std::pow(1 - theta, l - k);
      const double share = l == 0 ? 0.0 : double(k) / l;
      a += w * sigma(lg.h(u, share));
      b += w * sigma(-lg.t(u, share));
    }
    num += m * mass * a / (a + b);
    den += m * mass;
  }
  return num / den;
}

TwoStateLogits random_logits(Rng& rng, bool a1) {
  std::array<double, 6> c{};
  for (double& x : c) x = testing::uniform(rng, -3.0, 3.0);
  if (a1) c[2] = std::abs(c[2]), c[5] = std::abs(c[5]);
  return TwoStateLogits::from_array(c);
}

}  // namespace

TEST_CASE("kernel rates") {
  const auto zero = TwoStateLogits::from_array({0, 0, 0, 0, 0, 0});
  CHECK(kernel_rates(zero, 0.3, 4, 1).first == 0.5);
  const auto lg = TwoStateLogits::from_array({-1, 0, 2, 40, 0, 0});
  CHECK(kernel_rates(lg, 0.0, 2, 2).first == doctest::Approx(0.7310585786300049));
  CHECK(kernel_rates(lg, 0.0, 2, 2).second < 1e-17);
  CHECK(kernel_rates(lg, 0.0, 0, 0).first == doctest::Approx(sigma(-1.0)));
  CHECK_THROWS_AS(kernel_rates(lg, 0.0, 2, 3), std::invalid_argument);

  // The K = 2 choice model reproduces the same rates.
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const TwoStateLogits r = random_logits(rng, false);
    const ChoiceModel m = to_choice_model(r);
    const double u = rng.uniform();
    const std::vector<int> n{2, 3};
    const std::vector<double> w;
    const auto [ht, th] = kernel_rates(r, u, 5, 2);
    CHECK(m.choice_probs(u, n, w, 1)(0) == doctest::Approx(ht).epsilon(1e-12));
    CHECK(m.choice_probs(u, n, w, 0)(1) == doctest::Approx(th).epsilon(1e-12));
  }
}

TEST_CASE("binomial averages") {
  const auto lg = TwoStateLogits::from_array({-1, 0.5, 2, 0.3, 0, 1});
  CHECK(a_b(lg, 0.4, 0, 0.7).first == doctest::Approx(sigma(-1 + 0.2)));
  const auto sym = TwoStateLogits::from_array({-1, 0, 2, -1, 0, 2});
  CHECK(a_b(sym, 0.0, 1, 0.5).first == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS(a_b(lg, 0.0, 3, 1.2));

  Rng rng(5);
  const int draws = 1000000;
  double a = 0.0, b = 0.0;
  for (int d = 0; d < draws; ++d) {
    int k = 0;
    for (int i = 0; i < 30; ++i) k += rng.uniform() < 0.3;
    const auto [ht, th] = kernel_rates(lg, 0.2, 30, k);
    a += ht;
    b += th;
  }
  const auto [ea, eb] = a_b(lg, 0.2, 30, 0.3);
  CHECK(std::abs(ea - a / draws) <= 0.003);
  CHECK(std::abs(eb - b / draws) <= 0.003);
}

TEST_CASE("Phi map") {
  SUBCASE("symmetric logits without isolated listeners") {
    const auto sym = TwoStateLogits::from_array({-1, 0, 2, -1, 0, 2});
    CHECK(phi({tiny_q(), sym, 0.0, {}}, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    // l = 0 sees q = 0, which breaks the symmetry.
    const JointDegreeDistribution isolated({{{0, 1}, 0.5}, {{1, 0}, 0.5}});
    CHECK(phi({isolated, sym, 0.0, {}}, 0.5) == doctest::Approx(sigma(-1.0)));
  }
  SUBCASE("constant logits") {
    const auto lg = TwoStateLogits::from_array({0.8, 0, 0, 0.8, 0, 0});
    const PhiContext ctx{powerlaw_q(1), lg, 0.0, {}};
    for (double t : {0.0, 0.3, 1.0}) CHECK(phi(ctx, t) == doctest::Approx(sigma(0.8)).epsilon(1e-14));
  }
  SUBCASE("direct re-summation") {
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
      const TwoStateLogits lg = random_logits(rng, false);
      const double u = rng.uniform();
      const PhiContext ctx{tiny_q(), lg, u, {}};
      for (double t = 0.0; t <= 1.0; t += 0.125)
        CHECK(std::abs(phi(ctx, t) - phi_direct(tiny_q(), lg, u, t)) <= 1e-12);
    }
  }
  SUBCASE("pinned classes") {
    const auto lg = TwoStateLogits::from_array({-1, 0, 2, 0.5, 0, 1});
    const JointDegreeDistribution q({{{0, 2}, 0.5}, {{2, 1}, 0.5}});
    const PhiContext ctx{q, lg, 0.0, {{0, 0.35}}};
    const auto [a, b] = a_b(lg, 0.0, 2, 0.6);
    CHECK(phi(ctx, 0.6) == doctest::Approx((2 * 0.35 + a / (a + b)) / 3.0));
  }
  SUBCASE("degenerate switching") {
    const auto lg = TwoStateLogits::from_array({-50, 0, 0, 50, 0, 0});
    CHECK_THROWS_AS(phi({tiny_q(), lg, 0.0, {}}, 0.5), DegenerateSwitching);
  }
  SUBCASE("monotone under nonnegative social slopes") {
    Rng rng(11);
    const auto q = powerlaw_q(2, 300);
    for (int i = 0; i < 50; ++i) {
      const PhiMap map({q, random_logits(rng, true), rng.uniform(), {}});
      double prev = map(0.0);
      for (int k = 1; k <= 100; ++k) {
        const double v = map(k / 100.0);
        CHECK(v >= prev);
        prev = v;
      }
    }
  }
  SUBCASE("analytic derivatives") {
    Rng rng(13);
    for (int i = 0; i < 20; ++i) {
      const TwoStateLogits lg = random_logits(rng, false);
      const double u = rng.uniform();
      const PhiMap map({tiny_q(), lg, u, {}});
      const double t = testing::uniform(rng, 0.1, 0.9), h = 1e-5;
      CHECK(map.derivative(t) == doctest::Approx((map(t + h) - map(t - h)) / (2 * h)).epsilon(1e-6));
      const PhiMap up({tiny_q(), lg, u + h, {}}), down({tiny_q(), lg, u - h, {}});
      CHECK(map.derivative_u(t) == doctest::Approx((up(t) - down(t)) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("fixed point") {
  SUBCASE("constant logits") {
    const auto lg = TwoStateLogits::from_array({-0.4, 0, 0, -0.4, 0, 0});
    const FixedPointReport r = solve_fixed_point({powerlaw_q(3), lg, 0.0, {}});
    CHECK(r.theta_star == doctest::Approx(sigma(-0.4)).epsilon(1e-14));
    CHECK(r.iterations <= 1);
  }
  SUBCASE("symmetric logits") {
    const auto sym = TwoStateLogits::from_array({-1, 0, 2, -1, 0, 2});
    CHECK(solve_fixed_point({tiny_q(), sym, 0.0, {}}).theta_star == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("steep logits") {
    const auto lg = TwoStateLogits::from_array({-6, 0, 12, -6, 0, 12});
    const JointDegreeDistribution q({{{10, 1}, 0.6}, {{4, 2}, 0.4}});
    const PhiContext ctx{q, lg, 0.0, {}};
    const FixedPointReport r = solve_fixed_point(ctx, 0.5);
    CHECK(r.residual < 1e-9);
    CHECK(std::abs(phi(ctx, r.theta_star) - r.theta_star) < 1e-9);
    // Independent scan: sign changes of Phi(theta) - theta on the 1e-3 grid.
    std::vector<double> roots;
    double prev = phi(ctx, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double t = i / 1000.0, v = phi(ctx, t) - t;
      if (v == 0.0 || (prev > 0 && v < 0) || (prev < 0 && v > 0)) roots.push_back(t);
      prev = v;
    }
    REQUIRE(roots.size() == r.bracketed_roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) CHECK(std::abs(roots[i] - r.bracketed_roots[i]) <= 1e-3);
    bool matched = false;
    for (double x : r.bracketed_roots) matched |= std::abs(x - r.theta_star) <= 1e-3;
    CHECK(matched);
    REQUIRE(r.bracketed_roots.size() == 3);
    CHECK_THROWS_AS(comparative_statics(ctx, r.bracketed_roots[1]), UnstableFixedPoint);
  }
  SUBCASE("unique under contraction") {
    Rng rng(17);
    const auto q = powerlaw_q(4, 300);
    int tested = 0;
    while (tested < 20) {
      const PhiContext ctx{q, random_logits(rng, false), rng.uniform(), {}};
      if (!contraction_check(ctx).is_contraction) continue;
      ++tested;
      const double ref = solve_fixed_point(ctx, 0.0).theta_star;
      for (double s : {0.25, 0.5, 0.75, 1.0}) CHECK(std::abs(solve_fixed_point(ctx, s).theta_star - ref) <= 1e-8);
    }
  }
}

TEST_CASE("contraction bound") {
  const auto q = powerlaw_q(5, 300);
  SUBCASE("constant logits") {
    const ContractionReport r = contraction_check({q, TwoStateLogits::from_array({1, 0, 0, -2, 0, 0}), 0.0, {}});
    CHECK(r.s_h == 0.0);
    CHECK(r.bound == 0.0);
    CHECK(r.is_contraction);
  }
  SUBCASE("symmetric slopes") {
    const ContractionReport r = contraction_check({q, TwoStateLogits::from_array({-1, 0, 2, -1, 0, 2}), 0.0, {}});
    CHECK(r.s_h == 2.0);
    CHECK(r.s_t == 2.0);
    CHECK(r.eta >= 2.0 * sigma(-1.0));
    CHECK(r.bound <= 2.0 / (4.0 * 2.0 * sigma(-1.0)) + 1e-12);
    CHECK(r.is_contraction);
  }
  SUBCASE("bound dominates the measured slope") {
    Rng rng(19);
    for (int i = 0; i < 40; ++i) {
      const ContractionReport r = contraction_check({q, random_logits(rng, false), rng.uniform(), {}});
      CHECK(r.measured_sup_derivative <= r.bound + 1e-9);
    }
  }
}

TEST_CASE("comparative statics") {
  const auto q = powerlaw_q(6, 300);
  SUBCASE("no control dependence") {
    const PhiContext ctx{q, TwoStateLogits::from_array({-1, 0, 2, 0.5, 0, 1}), 0.0, {}};
    CHECK(comparative_statics(ctx, solve_fixed_point(ctx).theta_star).dtheta_du == 0.0);
  }
  SUBCASE("constant logits shifted by u") {
    const double c = -0.3, u = 0.7;
    const PhiContext ctx{q, TwoStateLogits::from_array({c, 1, 0, c, 1, 0}), u, {}};
    const double ts = solve_fixed_point(ctx).theta_star;
    CHECK(ts == doctest::Approx(sigma(c + u)).epsilon(1e-12));
    CHECK(std::abs(comparative_statics(ctx, ts).dtheta_du - logistic_prime(c + u)) <= 1e-8);
  }
  SUBCASE("finite differences") {
    Rng rng(23);
    int tested = 0;
    while (tested < 15) {
      PhiContext ctx{q, random_logits(rng, false), rng.uniform(), {}};
      if (!contraction_check(ctx).is_contraction) continue;
      ++tested;
      const double ts = solve_fixed_point(ctx).theta_star;
      const double d = comparative_statics(ctx, ts).dtheta_du;
      const double h = 1e-4;
      PhiContext up = ctx, down = ctx;
      up.u += h;
      down.u -= h;
      const double fd = (solve_fixed_point(up).theta_star - solve_fixed_point(down).theta_star) / (2 * h);
      CHECK(std::abs(d - fd) <= 1e-3 * std::max(std::abs(fd), 1e-6) + 1e-9);
      if (ctx.logits.h.cu >= 0 && ctx.logits.t.cu >= 0) CHECK(d >= -1e-12);
    }
  }
}

TEST_CASE("assumption checks") {
  const PhiContext base{tiny_q(), {}, 0.0, {}};
  SUBCASE("all zero") {
    const AssumptionReport r = check_assumptions(TwoStateLogits::from_array({0, 0, 0, 0, 0, 0}), base);
    CHECK(r.a1);
    CHECK(r.a2);
    CHECK(r.a3);
    CHECK(r.a4);
    CHECK(r.witnesses.empty());
  }
  SUBCASE("negative social slope") {
    const AssumptionReport r = check_assumptions(TwoStateLogits::from_array({0, 0, -1, 0, 0, 0}), base);
    CHECK_FALSE(r.a1);
    REQUIRE(r.witnesses.size() == 1);
    CHECK(r.witnesses[0].rfind("A1", 0) == 0);
  }
  SUBCASE("vanishing switching") {
    const AssumptionReport r = check_assumptions(TwoStateLogits::from_array({-50, 0, 0, 50, 0, 0}), base);
    CHECK_FALSE(r.a3);
    CHECK(r.a1);
  }
  SUBCASE("control slopes") {
    CHECK_FALSE(check_assumptions(TwoStateLogits::from_array({0, -0.5, 0, 0, 1, 0}), base).a4);
    CHECK(check_assumptions(TwoStateLogits::from_array({0, 0.5, 0, 0, 1, 0}), base).a4);
  }
}

TEST_CASE("logit array round trip") {
  const std::array<double, 6> c{1, 2, 3, 4, 5, 6};
  const TwoStateLogits lg = TwoStateLogits::from_array(c);
  CHECK(lg.h.c0 == 1);
  CHECK(lg.t.cq == 6);
  CHECK(lg.to_array() == c);
}
