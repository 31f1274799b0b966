#include "replica/solver.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace replica;

namespace {

ModelConfig linear_mp(double lambda = 0.1, double lambda0 = 0.01, double r = 2.0, double alpha = 0.1) {
  return ModelConfig(SpectralEnsemble::marcenko_pastur(r), SourcePrior::sparse_gaussian(alpha),
                     Utility::half_square(), lambda, lambda0);
}

// For the white spectrum the quadratic-utility fixed point is algebraic:
// chi = (lambda + r chi) / (1 + lambda + r chi), i.e. the positive root of
// r chi^2 + (1 + lambda - r) chi - lambda = 0, and q follows linearly.
struct LinearOracle {
  double chi, q;
};

LinearOracle linear_oracle(double lambda, double lambda0, double r, double alpha) {
  const double a = r, b = 1.0 + lambda - r, c = -lambda;
  const double chi = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
  const double ls = lambda + r * chi;
  const double q = (lambda0 + alpha * ls * ls) / ((1.0 + ls) * (1.0 + ls) - r);
  return {chi, q};
}

}  // namespace

TEST_CASE("symmetric fixed point of the quadratic problem") {
  const Quadratures quad = Quadratures::make(41, 48);
  const auto cfg = linear_mp();
  const auto oracle = linear_oracle(0.1, 0.01, 2.0, 0.1);
  SolverConfig scfg;
  const auto res = solve(cfg, 0, scfg, quad);
  REQUIRE_FALSE(res.solutions.empty());
  CHECK(res.diagnostics.size() == default_starts(cfg, 0).size());
  const auto& sol = select_ansatz(res.solutions);
  CHECK(sol.state.chi == Catch::Approx(oracle.chi).epsilon(1e-8));
  CHECK(sol.state.q == Catch::Approx(oracle.q).epsilon(1e-8));
  CHECK(sol.converged);
  CHECK(sol.stable);
  CHECK(sol.jacobian_radius < 1.0);

  // The reported point is an actual steady state of the transition map.
  const auto tr = transition(sol.state, cfg, quad);
  CHECK(tr.next.chi == Catch::Approx(sol.state.chi).margin(1e-8));
  CHECK(tr.next.q == Catch::Approx(sol.state.q).margin(1e-8));

  // All starts of the contraction land on the same point.
  CHECK(res.solutions.size() == 1);
}

TEST_CASE("solution entropy matches the spectral closed form") {
  const Quadratures quad = Quadratures::make(41, 48);
  const auto cfg = linear_mp();
  const auto res = solve(cfg, 0, SolverConfig{}, quad);
  const auto& sol = select_ansatz(res.solutions);
  const double chi = sol.state.chi;
  const double expect = chi / (2.0 * (0.1 + 2.0 * chi)) - std::log(1.0 + 2.0 * chi / 0.1) / 4.0;
  CHECK(sol.entropy == Catch::Approx(expect).epsilon(1e-10));
  CHECK(sol.entropy == Catch::Approx(-0.3891).margin(5e-4));
  CHECK(sol.entropy < 0.0);
}

TEST_CASE("fixed point is damping invariant") {
  const Quadratures quad = Quadratures::make(41, 48);
  const auto cfg = linear_mp(0.3, 0.05);
  SolverConfig a, b;
  a.damping = 0.3;
  b.damping = 0.9;
  a.starts = b.starts = {ReplicaState(0.1, 0.05)};
  const auto ra = solve(cfg, 0, a, quad);
  const auto rb = solve(cfg, 0, b, quad);
  REQUIRE_FALSE(ra.solutions.empty());
  REQUIRE_FALSE(rb.solutions.empty());
  CHECK(ra.solutions[0].state.chi == Catch::Approx(rb.solutions[0].state.chi).margin(1e-8));
  CHECK(ra.solutions[0].state.q == Catch::Approx(rb.solutions[0].state.q).margin(1e-8));
}

TEST_CASE("one-step breaking collapses on a convex problem") {
  const Quadratures quad = Quadratures::make(41, 48);
  const ModelConfig cfg(SpectralEnsemble::marcenko_pastur(2.0), SourcePrior::sparse_gaussian(0.1),
                        Utility::l1(), 0.2, 0.01);
  SolverConfig rs;
  rs.starts = {ReplicaState(0.1, 0.03)};
  const auto res0 = solve(cfg, 0, rs, quad);
  REQUIRE_FALSE(res0.solutions.empty());

  SolverConfig rsb;
  rsb.starts = {ReplicaState(0.1, 0.03, {0.01}, {1.0})};
  rsb.max_iter = 2000;
  const auto res1 = solve(cfg, 1, rsb, quad);
  REQUIRE_FALSE(res1.solutions.empty());
  const auto& s1 = res1.solutions[0];
  CHECK(s1.state.p[0] < 1e-7);
  CHECK(s1.state.chi == Catch::Approx(res0.solutions[0].state.chi).margin(1e-6));
  CHECK(s1.state.q == Catch::Approx(res0.solutions[0].state.q).margin(1e-6));
  CHECK(s1.free_energy == Catch::Approx(res0.solutions[0].free_energy).margin(1e-7));
}

TEST_CASE("ansatz selection") {
  FixedPointSolution a, b, c;
  a.free_energy = 1.0;
  a.state = ReplicaState(0.1, 0.5);
  b.free_energy = 0.2;
  b.state = ReplicaState(0.1, 0.9);
  c.free_energy = 0.2;
  c.state = ReplicaState(0.1, 0.4);
  CHECK(select_ansatz({a, b}).state.q == Catch::Approx(0.9));
  CHECK(select_ansatz({a, b, c}).state.q == Catch::Approx(0.4));  // tie -> smaller q
  CHECK(select_ansatz({b, c, a}).state.q == Catch::Approx(0.4));
  CHECK_THROWS_AS(select_ansatz({}), std::runtime_error);
  CHECK_THROWS_AS(solve(linear_mp(), 3, SolverConfig{}, Quadratures::make(11, 16)),
                  std::invalid_argument);
}
