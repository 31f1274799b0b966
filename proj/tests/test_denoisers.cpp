#include "replica/denoisers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace replica;

namespace {

// Independent oracle: brute-force grid argmin of the scalar MAP cost.
double grid_argmin(const Utility& u, double lambda_s, double y) {
  if (u.support == Utility::Support::Alphabet) {
    double best = u.points.front();
    double best_cost = (y - best) * (y - best) / (2.0 * lambda_s) + u(best);
    for (double c : u.points) {
      const double cost = (y - c) * (y - c) / (2.0 * lambda_s) + u(c);
      if (cost < best_cost - 1e-15) {
        best = c;
        best_cost = cost;
      }
    }
    return best;
  }
  const double step = 1e-4;
  double best = y - 5.0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (double v = y - 5.0; v <= y + 5.0; v += step) {
    const double vv = std::abs(v) < step / 2 ? 0.0 : v;  // hit the atom at exactly zero
    const double cost = (y - vv) * (y - vv) / (2.0 * lambda_s) + u(vv);
    if (cost < best_cost) {
      best_cost = cost;
      best = vv;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("closed-form scalar denoisers") {
  CHECK(denoise(DenoiserSpec(Utility::l1(), 0.5), 0.3) == 0.0);
  CHECK(denoise(DenoiserSpec(Utility::l1(), 0.5), 1.0) == Catch::Approx(0.5));
  CHECK(denoise(DenoiserSpec(Utility::l1(), 0.5), -1.0) == Catch::Approx(-0.5));
  CHECK(denoise(DenoiserSpec(Utility::l0(), 0.32), 1.0) == Catch::Approx(1.0));
  CHECK(denoise(DenoiserSpec(Utility::l0(), 0.32), 0.7) == 0.0);
  CHECK(denoise(DenoiserSpec(Utility::l0(), 0.32), 0.799) == 0.0);  // threshold sqrt(2*0.32) = 0.8
  CHECK(denoise(DenoiserSpec(Utility::l0(), 0.32), 0.801) == Catch::Approx(0.801));
  CHECK(denoise(DenoiserSpec(Utility::half_square(), 1.0), 2.0) == Catch::Approx(1.0));
}

TEST_CASE("denoise agrees with brute-force argmin") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ys(-4.0, 4.0);
  std::uniform_real_distribution<double> lss(0.05, 3.0);
  const std::vector<Utility> utilities = {
      Utility::half_square(), Utility::l1(), Utility::l0(),
      Utility::custom_utility([](double v) { return std::sqrt(std::abs(v)); }),
      Utility::l0().with_alphabet({-2.0, -1.0, 0.0, 1.0, 2.0}),
      Utility::l1().with_alphabet({-1.0, 0.0, 1.0})};
  for (const auto& u : utilities) {
    int violations = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const double y = ys(rng);
      const double ls = lss(rng);
      const double got = denoise(DenoiserSpec(u, ls), y);
      const double oracle = grid_argmin(u, ls, y);
      if (std::abs(got - oracle) <= 2e-4) continue;
      // Near a decision boundary the grid may pick the other basin; the
      // achieved costs must still agree.
      auto cost = [&](double v) { return (y - v) * (y - v) / (2.0 * ls) + u(v); };
      if (cost(got) > cost(oracle) + 1e-7) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("denoise symmetry and monotonicity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ys(0.0, 5.0);
  for (const auto& u : {Utility::half_square(), Utility::l1(), Utility::l0(),
                        Utility::l0().with_alphabet({-2.0, -1.0, 0.0, 1.0, 2.0})}) {
    for (int rep = 0; rep < 50; ++rep) {
      const double y = ys(rng);
      const DenoiserSpec spec(u, 0.4);
      CHECK(denoise(spec, -y) == Catch::Approx(-denoise(spec, y)).margin(1e-12));
    }
  }
  for (const auto& u : {Utility::half_square(), Utility::l1()}) {
    const DenoiserSpec spec(u, 0.7);
    double prev = denoise(spec, -5.0);
    for (double y = -5.0; y <= 5.0; y += 0.01) {
      const double g = denoise(spec, y);
      CHECK(g >= prev - 1e-12);
      prev = g;
    }
  }
}

TEST_CASE("boundary points match the closed forms") {
  // l0, a=1, kappa=1: +-(a/2 + lambda_s/a)
  const auto l0_spec = DenoiserSpec(Utility::l0().with_alphabet({-1.0, 0.0, 1.0}), 0.1);
  const auto v0 = boundary_points(l0_spec);
  REQUIRE(v0.size() == 2);
  CHECK(v0[0] == Catch::Approx(-0.6).margin(1e-14));
  CHECK(v0[1] == Catch::Approx(0.6).margin(1e-14));

  // l2 with lambda_s -> 0 degenerates to the midpoint quantizer.
  const auto l2_spec = DenoiserSpec(Utility::half_square().with_alphabet({-1.0, 0.0, 1.0}), 1e-300);
  const auto v2 = boundary_points(l2_spec);
  CHECK(v2[0] == Catch::Approx(-0.5).margin(1e-12));
  CHECK(v2[1] == Catch::Approx(0.5).margin(1e-12));

  // l1, kappa=2: +-((2k-1)/2 a + lambda_s)
  const auto l1_spec = DenoiserSpec(Utility::l1().with_alphabet({-2.0, -1.0, 0.0, 1.0, 2.0}), 0.2);
  const auto v1 = boundary_points(l1_spec);
  REQUIRE(v1.size() == 4);
  CHECK(v1[0] == Catch::Approx(-1.7).margin(1e-14));
  CHECK(v1[1] == Catch::Approx(-0.7).margin(1e-14));
  CHECK(v1[2] == Catch::Approx(0.7).margin(1e-14));
  CHECK(v1[3] == Catch::Approx(1.7).margin(1e-14));

  CHECK_THROWS_AS(boundary_points(DenoiserSpec(Utility::l1(), 0.5)), std::invalid_argument);
}

TEST_CASE("quantizer cells are half-open (v_k, v_k+1]") {
  const auto spec = DenoiserSpec(Utility::l1().with_alphabet({-1.0, 0.0, 1.0}), 0.2);
  const auto v = boundary_points(spec);  // {-0.7, 0.7}
  CHECK(denoise(spec, v[1] - 1e-9) == 0.0);  // boundary assigns left
  CHECK(denoise(spec, v[1] + 1e-9) == 1.0);
  CHECK(denoise(spec, v[0] - 1e-9) == -1.0);
  CHECK(denoise(spec, v[0] + 1e-9) == 0.0);
  // Constant on the open interval.
  for (double y = v[0] + 1e-6; y < v[1]; y += 0.05) CHECK(denoise(spec, y) == 0.0);
}

TEST_CASE("map_objective") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd y(2), v(2);
  y << 1.0, 0.0;
  v << 1.0, 0.0;
  CHECK(map_objective(Utility::l1(), 1.0, y, eye, v) == Catch::Approx(1.0).margin(1e-14));

  // Zero residual leaves only the penalty.
  Eigen::VectorXd x(2);
  x << 2.0, -1.0;
  CHECK(map_objective(Utility::l0(), 0.3, eye * x, eye, x) == Catch::Approx(2.0).margin(1e-14));
  // v = 0 leaves only the data term.
  CHECK(map_objective(Utility::l0(), 0.5, y, eye, Eigen::VectorXd::Zero(2)) ==
        Catch::Approx(1.0).margin(1e-14));

  CHECK_THROWS_AS(map_objective(Utility::l1(), 1.0, y, eye, Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}
