#include "replica/observables.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace replica;

namespace {

ModelConfig mp_config(Utility u, SourcePrior prior, double lambda = 0.1, double lambda0 = 0.01) {
  return ModelConfig(SpectralEnsemble::marcenko_pastur(2.0), std::move(prior), std::move(u), lambda,
                     lambda0);
}

FixedPointSolution at_state(const ReplicaState& s, const ModelConfig& cfg) {
  FixedPointSolution sol;
  sol.state = s;
  sol.channel = effective_channel(s, cfg);
  sol.converged = true;
  return sol;
}

}  // namespace

TEST_CASE("joint moments of the source marginal") {
  const Quadratures quad = Quadratures::make(41, 48);
  // The tilts are normalized conditionally on x, so pure-x moments equal the
  // prior moments at any state.
  const auto cfg = mp_config(Utility::l1(), SourcePrior::sparse_gaussian(0.1));
  for (const ReplicaState& s :
       {ReplicaState(0.5, 0.3), ReplicaState(0.4, 0.3, {0.2}, {1.3}),
        ReplicaState(0.4, 0.3, {0.15, 0.1}, {0.8, 2.0})}) {
    const auto sol = at_state(s, cfg);
    CHECK(predict(sol, cfg, Distortion::joint_moment(0, 2), quad) == Catch::Approx(0.1).epsilon(1e-9));
    CHECK(predict(sol, cfg, Distortion::joint_moment(0, 1), quad) == Catch::Approx(0.0).margin(1e-10));
    CHECK(predict(sol, cfg, Distortion::joint_moment(0, 0), quad) == Catch::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("quadratic-utility moments in closed form") {
  const Quadratures quad = Quadratures::make(41, 48);
  // g = (x + sqrt(lambda0_s) z) / (1 + lambda_s): every low-order joint
  // moment is an explicit polynomial in the channel parameters.
  const auto cfg = mp_config(Utility::half_square(), SourcePrior::sparse_gaussian(0.1));
  const ReplicaState s(0.5, 0.3);
  const auto sol = at_state(s, cfg);
  const double ls = sol.channel.lambda_s;    // 1.1
  const double l0s = sol.channel.lambda0_s;  // 0.61
  const double ex2 = 0.1;
  const double mse_expect = (l0s + ls * ls * ex2) / ((1.0 + ls) * (1.0 + ls));
  CHECK(predict(sol, cfg, Distortion::squared_error(), quad) == Catch::Approx(mse_expect).epsilon(1e-10));
  CHECK(normalized_mse(sol, cfg, quad) == Catch::Approx(mse_expect / ex2).epsilon(1e-10));
  CHECK(predict(sol, cfg, Distortion::joint_moment(1, 1), quad) ==
        Catch::Approx(ex2 / (1.0 + ls)).epsilon(1e-10));
  CHECK(predict(sol, cfg, Distortion::joint_moment(2, 0), quad) ==
        Catch::Approx((ex2 + l0s) / ((1.0 + ls) * (1.0 + ls))).epsilon(1e-10));
  // Squared error decomposes bilinearly into the moments above.
  const double m20 = predict(sol, cfg, Distortion::joint_moment(2, 0), quad);
  const double m11 = predict(sol, cfg, Distortion::joint_moment(1, 1), quad);
  const double m02 = predict(sol, cfg, Distortion::joint_moment(0, 2), quad);
  CHECK(predict(sol, cfg, Distortion::squared_error(), quad) ==
        Catch::Approx(m20 - 2.0 * m11 + m02).margin(1e-12));
}

TEST_CASE("custom distortion and symbol error agree on alphabets") {
  const Quadratures quad = Quadratures::make(41, 48);
  const auto prior = SourcePrior::sparse_finite_alphabet(0.1, 1.0, 1);
  const auto cfg = mp_config(Utility::l0().with_alphabet({-1.0, 0.0, 1.0}), prior);
  const auto sol = at_state(ReplicaState(0.2, 0.05), cfg);
  const double ser = predict(sol, cfg, Distortion::symbol_error(), quad);
  const double ser2 = predict(sol, cfg, Distortion::custom_distortion([](double xh, double x) {
                                return xh != x ? 1.0 : 0.0;
                              }),
                              quad);
  CHECK(ser == Catch::Approx(ser2).margin(1e-14));
  CHECK(ser > 0.0);
  CHECK(ser < 1.0);
}

TEST_CASE("conditional pmf of the symmetric-channel quantizer") {
  const Quadratures quad = Quadratures::make(41, 48);
  const auto prior = SourcePrior::sparse_finite_alphabet(0.1, 1.0, 1);
  const auto cfg = mp_config(Utility::l0().with_alphabet({-1.0, 0.0, 1.0}), prior);
  const auto sol = at_state(ReplicaState(0.2, 0.05), cfg);
  const auto pmf = conditional_pmf(sol, cfg, quad);
  REQUIRE(pmf.size() == 3);
  REQUIRE(pmf[0].size() == 3);

  // Row-stochastic.
  for (const auto& row : pmf) {
    double total = 0.0;
    for (double v : row) total += v;
    CHECK(total == Catch::Approx(1.0).margin(1e-10));
  }
  // Exact normal cell masses: P(xhat = cj | x = ci) = Phi((vj+ - ci)/sigma)
  // - Phi((vj- - ci)/sigma) with the l0 cell edges +-(1/2 + lambda_s).
  const double ls = sol.channel.lambda_s;
  const double sigma = std::sqrt(sol.channel.lambda0_s);
  const double edge = 0.5 + ls;
  auto phi = [](double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); };
  const std::vector<double> support = {-1.0, 0.0, 1.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const double mid =
        phi((edge - support[i]) / sigma) - phi((-edge - support[i]) / sigma);
    CHECK(pmf[i][1] == Catch::Approx(mid).margin(1e-10));
    CHECK(pmf[i][2] == Catch::Approx(1.0 - phi((edge - support[i]) / sigma)).margin(1e-10));
  }
  // Sign-flip symmetry of the symmetric prior and utility.
  CHECK(pmf[0][0] == Catch::Approx(pmf[2][2]).margin(1e-12));
  CHECK(pmf[0][2] == Catch::Approx(pmf[2][0]).margin(1e-12));

  // Symbol error recomputed from the pmf matches the direct prediction up
  // to the Gauss-Hermite error on the discontinuous indicator.
  const auto probs = std::vector<double>{0.05, 0.9, 0.05};
  double ser_pmf = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (support[i] != support[j]) ser_pmf += probs[i] * pmf[i][j];
    }
  }
  CHECK(predict(sol, cfg, Distortion::symbol_error(), quad) == Catch::Approx(ser_pmf).margin(0.02));
}

TEST_CASE("conditional pmf under an active tilt stays row-stochastic") {
  const Quadratures quad = Quadratures::make(41, 48);
  const auto prior = SourcePrior::sparse_finite_alphabet(0.1, 1.0, 1);
  const auto cfg = mp_config(Utility::l0().with_alphabet({-1.0, 0.0, 1.0}), prior);
  // chi chosen so no decision boundary coincides with a quadrature-reachable
  // y (lambda_s = 0.5 would pin the boundary exactly on the alphabet).
  const auto sol = at_state(ReplicaState(0.17, 0.05, {0.04}, {1.5}), cfg);
  REQUIRE(sol.channel.lambda_k[0] > kLevelEpsilon);
  const auto pmf = conditional_pmf(sol, cfg, quad);
  for (const auto& row : pmf) {
    double total = 0.0;
    for (double v : row) total += v;
    CHECK(total == Catch::Approx(1.0).margin(1e-10));
  }
  CHECK(pmf[0][0] == Catch::Approx(pmf[2][2]).margin(1e-9));
}

TEST_CASE("observable input validation") {
  const Quadratures quad = Quadratures::make(21, 32);
  CHECK_THROWS_AS(Distortion::joint_moment(5, 4), std::invalid_argument);
  CHECK_THROWS_AS(Distortion::joint_moment(-1, 0), std::invalid_argument);
  const auto cfg = mp_config(Utility::l1(), SourcePrior::sparse_gaussian(0.1));
  const auto sol = at_state(ReplicaState(0.5, 0.3), cfg);
  CHECK_THROWS_AS(conditional_pmf(sol, cfg, quad), std::invalid_argument);
}
