#pragma once

// Predicted performance functionals of a solved ansatz: distortion under an
// arbitrary d(x_hat; x), joint moments, conditional pmf for alphabets.

#include "replica/replica_core.hpp"
#include "replica/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace replica {

struct Distortion {
  enum class Kind { SquaredError, SymbolError, JointMoment, Custom };
  Kind kind = Kind::SquaredError;
  int k = 0;  // x_hat exponent, JointMoment
  int l = 0;  // x exponent, JointMoment
  std::function<double(double, double)> custom;  // d(x_hat, x)

  static Distortion squared_error() { return {Kind::SquaredError, 0, 0, {}}; }
  static Distortion symbol_error() { return {Kind::SymbolError, 0, 0, {}}; }
  static Distortion joint_moment(int k, int l) {
    if (k < 0 || l < 0 || k + l > 8) throw std::invalid_argument("joint_moment: need k, l >= 0 and k + l <= 8");
    return {Kind::JointMoment, k, l, {}};
  }
  static Distortion custom_distortion(std::function<double(double, double)> d) {
    return {Kind::Custom, 0, 0, std::move(d)};
  }

  double operator()(double x_hat, double x) const {
    switch (kind) {
      case Kind::SquaredError: return (x_hat - x) * (x_hat - x);
      case Kind::SymbolError: return x_hat != x ? 1.0 : 0.0;
      case Kind::JointMoment: return std::pow(x_hat, k) * std::pow(x, l);
      case Kind::Custom: return custom(x_hat, x);
    }
    return 0.0;
  }
};

// Tilted-quadrature expectation of d(g, x) over the decoupled system.
inline double predict(const FixedPointSolution& sol, const ModelConfig& cfg, const Distortion& d,
                      const Quadratures& quad) {
  double acc = 0.0;
  detail::for_each_decoupled(sol.state, cfg, sol.channel, quad,
                             [&](const detail::DecoupledSample& smp) { acc += smp.weight * d(smp.g, smp.x); });
  return acc;
}

inline double normalized_mse(const FixedPointSolution& sol, const ModelConfig& cfg, const Quadratures& quad) {
  const double power = cfg.prior.second_moment();
  if (!(power > 0.0)) throw std::invalid_argument("normalized_mse: zero-power prior");
  return predict(sol, cfg, Distortion::squared_error(), quad) / power;
}

// P(x_hat = c_j | x = c_i): tilted-Gaussian mass of the decision cell of
// c_j around mean c_i.  Rows are prior support points, columns the utility
// alphabet; row-stochastic.
inline std::vector<std::vector<double>> conditional_pmf(const FixedPointSolution& sol, const ModelConfig& cfg,
                                                        const Quadratures& quad) {
  if (sol.channel.lambda_s <= 0.0) throw std::invalid_argument("conditional_pmf: invalid channel");
  const Utility& u = cfg.utility;
  if (u.support != Utility::Support::Alphabet) {
    throw std::invalid_argument("conditional_pmf: Reals support unsupported");
  }
  if (!cfg.prior.discrete()) throw std::invalid_argument("conditional_pmf: prior must be discrete");
  const auto& rows = cfg.prior.values();
  const auto& cols = u.points;
  const DenoiserSpec spec(u, sol.channel.lambda_s);
  const auto cells = decision_cells(spec);
  const int b = sol.state.breaking();
  std::vector<std::vector<double>> pmf(rows.size(), std::vector<double>(cols.size(), 0.0));

  if (b == 0 || sol.channel.lambda_k.empty() ||
      *std::max_element(sol.channel.lambda_k.begin(), sol.channel.lambda_k.end()) <= kLevelEpsilon) {
    // Pure Gaussian channel: exact normal cell masses.
    const double sigma = std::sqrt(std::max(sol.channel.lambda0_s, 0.0));
    auto norm_cdf = [](double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); };
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cells[j].empty()) continue;
        if (sigma <= 0.0) {
          pmf[i][j] = (rows[i] > cells[j].lo && rows[i] <= cells[j].hi) ? 1.0 : 0.0;
        } else {
          pmf[i][j] = norm_cdf((cells[j].hi - rows[i]) / sigma) - norm_cdf((cells[j].lo - rows[i]) / sigma);
        }
      }
    }
  } else {
    // Tilted channel: accumulate quadrature mass of each cell.
    ModelConfig row_cfg = cfg;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      row_cfg.prior = SourcePrior::point_masses({rows[i]}, {1.0});
      detail::for_each_decoupled(sol.state, row_cfg, sol.channel, quad,
                                 [&](const detail::DecoupledSample& smp) {
                                   for (std::size_t j = 0; j < cols.size(); ++j) {
                                     if (smp.g == cols[j]) {
                                       pmf[i][j] += smp.weight;
                                       break;
                                     }
                                   }
                                 });
    }
  }
  for (auto& row : pmf) {
    double total = 0.0;
    for (double v : row) total += v;
    if (total > 0.0) {
      for (double& v : row) v /= total;
    }
  }
  return pmf;
}

}  // namespace replica
