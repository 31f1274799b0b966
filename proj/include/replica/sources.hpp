#pragma once

// Source-entry priors p_x and expectations over them.

#include "replica/quadrature.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace replica {

class SourcePrior {
 public:
  enum class Kind { SparseGaussian, PointMasses };

  static SourcePrior sparse_gaussian(double alpha) {
    check_probability(alpha);
    SourcePrior p;
    p.kind_ = Kind::SparseGaussian;
    p.alpha_ = alpha;
    return p;
  }

  // Support {0} u {+-a, ..., +-kappa a}; zero at 1 - alpha, nonzero symbols
  // uniform at alpha / (2 kappa).
  static SourcePrior sparse_finite_alphabet(double alpha, double a, int kappa) {
    check_probability(alpha);
    if (!(a > 0.0)) throw std::invalid_argument("SourcePrior: a must be positive");
    if (kappa < 1) throw std::invalid_argument("SourcePrior: kappa must be positive");
    std::vector<double> values;
    std::vector<double> probs;
    for (int k = -kappa; k <= kappa; ++k) {
      values.push_back(a * k);
      probs.push_back(k == 0 ? 1.0 - alpha : alpha / (2.0 * kappa));
    }
    return point_masses(std::move(values), std::move(probs));
  }

  static SourcePrior point_masses(std::vector<double> values, std::vector<double> probs) {
    if (values.size() != probs.size() || values.empty()) {
      throw std::invalid_argument("SourcePrior: values/probs size mismatch");
    }
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("SourcePrior: negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("SourcePrior: probabilities must sum to 1");
    SourcePrior p;
    p.kind_ = Kind::PointMasses;
    p.values_ = std::move(values);
    p.probs_ = std::move(probs);
    return p;
  }

  Kind kind() const { return kind_; }
  bool discrete() const { return kind_ == Kind::PointMasses; }
  double sparsity() const { return alpha_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }

  double second_moment() const {
    if (kind_ == Kind::SparseGaussian) return alpha_;
    double acc = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) acc += probs_[i] * values_[i] * values_[i];
    return acc;
  }

  // E f(x): exact mass-point sum for the discrete kinds, Gauss-Hermite over
  // the Gaussian component otherwise.
  template <class F>
  double expect(F&& f, const GaussHermiteRule& rule) const {
    if (kind_ == Kind::PointMasses) {
      double acc = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) {
        const double fi = f(values_[i]);
        if (!std::isfinite(fi)) throw std::runtime_error("SourcePrior::expect: non-finite f");
        acc += probs_[i] * fi;
      }
      return acc;
    }
    const double f0 = f(0.0);
    if (!std::isfinite(f0)) throw std::runtime_error("SourcePrior::expect: non-finite f");
    return (1.0 - alpha_) * f0 + alpha_ * expect_gaussian(f, rule);
  }

  // Per-mass enumeration interface: calls visit(x, prob_or_weight).  The
  // SparseGaussian prior is visited through Gauss-Hermite nodes.
  template <class Visit>
  void for_each_mass(Visit&& visit, const GaussHermiteRule& rule) const {
    if (kind_ == Kind::PointMasses) {
      for (std::size_t i = 0; i < values_.size(); ++i) visit(values_[i], probs_[i]);
      return;
    }
    visit(0.0, 1.0 - alpha_);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) visit(rule.nodes[i], alpha_ * rule.weights[i]);
  }

  std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<double> out(n, 0.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (kind_ == Kind::SparseGaussian) {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (double& x : out) {
        if (unif(rng) < alpha_) x = gauss(rng);
      }
      return out;
    }
    for (double& x : out) {
      double u = unif(rng);
      for (std::size_t i = 0; i < values_.size(); ++i) {
        if (u < probs_[i] || i + 1 == values_.size()) {
          x = values_[i];
          break;
        }
        u -= probs_[i];
      }
    }
    return out;
  }

 private:
  static void check_probability(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("SourcePrior: alpha must be in [0, 1]");
  }

  Kind kind_ = Kind::SparseGaussian;
  double alpha_ = 0.0;
  std::vector<double> values_;
  std::vector<double> probs_;
};

// Source to noise power ratio E x^2 / lambda0, linear scale.
inline double snr(const SourcePrior& prior, double lambda0) {
  if (!(lambda0 > 0.0)) throw std::invalid_argument("snr: lambda0 must be positive");
  return prior.second_moment() / lambda0;
}

}  // namespace replica
