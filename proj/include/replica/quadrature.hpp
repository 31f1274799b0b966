#pragma once

// Deterministic Gaussian / Legendre quadrature used for every expectation
// in the replica fixed-point equations.  Rules are immutable after
// construction and safe to share across threads.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace replica {

// Nodes/weights of a rule with respect to the standard normal measure Dz.
// Weights are normalized to sum to one.
struct GaussHermiteRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  static GaussHermiteRule make(int order);
};

// Gauss-Legendre rule on [-1, 1]; exact for polynomials up to 2*order - 1.
struct LegendreRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  static LegendreRule make(int order);
};

namespace detail {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights come
// from the squared first components of its eigenvectors.
inline std::pair<std::vector<double>, std::vector<double>>
golub_welsch(const std::vector<double>& offdiag, double total_mass) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = offdiag[static_cast<std::size_t>(i)];
    jacobi(i + 1, i) = offdiag[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  std::vector<double> nodes(static_cast<std::size_t>(n));
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = total_mass * v0 * v0;
  }
  // The Jacobi matrix has zero diagonal, so the spectrum is symmetric about
  // zero; enforce that exactly (middle node of an odd rule lands on 0) so
  // mirrored integrands produce mirrored samples bit for bit.
  for (int i = 0, j = n - 1; i < j; ++i, --j) {
    const double t = 0.5 * (nodes[static_cast<std::size_t>(j)] - nodes[static_cast<std::size_t>(i)]);
    nodes[static_cast<std::size_t>(i)] = -t;
    nodes[static_cast<std::size_t>(j)] = t;
    const double w = 0.5 * (weights[static_cast<std::size_t>(i)] + weights[static_cast<std::size_t>(j)]);
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(j)] = w;
  }
  if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return {std::move(nodes), std::move(weights)};
}

}  // namespace detail

inline GaussHermiteRule GaussHermiteRule::make(int order) {
  if (order < 1) throw std::invalid_argument("GaussHermiteRule: order must be positive");
  // Probabilists' Hermite recurrence: off-diagonal sqrt(k).
  std::vector<double> offdiag(static_cast<std::size_t>(order - 1));
  for (int k = 1; k < order; ++k) offdiag[static_cast<std::size_t>(k - 1)] = std::sqrt(static_cast<double>(k));
  GaussHermiteRule rule;
  rule.order = order;
  std::tie(rule.nodes, rule.weights) = detail::golub_welsch(offdiag, 1.0);
  return rule;
}

inline LegendreRule LegendreRule::make(int order) {
  if (order < 1) throw std::invalid_argument("LegendreRule: order must be positive");
  std::vector<double> offdiag(static_cast<std::size_t>(order - 1));
  for (int k = 1; k < order; ++k) {
    offdiag[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(k) / std::sqrt(4.0 * k * k - 1.0);
  }
  LegendreRule rule;
  rule.order = order;
  std::tie(rule.nodes, rule.weights) = detail::golub_welsch(offdiag, 2.0);
  return rule;
}

// E f(z) under z ~ N(0, 1).
template <class F>
double expect_gaussian(F&& f, const GaussHermiteRule& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double fi = f(rule.nodes[i]);
    if (!std::isfinite(fi)) {
      throw std::runtime_error("expect_gaussian: non-finite integrand at node z=" +
                               std::to_string(rule.nodes[i]));
    }
    acc += rule.weights[i] * fi;
  }
  return acc;
}

// E f(z) under the tilted measure tilt(z) Dz / \int tilt Dz.
template <class F, class Tilt>
double expect_tilted(F&& f, Tilt&& tilt, const GaussHermiteRule& rule) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double ti = tilt(rule.nodes[i]);
    const double fi = f(rule.nodes[i]);
    if (!std::isfinite(ti) || ti < 0.0 || !std::isfinite(fi)) {
      throw std::runtime_error("expect_tilted: bad integrand at node z=" +
                               std::to_string(rule.nodes[i]));
    }
    num += rule.weights[i] * ti * fi;
    den += rule.weights[i] * ti;
  }
  if (den < 1e-300) throw std::runtime_error("expect_tilted: degenerate tilt, normalizer underflow");
  return num / den;
}

// Gauss-Legendre approximation of \int_lo^hi f.
template <class F>
double integrate(F&& f, double lo, double hi, const LegendreRule& rule) {
  if (!(lo <= hi)) throw std::invalid_argument("integrate: lo > hi");
  if (lo == hi) return 0.0;
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = mid + half * rule.nodes[i];
    const double fx = f(x);
    if (!std::isfinite(fx)) {
      throw std::runtime_error("integrate: non-finite integrand at x=" + std::to_string(x));
    }
    acc += rule.weights[i] * fx;
  }
  return half * acc;
}

// log(sum_i w_i exp(a_i)) without underflow; w_i >= 0.
inline double log_sum_exp(const std::vector<double>& log_terms, const std::vector<double>& weights) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_terms) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < log_terms.size(); ++i) s += weights[i] * std::exp(log_terms[i] - m);
  return m + std::log(s);
}

}  // namespace replica
