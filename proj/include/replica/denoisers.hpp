#pragma once

// Decoupled MAP estimator g_map[(y); lambda_s, u] for every utility in
// scope, plus the vector MAP objective itself.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace replica {

struct Utility {
  enum class Kind { HalfSquare, L1, L0, Custom };
  enum class Support { Reals, Alphabet };

  Kind kind = Kind::HalfSquare;
  Support support = Support::Reals;
  std::vector<double> points;  // sorted, Alphabet only
  std::function<double(double)> custom;

  static Utility half_square() { return Utility{Kind::HalfSquare, Support::Reals, {}, {}}; }
  static Utility l1() { return Utility{Kind::L1, Support::Reals, {}, {}}; }
  static Utility l0() { return Utility{Kind::L0, Support::Reals, {}, {}}; }
  static Utility custom_utility(std::function<double(double)> u) {
    return Utility{Kind::Custom, Support::Reals, {}, std::move(u)};
  }

  Utility with_alphabet(std::vector<double> alphabet) const {
    if (alphabet.size() < 2) throw std::invalid_argument("Utility: alphabet needs at least two points");
    for (std::size_t i = 1; i < alphabet.size(); ++i) {
      if (!(alphabet[i - 1] < alphabet[i])) {
        throw std::invalid_argument("Utility: alphabet points must be strictly increasing");
      }
    }
    Utility out = *this;
    out.support = Support::Alphabet;
    out.points = std::move(alphabet);
    return out;
  }

  double operator()(double v) const {
    switch (kind) {
      case Kind::HalfSquare: return 0.5 * v * v;
      case Kind::L1: return std::abs(v);
      case Kind::L0: return v != 0.0 ? 1.0 : 0.0;
      case Kind::Custom: return custom(v);
    }
    return 0.0;
  }
};

struct DenoiserSpec {
  Utility utility;
  double lambda_s = 1.0;  // > 0

  DenoiserSpec(Utility u, double ls) : utility(std::move(u)), lambda_s(ls) {
    if (!(lambda_s > 0.0)) throw std::invalid_argument("DenoiserSpec: lambda_s must be positive");
  }
};

namespace detail {

// Decision boundary between alphabet points cj < ck: the y where the two
// scalar MAP costs tie.
inline double pairwise_boundary(const Utility& u, double lambda_s, double cj, double ck) {
  return 0.5 * (cj + ck) + lambda_s * (u(ck) - u(cj)) / (ck - cj);
}

inline double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

// argmin_v (1/2 lambda_s)(y - v)^2 + u(v) over the utility's support.
// Ties at a boundary resolve to the lower point (half-open cells).
inline double denoise(const DenoiserSpec& spec, double y) {
  if (!std::isfinite(y)) throw std::invalid_argument("denoise: y not finite");
  const Utility& u = spec.utility;
  const double ls = spec.lambda_s;
  if (u.support == Utility::Support::Alphabet) {
    double best = u.points.front();
    double best_cost = (y - best) * (y - best) / (2.0 * ls) + u(best);
    for (std::size_t i = 1; i < u.points.size(); ++i) {
      const double c = u.points[i];
      const double cost = (y - c) * (y - c) / (2.0 * ls) + u(c);
      if (cost < best_cost) {
        best = c;
        best_cost = cost;
      }
    }
    return best;
  }
  switch (u.kind) {
    case Utility::Kind::HalfSquare:
      return y / (1.0 + ls);
    case Utility::Kind::L1:
      if (std::abs(y) <= ls) return 0.0;
      return y > 0.0 ? y - ls : y + ls;
    case Utility::Kind::L0:
      return std::abs(y) > std::sqrt(2.0 * ls) ? y : 0.0;
    case Utility::Kind::Custom: {
      // Coarse scan picks the basin, golden-section refines it.  Penalties
      // with a cusp at the origin (lq, q < 1) put a competing minimum exactly
      // at 0, which no grid refinement finds, so 0 and y enter as explicit
      // candidates after refinement.
      const double delta = 5.0 * std::max(1.0, std::sqrt(ls));
      const int scan = 512;
      auto cost = [&](double v) { return (y - v) * (y - v) / (2.0 * ls) + u(v); };
      double best_v = y - delta;
      double best_c = cost(best_v);
      for (int i = 1; i <= scan; ++i) {
        const double v = y - delta + 2.0 * delta * i / scan;
        const double c = cost(v);
        if (c < best_c) { best_c = c; best_v = v; }
      }
      const double step = 2.0 * delta / scan;
      double v = detail::golden_section(cost, best_v - step, best_v + step, 1e-10);
      double c = cost(v);
      for (double cand : {0.0, y}) {
        const double cc = cost(cand);
        if (cc < c) { c = cc; v = cand; }
      }
      return v;
    }
  }
  return y;
}

// Boundaries v_2..v_len between adjacent alphabet points (length len - 1),
// with c_0 = -inf and c_{len+1} = +inf implied.
inline std::vector<double> boundary_points(const DenoiserSpec& spec) {
  const Utility& u = spec.utility;
  if (u.support != Utility::Support::Alphabet) {
    throw std::invalid_argument("boundary_points: Reals support unsupported");
  }
  std::vector<double> v;
  for (std::size_t i = 1; i < u.points.size(); ++i) {
    v.push_back(detail::pairwise_boundary(u, spec.lambda_s, u.points[i - 1], u.points[i]));
  }
  return v;
}

// Effective decision interval (lo, hi] of each alphabet point under the
// scalar MAP rule; empty cells (hi <= lo) occur when the penalty difference
// dominates the spacing.
struct DecisionCell {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool empty() const { return !(lo < hi); }
};

inline std::vector<DecisionCell> decision_cells(const DenoiserSpec& spec) {
  const Utility& u = spec.utility;
  if (u.support != Utility::Support::Alphabet) {
    throw std::invalid_argument("decision_cells: Reals support unsupported");
  }
  const std::size_t len = u.points.size();
  std::vector<DecisionCell> cells(len);
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t k = 0; k < len; ++k) {
      if (k == j) continue;
      const double b = detail::pairwise_boundary(u, spec.lambda_s, std::min(u.points[j], u.points[k]),
                                                 std::max(u.points[j], u.points[k]));
      if (u.points[k] < u.points[j]) {
        cells[j].lo = std::max(cells[j].lo, b);
      } else {
        cells[j].hi = std::min(cells[j].hi, b);
      }
    }
  }
  return cells;
}

// (1/2 lambda) ||y - A v||^2 + sum_i u(v_i).
inline double map_objective(const Utility& u, double lambda, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& A, const Eigen::VectorXd& v) {
  if (!(lambda > 0.0)) throw std::invalid_argument("map_objective: lambda must be positive");
  if (A.rows() != y.size() || A.cols() != v.size()) {
    throw std::invalid_argument("map_objective: dimension mismatch");
  }
  const double resid = (y - A * v).squaredNorm();
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) penalty += u(v(i));
  return resid / (2.0 * lambda) + penalty;
}

}  // namespace replica
