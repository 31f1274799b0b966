#pragma once

// Finite-n simulator of y = A x + z and its MAP reconstruction; the
// independent empirical oracle for the replica predictions.

#include "replica/denoisers.hpp"
#include "replica/ensembles.hpp"
#include "replica/observables.hpp"
#include "replica/sources.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace replica {

enum class MatrixKind { IID, Projector };

// IID: i.i.d. N(0, 1/k) entries.  Projector: first k rows of a Haar
// orthogonal matrix scaled by sqrt(n/k), so A A^T = (n/k) I.
inline Eigen::MatrixXd gen_matrix(MatrixKind kind, int k, int n, std::uint64_t seed) {
  if (k < 1 || n < 1) throw std::invalid_argument("gen_matrix: k, n must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (kind == MatrixKind::IID) {
    Eigen::MatrixXd a(k, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(k));
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = scale * gauss(rng);
    }
    return a;
  }
  if (k > n) throw std::invalid_argument("gen_matrix: Projector requires k <= n");
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd qmat = qr.householderQ();
  // Sign-correct by the diagonal of R; uncorrected factorization is not Haar.
  const Eigen::MatrixXd rmat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (rmat(j, j) < 0.0) qmat.col(j) = -qmat.col(j);
  }
  return std::sqrt(static_cast<double>(n) / k) * qmat.transpose().topRows(k);
}

struct SystemInstance {
  Eigen::VectorXd x;
  Eigen::MatrixXd A;
  Eigen::VectorXd y;
  std::uint64_t seed = 0;

  static SystemInstance generate(const SourcePrior& prior, MatrixKind kind, int n, double rate,
                                 double lambda0, std::uint64_t seed) {
    const int k = static_cast<int>(std::lround(n / rate));
    SystemInstance inst;
    inst.seed = seed;
    const auto xs = prior.sample(static_cast<std::size_t>(n), seed);
    inst.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), n);
    inst.A = gen_matrix(kind, k, n, seed ^ 0x9e3779b97f4a7c15ULL);
    std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(k);
    for (int i = 0; i < k; ++i) z(i) = std::sqrt(lambda0) * gauss(rng);
    inst.y = inst.A * inst.x + z;
    return inst;
  }
};

struct ReconstructionReport {
  Eigen::VectorXd x_hat;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline ReconstructionReport reconstruct_ridge(const SystemInstance& inst, double lambda) {
  ReconstructionReport rep;
  if (inst.A.rows() < inst.A.cols()) {
    // Underdetermined: (A^T A + l)^{-1} A^T = A^T (A A^T + l)^{-1} keeps the
    // factorization at the smaller dimension.
    Eigen::MatrixXd gram = inst.A * inst.A.transpose();
    gram.diagonal().array() += lambda;
    rep.x_hat = inst.A.transpose() * gram.llt().solve(inst.y);
  } else {
    Eigen::MatrixXd gram = inst.A.transpose() * inst.A;
    gram.diagonal().array() += lambda;
    rep.x_hat = gram.llt().solve(inst.A.transpose() * inst.y);
  }
  rep.iterations = 1;
  rep.converged = true;
  return rep;
}

// Largest eigenvalue of A^T A by power iteration; reusable across
// reconstructions on the same instance.
inline double gram_spectral_norm(const Eigen::MatrixXd& A, int iters = 50) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols()).normalized();
  double lip = 1.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd w = A.transpose() * (A * v);
    lip = w.norm();
    if (lip <= 0.0) break;
    v = w / lip;
  }
  return lip;
}

// Accelerated proximal gradient on (1/2 lambda)||y - A v||^2 + ||v||_1.
// init warm-starts the iteration (e.g. the solution at a nearby lambda);
// gram_norm, if positive, skips the power iteration.
inline ReconstructionReport reconstruct_l1(const SystemInstance& inst, double lambda,
                                           const Eigen::VectorXd* init = nullptr,
                                           double gram_norm = 0.0) {
  const Eigen::MatrixXd& A = inst.A;
  const Eigen::VectorXd& y = inst.y;
  const int n = static_cast<int>(A.cols());
  double lip = gram_norm > 0.0 ? gram_norm : gram_spectral_norm(A);
  // Small inflation covers the power-iteration shortfall.
  lip = 1.01 * std::max(lip, 1e-12) / lambda;
  const double step = 1.0 / lip;
  auto objective = [&](const Eigen::VectorXd& w) {
    return (y - A * w).squaredNorm() / (2.0 * lambda) + w.lpNorm<1>();
  };
  Eigen::VectorXd xk =
      (init && init->size() == n) ? *init : Eigen::VectorXd::Zero(n).eval();
  Eigen::VectorXd zk = xk;
  double tk = 1.0;
  double prev_obj = objective(xk);
  ReconstructionReport rep;
  const int max_iter = 20000;
  int it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd grad = A.transpose() * (A * zk - y) / lambda;
    Eigen::VectorXd xn = zk - step * grad;
    for (int i = 0; i < n; ++i) {
      const double t = xn(i);
      xn(i) = std::abs(t) <= step ? 0.0 : (t > 0.0 ? t - step : t + step);
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    zk = xn + ((tk - 1.0) / tn) * (xn - xk);
    xk = xn;
    tk = tn;
    const double obj = objective(xk);
    if (prev_obj - obj < 1e-12 * std::max(1.0, std::abs(obj)) && prev_obj >= obj) {
      prev_obj = obj;
      rep.converged = true;
      break;
    }
    if (obj > prev_obj) {  // restart momentum on overshoot
      zk = xk;
      tk = 1.0;
    }
    prev_obj = obj;
  }
  rep.x_hat = xk;
  rep.iterations = it;
  return rep;
}

// Exhaustive search over alphabet^n via mixed-radix Gray enumeration with
// O(k) incremental residual updates.
inline ReconstructionReport reconstruct_exhaustive(const SystemInstance& inst, const Utility& u,
                                                   double lambda) {
  const int n = static_cast<int>(inst.A.cols());
  if (n > 18) throw std::invalid_argument("reconstruct: exhaustive search refused for n > 18");
  const auto& pts = u.points;
  const int radix = static_cast<int>(pts.size());
  std::vector<int> digit(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd vcur = Eigen::VectorXd::Constant(n, pts[0]);
  Eigen::VectorXd resid = inst.y - inst.A * vcur;
  double resid2 = resid.squaredNorm();
  double penalty = n * u(pts[0]);
  double best_obj = resid2 / (2.0 * lambda) + penalty;
  Eigen::VectorXd best_v = vcur;
  std::uint64_t count = 1;
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::uint64_t>(radix);
  std::vector<int> dir(static_cast<std::size_t>(n), +1);
  while (count < total) {
    // Find the lowest digit that can move in its current direction.
    int j = 0;
    while (j < n) {
      const int next = digit[static_cast<std::size_t>(j)] + dir[static_cast<std::size_t>(j)];
      if (next >= 0 && next < radix) break;
      dir[static_cast<std::size_t>(j)] = -dir[static_cast<std::size_t>(j)];
      ++j;
    }
    if (j >= n) break;
    const int old = digit[static_cast<std::size_t>(j)];
    const int now = old + dir[static_cast<std::size_t>(j)];
    digit[static_cast<std::size_t>(j)] = now;
    const double delta = pts[static_cast<std::size_t>(now)] - pts[static_cast<std::size_t>(old)];
    // ||r - delta a_j||^2 = ||r||^2 - 2 delta a_j.r + delta^2 ||a_j||^2
    const auto col = inst.A.col(j);
    resid2 += -2.0 * delta * col.dot(resid) + delta * delta * col.squaredNorm();
    resid.noalias() -= delta * col;
    penalty += u(pts[static_cast<std::size_t>(now)]) - u(pts[static_cast<std::size_t>(old)]);
    vcur(j) = pts[static_cast<std::size_t>(now)];
    const double obj = resid2 / (2.0 * lambda) + penalty;
    if (obj < best_obj) {
      best_obj = obj;
      best_v = vcur;
    }
    ++count;
  }
  ReconstructionReport rep;
  rep.x_hat = best_v;
  rep.iterations = static_cast<int>(std::min<std::uint64_t>(count, 1u << 30));
  rep.converged = true;
  return rep;
}

}  // namespace detail

inline ReconstructionReport reconstruct(const SystemInstance& inst, const Utility& utility, double lambda,
                                        const Eigen::VectorXd* init = nullptr, double gram_norm = 0.0) {
  if (!(lambda > 0.0)) throw std::invalid_argument("reconstruct: lambda must be positive");
  ReconstructionReport rep;
  if (utility.support == Utility::Support::Alphabet) {
    rep = detail::reconstruct_exhaustive(inst, utility, lambda);
  } else if (utility.kind == Utility::Kind::HalfSquare) {
    rep = detail::reconstruct_ridge(inst, lambda);
  } else if (utility.kind == Utility::Kind::L1) {
    rep = detail::reconstruct_l1(inst, lambda, init, gram_norm);
  } else {
    throw std::invalid_argument("reconstruct: unsupported utility for continuous support");
  }
  rep.objective = map_objective(utility, lambda, inst.y, inst.A, rep.x_hat);
  return rep;
}

inline double empirical_distortion(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat,
                                   const Distortion& d) {
  if (x.size() != x_hat.size()) throw std::invalid_argument("empirical_distortion: length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += d(x_hat(i), x(i));
  return acc / static_cast<double>(x.size());
}

// Per-dimension MSE of the ridge (half-square) scheme straight from the
// spectral density: int [ lambda^2 Ex2 / (t + lambda)^2
//                       + lambda0 t / (t + lambda)^2 ] dF_J(t).
inline double ridge_oracle_mse(const SpectralEnsemble& ens, double lambda, double lambda0, double ex2,
                               const LegendreRule& leg) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge_oracle_mse: lambda must be positive");
  auto kernel = [&](double t) {
    const double den = (t + lambda) * (t + lambda);
    return (lambda * lambda * ex2 + lambda0 * t) / den;
  };
  switch (ens.kind()) {
    case SpectralEnsemble::Kind::MarcenkoPastur: {
      const double r = ens.rate();
      const double lo = std::max(0.0, (1.0 - std::sqrt(r)) * (1.0 - std::sqrt(r)));
      const double hi = (1.0 + std::sqrt(r)) * (1.0 + std::sqrt(r));
      const double atom = std::max(0.0, 1.0 - 1.0 / r);
      const double bulk = integrate(
          [&](double t) {
            const double s = (t - lo) * (hi - t);
            const double density = s > 0.0 ? std::sqrt(s) / (2.0 * M_PI * r * t) : 0.0;
            return density * kernel(t);
          },
          lo, hi, leg);
      return atom * kernel(0.0) + bulk;
    }
    case SpectralEnsemble::Kind::Projector: {
      const double r = ens.rate();
      return (1.0 / r) * kernel(r) + (1.0 - 1.0 / r) * kernel(0.0);
    }
    case SpectralEnsemble::Kind::Empirical: {
      double acc = 0.0;
      for (double t : ens.eigenvalues()) acc += kernel(t);
      return acc / static_cast<double>(ens.eigenvalues().size());
    }
  }
  return 0.0;
}

// Normalized joint frequency table of (x_i, x_hat_i) pairs pooled across
// instances; keys are alphabet symbols or bin indices.
struct JointHistogram {
  std::map<std::pair<int, int>, double> mass;  // (row, col) -> frequency
  std::vector<double> row_values;
  std::vector<double> col_values;
};

inline JointHistogram empirical_joint(const std::vector<Eigen::VectorXd>& xs,
                                      const std::vector<Eigen::VectorXd>& x_hats,
                                      const std::vector<double>& alphabet) {
  if (xs.size() != x_hats.size()) throw std::invalid_argument("empirical_joint: instance count mismatch");
  auto index_of = [&](double v) {
    int best = 0;
    double best_d = std::abs(v - alphabet[0]);
    for (std::size_t j = 1; j < alphabet.size(); ++j) {
      const double d = std::abs(v - alphabet[j]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    return best;
  };
  JointHistogram h;
  h.row_values = alphabet;
  h.col_values = alphabet;
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != x_hats[i].size()) throw std::invalid_argument("empirical_joint: length mismatch");
    for (Eigen::Index j = 0; j < xs[i].size(); ++j) {
      h.mass[{index_of(xs[i](j)), index_of(x_hats[i](j))}] += 1.0;
      total += 1.0;
    }
  }
  for (auto& kv : h.mass) kv.second /= total;
  return h;
}

}  // namespace replica
