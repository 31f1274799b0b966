#pragma once

// Damped fixed-point iteration with multi-start, mu selection, free-energy
// and entropy annotation, and ansatz selection.

#include "replica/replica_core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace replica {

struct SolverConfig {
  double damping = 0.5;          // in (0, 1]
  double tol = 1e-10;            // max-norm state change
  int max_iter = 5000;
  std::vector<ReplicaState> starts;  // nonempty at solve time (defaulted if empty)
  double mu_lo = 1e-4;
  double mu_hi = 50.0;
};

struct FixedPointSolution {
  ReplicaState state;
  EffectiveChannel channel;
  double free_energy = 0.0;
  double entropy = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  bool stable = false;
  double jacobian_radius = 0.0;
};

struct StartDiagnostic {
  std::size_t start_index = 0;
  bool converged = false;
  bool physical = true;
  int iterations = 0;
  double residual = 0.0;
};

struct SolveResult {
  std::vector<FixedPointSolution> solutions;
  std::vector<StartDiagnostic> diagnostics;
};

namespace detail {

inline double state_distance(const ReplicaState& a, const ReplicaState& b) {
  double d = std::abs(a.chi - b.chi);
  d = std::max(d, std::abs(a.q - b.q));
  for (std::size_t i = 0; i < a.p.size(); ++i) d = std::max(d, std::abs(a.p[i] - b.p[i]));
  for (std::size_t i = 0; i < a.mu.size(); ++i) d = std::max(d, std::abs(a.mu[i] - b.mu[i]));
  return d;
}

inline void project_nonnegative(ReplicaState& s) {
  s.chi = std::max(s.chi, 0.0);
  s.q = std::max(s.q, 0.0);
  for (double& v : s.p) v = std::max(v, 0.0);
}

// Bisection on the 1RSB mu equation; a log-spaced scan locates a sign
// change first.  With no sign change the grid minimizer of |residual| wins.
inline double update_mu_1rsb(const ReplicaState& s, const ModelConfig& cfg, const Quadratures& quad,
                             double mu_lo, double mu_hi) {
  if (s.p[0] < 1e-13) return s.mu[0];  // residual vanishes identically, keep mu
  auto residual_at = [&](double mu) {
    ReplicaState t = s;
    t.mu[0] = mu;
    return mu_residual(t, cfg, quad);
  };
  const int scan = 24;
  double best_mu = s.mu[0];
  double best_abs = std::numeric_limits<double>::infinity();
  double prev_mu = mu_lo;
  double prev_res = residual_at(mu_lo);
  std::optional<std::pair<double, double>> bracket;
  for (int i = 1; i <= scan; ++i) {
    const double mu = mu_lo * std::pow(mu_hi / mu_lo, static_cast<double>(i) / scan);
    const double res = residual_at(mu);
    if (std::abs(res) < best_abs) {
      best_abs = std::abs(res);
      best_mu = mu;
    }
    if (!bracket && prev_res * res <= 0.0 && std::isfinite(prev_res) && std::isfinite(res)) {
      bracket = {prev_mu, mu};
    }
    prev_mu = mu;
    prev_res = res;
  }
  if (!bracket) return best_mu;
  double lo = bracket->first, hi = bracket->second;
  double flo = residual_at(lo);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = residual_at(mid);
    if (flo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
    if (hi - lo < 1e-10 * std::max(1.0, lo)) break;
  }
  return 0.5 * (lo + hi);
}

inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol * std::max(1.0, std::abs(a))) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1; x1 = b - phi * (b - a); f1 = f(x1);
    } else {
      a = x1; x1 = x2; f1 = f2; x2 = a + phi * (b - a); f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// Coordinate golden-section on (mu_1, mu_2) with mu_2 >= mu_1.
inline void update_mu_2rsb(ReplicaState& s, const ModelConfig& cfg, const Quadratures& quad,
                           double mu_lo, double mu_hi) {
  if (s.p[0] < 1e-13 && s.p[1] < 1e-13) return;
  auto objective = [&](double m1, double m2) {
    ReplicaState t = s;
    t.mu[0] = m1;
    t.mu[1] = m2;
    return mu_objective(t, cfg, quad);
  };
  for (int sweep = 0; sweep < 2; ++sweep) {
    const double m2 = s.mu[1];
    s.mu[0] = golden_min([&](double m1) { return objective(m1, std::max(m2, m1)); }, mu_lo,
                         std::min(mu_hi, m2), 1e-4);
    s.mu[1] = golden_min([&](double m2v) { return objective(s.mu[0], m2v); }, s.mu[0], mu_hi, 1e-4);
  }
}

}  // namespace detail

inline std::vector<ReplicaState> default_starts(const ModelConfig& cfg, int b) {
  const double lam = cfg.lambda;
  const double power = std::max(cfg.prior.second_moment(), 1e-6);
  std::vector<ReplicaState> starts;
  for (double cs : {0.01, 0.1, 1.0, 10.0}) {
    for (double qs : {0.01, 0.3, 1.0}) {
      const double chi = cs * lam;
      const double q = qs * power;
      if (b == 0) {
        starts.emplace_back(chi, q);
        continue;
      }
      for (double ps : {0.0, 0.5}) {
        for (double mu : {0.5, 2.0}) {
          std::vector<double> p(static_cast<std::size_t>(b), ps * q / b);
          std::vector<double> mus(static_cast<std::size_t>(b));
          for (int k = 0; k < b; ++k) mus[static_cast<std::size_t>(k)] = mu * std::pow(2.0, k);
          starts.emplace_back(chi, q, std::move(p), std::move(mus));
        }
      }
    }
  }
  return starts;
}

// Spectral radius of the numerical Jacobian of the transition map on
// (chi, p_1..p_b, q) at fixed mu; the operational stability proxy.
inline double transition_jacobian_radius(const ReplicaState& s, const ModelConfig& cfg,
                                         const Quadratures& quad) {
  const int b = s.breaking();
  const int dim = b + 2;
  auto pack = [&](const ReplicaState& t) {
    Eigen::VectorXd v(dim);
    v(0) = t.chi;
    for (int k = 0; k < b; ++k) v(k + 1) = t.p[static_cast<std::size_t>(k)];
    v(dim - 1) = t.q;
    return v;
  };
  auto unpack = [&](const Eigen::VectorXd& v) {
    ReplicaState t = s;
    t.chi = std::max(v(0), 0.0);
    for (int k = 0; k < b; ++k) t.p[static_cast<std::size_t>(k)] = std::max(v(k + 1), 0.0);
    t.q = std::max(v(dim - 1), 0.0);
    return t;
  };
  const Eigen::VectorXd v0 = pack(s);
  const Eigen::VectorXd f0 = pack(transition(s, cfg, quad).next);
  Eigen::MatrixXd jac(dim, dim);
  for (int j = 0; j < dim; ++j) {
    const double h = std::max(1e-7, 1e-5 * std::abs(v0(j)));
    Eigen::VectorXd vj = v0;
    vj(j) += h;
    const Eigen::VectorXd fj = pack(transition(unpack(vj), cfg, quad).next);
    jac.col(j) = (fj - f0) / h;
  }
  return jac.eigenvalues().cwiseAbs().maxCoeff();
}

inline SolveResult solve(const ModelConfig& cfg, int b, const SolverConfig& scfg, const Quadratures& quad) {
  if (b < 0 || b > 2) throw std::invalid_argument("solve: b in {0, 1, 2} supported");
  std::vector<ReplicaState> starts = scfg.starts.empty() ? default_starts(cfg, b) : scfg.starts;
  SolveResult out;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    ReplicaState state = starts[si];
    if (state.breaking() != b) throw std::invalid_argument("solve: start has wrong breaking order");
    StartDiagnostic diag;
    diag.start_index = si;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    bool failed = false;
    // Stiff maps (large-rate ensembles) need heavier damping than the
    // configured default; halve it whenever a window of iterations makes no
    // progress on the residual.
    double damping = scfg.damping;
    double window_best = std::numeric_limits<double>::infinity();
    double prev_window_best = std::numeric_limits<double>::infinity();
    const int window = 100;
    for (; it < scfg.max_iter; ++it) {
      TransitionResult tr;
      try {
        tr = transition(state, cfg, quad);
      } catch (const std::exception&) {
        failed = true;  // left the R-transform domain; report as divergent
        break;
      }
      ReplicaState next = state;
      next.chi = state.chi + damping * (tr.next.chi - state.chi);
      next.q = state.q + damping * (tr.next.q - state.q);
      for (int k = 0; k < b; ++k) {
        next.p[static_cast<std::size_t>(k)] =
            state.p[static_cast<std::size_t>(k)] +
            damping * (tr.next.p[static_cast<std::size_t>(k)] - state.p[static_cast<std::size_t>(k)]);
      }
      detail::project_nonnegative(next);
      if (b == 1) {
        try {
          next.mu[0] = detail::update_mu_1rsb(next, cfg, quad, scfg.mu_lo, scfg.mu_hi);
        } catch (const std::exception&) {
          failed = true;
          break;
        }
      } else if (b == 2) {
        try {
          detail::update_mu_2rsb(next, cfg, quad, scfg.mu_lo, scfg.mu_hi);
        } catch (const std::exception&) {
          failed = true;
          break;
        }
      }
      residual = detail::state_distance(next, state);
      state = next;
      if (residual <= scfg.tol) break;
      window_best = std::min(window_best, residual);
      if ((it + 1) % window == 0) {
        if (!(window_best < 0.9 * prev_window_best) && damping > 0.021) damping *= 0.5;
        prev_window_best = window_best;
        window_best = std::numeric_limits<double>::infinity();
      }
    }
    diag.iterations = it;
    diag.residual = residual;
    const bool converged = !failed && residual <= scfg.tol;
    EffectiveChannel chan;
    bool physical = false;
    if (converged) {
      try {
        chan = effective_channel(state, cfg);
        physical = chan.physical;
      } catch (const std::exception&) {
        physical = false;
      }
    }
    diag.converged = converged && physical;
    diag.physical = physical;
    out.diagnostics.push_back(diag);
    if (!diag.converged) continue;

    const bool duplicate = std::any_of(out.solutions.begin(), out.solutions.end(), [&](const auto& sol) {
      return detail::state_distance(sol.state, state) < 10.0 * scfg.tol;
    });
    if (duplicate) continue;

    FixedPointSolution sol;
    sol.state = state;
    sol.channel = chan;
    sol.converged = true;
    sol.iterations = it;
    sol.residual = residual;
    sol.free_energy = free_energy_zero_T(state, cfg, quad);
    sol.entropy = entropy_zero_T(state.chi, cfg, quad);
    sol.jacobian_radius = transition_jacobian_radius(state, cfg, quad);
    sol.stable = sol.jacobian_radius < 1.0;
    out.solutions.push_back(std::move(sol));
  }
  return out;
}

// Converged solution of minimal free energy; ties break toward smaller q.
inline const FixedPointSolution& select_ansatz(const std::vector<FixedPointSolution>& solutions) {
  if (solutions.empty()) throw std::runtime_error("select_ansatz: no converged solutions");
  const FixedPointSolution* best = &solutions.front();
  for (const auto& sol : solutions) {
    if (sol.free_energy < best->free_energy - 1e-12 ||
        (std::abs(sol.free_energy - best->free_energy) <= 1e-12 && sol.state.q < best->state.q)) {
      best = &sol;
    }
  }
  return *best;
}

}  // namespace replica
