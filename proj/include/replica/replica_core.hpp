#pragma once

// Replica-state vector, effective decoupled-channel parameters, the tilted
// measures of the breaking levels, and the transition map of the replica
// simulator.

#include "replica/denoisers.hpp"
#include "replica/ensembles.hpp"
#include "replica/quadrature.hpp"
#include "replica/sources.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace replica {

struct Quadratures {
  GaussHermiteRule gh;
  LegendreRule leg;

  static Quadratures make(int gh_order = 61, int leg_order = 64) {
    return Quadratures{GaussHermiteRule::make(gh_order), LegendreRule::make(leg_order)};
  }
};

// s = [chi, mu_1..mu_b, p_1..p_b, q]; b = 0 is the replica-symmetric case.
struct ReplicaState {
  double chi = 0.0;
  double q = 0.0;
  std::vector<double> p;
  std::vector<double> mu;

  ReplicaState() = default;
  ReplicaState(double chi_, double q_) : chi(chi_), q(q_) {}
  ReplicaState(double chi_, double q_, std::vector<double> p_, std::vector<double> mu_)
      : chi(chi_), q(q_), p(std::move(p_)), mu(std::move(mu_)) {
    if (p.size() != mu.size()) throw std::invalid_argument("ReplicaState: p/mu size mismatch");
  }

  int breaking() const { return static_cast<int>(p.size()); }

  // chi_tilde_k = chi + sum_{s<=k} mu_s p_s
  double chi_tilde(int k) const {
    double acc = chi;
    for (int s = 0; s < k; ++s) acc += mu[static_cast<std::size_t>(s)] * p[static_cast<std::size_t>(s)];
    return acc;
  }
};

struct EffectiveChannel {
  double lambda_s = 0.0;              // lambda^s
  double lambda0_s = 0.0;             // lambda_0^s
  std::vector<double> lambda_k;       // lambda_1^s .. lambda_b^s
  bool physical = true;               // false when lambda_0^s < 0 before clamping
};

struct ModelConfig {
  SpectralEnsemble ensemble;
  SourcePrior prior;
  Utility utility;
  double lambda = 0.1;   // estimation parameter, > 0
  double lambda0 = 0.0;  // true noise variance, >= 0

  ModelConfig(SpectralEnsemble e, SourcePrior pr, Utility u, double lam, double lam0)
      : ensemble(std::move(e)), prior(std::move(pr)), utility(std::move(u)), lambda(lam), lambda0(lam0) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ModelConfig: lambda must be positive");
    if (!(lambda0 >= 0.0)) throw std::invalid_argument("ModelConfig: lambda0 must be nonnegative");
  }
};

// Levels whose lambda_k^s falls below this threshold carry no tilt and get
// their p pinned to zero by the transition inversion.
inline constexpr double kLevelEpsilon = 1e-14;

inline EffectiveChannel effective_channel(const ReplicaState& s, const ModelConfig& cfg) {
  const int b = s.breaking();
  const double lam = cfg.lambda;
  const double r0 = cfg.ensemble.r_transform(-s.chi_tilde(0) / lam);
  EffectiveChannel chan;
  chan.lambda_s = lam / r0;
  chan.lambda_k.resize(static_cast<std::size_t>(b));
  for (int k = 1; k <= b; ++k) {
    const double rm = cfg.ensemble.r_transform(-s.chi_tilde(k - 1) / lam);
    const double rk = cfg.ensemble.r_transform(-s.chi_tilde(k) / lam);
    chan.lambda_k[static_cast<std::size_t>(k - 1)] =
        (rm - rk) * lam / (s.mu[static_cast<std::size_t>(k - 1)] * r0 * r0);
  }
  const double chib = s.chi_tilde(b);
  const double rb = cfg.ensemble.r_transform(-chib / lam);
  const double rbp = cfg.ensemble.r_transform_deriv(-chib / lam);
  chan.lambda0_s = (cfg.lambda0 * rb - (cfg.lambda0 * chib - lam * s.q) * rbp / lam) / (r0 * r0);
  if (chan.lambda0_s < 0.0) {
    chan.physical = false;
  }
  for (double& lk : chan.lambda_k) {
    if (lk < 0.0 && lk > -1e-12) lk = 0.0;
  }
  return chan;
}

namespace detail {

// Log of the innermost tilt Lambda_1 at a realized observation y with
// denoised output g.
inline double log_tilt_level1(double mu1, double lambda_s, const Utility& u, double x, double y, double g) {
  const double dy = y - g;
  const double dn = y - x;
  return -mu1 * ((dy * dy - dn * dn) / (2.0 * lambda_s) + u(g));
}

struct DecoupledSample {
  double weight = 0.0;  // joint prior x Gaussian x tilt weight
  double x = 0.0;
  double y = 0.0;
  double g = 0.0;
  std::array<double, 3> z{0.0, 0.0, 0.0};  // z_0, z_1, z_2
};

// Enumerates the decoupled system of breaking order b <= 2 on the tensor
// quadrature grid and hands each sample (with its tilted joint weight) to
// the callback.  All level normalizers run in log-space.
template <class Callback>
void for_each_decoupled(const ReplicaState& s, const ModelConfig& cfg, const EffectiveChannel& chan,
                        const Quadratures& quad, Callback&& cb) {
  const int b = s.breaking();
  if (b > 2) throw std::invalid_argument("for_each_decoupled: b > 2 not supported");
  const double ls = chan.lambda_s;
  const double s0 = std::sqrt(std::max(chan.lambda0_s, 0.0));
  const DenoiserSpec spec(cfg.utility, ls);
  const auto& gh = quad.gh;
  const std::size_t n = gh.nodes.size();

  const bool lvl1 = b >= 1 && chan.lambda_k[0] > kLevelEpsilon;
  const bool lvl2 = b >= 2 && chan.lambda_k[1] > kLevelEpsilon;
  const double s1 = lvl1 ? std::sqrt(chan.lambda_k[0]) : 0.0;
  const double s2 = lvl2 ? std::sqrt(chan.lambda_k[1]) : 0.0;

  cfg.prior.for_each_mass(
      [&](double x, double px) {
        if (px == 0.0) return;
        for (std::size_t i0 = 0; i0 < n; ++i0) {
          const double z0 = gh.nodes[i0];
          const double w0 = px * gh.weights[i0];
          const double base = x + s0 * z0;
          if (b == 0 || (!lvl1 && !lvl2)) {
            // No active tilt; inner Gaussians (if any) are unit-weighted and
            // do not move y, so the level sums collapse.
            DecoupledSample smp;
            smp.weight = w0;
            smp.x = x;
            smp.y = base;
            smp.g = denoise(spec, smp.y);
            smp.z[0] = z0;
            cb(smp);
            continue;
          }
          if (b == 1 || !lvl2) {
            // Single active level (z_1 for b=1; for b=2 with a dead level 2
            // the z_2 direction is untilted and unit-variance-averaged out).
            std::vector<double> lt(n), gv(n), yv(n);
            for (std::size_t i1 = 0; i1 < n; ++i1) {
              const double y = base + s1 * gh.nodes[i1];
              const double g = denoise(spec, y);
              yv[i1] = y;
              gv[i1] = g;
              lt[i1] = log_tilt_level1(s.mu[0], ls, cfg.utility, x, y, g);
            }
            const double norm = log_sum_exp(lt, gh.weights);
            for (std::size_t i1 = 0; i1 < n; ++i1) {
              DecoupledSample smp;
              smp.weight = w0 * gh.weights[i1] * std::exp(lt[i1] - norm);
              smp.x = x;
              smp.y = yv[i1];
              smp.g = gv[i1];
              smp.z[0] = z0;
              smp.z[1] = gh.nodes[i1];
              cb(smp);
            }
            continue;
          }
          if (!lvl1) {
            // b = 2 with level 1 dead: only the z_2 tilt survives, with
            // exponent mu_2 (the mu_2/mu_1 power of the z_1-independent
            // inner integral).
            std::vector<double> lt(n), gv(n), yv(n);
            for (std::size_t i2 = 0; i2 < n; ++i2) {
              const double y = base + s2 * gh.nodes[i2];
              const double g = denoise(spec, y);
              yv[i2] = y;
              gv[i2] = g;
              lt[i2] = log_tilt_level1(s.mu[1], ls, cfg.utility, x, y, g);
            }
            const double norm = log_sum_exp(lt, gh.weights);
            for (std::size_t i2 = 0; i2 < n; ++i2) {
              DecoupledSample smp;
              smp.weight = w0 * gh.weights[i2] * std::exp(lt[i2] - norm);
              smp.x = x;
              smp.y = yv[i2];
              smp.g = gv[i2];
              smp.z[0] = z0;
              smp.z[2] = gh.nodes[i2];
              cb(smp);
            }
            continue;
          }
          // Full b = 2 nesting: z_1 innermost, z_2 outer, z_0 outermost.
          const double ratio = s.mu[1] / s.mu[0];
          std::vector<std::vector<double>> lt1(n, std::vector<double>(n));
          std::vector<std::vector<double>> gv(n, std::vector<double>(n));
          std::vector<std::vector<double>> yv(n, std::vector<double>(n));
          std::vector<double> log_inner(n), lt2(n);
          for (std::size_t i2 = 0; i2 < n; ++i2) {
            const double y2 = base + s2 * gh.nodes[i2];
            for (std::size_t i1 = 0; i1 < n; ++i1) {
              const double y = y2 + s1 * gh.nodes[i1];
              const double g = denoise(spec, y);
              yv[i2][i1] = y;
              gv[i2][i1] = g;
              lt1[i2][i1] = log_tilt_level1(s.mu[0], ls, cfg.utility, x, y, g);
            }
            log_inner[i2] = log_sum_exp(lt1[i2], gh.weights);
            lt2[i2] = ratio * log_inner[i2];
          }
          const double norm2 = log_sum_exp(lt2, gh.weights);
          for (std::size_t i2 = 0; i2 < n; ++i2) {
            const double w2 = gh.weights[i2] * std::exp(lt2[i2] - norm2);
            for (std::size_t i1 = 0; i1 < n; ++i1) {
              DecoupledSample smp;
              smp.weight = w0 * w2 * gh.weights[i1] * std::exp(lt1[i2][i1] - log_inner[i2]);
              smp.x = x;
              smp.y = yv[i2][i1];
              smp.g = gv[i2][i1];
              smp.z[0] = z0;
              smp.z[1] = gh.nodes[i1];
              smp.z[2] = gh.nodes[i2];
              cb(smp);
            }
          }
        }
      },
      quad.gh);
}

// E (g - x)^2 and E (g - x) z for a threshold denoiser over y = x + sigma z,
// z ~ N(0,1): exact Gaussian-tail forms.  Quadrature of the indicator part
// would make the transition map discontinuous in the state (nodes crossing
// the threshold), which shows up as micro limit cycles in the solver.
struct ThresholdStats {
  double mse = 0.0;
  double corr = 0.0;  // E (g - x) z
};

inline ThresholdStats threshold_stats(double x, double sigma, double t, bool soft) {
  auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  auto sf = [](double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); };
  const double a = (-t - x) / sigma;
  const double b = (t - x) / sigma;
  // Partial second moments of z on the three regions.
  const double m2_lo = cdf(a) - a * phi(a);
  const double m2_hi = sf(b) + b * phi(b);
  ThresholdStats out;
  out.mse = x * x * (cdf(b) - cdf(a));
  out.corr = -x * (phi(a) - phi(b));
  if (soft) {
    out.mse += sigma * sigma * m2_hi - 2.0 * sigma * t * phi(b) + t * t * sf(b);
    out.mse += sigma * sigma * m2_lo - 2.0 * sigma * t * phi(a) + t * t * cdf(a);
    out.corr += sigma * (m2_hi + m2_lo) - t * (phi(b) + phi(a));
  } else {
    out.mse += sigma * sigma * (m2_hi + m2_lo);
    out.corr += sigma * (m2_hi + m2_lo);
  }
  return out;
}

}  // namespace detail

// Input-output statistics of the decoupled system at a given state.
struct DecoupledStats {
  double mse = 0.0;                // E (g - x)^2
  std::vector<double> corr;        // C_0 .. C_b (already divided by sqrt(lambda_k^s) where active)
  std::vector<double> raw_corr;    // E (g - x) z_k without the division
  std::vector<bool> level_active;  // index 0 is the z_0 level
};

inline DecoupledStats decoupled_stats(const ReplicaState& s, const ModelConfig& cfg,
                                      const EffectiveChannel& chan, const Quadratures& quad) {
  const int b = s.breaking();
  DecoupledStats st;
  st.raw_corr.assign(static_cast<std::size_t>(b + 1), 0.0);
  st.corr.assign(static_cast<std::size_t>(b + 1), 0.0);
  st.level_active.assign(static_cast<std::size_t>(b + 1), false);
  st.level_active[0] = chan.lambda0_s > kLevelEpsilon;
  bool any_tilt = false;
  for (int k = 1; k <= b; ++k) {
    st.level_active[static_cast<std::size_t>(k)] = chan.lambda_k[static_cast<std::size_t>(k - 1)] > kLevelEpsilon;
    any_tilt = any_tilt || st.level_active[static_cast<std::size_t>(k)];
  }
  const Utility& u = cfg.utility;
  if (!any_tilt && st.level_active[0] && u.support == Utility::Support::Reals &&
      (u.kind == Utility::Kind::L1 || u.kind == Utility::Kind::L0)) {
    // Untilted Gaussian channel with a scalar threshold rule: exact tail
    // integrals instead of quadrature over the discontinuity.
    const bool soft = u.kind == Utility::Kind::L1;
    const double sigma = std::sqrt(chan.lambda0_s);
    const double t = soft ? chan.lambda_s : std::sqrt(2.0 * chan.lambda_s);
    cfg.prior.for_each_mass(
        [&](double x, double px) {
          if (px == 0.0) return;
          const auto ts = detail::threshold_stats(x, sigma, t, soft);
          st.mse += px * ts.mse;
          st.raw_corr[0] += px * ts.corr;
        },
        quad.gh);
    st.corr[0] = st.raw_corr[0] / sigma;
    return st;
  }
  detail::for_each_decoupled(s, cfg, chan, quad, [&](const detail::DecoupledSample& smp) {
    const double err = smp.g - smp.x;
    st.mse += smp.weight * err * err;
    for (int k = 0; k <= b; ++k) {
      st.raw_corr[static_cast<std::size_t>(k)] += smp.weight * err * smp.z[static_cast<std::size_t>(k)];
    }
  });
  for (int k = 0; k <= b; ++k) {
    const std::size_t ku = static_cast<std::size_t>(k);
    const double lk = (k == 0) ? chan.lambda0_s : chan.lambda_k[ku - 1];
    st.corr[ku] = st.level_active[ku] ? st.raw_corr[ku] / std::sqrt(lk) : st.raw_corr[ku];
  }
  return st;
}

struct TransitionResult {
  ReplicaState next;
  DecoupledStats stats;
  EffectiveChannel channel;
};

// One application of the replica-simulator transition map: realize the
// decoupled system at state s, read off MSE and the noise-error
// correlations, and invert the linear steady-state relations for the new
// state.  mu is held fixed.
inline TransitionResult transition(const ReplicaState& s, const ModelConfig& cfg, const Quadratures& quad) {
  const int b = s.breaking();
  TransitionResult out;
  out.channel = effective_channel(s, cfg);
  out.stats = decoupled_stats(s, cfg, out.channel, quad);
  const double ls = out.channel.lambda_s;
  const double mse = out.stats.mse;

  ReplicaState next = s;  // keeps mu
  next.p.assign(static_cast<std::size_t>(b), 0.0);
  std::vector<int> active;
  for (int k = 1; k <= b; ++k) {
    if (out.stats.level_active[static_cast<std::size_t>(k)]) active.push_back(k);
  }
  const double c0 = out.stats.level_active[0] ? out.stats.corr[0] : out.stats.raw_corr[0];
  if (active.empty()) {
    next.chi = ls * c0;
    next.q = mse;
    out.next = std::move(next);
    return out;
  }
  // chi from the lowest active level, q from the highest, the intermediate
  // partial sums S_k = sum_{j >= k} p_j + q from consecutive pairs.
  const int kmin = active.front();
  const int kmax = active.back();
  const double mu_min = s.mu[static_cast<std::size_t>(kmin - 1)];
  const double mu_max = s.mu[static_cast<std::size_t>(kmax - 1)];
  next.chi = ls * out.stats.corr[static_cast<std::size_t>(kmin)] - mu_min * mse;
  next.q = ls * (out.stats.corr[static_cast<std::size_t>(kmax)] - c0) / mu_max;
  std::vector<double> S(active.size() + 1);
  S.front() = mse;
  S.back() = next.q;
  for (std::size_t i = 0; i + 1 < active.size(); ++i) {
    const double mu_a = s.mu[static_cast<std::size_t>(active[i] - 1)];
    const double mu_b = s.mu[static_cast<std::size_t>(active[i + 1] - 1)];
    const double ca = out.stats.corr[static_cast<std::size_t>(active[i])];
    const double cb = out.stats.corr[static_cast<std::size_t>(active[i + 1])];
    S[i + 1] = ls * (ca - cb) / (mu_a - mu_b);
  }
  for (std::size_t i = 0; i < active.size(); ++i) {
    next.p[static_cast<std::size_t>(active[i] - 1)] = S[i] - S[i + 1];
  }
  out.next = std::move(next);
  return out;
}

// Per-level log Lambda_kappa at the given (x, z_0..z_b); inner levels are
// integrated out by quadrature.
inline std::vector<double> tilt_stack(const ReplicaState& s, const ModelConfig& cfg,
                                      const EffectiveChannel& chan, double x,
                                      const std::vector<double>& z, const Quadratures& quad) {
  const int b = s.breaking();
  if (b < 1) throw std::invalid_argument("tilt_stack: requires b >= 1");
  if (static_cast<int>(z.size()) != b + 1) throw std::invalid_argument("tilt_stack: needs b + 1 z values");
  const double ls = chan.lambda_s;
  const DenoiserSpec spec(cfg.utility, ls);
  const double s0 = std::sqrt(std::max(chan.lambda0_s, 0.0));
  std::vector<double> sk(static_cast<std::size_t>(b));
  for (int k = 1; k <= b; ++k) {
    sk[static_cast<std::size_t>(k - 1)] = std::sqrt(std::max(chan.lambda_k[static_cast<std::size_t>(k - 1)], 0.0));
  }
  std::vector<double> out;
  {
    double y = x + s0 * z[0];
    for (int k = 1; k <= b; ++k) y += sk[static_cast<std::size_t>(k - 1)] * z[static_cast<std::size_t>(k)];
    const double g = denoise(spec, y);
    out.push_back(detail::log_tilt_level1(s.mu[0], ls, cfg.utility, x, y, g));
  }
  if (b >= 2) {
    // log Lambda_2(z_2, z_0, x) = (mu_2 / mu_1) log \int Lambda_1 Dz_1
    const double base = x + s0 * z[0] + sk[1] * z[2];
    const auto& gh = quad.gh;
    std::vector<double> lt(gh.nodes.size());
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      const double y = base + sk[0] * gh.nodes[i];
      const double g = denoise(spec, y);
      lt[i] = detail::log_tilt_level1(s.mu[0], ls, cfg.utility, x, y, g);
    }
    out.push_back(s.mu[1] / s.mu[0] * log_sum_exp(lt, gh.weights));
  }
  return out;
}

// Signed residual of the 1RSB mu fixed-point equation.
inline double mu_residual(const ReplicaState& s, const ModelConfig& cfg, const Quadratures& quad) {
  if (s.breaking() != 1) throw std::invalid_argument("mu_residual: requires b = 1");
  const EffectiveChannel chan = effective_channel(s, cfg);
  const double ls = chan.lambda_s;
  const double l1 = chan.lambda_k[0];
  const double mu = s.mu[0];
  const double p = s.p[0];
  const double lhs = mu / (2.0 * ls) * (mu * (l1 / ls) * s.q + p) -
                     0.5 * cfg.ensemble.r_integral(-(s.chi + mu * p) / cfg.lambda, -s.chi / cfg.lambda, quad.leg);
  if (!(l1 > kLevelEpsilon)) return lhs;  // tilt is flat, the RHS vanishes
  double rhs = 0.0;
  // E int log(tilde Lambda) tilde Lambda Dz1 Dz0.  The per-(x, z0)
  // normalizer is recomputed from the per-sample tilt value.
  const auto& gh = quad.gh;
  const std::size_t n = gh.nodes.size();
  const double s0 = std::sqrt(std::max(chan.lambda0_s, 0.0));
  const double s1 = std::sqrt(l1);
  const DenoiserSpec spec(cfg.utility, ls);
  cfg.prior.for_each_mass(
      [&](double x, double px) {
        if (px == 0.0) return;
        for (std::size_t i0 = 0; i0 < n; ++i0) {
          const double base = x + s0 * gh.nodes[i0];
          std::vector<double> lt(n);
          for (std::size_t i1 = 0; i1 < n; ++i1) {
            const double y = base + s1 * gh.nodes[i1];
            lt[i1] = detail::log_tilt_level1(mu, ls, cfg.utility, x, y, denoise(spec, y));
          }
          const double norm = log_sum_exp(lt, gh.weights);
          double acc = 0.0;
          for (std::size_t i1 = 0; i1 < n; ++i1) {
            const double log_tilde = lt[i1] - norm;
            acc += gh.weights[i1] * std::exp(log_tilde) * log_tilde;
          }
          rhs += px * gh.weights[i0] * acc;
        }
      },
      quad.gh);
  return lhs - rhs;
}

namespace detail {

// F(omega; state) entering the zero-temperature free energy; the empty sum
// at b = 0 reproduces the replica-symmetric form.
inline double free_energy_kernel(const ReplicaState& s, const ModelConfig& cfg, double omega) {
  const double lam = cfg.lambda;
  const int b = s.breaking();
  double acc = 0.0;
  for (int k = 1; k <= b; ++k) {
    const double ca = s.chi_tilde(k - 1);
    const double cb = s.chi_tilde(k);
    acc += (cb * cfg.ensemble.r_transform(-cb * omega / lam) -
            ca * cfg.ensemble.r_transform(-ca * omega / lam)) /
           s.mu[static_cast<std::size_t>(k - 1)];
  }
  const double chib = s.chi_tilde(b);
  const double arg = -chib * omega / lam;
  acc += (s.q - cfg.lambda0 * chib / lam) *
         (cfg.ensemble.r_transform(arg) - (chib * omega / lam) * cfg.ensemble.r_transform_deriv(arg));
  return acc;
}

// E int log [ int Lambda_b Dz_b ] Dz_0 for b in {1, 2}.
inline double log_partition_term(const ReplicaState& s, const ModelConfig& cfg,
                                 const EffectiveChannel& chan, const Quadratures& quad) {
  const int b = s.breaking();
  const double ls = chan.lambda_s;
  const DenoiserSpec spec(cfg.utility, ls);
  const auto& gh = quad.gh;
  const std::size_t n = gh.nodes.size();
  const double s0 = std::sqrt(std::max(chan.lambda0_s, 0.0));
  const double s1 = std::sqrt(std::max(chan.lambda_k[0], 0.0));
  const double s2 = b >= 2 ? std::sqrt(std::max(chan.lambda_k[1], 0.0)) : 0.0;
  double acc = 0.0;
  cfg.prior.for_each_mass(
      [&](double x, double px) {
        if (px == 0.0) return;
        for (std::size_t i0 = 0; i0 < n; ++i0) {
          const double base = x + s0 * gh.nodes[i0];
          if (b == 1) {
            std::vector<double> lt(n);
            for (std::size_t i1 = 0; i1 < n; ++i1) {
              const double y = base + s1 * gh.nodes[i1];
              lt[i1] = log_tilt_level1(s.mu[0], ls, cfg.utility, x, y, denoise(spec, y));
            }
            acc += px * gh.weights[i0] * log_sum_exp(lt, gh.weights);
          } else {
            const double ratio = s.mu[1] / s.mu[0];
            std::vector<double> lt2(n);
            std::vector<double> lt1(n);
            for (std::size_t i2 = 0; i2 < n; ++i2) {
              const double y2 = base + s2 * gh.nodes[i2];
              for (std::size_t i1 = 0; i1 < n; ++i1) {
                const double y = y2 + s1 * gh.nodes[i1];
                lt1[i1] = log_tilt_level1(s.mu[0], ls, cfg.utility, x, y, denoise(spec, y));
              }
              lt2[i2] = ratio * log_sum_exp(lt1, gh.weights);
            }
            acc += px * gh.weights[i0] * log_sum_exp(lt2, gh.weights);
          }
        }
      },
      quad.gh);
  return acc;
}

}  // namespace detail

// Zero-temperature free energy of a state (not necessarily a fixed point).
inline double free_energy_zero_T(const ReplicaState& s, const ModelConfig& cfg, const Quadratures& quad) {
  const double lam = cfg.lambda;
  const double spectral =
      (integrate([&](double w) { return detail::free_energy_kernel(s, cfg, w); }, 0.0, 1.0, quad.leg) -
       detail::free_energy_kernel(s, cfg, 1.0)) /
      (2.0 * lam);
  const EffectiveChannel chan = effective_channel(s, cfg);
  if (s.breaking() == 0) {
    const double ls = chan.lambda_s;
    const double l0s = std::max(chan.lambda0_s, 0.0);
    const double s0 = std::sqrt(l0s);
    const DenoiserSpec spec(cfg.utility, ls);
    const double term = cfg.prior.expect(
        [&](double x) {
          return expect_gaussian(
              [&](double z) {
                const double y = x + s0 * z;
                const double g = denoise(spec, y);
                return ((y - g) * (y - g) - l0s * z * z) / (2.0 * ls) + cfg.utility(g);
              },
              quad.gh);
        },
        quad.gh);
    return spectral + term;
  }
  const double mu_b = s.mu.back();
  return spectral - detail::log_partition_term(s, cfg, chan, quad) / mu_b;
}

// H^0 = (chi / 2 lambda) [ R(-chi/lambda) - \int_0^1 R(-chi w / lambda) dw ];
// the same function of chi for every breaking order.
inline double entropy_zero_T(double chi, const ModelConfig& cfg, const Quadratures& quad) {
  if (!(chi >= 0.0)) throw std::invalid_argument("entropy_zero_T: chi must be nonnegative");
  if (chi == 0.0) return 0.0;
  const double lam = cfg.lambda;
  const double mean_part = lam / chi * cfg.ensemble.r_integral(-chi / lam, 0.0, quad.leg);
  return chi / (2.0 * lam) * (cfg.ensemble.r_transform(-chi / lam) - mean_part);
}

// Objective of the mu selection for general b (minimized bracket of the
// zero-temperature free energy with the Delta correction).
inline double mu_objective(const ReplicaState& s, const ModelConfig& cfg, const Quadratures& quad) {
  const int b = s.breaking();
  if (b < 1) throw std::invalid_argument("mu_objective: requires b >= 1");
  const EffectiveChannel chan = effective_channel(s, cfg);
  const double ls = chan.lambda_s;
  const double omega_int =
      integrate([&](double w) { return detail::free_energy_kernel(s, cfg, w); }, 0.0, 1.0, quad.leg);
  const double log_part = detail::log_partition_term(s, cfg, chan, quad);
  // zeta_k = 1 - sum_{j<=k} mu_j lambda_j^s / lambda^s, zeta_0 = 1.
  std::vector<double> zeta(static_cast<std::size_t>(b + 1), 1.0);
  for (int k = 1; k <= b; ++k) {
    zeta[static_cast<std::size_t>(k)] =
        zeta[static_cast<std::size_t>(k - 1)] -
        s.mu[static_cast<std::size_t>(k - 1)] * chan.lambda_k[static_cast<std::size_t>(k - 1)] / ls;
  }
  double delta = 0.0;
  for (int k = 1; k <= b; ++k) {
    delta += (zeta[static_cast<std::size_t>(k)] * s.chi_tilde(k) -
              zeta[static_cast<std::size_t>(k - 1)] * s.chi_tilde(k - 1)) /
             s.mu[static_cast<std::size_t>(k - 1)];
  }
  delta += zeta[static_cast<std::size_t>(b)] * s.q - chan.lambda0_s / ls * s.chi_tilde(b);
  return omega_int / (2.0 * cfg.lambda) - log_part / s.mu.back() - delta / (2.0 * ls);
}

}  // namespace replica
