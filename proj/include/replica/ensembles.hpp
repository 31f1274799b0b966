#pragma once

// Spectral ensembles of the Gramian J = A^T A and their Stieltjes /
// R-transform calculus.  The sensing matrix enters all predictions only
// through these transforms.

#include "replica/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace replica {

class SpectralEnsemble {
 public:
  enum class Kind { MarcenkoPastur, Projector, Empirical };

  static SpectralEnsemble marcenko_pastur(double r) {
    if (!(r > 0.0)) throw std::invalid_argument("MarcenkoPastur: r must be positive");
    SpectralEnsemble e;
    e.kind_ = Kind::MarcenkoPastur;
    e.r_ = r;
    return e;
  }

  static SpectralEnsemble projector(double r) {
    if (!(r >= 1.0)) throw std::invalid_argument("Projector: requires r >= 1");
    SpectralEnsemble e;
    e.kind_ = Kind::Projector;
    e.r_ = r;
    return e;
  }

  static SpectralEnsemble empirical(std::vector<double> eigenvalues, double r = 1.0) {
    if (eigenvalues.empty()) throw std::invalid_argument("Empirical: eigenvalue list empty");
    for (double t : eigenvalues) {
      if (!(t >= 0.0)) throw std::invalid_argument("Empirical: eigenvalues must be nonnegative");
    }
    std::sort(eigenvalues.begin(), eigenvalues.end());
    SpectralEnsemble e;
    e.kind_ = Kind::Empirical;
    e.r_ = r;
    e.eigenvalues_ = std::move(eigenvalues);
    return e;
  }

  // One nonnegative real per line.
  static SpectralEnsemble from_file(const std::string& path, double r = 1.0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Empirical: cannot open " + path);
    std::vector<double> eig;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      double v;
      if (ss >> v) eig.push_back(v);
    }
    return empirical(std::move(eig), r);
  }

  Kind kind() const { return kind_; }
  double rate() const { return r_; }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }

  double mean_eigenvalue() const {
    switch (kind_) {
      case Kind::MarcenkoPastur:
      case Kind::Projector:
        return 1.0;
      case Kind::Empirical:
        return std::accumulate(eigenvalues_.begin(), eigenvalues_.end(), 0.0) /
               static_cast<double>(eigenvalues_.size());
    }
    return 0.0;
  }

  // G(s) = E (t - s)^{-1}, s real, outside the support of F_J.
  double stieltjes(double s) const {
    switch (kind_) {
      case Kind::MarcenkoPastur: {
        // sr g^2 + (s - 1 + r) g + 1 = 0, from R(w) = 1/(1 - rw).
        const double b = s - 1.0 + r_;
        const double disc = b * b - 4.0 * s * r_;
        const double lo = (1.0 - std::sqrt(r_)) * (1.0 - std::sqrt(r_));
        const double hi = (1.0 + std::sqrt(r_)) * (1.0 + std::sqrt(r_));
        const double support_lo = (r_ > 1.0) ? 0.0 : lo;
        if (disc < 0.0 || (s >= support_lo && s <= hi)) {
          throw std::domain_error("stieltjes: s inside Marcenko-Pastur support");
        }
        const double root = std::sqrt(disc);
        if (s < support_lo) return (-b - root) / (2.0 * s * r_);
        return (-b + root) / (2.0 * s * r_);
      }
      case Kind::Projector: {
        // Mass 1/r at r and 1 - 1/r at 0.
        if (s == 0.0 || s == r_) throw std::domain_error("stieltjes: s inside Projector support");
        return (1.0 / r_) / (r_ - s) - (1.0 - 1.0 / r_) / s;
      }
      case Kind::Empirical: {
        double acc = 0.0;
        for (double t : eigenvalues_) {
          if (t == s) throw std::domain_error("stieltjes: s hits an eigenvalue");
          acc += 1.0 / (t - s);
        }
        return acc / static_cast<double>(eigenvalues_.size());
      }
    }
    return 0.0;
  }

  // R(w) = G^{-1}(-w) - 1/w, continued to w = 0 by R(0) = E t.
  double r_transform(double omega) const {
    switch (kind_) {
      case Kind::MarcenkoPastur: {
        const double den = 1.0 - r_ * omega;
        if (!(den > 0.0)) throw std::domain_error("r_transform: Marcenko-Pastur pole, r*omega >= 1");
        return 1.0 / den;
      }
      case Kind::Projector: {
        // Cancellation-free form of (rw - 1 + sqrt((rw-1)^2 + 4w)) / (2w).
        // At r = 1 the measure is the unit atom at 1 (R identically 1) and
        // the discriminant (w+1)^2 would put sqrt on the wrong branch past
        // w = -1, so it is handled directly.
        if (r_ == 1.0) return 1.0;
        const double disc = projector_disc(omega);
        const double den = 1.0 - r_ * omega + std::sqrt(disc);
        if (!(den > 0.0)) throw std::domain_error("r_transform: Projector branch violation");
        return 2.0 / den;
      }
      case Kind::Empirical:
        return empirical_r(omega);
    }
    return 0.0;
  }

  double r_transform_deriv(double omega) const {
    switch (kind_) {
      case Kind::MarcenkoPastur: {
        const double den = 1.0 - r_ * omega;
        if (!(den > 0.0)) throw std::domain_error("r_transform_deriv: Marcenko-Pastur pole");
        return r_ / (den * den);
      }
      case Kind::Projector: {
        if (r_ == 1.0) return 0.0;
        const double disc = projector_disc(omega);
        const double sq = std::sqrt(disc);
        if (!(sq > 0.0)) throw std::domain_error("r_transform_deriv: Projector support edge");
        const double sq_deriv = (r_ * (r_ * omega - 1.0) + 2.0) / sq;
        const double den = 1.0 - r_ * omega + sq;
        return -2.0 * (sq_deriv - r_) / (den * den);
      }
      case Kind::Empirical: {
        const double h = 1e-6 * std::max(1.0, std::abs(omega));
        return (empirical_r(omega + h) - empirical_r(omega - h)) / (2.0 * h);
      }
    }
    return 0.0;
  }

  // \int_{lo}^{hi} R(w) dw.
  double r_integral(double omega_lo, double omega_hi, const LegendreRule& rule) const {
    if (!(omega_lo <= omega_hi)) throw std::invalid_argument("r_integral: omega_lo > omega_hi");
    if (omega_lo == omega_hi) return 0.0;
    if (kind_ == Kind::MarcenkoPastur) {
      const double den_lo = 1.0 - r_ * omega_lo;
      const double den_hi = 1.0 - r_ * omega_hi;
      if (!(den_lo > 0.0) || !(den_hi > 0.0)) throw std::domain_error("r_integral: Marcenko-Pastur pole");
      return (std::log(den_lo) - std::log(den_hi)) / r_;
    }
    return integrate([this](double w) { return r_transform(w); }, omega_lo, omega_hi, rule);
  }

 private:
  double projector_disc(double omega) const {
    const double t = r_ * omega - 1.0;
    const double disc = t * t + 4.0 * omega;
    if (disc < 0.0) throw std::domain_error("r_transform: omega outside Projector domain");
    return disc;
  }

  // Monotone bisection on s -> G(s) over s < min eigenvalue (or s > max for
  // omega > 0), expanding the bracket geometrically.
  double empirical_r(double omega) const {
    if (omega == 0.0) return mean_eigenvalue();
    const double target = -omega;
    const double tmin = eigenvalues_.front();
    const double tmax = eigenvalues_.back();
    double lo, hi;
    if (omega < 0.0) {
      // G increases from 0+ to +inf on (-inf, tmin).
      hi = tmin - 1e-12 * std::max(1.0, std::abs(tmin)) - 1e-300;
      double step = std::max(1.0, std::abs(tmin));
      lo = tmin - step;
      for (int i = 0; i < 200 && stieltjes(lo) > target; ++i) {
        step *= 2.0;
        lo = tmin - step;
      }
      if (stieltjes(lo) > target) throw std::runtime_error("r_transform: Empirical bracketing failed");
    } else {
      // G increases from -inf to 0- on (tmax, +inf).
      lo = tmax + 1e-12 * std::max(1.0, std::abs(tmax)) + 1e-300;
      double step = std::max(1.0, std::abs(tmax));
      hi = tmax + step;
      for (int i = 0; i < 200 && stieltjes(hi) < target; ++i) {
        step *= 2.0;
        hi = tmax + step;
      }
      if (stieltjes(hi) < target) throw std::runtime_error("r_transform: Empirical bracketing failed");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double g = stieltjes(mid);
      if (std::abs(g - target) < 1e-12 * std::abs(target)) {
        lo = hi = mid;
        break;
      }
      if (g < target) lo = mid; else hi = mid;
      if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
    }
    const double s = 0.5 * (lo + hi);
    return s - 1.0 / omega;  // R(w) = G^{-1}(-w) - 1/w
  }

  Kind kind_ = Kind::MarcenkoPastur;
  double r_ = 1.0;
  std::vector<double> eigenvalues_;
};

}  // namespace replica
