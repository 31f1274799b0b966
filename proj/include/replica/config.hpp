#pragma once

// Flat sectioned key-value run configuration.  All physical quantities are
// linear internally; dB enters only at parsing and leaves only in the CSV.

#include "replica/replica_core.hpp"
#include "replica/solver.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace replica {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what) {}
};

// "[section]" headers, "key = value" lines, "#" comments.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  static KeyValueFile parse(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (kv.values_.count(full)) throw ConfigError(full, "duplicate key");
      kv.values_[full] = value;
    }
    return kv;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "missing required key");
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  int get_int(const std::string& key) const {
    const double v = get_double(key);
    if (v != std::floor(v)) throw ConfigError(key, "expected an integer");
    return static_cast<int>(v);
  }
  int get_int(const std::string& key, int fallback) const { return has(key) ? get_int(key) : fallback; }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected a boolean (true/false)");
  }

  // Comma-separated values.
  std::vector<double> get_list(const std::string& key) const {
    const std::string raw = get_string(key);
    std::vector<double> out;
    std::istringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) continue;
      out.push_back(to_double(key, t));
    }
    if (out.empty()) throw ConfigError(key, "expected a comma-separated list of numbers");
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::exception&) {
      throw ConfigError(key, "not a number: '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key, "trailing characters in number: '" + v + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
};

enum class SweepVariable { Lambda, Rate, Snr };

struct MonteCarloConfig {
  bool enabled = false;
  int n = 2000;
  int instances = 50;
  std::string matrix = "iid";  // iid | projector
  std::uint64_t seed = 1;
};

// A full run description; the model is rebuilt per grid point since the
// sweep may move rate or noise.
struct RunConfig {
  // model
  std::string ensemble = "mp";  // mp | projector | empirical
  double rate = 1.0;
  std::string eigenvalues_file;  // empirical only
  std::string prior = "sparse_gaussian";  // sparse_gaussian | sparse_alphabet
  double alpha = 0.1;
  double a = 1.0;
  int kappa = 1;
  std::string utility = "l2";  // l2 | l1 | l0
  bool alphabet_support = false;
  double lambda = 0.1;
  double lambda0 = 0.01;

  // ansatz
  int b = 0;
  SolverConfig solver;

  // sweep
  SweepVariable variable = SweepVariable::Lambda;
  std::vector<double> grid;

  MonteCarloConfig mc;

  // compare
  double epsilon = 1e-3;

  // numerics
  int gh_order = 61;
  int legendre_order = 64;
  int threads = 1;

  std::string output_path;

  SourcePrior make_prior() const {
    if (prior == "sparse_gaussian") return SourcePrior::sparse_gaussian(alpha);
    if (prior == "sparse_alphabet") return SourcePrior::sparse_finite_alphabet(alpha, a, kappa);
    throw ConfigError("model.prior", "unknown prior '" + prior + "'");
  }

  SpectralEnsemble make_ensemble(double r) const {
    if (ensemble == "mp") return SpectralEnsemble::marcenko_pastur(r);
    if (ensemble == "projector") return SpectralEnsemble::projector(r);
    if (ensemble == "empirical") return SpectralEnsemble::from_file(eigenvalues_file, r);
    throw ConfigError("model.ensemble", "unknown ensemble '" + ensemble + "'");
  }

  Utility make_utility() const {
    Utility u;
    if (utility == "l2") {
      u = Utility::half_square();
    } else if (utility == "l1") {
      u = Utility::l1();
    } else if (utility == "l0") {
      u = Utility::l0();
    } else {
      throw ConfigError("model.utility", "unknown utility '" + utility + "'");
    }
    if (alphabet_support) {
      const auto pr = make_prior();
      if (!pr.discrete()) throw ConfigError("model.alphabet", "alphabet support requires a discrete prior");
      u = u.with_alphabet(pr.values());
    }
    return u;
  }

  // Model at a grid point of the active sweep variable.
  ModelConfig model_at(double value) const {
    double lam = lambda, lam0 = lambda0, r = rate;
    switch (variable) {
      case SweepVariable::Lambda: lam = value; break;
      case SweepVariable::Rate: r = value; break;
      case SweepVariable::Snr: {
        const double power = make_prior().second_moment();
        if (!(value > 0.0)) throw ConfigError("sweep.grid", "snr must be positive");
        lam0 = power / value;
        break;
      }
    }
    return ModelConfig(make_ensemble(r), make_prior(), make_utility(), lam, lam0);
  }
};

inline RunConfig load_run_config(const KeyValueFile& kv) {
  RunConfig rc;
  rc.ensemble = kv.get_string("model.ensemble", "mp");
  rc.rate = kv.get_double("model.rate", 1.0);
  if (!(rc.rate > 0.0)) throw ConfigError("model.rate", "must be positive");
  rc.eigenvalues_file = kv.get_string("model.eigenvalues_file", "");
  if (rc.ensemble == "empirical" && rc.eigenvalues_file.empty()) {
    throw ConfigError("model.eigenvalues_file", "required for the empirical ensemble");
  }
  rc.prior = kv.get_string("model.prior", "sparse_gaussian");
  rc.alpha = kv.get_double("model.alpha", 0.1);
  if (!(rc.alpha > 0.0 && rc.alpha <= 1.0)) throw ConfigError("model.alpha", "must lie in (0, 1]");
  rc.a = kv.get_double("model.a", 1.0);
  rc.kappa = kv.get_int("model.kappa", 1);
  rc.utility = kv.get_string("model.utility", "l2");
  rc.alphabet_support = kv.get_bool("model.alphabet", false);
  rc.lambda = kv.get_double("model.lambda", 0.1);
  if (!(rc.lambda > 0.0)) throw ConfigError("model.lambda", "must be positive");

  const bool has_l0 = kv.has("model.lambda0");
  const bool has_snr = kv.has("model.snr_db");
  if (has_l0 && has_snr) throw ConfigError("model.lambda0", "mutually exclusive with model.snr_db");
  if (has_snr) {
    const double snr_lin = std::pow(10.0, kv.get_double("model.snr_db") / 10.0);
    rc.lambda0 = rc.make_prior().second_moment() / snr_lin;
  } else {
    rc.lambda0 = kv.get_double("model.lambda0", 0.01);
  }
  if (!(rc.lambda0 >= 0.0)) throw ConfigError("model.lambda0", "must be nonnegative");

  rc.b = kv.get_int("ansatz.b", 0);
  if (rc.b < 0 || rc.b > 2) throw ConfigError("ansatz.b", "supported breaking orders are 0, 1, 2");
  rc.solver.damping = kv.get_double("ansatz.damping", rc.solver.damping);
  if (!(rc.solver.damping > 0.0 && rc.solver.damping <= 1.0)) {
    throw ConfigError("ansatz.damping", "must lie in (0, 1]");
  }
  rc.solver.tol = kv.get_double("ansatz.tol", rc.solver.tol);
  rc.solver.max_iter = kv.get_int("ansatz.max_iter", rc.solver.max_iter);
  rc.solver.mu_lo = kv.get_double("ansatz.mu_lo", rc.solver.mu_lo);
  rc.solver.mu_hi = kv.get_double("ansatz.mu_hi", rc.solver.mu_hi);

  const std::string var = kv.get_string("sweep.variable", "lambda");
  if (var == "lambda") {
    rc.variable = SweepVariable::Lambda;
  } else if (var == "rate") {
    rc.variable = SweepVariable::Rate;
  } else if (var == "snr") {
    rc.variable = SweepVariable::Snr;
  } else {
    throw ConfigError("sweep.variable", "must be one of lambda, rate, snr");
  }
  if (kv.has("sweep.grid")) {
    rc.grid = kv.get_list("sweep.grid");
  } else if (kv.has("sweep.lo")) {
    const double lo = kv.get_double("sweep.lo");
    const double hi = kv.get_double("sweep.hi");
    const int points = kv.get_int("sweep.points");
    if (points < 1) throw ConfigError("sweep.points", "must be at least 1");
    const bool log_spacing = kv.get_string("sweep.spacing", "linear") == "log";
    if (log_spacing && !(lo > 0.0 && hi > 0.0)) throw ConfigError("sweep.lo", "log spacing needs positive bounds");
    for (int i = 0; i < points; ++i) {
      const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
      rc.grid.push_back(log_spacing ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
    }
  } else {
    // Single point at the configured model value.
    switch (rc.variable) {
      case SweepVariable::Lambda: rc.grid = {rc.lambda}; break;
      case SweepVariable::Rate: rc.grid = {rc.rate}; break;
      case SweepVariable::Snr: rc.grid = {rc.make_prior().second_moment() / rc.lambda0}; break;
    }
  }
  for (double v : rc.grid) {
    if (!(v > 0.0)) throw ConfigError("sweep.grid", "grid values must be positive");
  }

  rc.mc.enabled = kv.get_bool("montecarlo.enabled", false);
  rc.mc.n = kv.get_int("montecarlo.n", rc.mc.n);
  if (rc.mc.n < 1) throw ConfigError("montecarlo.n", "must be positive");
  rc.mc.instances = kv.get_int("montecarlo.instances", rc.mc.instances);
  if (rc.mc.instances < 1) throw ConfigError("montecarlo.instances", "must be positive");
  rc.mc.matrix = kv.get_string("montecarlo.matrix", rc.mc.matrix);
  if (rc.mc.matrix != "iid" && rc.mc.matrix != "projector") {
    throw ConfigError("montecarlo.matrix", "must be iid or projector");
  }
  rc.mc.seed = static_cast<std::uint64_t>(kv.get_double("montecarlo.seed", 1.0));

  rc.epsilon = kv.get_double("compare.epsilon", rc.epsilon);

  rc.gh_order = kv.get_int("numerics.gh_order", rc.gh_order);
  rc.legendre_order = kv.get_int("numerics.legendre_order", rc.legendre_order);
  if (rc.gh_order < 3) throw ConfigError("numerics.gh_order", "must be at least 3");
  if (rc.legendre_order < 2) throw ConfigError("numerics.legendre_order", "must be at least 2");
  rc.threads = kv.get_int("numerics.threads", 1);
  if (rc.threads < 1) throw ConfigError("numerics.threads", "must be positive");

  rc.output_path = kv.get_string("output.path", "");
  return rc;
}

}  // namespace replica
