#pragma once

// Batch engines behind the CLI commands: grid sweeps, ansatz comparison,
// Monte Carlo tables, entropy tables, all emitted as CSV.

#include "replica/config.hpp"
#include "replica/montecarlo.hpp"
#include "replica/observables.hpp"
#include "replica/solver.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace replica {

// 17 significant digits round-trip doubles bit-exactly through strtod.
inline std::string csv_format(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_format(bool v) { return v ? "1" : "0"; }
inline std::string csv_format(int v) { return std::to_string(v); }

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      out += header[i];
      out += (i + 1 < header.size()) ? ',' : '\n';
    }
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        out += row[i];
        out += (i + 1 < row.size()) ? ',' : '\n';
      }
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw std::runtime_error("csv: cannot open " + path);
    out << to_string();
  }
};

namespace detail {

// Runs fn(i) for i in [0, count) across the requested threads; callers
// store results by index, so scheduling never touches the output order.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const int used = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (used == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(used));
  for (int t = 0; t < used; ++t) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline const char* sweep_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::Lambda: return "lambda";
    case SweepVariable::Rate: return "rate";
    case SweepVariable::Snr: return "snr";
  }
  return "lambda";
}

inline double to_db(double v) { return 10.0 * std::log10(v); }

struct McPoint {
  double mse = 0.0;
  double ser = 0.0;
  bool has_ser = false;
};

// Empirical averages over reconstructed instances at one grid point.  The
// per-instance seed depends only on (config seed, grid index, instance), so
// output is independent of scheduling.
inline McPoint montecarlo_point(const RunConfig& rc, const ModelConfig& model, double rate,
                                std::size_t grid_index) {
  const MatrixKind kind = rc.mc.matrix == "projector" ? MatrixKind::Projector : MatrixKind::IID;
  McPoint out;
  out.has_ser = model.utility.support == Utility::Support::Alphabet;
  for (int inst = 0; inst < rc.mc.instances; ++inst) {
    const std::uint64_t seed =
        rc.mc.seed + 1000003ULL * static_cast<std::uint64_t>(grid_index) + static_cast<std::uint64_t>(inst);
    const auto sys = SystemInstance::generate(model.prior, kind, rc.mc.n, rate, model.lambda0, seed);
    const auto rec = reconstruct(sys, model.utility, model.lambda);
    out.mse += empirical_distortion(sys.x, rec.x_hat, Distortion::squared_error());
    if (out.has_ser) out.ser += empirical_distortion(sys.x, rec.x_hat, Distortion::symbol_error());
  }
  out.mse /= rc.mc.instances;
  out.ser /= rc.mc.instances;
  return out;
}

}  // namespace detail

// One row per grid point per converged solution (or a converged=0 marker
// row), annotated with predictions and optional Monte Carlo averages.
inline CsvTable run_sweep(const RunConfig& rc) {
  const Quadratures quad = Quadratures::make(rc.gh_order, rc.legendre_order);
  CsvTable table;
  table.header = {"variable",  "value",   "b",        "chi",       "q",         "p1",
                  "p2",        "mu1",     "mu2",      "lambda_s",  "lambda0_s", "lambda1_s",
                  "lambda2_s", "mse",     "mse0_db",  "ser",       "free_energy",
                  "entropy",   "converged", "stable", "selected"};
  if (rc.mc.enabled) {
    table.header.push_back("mc_mse");
    table.header.push_back("mc_mse0_db");
    table.header.push_back("mc_ser");
  }
  std::vector<std::vector<std::vector<std::string>>> per_point(rc.grid.size());
  std::string first_error;
  std::mutex error_mutex;
  detail::parallel_for(rc.grid.size(), rc.threads, [&](std::size_t gi) {
    try {
      const double value = rc.grid[gi];
      const ModelConfig model = rc.model_at(value);
      const double rate = rc.variable == SweepVariable::Rate ? value : rc.rate;
      const double power = model.prior.second_moment();
      const auto result = solve(model, rc.b, rc.solver, quad);

      detail::McPoint mc;
      if (rc.mc.enabled) mc = detail::montecarlo_point(rc, model, rate, gi);

      auto blank_row = [&]() {
        std::vector<std::string> row(table.header.size(), "");
        row[0] = detail::sweep_name(rc.variable);
        row[1] = csv_format(value);
        row[2] = csv_format(rc.b);
        return row;
      };
      auto mc_fill = [&](std::vector<std::string>& row) {
        if (!rc.mc.enabled) return;
        const std::size_t base = row.size() - 3;
        row[base] = csv_format(mc.mse);
        row[base + 1] = csv_format(detail::to_db(mc.mse / power));
        if (mc.has_ser) row[base + 2] = csv_format(mc.ser);
      };

      if (result.solutions.empty()) {
        auto row = blank_row();
        row[18] = csv_format(false);  // converged
        row[20] = csv_format(false);  // selected
        mc_fill(row);
        per_point[gi].push_back(std::move(row));
        return;
      }
      const FixedPointSolution* best = &select_ansatz(result.solutions);
      for (const auto& sol : result.solutions) {
        auto row = blank_row();
        const int b = sol.state.breaking();
        row[3] = csv_format(sol.state.chi);
        row[4] = csv_format(sol.state.q);
        if (b >= 1) { row[5] = csv_format(sol.state.p[0]); row[7] = csv_format(sol.state.mu[0]); }
        if (b >= 2) { row[6] = csv_format(sol.state.p[1]); row[8] = csv_format(sol.state.mu[1]); }
        row[9] = csv_format(sol.channel.lambda_s);
        row[10] = csv_format(sol.channel.lambda0_s);
        if (b >= 1) row[11] = csv_format(sol.channel.lambda_k[0]);
        if (b >= 2) row[12] = csv_format(sol.channel.lambda_k[1]);
        const double mse = predict(sol, model, Distortion::squared_error(), quad);
        row[13] = csv_format(mse);
        row[14] = csv_format(detail::to_db(mse / power));
        if (model.utility.support == Utility::Support::Alphabet && model.prior.discrete()) {
          row[15] = csv_format(predict(sol, model, Distortion::symbol_error(), quad));
        }
        row[16] = csv_format(sol.free_energy);
        row[17] = csv_format(sol.entropy);
        row[18] = csv_format(sol.converged);
        row[19] = csv_format(sol.stable);
        row[20] = csv_format(&sol == best);
        mc_fill(row);
        per_point[gi].push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (first_error.empty()) first_error = e.what();
    }
  });
  if (!first_error.empty()) throw std::runtime_error(first_error);
  for (auto& rows : per_point) {
    for (auto& row : rows) table.rows.push_back(std::move(row));
  }
  return table;
}

// Per-grid-point MSE0 of the b = 0 and b = 1 selections, their gap, and the
// largest grid value whose gap stays below epsilon (in every row).
inline CsvTable run_compare(const RunConfig& rc) {
  const Quadratures quad = Quadratures::make(rc.gh_order, rc.legendre_order);
  CsvTable table;
  table.header = {"variable", "value", "mse0_rs", "mse0_1rsb", "gap", "converged", "break_value"};
  struct Point {
    double mse0_rs = 0.0, mse0_1rsb = 0.0;
    bool ok = false;
  };
  std::vector<Point> points(rc.grid.size());
  std::string first_error;
  std::mutex error_mutex;
  detail::parallel_for(rc.grid.size(), rc.threads, [&](std::size_t gi) {
    try {
      const ModelConfig model = rc.model_at(rc.grid[gi]);
      const double power = model.prior.second_moment();
      const auto rs = solve(model, 0, rc.solver, quad);
      const auto rsb = solve(model, 1, rc.solver, quad);
      if (rs.solutions.empty() || rsb.solutions.empty()) return;
      points[gi].mse0_rs = predict(select_ansatz(rs.solutions), model, Distortion::squared_error(), quad) / power;
      points[gi].mse0_1rsb =
          predict(select_ansatz(rsb.solutions), model, Distortion::squared_error(), quad) / power;
      points[gi].ok = true;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (first_error.empty()) first_error = e.what();
    }
  });
  if (!first_error.empty()) throw std::runtime_error(first_error);
  double break_value = std::numeric_limits<double>::quiet_NaN();
  bool have_break = false;
  for (std::size_t gi = 0; gi < rc.grid.size(); ++gi) {
    if (points[gi].ok && std::abs(points[gi].mse0_rs - points[gi].mse0_1rsb) < rc.epsilon) {
      if (!have_break || rc.grid[gi] > break_value) {
        break_value = rc.grid[gi];
        have_break = true;
      }
    }
  }
  for (std::size_t gi = 0; gi < rc.grid.size(); ++gi) {
    std::vector<std::string> row(table.header.size(), "");
    row[0] = detail::sweep_name(rc.variable);
    row[1] = csv_format(rc.grid[gi]);
    if (points[gi].ok) {
      row[2] = csv_format(points[gi].mse0_rs);
      row[3] = csv_format(points[gi].mse0_1rsb);
      row[4] = csv_format(std::abs(points[gi].mse0_rs - points[gi].mse0_1rsb));
    }
    row[5] = csv_format(points[gi].ok);
    if (have_break) row[6] = csv_format(break_value);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Monte Carlo only: empirical distortions per grid point.
inline CsvTable run_simulate(const RunConfig& rc) {
  CsvTable table;
  table.header = {"variable", "value", "n", "instances", "mc_mse", "mc_mse0_db", "mc_ser"};
  std::vector<detail::McPoint> points(rc.grid.size());
  std::vector<double> powers(rc.grid.size(), 1.0);
  std::string first_error;
  std::mutex error_mutex;
  detail::parallel_for(rc.grid.size(), rc.threads, [&](std::size_t gi) {
    try {
      const double value = rc.grid[gi];
      const ModelConfig model = rc.model_at(value);
      const double rate = rc.variable == SweepVariable::Rate ? value : rc.rate;
      powers[gi] = model.prior.second_moment();
      points[gi] = detail::montecarlo_point(rc, model, rate, gi);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (first_error.empty()) first_error = e.what();
    }
  });
  if (!first_error.empty()) throw std::runtime_error(first_error);
  for (std::size_t gi = 0; gi < rc.grid.size(); ++gi) {
    std::vector<std::string> row(table.header.size(), "");
    row[0] = detail::sweep_name(rc.variable);
    row[1] = csv_format(rc.grid[gi]);
    row[2] = csv_format(rc.mc.n);
    row[3] = csv_format(rc.mc.instances);
    row[4] = csv_format(points[gi].mse);
    row[5] = csv_format(detail::to_db(points[gi].mse / powers[gi]));
    if (points[gi].has_ser) row[6] = csv_format(points[gi].ser);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Entropy of the selected solution per grid point.
inline CsvTable run_entropy(const RunConfig& rc) {
  const Quadratures quad = Quadratures::make(rc.gh_order, rc.legendre_order);
  CsvTable table;
  table.header = {"variable", "value", "b", "chi", "entropy", "free_energy", "converged"};
  std::vector<std::vector<std::string>> rows(rc.grid.size());
  std::string first_error;
  std::mutex error_mutex;
  detail::parallel_for(rc.grid.size(), rc.threads, [&](std::size_t gi) {
    try {
      const ModelConfig model = rc.model_at(rc.grid[gi]);
      const auto result = solve(model, rc.b, rc.solver, quad);
      std::vector<std::string> row(table.header.size(), "");
      row[0] = detail::sweep_name(rc.variable);
      row[1] = csv_format(rc.grid[gi]);
      row[2] = csv_format(rc.b);
      if (!result.solutions.empty()) {
        const auto& sol = select_ansatz(result.solutions);
        row[3] = csv_format(sol.state.chi);
        row[4] = csv_format(sol.entropy);
        row[5] = csv_format(sol.free_energy);
        row[6] = csv_format(true);
      } else {
        row[6] = csv_format(false);
      }
      rows[gi] = std::move(row);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (first_error.empty()) first_error = e.what();
    }
  });
  if (!first_error.empty()) throw std::runtime_error(first_error);
  table.rows = std::move(rows);
  return table;
}

}  // namespace replica
