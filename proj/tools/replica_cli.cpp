// Command-line front end over the runner engines.

#include "replica/runner.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

namespace {

int run(const std::string& command, replica::RunConfig rc) {
  using namespace replica;
  if (command == "solve") {
    // One point at the configured model values, full solution dump.
    switch (rc.variable) {
      case SweepVariable::Lambda: rc.grid = {rc.lambda}; break;
      case SweepVariable::Rate: rc.grid = {rc.rate}; break;
      case SweepVariable::Snr: rc.grid = {rc.make_prior().second_moment() / rc.lambda0}; break;
    }
  }
  CsvTable table;
  if (command == "solve" || command == "sweep") {
    table = run_sweep(rc);
  } else if (command == "compare") {
    table = run_compare(rc);
  } else if (command == "simulate") {
    table = run_simulate(rc);
  } else if (command == "entropy") {
    table = run_entropy(rc);
  }
  if (rc.output_path.empty()) {
    std::cout << table.to_string();
  } else {
    table.write(rc.output_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic MAP performance predictions for linear-AWGN systems"};
  app.require_subcommand(1);

  std::string config_path, output_override;
  std::uint64_t seed = 0;
  int threads = 0, gh_order = 0, legendre_order = 0;
  bool has_seed = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "Run configuration file")->required();
    cmd->add_option("--seed", seed, "Override montecarlo.seed")->each([&](const std::string&) {
      has_seed = true;
    });
    cmd->add_option("--threads", threads, "Override numerics.threads");
    cmd->add_option("--gh-order", gh_order, "Override numerics.gh_order");
    cmd->add_option("--legendre-order", legendre_order, "Override numerics.legendre_order");
    cmd->add_option("-o,--output", output_override, "Override output.path");
  };
  for (const char* name : {"solve", "sweep", "compare", "simulate", "entropy"}) {
    add_common(app.add_subcommand(name));
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    replica::RunConfig rc = replica::load_run_config(replica::KeyValueFile::parse_file(config_path));
    if (has_seed) rc.mc.seed = seed;
    if (threads > 0) rc.threads = threads;
    if (gh_order > 0) rc.gh_order = gh_order;
    if (legendre_order > 0) rc.legendre_order = legendre_order;
    if (!output_override.empty()) rc.output_path = output_override;
    return run(command, std::move(rc));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
