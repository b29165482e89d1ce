#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "platedg/cli_io.hpp"
#include "platedg/parallel.hpp"

using namespace platedg;

int main(int argc, char** argv) {
  CLI::App app{"Discontinuous Galerkin solver for isometry-constrained plate bending"};
  app.require_subcommand(1);
  int threads = 0;
  unsigned seed = 2024;
  bool quiet = false;
  app.add_option("--threads", threads, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Seed for randomized checks");
  app.add_flag("-q,--quiet", quiet, "Suppress per-step output");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  std::string conv_path;
  int levels = 2;
  auto* conv = app.add_subcommand("convergence", "Run a refinement study and write convergence.csv");
  conv->add_option("config", conv_path, "Base config file")->required()->check(CLI::ExistingFile);
  conv->add_option("--levels", levels, "Number of refinement levels")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the invariant checks on small meshes");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_num_threads(threads);
  RunOptions opt;
  opt.threads = threads;
  opt.log = quiet ? nullptr : &std::cout;

  try {
    if (*run) {
      const RunConfig cfg = load_config(config_path);
      const RunSummary s = run_experiment(cfg, opt);
      std::cout << "cells " << s.cells << "  dofs " << s.dofs << "  tau " << s.tau << "  E_h " << s.energy
                << "  D_h " << s.defect << "  iterations " << s.iterations << '\n';
      if (cfg.flow.obstacle) std::cout << "max penetration " << s.max_penetration << '\n';
      std::cout << "output written to " << cfg.output.directory << '\n';
      return s.ok() ? 0 : 2;
    }
    if (*conv) {
      const RunConfig cfg = load_config(conv_path);
      const auto rows = run_convergence(cfg, levels, opt);
      std::filesystem::create_directories(cfg.output.directory);
      const auto path = std::filesystem::path(cfg.output.directory) / "convergence.csv";
      write_convergence_csv(rows, path.string());
      bool ok = true;
      for (const auto& r : rows) {
        std::cout << r.cells << " cells  E_h " << r.energy << "  D_h " << r.defect << "  iterations " << r.iterations
                  << "  " << r.status << '\n';
        ok = ok && r.status == "ok";
      }
      std::cout << "wrote " << path.string() << '\n';
      return ok ? 0 : 2;
    }
    if (*verify) return run_verify(seed, std::cout) ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
