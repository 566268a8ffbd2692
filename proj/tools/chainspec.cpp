#include <iostream>

#include <CLI11.hpp>

#include "chainspec/cli.hpp"

namespace cli = chainspec::cli;

int main(int argc, char** argv) {
  CLI::App app{"Eigenvalue solver and oscillation checker for fourth-order multipoint problems"};
  app.require_subcommand(1);

  cli::RunConfig cfg;
  cli::SweepSpec sweep;
  std::string method = "fem";
  auto common = [&](CLI::App* sub) {
    sub->add_option("input", cfg.input, "problem JSON file")->required();
    sub->add_option("--k", cfg.k, "number of eigenpairs");
    sub->add_option("--mesh-n", cfg.mesh_n, "finite elements (approximate)");
    sub->add_option("--out", cfg.out_dir, "output directory for reports and CSV dumps");
    sub->add_option("--eps-rel", cfg.eps_rel, "relative threshold for sign counting");
    sub->add_option("--seed", cfg.seed, "seed for randomized checks");
    sub->add_option("--lambda-cap", cfg.lambda_cap, "upper end of the shooting scan");
  };

  auto* solve = app.add_subcommand("solve", "print eigenvalues");
  common(solve);
  solve->add_option("--method", method, "fem, shoot or both")->check(CLI::IsMember({"fem", "shoot", "both"}));
  solve->add_flag("--dump-sigma", cfg.dump_sigma, "write sigma.csv (t, sigma, omega)");
  solve->add_flag("--dump-eigenfunctions", cfg.dump_eigenfunctions, "write eigenfunctions.csv");
  solve->add_flag("--dump-scan", cfg.dump_scan, "write scan.csv of the characteristic function");

  auto* verify = app.add_subcommand("verify", "run every check and print the JSON report");
  common(verify);

  auto* sw = app.add_subcommand("sweep", "eigenvalues and sign counts over a parameter range");
  common(sw);
  sw->add_option("--param", sweep.parameter, "alpha, beta, eta_<i> or alpha_<i>")->required();
  sw->add_option("--from", sweep.from, "first value")->required();
  sw->add_option("--to", sweep.to, "last value")->required();
  sw->add_option("--step", sweep.step, "increment")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::usage;
  }

  cfg.method = method == "shoot" ? cli::Method::shoot : method == "both" ? cli::Method::both : cli::Method::fem;
  if (*solve) return cli::run_solve(cfg, std::cout, std::cerr);
  if (*verify) return cli::run_verify(cfg, std::cout, std::cerr);
  return cli::run_sweep(cfg, sweep, std::cout, std::cerr);
}
