#include <CLI11.hpp>
#include <cstdint>
#include <string>

#include "effusion/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "effusion: Bayesian effect fusion for categorical predictors\n"
      "Spike-and-slab fusion priors on level-effect differences, Gibbs "
      "sampling,\nBinder-loss model selection and a simulation harness."};
  app.require_subcommand(1);

  std::string config, out_dir, fit_dir;
  std::uint64_t seed = 0;
  int chains = 0, parallel = 0;
  bool standardize = false, force = false;

  auto* fit = app.add_subcommand("fit", "sample the fusion model posterior");
  fit->add_option("config", config, "run config (TOML)")->required();
  fit->add_option("--out", out_dir, "output directory")->required();
  auto* fit_seed = fit->add_option("--seed", seed, "override the master seed");
  auto* fit_chains = fit->add_option("--chains", chains, "number of chains");
  auto* fit_par =
      fit->add_option("--parallel", parallel, "chains run concurrently");
  auto* fit_std = fit->add_flag("--standardize", standardize,
                                "standardize the response before fitting");
  fit->add_flag("--force", force, "run even when the propriety check fails");

  auto* sel = app.add_subcommand("select",
                                 "Binder-loss selection and fused refit");
  sel->add_option("fit_dir", fit_dir, "directory written by fit")->required();
  sel->add_option("--out", out_dir, "output directory")->required();

  auto* simc = app.add_subcommand("simulate", "run the simulation study");
  auto* sim_config =
      simc->add_option("config", config, "study config (TOML), omit for the "
                                         "benchmark defaults");
  simc->add_option("--out", out_dir, "output directory")->required();
  auto* sim_seed = simc->add_option("--seed", seed, "override the master seed");
  auto* sim_par = simc->add_option("--replicates-parallel", parallel,
                                   "replicate tasks run concurrently");

  auto* pri = app.add_subcommand("prior", "prior diagnostics for a covariate");
  pri->add_option("config", config, "covariate config (TOML)")->required();
  pri->add_option("--out", out_dir, "output directory")->required();
  auto* pri_seed = pri->add_option("--seed", seed, "override the seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  effusion::cli::CommonOverrides overrides;
  if (fit->parsed()) {
    if (fit_seed->count()) overrides.seed = seed;
    if (fit_chains->count()) overrides.chains = chains;
    if (fit_par->count()) overrides.parallel = parallel;
    if (fit_std->count()) overrides.standardize = standardize;
    return effusion::cli::cmd_fit(config, out_dir, overrides, force);
  }
  if (sel->parsed()) return effusion::cli::cmd_select(fit_dir, out_dir);
  if (simc->parsed()) {
    if (sim_seed->count()) overrides.seed = seed;
    if (sim_par->count()) overrides.parallel = parallel;
    return effusion::cli::cmd_simulate(
        sim_config->count() ? config : std::string(), out_dir, overrides);
  }
  if (pri->parsed()) {
    if (pri_seed->count()) overrides.seed = seed;
    return effusion::cli::cmd_prior(config, out_dir, overrides);
  }
  return 2;
}
