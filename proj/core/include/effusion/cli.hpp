#pragma once

// Command implementations behind the CLI binary.  Each returns a process
// exit code: 0 success, 2 configuration error, 3 data error, 4 numerical
// error.  All outputs are deterministic functions of config + seed.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "effusion/design.hpp"
#include "effusion/draws_io.hpp"
#include "effusion/gibbs.hpp"
#include "effusion/select.hpp"
#include "effusion/simstudy.hpp"
#include "effusion/toml.hpp"

namespace effusion::cli {

struct CovariateConfig {
  design::CovariateSpec spec;
  prior::HyperParams hyper;
};

struct RunConfig {
  std::string data_path;
  std::string response;
  bool standardize = false;
  std::vector<CovariateConfig> covariates;
  gibbs::SamplerConfig sampler;
  io::DrawsFormat format = io::DrawsFormat::binary;

  std::vector<design::CovariateSpec> specs() const;
  std::vector<prior::HyperParams> hypers() const;
};

// Parse + validate; config_dir resolves a relative data path.
RunConfig parse_run_config(const toml::Table& root,
                           const std::string& config_dir);
RunConfig load_run_config(const std::string& path);

sim::StudyConfig parse_study_config(const toml::Table& root);
sim::StudyConfig load_study_config(const std::string& path);

struct CommonOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<int> parallel;
  std::optional<bool> standardize;
};

// Fit the model to a CSV data set: propriety gate, chain(s), draws +
// metadata + autocorrelation summary into out_dir.
int cmd_fit(const std::string& config_path, const std::string& out_dir,
            const CommonOverrides& overrides, bool force_improper = false);

// Model selection from a fit directory: similarity matrices, Binder
// partitions, exclusion flags and the fused refit.
int cmd_select(const std::string& fit_dir, const std::string& out_dir);

// Simulation study driven by a study config (empty settings = benchmark
// defaults).
int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const CommonOverrides& overrides);

// Prior diagnostics for a single covariate config: fusion probability curve
// and simulated prior draws.
int cmd_prior(const std::string& config_path, const std::string& out_dir,
              const CommonOverrides& overrides);

// Shared exception-to-exit-code mapping; body returns an exit code itself.
int run_guarded(const std::function<int()>& body);

}  // namespace effusion::cli
