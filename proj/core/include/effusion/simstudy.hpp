#pragma once

// Simulation harness: the eight-covariate benchmark design (four ordinal,
// four nominal, half of them pure noise), selection accuracy against the
// known fusion structure, and estimation/prediction error of the selected
// model against refits of the full and the true model.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "effusion/design.hpp"
#include "effusion/gibbs.hpp"
#include "effusion/select.hpp"

namespace effusion::sim {

struct TrueCovariate {
  design::CovariateSpec spec;
  Eigen::VectorXd beta;              // length c_h, effect of levels 1..c_h
  std::vector<double> level_probs;   // length c_h + 1
};

struct SimulationDesign {
  int n = 500;
  int n_pred = 500;  // size of the held-out prediction sample
  double intercept = 1.0;
  double error_sd = 1.0;
  std::vector<TrueCovariate> covariates;

  // The benchmark layout: ordinal 8,8,4,4 levels then nominal 8,8,4,4 with
  // effects (0,1,1,2,2,4,4), 0, (0,-2,-2), 0, (0,1,1,1,1,-2,-2), 0,
  // (0,2,2), 0.
  static SimulationDesign benchmark();

  std::vector<design::CovariateSpec> specs() const;
  Eigen::VectorXd full_beta() const;  // stacked per-level truth, no intercept
};

struct Dataset {
  design::DesignMatrix dm;
  Eigen::VectorXd y;
  std::vector<std::vector<int>> codes;
};

// Covariate codes and noise come from streams derived from (seed, replicate),
// so the X of a replicate is identical across prior settings.
Dataset generate_dataset(const SimulationDesign& sd, std::uint64_t seed,
                         int replicate);
// Held-out sample for prediction error, shared by all replicates/settings.
Dataset generate_prediction_set(const SimulationDesign& sd,
                                std::uint64_t seed);

// Mean squared estimation error over the non-baseline levels of covariate h.
double mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

// Mean squared prediction error of predictions against realised responses.
double mspe(const Eigen::VectorXd& predictions, const Eigen::VectorXd& y);

// Truth of each eligible pair: positive = the pair differs in truth (must
// not be fused), negative = equal (must be fused).
struct PairTruth {
  std::vector<design::LevelPair> positives;
  std::vector<design::LevelPair> negatives;
};

PairTruth pair_truth(const TrueCovariate& cov);

// Classification of a selected partition against the pair truth.  A pair is
// "detected" when its levels end up in different clusters.  Rates are
// percentages; a rate whose denominator is empty is left unset.
struct SelectionRates {
  int tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> tpr, tnr, ppv, npv;
};

SelectionRates selection_metrics(const select::Partition& partition,
                                 const PairTruth& truth);

struct StudySetting {
  std::string name = "default";
  double r = 20000.0;
  double g0 = 5.0;
  double G0_ordinal = 20.0;
  double G0_nominal = 2.0;
  bool G0_random = false;
  double lambda = 2.0;

  prior::HyperParams hyper_for(design::Scale scale) const;
};

struct StudyConfig {
  SimulationDesign design;
  gibbs::SamplerConfig sampler;   // seed doubles as the study master seed
  select::RefitConfig refit;
  std::vector<StudySetting> settings = {StudySetting{}};
  int replicates = 10;
  int parallel = 1;
};

// Everything recorded for one (replicate, setting, covariate).
struct CovariateResult {
  SelectionRates rates;
  bool excluded = false;
  bool excluded_correct = false;
  double mse_fusion = 0.0;
  double mse_full = 0.0;
  double mse_true = 0.0;
};

struct ReplicateResult {
  int replicate = 0;
  std::string setting;
  std::vector<CovariateResult> covariates;
  double mspe_fusion = 0.0;
  double mspe_full = 0.0;
  double mspe_true = 0.0;
  double mspe_oracle = 0.0;  // true coefficients, no estimation
};

struct StudyReport {
  StudyConfig config;
  std::vector<ReplicateResult> results;

  // Averages over replicates for one setting/covariate.
  struct Aggregate {
    std::string setting;
    int covariate = 0;
    std::optional<double> tpr, tnr, ppv, npv;  // means of defined rates
    int excluded_count = 0;
    double mse_fusion = 0.0, mse_full = 0.0, mse_true = 0.0;
  };
  std::vector<Aggregate> aggregates() const;

  double mean_mspe_fusion() const;
  double mean_mspe_full() const;
  double mean_mspe_true() const;
  double mean_mspe_oracle() const;
};

StudyReport run_study(const StudyConfig& cfg);

// CSV emission (one row per replicate/setting/covariate; one aggregate
// table) plus a JSON summary.
void write_study_outputs(const StudyReport& report, const std::string& dir);

}  // namespace effusion::sim
