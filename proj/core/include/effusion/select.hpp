#pragma once

// Turning indicator draws into one model: pairwise co-clustering frequencies
// from the per-sweep fusion partitions, Binder-loss minimisation over level
// partitions, and a refit of the selected fused design under flat priors.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "effusion/gibbs.hpp"

namespace effusion::select {

// Partition of levels {0..c}; labels are canonical (first occurrence order,
// label of level 0 is 0).
struct Partition {
  std::vector<int> labels;

  int levels() const { return static_cast<int>(labels.size()); }
  int clusters() const;
  bool single_cluster() const { return clusters() == 1; }
  bool fused(int k, int j) const { return labels[k] == labels[j]; }
  std::vector<std::vector<int>> groups() const;

  static Partition from_labels(std::vector<int> raw);  // canonicalises
};

// The per-sweep partition implied by indicators: connected components of the
// graph on {0..c} whose edges are the pattern pairs with delta = 0.  Level 0
// represents the baseline/zero effect.
Partition sweep_partition(const design::FusionPattern& pattern,
                          std::span<const std::uint8_t> delta_bits);

// pi(k, j) = share of kept sweeps with delta_kj = 0, i.e. the marginal
// fusion frequency of that pair's own indicator.  Pairs outside the fusion
// pattern (distant levels of an ordinal covariate) carry no indicator and
// get the neutral value 1/2, which contributes zero to every Binder
// objective term.  Symmetric, unit diagonal.
Eigen::MatrixXd posterior_similarity(const gibbs::PosteriorDraws& draws,
                                     int covariate);

// Binder loss of a partition against pairwise probabilities pi: the sum of
// (1/2 - pi_kj) over all unordered pairs placed in the same cluster.
double binder_objective(const Eigen::MatrixXd& pi,
                        const Partition& partition);

// Exact minimiser by set-partition enumeration (restricted growth strings,
// feasible up to 11 levels).  Ties break toward fewer clusters, then the
// lexicographically smallest label string.
Partition minimize_binder_exact(const Eigen::MatrixXd& pi);

// Exact minimiser over contiguous partitions (ordinal case) by interval
// dynamic programming; same tie-breaking.
Partition minimize_binder_contiguous(const Eigen::MatrixXd& pi);

// Greedy agglomeration followed by single-element moves; used beyond the
// enumeration limit.  The merge chain runs from all-singletons down to one
// cluster, every level is polished by the move search, and the best result
// wins (ties as above).  Never worse than all-singletons.
Partition minimize_binder_greedy(const Eigen::MatrixXd& pi);

// Dispatcher: contiguous DP for ordinal covariates, enumeration when small
// enough, greedy otherwise.
Partition minimize_binder(const Eigen::MatrixXd& pi, design::Scale scale);

// Refit of the model implied by per-covariate partitions: one column per
// non-baseline cluster (sum of its level dummies; the cluster containing
// level 0 is dropped), flat N(0, B0 I) prior on all coefficients including
// the intercept, two-block Gibbs on (beta, sigma^2).
struct RefitConfig {
  double B0 = 10000.0;
  int burnin = 1000;
  int iterations = 3000;
  double s0 = 0.0;
  double S0 = 0.0;
};

struct RefitCoefficient {
  std::string name;       // "mu" or "<cov>{lv,lv,..}"
  int covariate = -1;     // -1 for the intercept
  std::vector<int> levels;
  double mean = 0.0;
  double hpd_low = 0.0;   // 95% highest posterior density interval
  double hpd_high = 0.0;
};

struct RefitSummary {
  std::vector<RefitCoefficient> coefficients;
  double sigma2_mean = 0.0;
  // Per-level effect estimates implied by the fused coefficients.
  std::vector<Eigen::VectorXd> level_effects;  // per covariate, length c_h
};

RefitSummary refit_selected(const design::DesignMatrix& dm,
                            const Eigen::VectorXd& y,
                            const std::vector<design::CovariateSpec>& specs,
                            const std::vector<Partition>& partitions,
                            const RefitConfig& cfg, std::uint64_t stream_key);

// Shortest interval containing 95% of the draws.
std::pair<double, double> hpd_interval(std::vector<double> draws,
                                       double mass = 0.95);

struct CovariateSelection {
  std::string name;
  Eigen::MatrixXd similarity;
  Partition partition;
  bool excluded = false;  // all levels fused with the baseline
};

struct SelectionReport {
  std::vector<CovariateSelection> covariates;
  RefitSummary refit;
};

SelectionReport selection_report(const gibbs::PosteriorDraws& draws,
                                 const design::DesignMatrix& dm,
                                 const Eigen::VectorXd& y,
                                 const RefitConfig& refit_cfg,
                                 std::uint64_t refit_stream_key);

std::string report_to_json(const SelectionReport& report);

}  // namespace effusion::select
