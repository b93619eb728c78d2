#pragma once

// Gibbs sampler for the fusion model
//   y = mu 1 + X beta + eps,  eps ~ N(0, sigma^2 I),
// with the spike-and-slab fusion prior per covariate block, an N(0, M0)
// intercept prior, sigma^2 ~ InvGamma(s0, S0) (improper at 0, the default)
// and tau_h^2 ~ InvGamma(g_h0, G_h0), optionally G_h0 ~ Exp(mean lambda_h).
//
// Sweep order: beta | . , sigma^2 | . , tau^2 | . , G0 | . , delta | . ,
// then the prior precision blocks are refreshed from the new indicators.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "effusion/design.hpp"
#include "effusion/prior.hpp"
#include "effusion/rng.hpp"

namespace effusion::gibbs {

struct SamplerConfig {
  int burnin = 5000;
  int iterations = 10000;
  int thinning = 1;
  int warm_start = 500;  // leading burn-in sweeps with all indicators slab
  int chains = 1;
  std::uint64_t seed = 1;
  double M0 = 10000.0;  // intercept prior variance
  double s0 = 0.0;
  double S0 = 0.0;
};

struct ChainState {
  Eigen::VectorXd beta;  // intercept first
  double sigma2 = 1.0;
  Eigen::VectorXd tau2;                      // per covariate
  Eigen::VectorXd G0;                        // per covariate (current scale)
  std::vector<prior::IndicatorState> delta;  // per covariate
};

// Kept draws of one chain plus everything needed to interpret them.
struct PosteriorDraws {
  std::vector<std::string> coef_names;  // "mu", then "<cov>=<level>"
  Eigen::MatrixXd beta;                 // rows x (1 + q)
  Eigen::VectorXd sigma2;
  Eigen::MatrixXd tau2;  // rows x p
  Eigen::MatrixXd G0;    // rows x p
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> delta;
  std::vector<int> delta_offset;  // column of each covariate's first pair

  std::vector<design::CovariateSpec> specs;
  std::vector<prior::HyperParams> hypers;
  SamplerConfig config;
  int chain_index = 0;

  int rows() const { return static_cast<int>(beta.rows()); }
  int pair_columns() const { return static_cast<int>(delta.cols()); }
  // Indicator draws of covariate h as a rows x dim block.
  Eigen::Block<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic,
                                   Eigen::Dynamic>,
               Eigen::Dynamic, Eigen::Dynamic, true>
  delta_block(int h) const;
};

// Concatenate kept draws of several chains over the same model.
PosteriorDraws pool(std::span<const PosteriorDraws> chains);

class GibbsSampler {
 public:
  GibbsSampler(const design::DesignMatrix& dm, Eigen::VectorXd y,
               std::vector<design::CovariateSpec> specs,
               std::vector<prior::HyperParams> hypers, SamplerConfig cfg,
               std::uint64_t stream_key);

  // Replace the response (same length); used by prior-posterior calibration
  // tests that re-simulate y inside the loop.
  void set_response(const Eigen::VectorXd& y);

  void initialize();  // delta all slab, tau2 at prior mean, sigma2 = var(y)

  void sample_beta();
  void sample_sigma2();
  void sample_tau2();
  void sample_G0();
  void sample_delta();
  // Rebuild the per-covariate structure matrices from the current indicators.
  void refresh_structure();

  void sweep(bool warm = false);

  ChainState& state() { return state_; }
  const ChainState& state() const { return state_; }
  rng::Stream& stream() { return rng_; }

  // Current prior precision of block h: Q_h(delta) / (gamma_h tau_h^2).
  Eigen::MatrixXd prior_precision_block(int h) const;
  // Full (1 + q) x (1 + q) prior precision including the intercept.
  Eigen::MatrixXd full_prior_precision() const;

  int dim() const { return static_cast<int>(xtx_.rows()); }
  int covariates() const { return static_cast<int>(specs_.size()); }
  const std::vector<design::CovariateSpec>& specs() const { return specs_; }
  const std::vector<prior::HyperParams>& hypers() const { return hypers_; }

 private:
  Eigen::VectorXd beta_block(int h) const;

  design::DesignMatrix dm_;
  Eigen::VectorXd y_;
  std::vector<design::CovariateSpec> specs_;
  std::vector<prior::HyperParams> hypers_;
  SamplerConfig cfg_;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  std::vector<Eigen::MatrixXd> structure_;  // Q_h(delta), refreshed per sweep
  ChainState state_;
  rng::Stream rng_;
  int sweep_index_ = 0;
};

// Run one chain to completion; chain_index selects the derived stream.
PosteriorDraws run_chain(const design::DesignMatrix& dm,
                         const Eigen::VectorXd& y,
                         const std::vector<design::CovariateSpec>& specs,
                         const std::vector<prior::HyperParams>& hypers,
                         const SamplerConfig& cfg, int chain_index = 0);

// All cfg.chains chains, optionally in parallel threads.
std::vector<PosteriorDraws> run_chains(
    const design::DesignMatrix& dm, const Eigen::VectorXd& y,
    const std::vector<design::CovariateSpec>& specs,
    const std::vector<prior::HyperParams>& hypers, const SamplerConfig& cfg,
    int parallel = 1);

// Integrated autocorrelation time via Geyer's initial positive sequence.
// A series with (numerically) zero variance reports 1 and sets degenerate.
struct IatResult {
  double value = 1.0;
  bool degenerate = false;
};

IatResult integrated_autocorrelation_time(std::span<const double> series);

}  // namespace effusion::gibbs
