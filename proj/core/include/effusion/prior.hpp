#pragma once

// Spike-and-slab fusion prior on level effects.  Conditional on the binary
// indicators delta the effect block beta_h is Gaussian with precision
// Q_h(delta) / (gamma_h tau_h^2): each eligible pair contributes kappa = 1
// (slab, delta = 1) or kappa = r (spike, delta = 0) to the quadratic form
//   beta' Q beta = sum_k zeta_k0 kappa_k0 beta_k^2
//                + sum_{k>j>=1} zeta_kj kappa_kj (beta_k - beta_j)^2,
// so a spiked pair pulls the two effects (or an effect and zero) together.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "effusion/design.hpp"
#include "effusion/rng.hpp"

namespace effusion::prior {

using design::CovariateSpec;
using design::FusionPattern;
using design::Scale;

// One indicator per pattern pair, aligned with FusionPattern::pairs().
// Frozen pairs stay at 1 and are never resampled.
struct IndicatorState {
  std::vector<std::uint8_t> bits;
  std::vector<std::uint8_t> frozen;

  static IndicatorState all_ones(const CovariateSpec& spec);
  static IndicatorState all_zeros(const CovariateSpec& spec);

  int dim() const { return static_cast<int>(bits.size()); }
  int spikes() const;  // number of zero indicators
};

struct StructureMatrix {
  Eigen::MatrixXd Q;  // c x c, rows/cols for levels 1..c
  double gamma = 1.0;
  double r = 0.0;
  int c = 0;
};

// Scale factor keeping the largest possible diagonal entry at 2r:
// c/2 for the unrestricted nominal pattern, 1 for the restricted ones.
double gamma_for(Scale s, int c);

// Assemble Q(delta) entry by entry: off-diagonal q_kj = -kappa_kj for pattern
// pairs with j >= 1, diagonal q_kk = zeta_k0 kappa_k0 + sum_j zeta_kj kappa_kj.
StructureMatrix build_structure_matrix(const CovariateSpec& spec,
                                       const IndicatorState& delta, double r);

// Independent construction for the nominal pattern via the difference map:
// Q = K_0 + U' K U with U theta = (theta_kj) over non-baseline pairs.
// Exact up to floating point; used as an oracle against the direct build.
StructureMatrix structure_matrix_via_restriction(const CovariateSpec& spec,
                                                 const IndicatorState& delta,
                                                 double r);

double quadratic_form(const StructureMatrix& Q, const Eigen::VectorXd& beta);

// Pairwise sum form of beta' Q beta, evaluated without forming Q.
double quadratic_form_pairwise(const CovariateSpec& spec,
                               const IndicatorState& delta, double r,
                               const Eigen::VectorXd& beta);

// Lower Cholesky factor; throws NumericalError when Q is not positive
// definite (a disconnected pattern graph is rejected earlier with a clearer
// message).
Eigen::MatrixXd structure_cholesky(const StructureMatrix& Q);

double log_det(const StructureMatrix& Q);

struct PartialMoments {
  Eigen::VectorXd precision;   // Prec(beta_k | rest) = q_kk / (gamma tau^2)
  Eigen::MatrixXd correlation; // Corr(beta_k, beta_j | rest), unit diagonal
};

PartialMoments partial_moments(const StructureMatrix& Q, double tau2);

// Prior odds of the all-spike against the all-slab configuration for an
// unrestricted nominal covariate, on the log scale: (c(c-1)/2) log r.
double log_prior_odds_null_vs_full(int c, double r);

// The same odds assembled from determinants,
//   log|Q(1)|/2 - log|Q(0)|/2 + (d/2) log r,
// where d = c^2 counts the spiked pair terms of the two marginal likelihood
// normalisers with non-baseline pairs entering through both rows they touch.
double log_prior_odds_null_vs_full_determinant(int c, double r);

// p(delta) is proportional to |Q(delta)|^(-1/2) r^(spikes/2).  Restricted
// patterns make |Q| a product of kappas, so the weight is flat; this measures
// the spread max/min - 1 across configurations (enumerated up to dim 12,
// else a seeded sample of configurations).
struct UniformityResult {
  double relative_spread = 0.0;
  int configurations = 0;
};

UniformityResult indicator_prior_uniformity(const CovariateSpec& spec,
                                            double r,
                                            std::uint64_t seed = 0x5eed);

// Full conditional p(delta_kj = 1 | theta, tau^2) with theta the fused
// difference (or the effect itself for baseline pairs):
//   1 / (1 + sqrt(r) exp(-(r-1) theta^2 / (2 gamma tau^2))),
// evaluated in log space and clamped so extreme thetas saturate cleanly.
double conditional_delta_probability(double theta, double tau2, double gamma,
                                     double r);

// Marginal fusion probability P(delta = 0 | theta) after integrating tau^2
// out under tau^2 ~ InvGamma(g0, G0); both mixture components are scaled-t
// densities with 2 g0 degrees of freedom.
double marginal_fusion_probability(double theta, double g0, double G0,
                                   double r);
std::vector<double> fusion_probability_curve(std::span<const double> thetas,
                                             double g0, double G0, double r);

struct HyperParams {
  double r = 20000.0;
  double g0 = 5.0;
  double G0 = 2.0;
  bool G0_random = false;  // exponential hyperprior on G0
  double lambda = 2.0;     // its mean

  static HyperParams defaults_for(Scale s);
};

struct PriorDraws {
  Eigen::MatrixXd beta;          // draws x c
  Eigen::VectorXd tau2;          // draws
  std::vector<int> config;       // index into enumerated delta configurations
  std::vector<double> config_log_prob;  // log p(delta) per configuration
};

// Exact prior simulation: enumerate p(delta) (pattern dimension <= 20),
// then draw tau^2 and beta | delta, tau^2.  Frozen pairs stay slab.
PriorDraws simulate_prior(const CovariateSpec& spec, const HyperParams& hyper,
                          int draws, std::uint64_t seed);

}  // namespace effusion::prior
