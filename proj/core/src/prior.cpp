#include "effusion/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace effusion::prior {

namespace {

constexpr double log_clamp = 700.0;  // keep exp() finite either way

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Synthetic nominal covariate used by the closed-form diagnostics.
CovariateSpec nominal_spec(int c) {
  std::vector<std::string> levels;
  for (int i = 0; i <= c; ++i) levels.push_back(std::to_string(i));
  return CovariateSpec::make("x", std::move(levels), Scale::nominal);
}

}  // namespace

IndicatorState IndicatorState::all_ones(const CovariateSpec& spec) {
  IndicatorState st;
  st.bits.assign(spec.pattern.dim(), 1);
  st.frozen.assign(spec.pattern.dim(), 0);
  for (const auto& p : spec.frozen)
    st.frozen[spec.pattern.index_of(p.k, p.j)] = 1;
  return st;
}

IndicatorState IndicatorState::all_zeros(const CovariateSpec& spec) {
  IndicatorState st = all_ones(spec);
  for (int i = 0; i < st.dim(); ++i)
    if (!st.frozen[i]) st.bits[i] = 0;
  return st;
}

int IndicatorState::spikes() const {
  int n = 0;
  for (auto b : bits) n += b == 0;
  return n;
}

double gamma_for(Scale s, int c) {
  return s == Scale::nominal ? static_cast<double>(c) / 2.0 : 1.0;
}

StructureMatrix build_structure_matrix(const CovariateSpec& spec,
                                       const IndicatorState& delta, double r) {
  const int c = spec.c();
  if (delta.dim() != spec.pattern.dim())
    throw ConfigError("indicator state does not match the fusion pattern of '" +
                      spec.name + "'");
  if (!(r > 1.0)) throw ConfigError("spike factor r must exceed 1");

  StructureMatrix sm;
  sm.c = c;
  sm.r = r;
  sm.gamma = gamma_for(spec.scale, c);
  sm.Q = Eigen::MatrixXd::Zero(c, c);

  const auto& pairs = spec.pattern.pairs();
  // Off-diagonals: -kappa for pattern pairs not involving the baseline.
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [k, j] = pairs[i];
    if (j == 0) continue;
    const double kappa = delta.bits[i] ? 1.0 : r;
    sm.Q(k - 1, j - 1) = -kappa;
    sm.Q(j - 1, k - 1) = -kappa;
  }
  // Diagonals: the baseline kappa (if the pair exists) plus every kappa of a
  // pattern pair touching the level.
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [k, j] = pairs[i];
    const double kappa = delta.bits[i] ? 1.0 : r;
    sm.Q(k - 1, k - 1) += kappa;
    if (j >= 1) sm.Q(j - 1, j - 1) += kappa;
  }
  return sm;
}

StructureMatrix structure_matrix_via_restriction(const CovariateSpec& spec,
                                                 const IndicatorState& delta,
                                                 double r) {
  if (spec.pattern.restricted())
    throw ConfigError(
        "the restriction construction applies to the unrestricted nominal "
        "pattern only");
  const int c = spec.c();
  const auto& pairs = spec.pattern.pairs();

  // Split kappas into the baseline block K0 and the difference block K.
  Eigen::VectorXd k0 = Eigen::VectorXd::Zero(c);
  std::vector<double> kdiff;
  std::vector<std::pair<int, int>> diff_pairs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [k, j] = pairs[i];
    const double kappa = delta.bits[i] ? 1.0 : r;
    if (j == 0) {
      k0(k - 1) = kappa;
    } else {
      kdiff.push_back(kappa);
      diff_pairs.emplace_back(k, j);
    }
  }
  // U maps effects to the non-baseline differences theta_kj = beta_k - beta_j.
  Eigen::MatrixXd U =
      Eigen::MatrixXd::Zero(static_cast<int>(diff_pairs.size()), c);
  for (std::size_t row = 0; row < diff_pairs.size(); ++row) {
    U(static_cast<int>(row), diff_pairs[row].first - 1) = 1.0;
    U(static_cast<int>(row), diff_pairs[row].second - 1) = -1.0;
  }
  Eigen::VectorXd kd = Eigen::Map<Eigen::VectorXd>(
      kdiff.data(), static_cast<Eigen::Index>(kdiff.size()));

  StructureMatrix sm;
  sm.c = c;
  sm.r = r;
  sm.gamma = gamma_for(spec.scale, c);
  sm.Q = Eigen::MatrixXd(k0.asDiagonal());
  sm.Q += U.transpose() * kd.asDiagonal() * U;
  return sm;
}

double quadratic_form(const StructureMatrix& Q, const Eigen::VectorXd& beta) {
  return beta.dot(Q.Q * beta);
}

double quadratic_form_pairwise(const CovariateSpec& spec,
                               const IndicatorState& delta, double r,
                               const Eigen::VectorXd& beta) {
  const auto& pairs = spec.pattern.pairs();
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [k, j] = pairs[i];
    const double kappa = delta.bits[i] ? 1.0 : r;
    const double diff = j == 0 ? beta(k - 1) : beta(k - 1) - beta(j - 1);
    acc += kappa * diff * diff;
  }
  return acc;
}

Eigen::MatrixXd structure_cholesky(const StructureMatrix& Q) {
  Eigen::LLT<Eigen::MatrixXd> llt(Q.Q);
  if (llt.info() != Eigen::Success)
    throw NumericalError("structure matrix is not positive definite");
  return llt.matrixL();
}

double log_det(const StructureMatrix& Q) {
  const Eigen::MatrixXd L = structure_cholesky(Q);
  return 2.0 * L.diagonal().array().log().sum();
}

PartialMoments partial_moments(const StructureMatrix& Q, double tau2) {
  if (!(tau2 > 0.0)) throw NumericalError("tau^2 must be positive");
  const int c = Q.c;
  PartialMoments pm;
  pm.precision = Q.Q.diagonal() / (Q.gamma * tau2);
  pm.correlation = Eigen::MatrixXd::Identity(c, c);
  for (int k = 0; k < c; ++k)
    for (int j = 0; j < c; ++j)
      if (k != j)
        pm.correlation(k, j) = -Q.Q(k, j) / std::sqrt(Q.Q(k, k) * Q.Q(j, j));
  return pm;
}

double log_prior_odds_null_vs_full(int c, double r) {
  return 0.5 * c * (c - 1) * std::log(r);
}

double log_prior_odds_null_vs_full_determinant(int c, double r) {
  const CovariateSpec spec = nominal_spec(c);
  const StructureMatrix slab =
      build_structure_matrix(spec, IndicatorState::all_ones(spec), r);
  const StructureMatrix spike =
      build_structure_matrix(spec, IndicatorState::all_zeros(spec), r);
  const double d = static_cast<double>(c) * c;
  return 0.5 * log_det(slab) - 0.5 * log_det(spike) + 0.5 * d * std::log(r);
}

namespace {

// log weight of one configuration under p(delta), up to normalisation.
double config_log_weight(const CovariateSpec& spec,
                         const IndicatorState& delta, double r) {
  const StructureMatrix Q = build_structure_matrix(spec, delta, r);
  return -0.5 * log_det(Q) + 0.5 * delta.spikes() * std::log(r);
}

std::vector<int> free_pair_indices(const IndicatorState& st) {
  std::vector<int> idx;
  for (int i = 0; i < st.dim(); ++i)
    if (!st.frozen[i]) idx.push_back(i);
  return idx;
}

void apply_config(IndicatorState& st, const std::vector<int>& free,
                  std::uint64_t config) {
  for (std::size_t b = 0; b < free.size(); ++b)
    st.bits[free[b]] = static_cast<std::uint8_t>((config >> b) & 1u);
}

}  // namespace

UniformityResult indicator_prior_uniformity(const CovariateSpec& spec,
                                            double r, std::uint64_t seed) {
  if (!spec.pattern.restricted())
    throw ConfigError("uniformity holds only for restricted patterns");
  IndicatorState st = IndicatorState::all_ones(spec);
  const auto free = free_pair_indices(st);
  const int dim = static_cast<int>(free.size());

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  int count = 0;
  auto visit = [&](std::uint64_t config) {
    apply_config(st, free, config);
    const double w = config_log_weight(spec, st, r);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    ++count;
  };
  if (dim <= 12) {
    for (std::uint64_t cfg = 0; cfg < (1ull << dim); ++cfg) visit(cfg);
  } else {
    rng::Stream stream(rng::derive(seed, "uniformity"));
    for (int i = 0; i < 512; ++i) {
      std::uint64_t cfg = 0;
      for (int b = 0; b < dim; ++b) cfg |= (stream() & 1ull) << b;
      visit(cfg);
    }
  }
  return {std::expm1(hi - lo), count};
}

double conditional_delta_probability(double theta, double tau2, double gamma,
                                     double r) {
  if (!(tau2 > 0.0) || !(gamma > 0.0) || !(r > 1.0))
    throw NumericalError("invalid conditional indicator parameters");
  double log_odds_spike =
      0.5 * std::log(r) - (r - 1.0) * theta * theta / (2.0 * gamma * tau2);
  log_odds_spike = std::clamp(log_odds_spike, -log_clamp, log_clamp);
  return 1.0 / (1.0 + std::exp(log_odds_spike));
}

namespace {

// log density of the t distribution with nu degrees of freedom.
double log_t_density(double x, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * 3.141592653589793) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

}  // namespace

double marginal_fusion_probability(double theta, double g0, double G0,
                                   double r) {
  if (!(g0 > 0.0) || !(G0 > 0.0) || !(r > 1.0))
    throw ConfigError("invalid fusion curve parameters");
  const double nu = 2.0 * g0;
  const double sigma = std::sqrt(G0 / g0);
  // Slab and spike marginals of theta are scaled t densities; the indicator
  // prior is flat in the scalar case.
  double log_ratio = log_t_density(theta / sigma, nu) - 0.5 * std::log(r) -
                     log_t_density(std::sqrt(r) * theta / sigma, nu);
  log_ratio = std::clamp(log_ratio, -log_clamp, log_clamp);
  return 1.0 / (1.0 + std::exp(log_ratio));
}

std::vector<double> fusion_probability_curve(std::span<const double> thetas,
                                             double g0, double G0, double r) {
  std::vector<double> out;
  out.reserve(thetas.size());
  for (double th : thetas)
    out.push_back(marginal_fusion_probability(th, g0, G0, r));
  return out;
}

HyperParams HyperParams::defaults_for(Scale s) {
  HyperParams h;
  h.G0 = s == Scale::nominal ? 2.0 : 20.0;
  return h;
}

PriorDraws simulate_prior(const CovariateSpec& spec, const HyperParams& hyper,
                          int draws, std::uint64_t seed) {
  IndicatorState st = IndicatorState::all_ones(spec);
  const auto free = free_pair_indices(st);
  const int dim = static_cast<int>(free.size());
  if (dim > 20)
    throw ConfigError("prior simulation enumerates 2^" + std::to_string(dim) +
                      " indicator configurations, which is infeasible; "
                      "restrict the pattern or freeze pairs");
  const int c = spec.c();
  const std::uint64_t nconf = 1ull << dim;

  std::vector<double> logw(nconf);
  for (std::uint64_t cfg = 0; cfg < nconf; ++cfg) {
    apply_config(st, free, cfg);
    logw[cfg] = config_log_weight(spec, st, hyper.r);
  }
  const double norm = log_sum_exp(logw);
  for (double& w : logw) w -= norm;
  std::vector<double> cum(nconf);
  double acc = 0.0;
  for (std::uint64_t cfg = 0; cfg < nconf; ++cfg) {
    acc += std::exp(logw[cfg]);
    cum[cfg] = acc;
  }

  PriorDraws out;
  out.beta.resize(draws, c);
  out.tau2.resize(draws);
  out.config.resize(draws);
  out.config_log_prob = logw;

  rng::Stream stream(rng::derive(seed, "prior-sim"));
  for (int i = 0; i < draws; ++i) {
    const double u = stream.uniform();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const std::uint64_t cfg =
        it == cum.end() ? nconf - 1 : static_cast<std::uint64_t>(it - cum.begin());
    apply_config(st, free, cfg);
    out.config[i] = static_cast<int>(cfg);

    const double G0 =
        hyper.G0_random ? stream.exponential(hyper.lambda) : hyper.G0;
    const double tau2 = stream.inv_gamma(hyper.g0, G0);
    out.tau2(i) = tau2;

    const StructureMatrix sm = build_structure_matrix(spec, st, hyper.r);
    const Eigen::MatrixXd L = structure_cholesky(sm);
    Eigen::VectorXd z(c);
    for (int k = 0; k < c; ++k) z(k) = stream.normal();
    // beta | delta, tau2 ~ N(0, gamma tau2 Q^{-1}): solve L' x = z.
    const Eigen::VectorXd x =
        L.transpose().triangularView<Eigen::Upper>().solve(z);
    out.beta.row(i) = std::sqrt(sm.gamma * tau2) * x.transpose();
  }
  return out;
}

}  // namespace effusion::prior
