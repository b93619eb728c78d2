#include "effusion/gibbs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace effusion::gibbs {

GibbsSampler::GibbsSampler(const design::DesignMatrix& dm, Eigen::VectorXd y,
                           std::vector<design::CovariateSpec> specs,
                           std::vector<prior::HyperParams> hypers,
                           SamplerConfig cfg, std::uint64_t stream_key)
    : dm_(dm),
      y_(std::move(y)),
      specs_(std::move(specs)),
      hypers_(std::move(hypers)),
      cfg_(cfg),
      rng_(stream_key) {
  if (y_.size() != dm_.n())
    throw DataError("response length does not match the design matrix");
  if (specs_.size() != dm_.block_size.size() || specs_.size() != hypers_.size())
    throw ConfigError("covariate specs, hyperparameters and design blocks "
                      "must line up");
  for (std::size_t h = 0; h < specs_.size(); ++h)
    if (specs_[h].c() != dm_.block_size[h])
      throw ConfigError("design block of covariate '" + specs_[h].name +
                        "' does not match its level count");
  if (!(cfg_.M0 > 0.0)) throw ConfigError("intercept prior variance M0 must be positive");
  xtx_ = dm_.X.transpose() * dm_.X;
  xty_ = dm_.X.transpose() * y_;
  structure_.resize(specs_.size());
  initialize();
}

void GibbsSampler::set_response(const Eigen::VectorXd& y) {
  if (y.size() != dm_.n())
    throw DataError("response length does not match the design matrix");
  y_ = y;
  xty_ = dm_.X.transpose() * y_;
}

void GibbsSampler::initialize() {
  const int p = covariates();
  state_.beta = Eigen::VectorXd::Zero(dim());
  state_.tau2.resize(p);
  state_.G0.resize(p);
  state_.delta.clear();
  for (int h = 0; h < p; ++h) {
    const auto& hy = hypers_[h];
    state_.G0(h) = hy.G0_random ? hy.lambda : hy.G0;
    state_.tau2(h) =
        hy.g0 > 1.0 ? state_.G0(h) / (hy.g0 - 1.0) : state_.G0(h);
    state_.delta.push_back(prior::IndicatorState::all_ones(specs_[h]));
  }
  const int n = dm_.n();
  if (n >= 2) {
    const double mean = y_.mean();
    state_.sigma2 = (y_.array() - mean).square().sum() / (n - 1);
    if (!(state_.sigma2 > 0.0)) state_.sigma2 = 1.0;
  } else {
    state_.sigma2 = 1.0;
  }
  refresh_structure();
  sweep_index_ = 0;
}

Eigen::VectorXd GibbsSampler::beta_block(int h) const {
  return state_.beta.segment(dm_.block_start[h], dm_.block_size[h]);
}

void GibbsSampler::refresh_structure() {
  for (int h = 0; h < covariates(); ++h)
    structure_[h] =
        prior::build_structure_matrix(specs_[h], state_.delta[h], hypers_[h].r)
            .Q;
}

Eigen::MatrixXd GibbsSampler::prior_precision_block(int h) const {
  const double gamma = prior::gamma_for(specs_[h].scale, specs_[h].c());
  return structure_[h] / (gamma * state_.tau2(h));
}

Eigen::MatrixXd GibbsSampler::full_prior_precision() const {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim(), dim());
  P(0, 0) = 1.0 / cfg_.M0;
  for (int h = 0; h < covariates(); ++h)
    P.block(dm_.block_start[h], dm_.block_start[h], dm_.block_size[h],
            dm_.block_size[h]) = prior_precision_block(h);
  return P;
}

void GibbsSampler::sample_beta() {
  Eigen::MatrixXd P = full_prior_precision();
  P += xtx_ / state_.sigma2;
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success)
    throw NumericalError("effect full conditional precision is not positive "
                         "definite");
  const Eigen::VectorXd b = llt.solve(xty_ / state_.sigma2);
  Eigen::VectorXd z(dim());
  for (int i = 0; i < dim(); ++i) z(i) = rng_.normal();
  state_.beta = b + llt.matrixU().solve(z);
}

void GibbsSampler::sample_sigma2() {
  const double shape = cfg_.s0 + 0.5 * dm_.n();
  const Eigen::VectorXd resid = y_ - dm_.X * state_.beta;
  const double scale = cfg_.S0 + 0.5 * resid.squaredNorm();
  if (!(shape > 0.0))
    throw NumericalError("error variance shape s0 + n/2 is not positive; "
                         "provide a proper prior or data");
  if (!(scale > 0.0))
    throw NumericalError("error variance scale S0 + SSE/2 is not positive");
  state_.sigma2 = rng_.inv_gamma(shape, scale);
}

void GibbsSampler::sample_tau2() {
  for (int h = 0; h < covariates(); ++h) {
    const auto& hy = hypers_[h];
    const double gamma = prior::gamma_for(specs_[h].scale, specs_[h].c());
    const Eigen::VectorXd bh = beta_block(h);
    const double bqb = bh.dot(structure_[h] * bh);
    const double shape = hy.g0 + 0.5 * specs_[h].c();
    const double scale = state_.G0(h) + bqb / (2.0 * gamma);
    state_.tau2(h) = rng_.inv_gamma(shape, scale);
  }
}

void GibbsSampler::sample_G0() {
  for (int h = 0; h < covariates(); ++h) {
    const auto& hy = hypers_[h];
    if (!hy.G0_random) continue;
    // G0 | tau2 ~ Gamma(g0 + 1, rate 1/lambda + 1/tau2).
    const double rate = 1.0 / hy.lambda + 1.0 / state_.tau2(h);
    state_.G0(h) = rng_.gamma(hy.g0 + 1.0) / rate;
  }
}

void GibbsSampler::sample_delta() {
  for (int h = 0; h < covariates(); ++h) {
    const auto& spec = specs_[h];
    const auto& pairs = spec.pattern.pairs();
    const double gamma = prior::gamma_for(spec.scale, spec.c());
    auto& st = state_.delta[h];
    const int bs = dm_.block_start[h];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (st.frozen[i]) continue;
      const auto [k, j] = pairs[i];
      const double theta = j == 0 ? state_.beta(bs + k - 1)
                                  : state_.beta(bs + k - 1) -
                                        state_.beta(bs + j - 1);
      const double p_slab = prior::conditional_delta_probability(
          theta, state_.tau2(h), gamma, hypers_[h].r);
      st.bits[i] = rng_.uniform() < p_slab ? 1 : 0;
    }
  }
}

void GibbsSampler::sweep(bool warm) {
  sample_beta();
  sample_sigma2();
  sample_tau2();
  sample_G0();
  if (!warm) sample_delta();
  refresh_structure();
  ++sweep_index_;
}

Eigen::Block<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>,
             Eigen::Dynamic, Eigen::Dynamic, true>
PosteriorDraws::delta_block(int h) const {
  const int next = h + 1 < static_cast<int>(delta_offset.size())
                       ? delta_offset[h + 1]
                       : static_cast<int>(delta.cols());
  return delta.middleCols(delta_offset[h], next - delta_offset[h]);
}

PosteriorDraws pool(std::span<const PosteriorDraws> chains) {
  if (chains.empty()) throw ConfigError("no chains to pool");
  PosteriorDraws out = chains.front();
  int rows = 0;
  for (const auto& ch : chains) {
    if (ch.coef_names != out.coef_names ||
        ch.delta_offset != out.delta_offset)
      throw DataError("cannot pool draws from different models");
    rows += ch.rows();
  }
  out.beta.resize(rows, chains.front().beta.cols());
  out.sigma2.resize(rows);
  out.tau2.resize(rows, chains.front().tau2.cols());
  out.G0.resize(rows, chains.front().G0.cols());
  out.delta.resize(rows, chains.front().delta.cols());
  int at = 0;
  for (const auto& ch : chains) {
    out.beta.middleRows(at, ch.rows()) = ch.beta;
    out.sigma2.segment(at, ch.rows()) = ch.sigma2;
    out.tau2.middleRows(at, ch.rows()) = ch.tau2;
    out.G0.middleRows(at, ch.rows()) = ch.G0;
    out.delta.middleRows(at, ch.rows()) = ch.delta;
    at += ch.rows();
  }
  return out;
}

namespace {

void validate_run_config(const SamplerConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("iterations must be at least 1");
  if (cfg.burnin < 0) throw ConfigError("burnin must be non-negative");
  if (cfg.thinning < 1) throw ConfigError("thinning must be at least 1");
  if (cfg.warm_start < 0 || cfg.warm_start > cfg.burnin)
    throw ConfigError("warm start sweeps must lie within the burn-in");
  if (cfg.chains < 1) throw ConfigError("chains must be at least 1");
}

}  // namespace

PosteriorDraws run_chain(const design::DesignMatrix& dm,
                         const Eigen::VectorXd& y,
                         const std::vector<design::CovariateSpec>& specs,
                         const std::vector<prior::HyperParams>& hypers,
                         const SamplerConfig& cfg, int chain_index) {
  validate_run_config(cfg);
  const std::uint64_t key =
      rng::derive(cfg.seed, "chain", static_cast<std::uint64_t>(chain_index));
  GibbsSampler sampler(dm, y, specs, hypers, cfg, key);

  PosteriorDraws out;
  out.specs = specs;
  out.hypers = hypers;
  out.config = cfg;
  out.chain_index = chain_index;
  out.coef_names.push_back("mu");
  for (const auto& spec : specs)
    for (int k = 1; k <= spec.c(); ++k)
      out.coef_names.push_back(spec.name + "=" + spec.levels[k]);

  int pair_cols = 0;
  for (const auto& spec : specs) {
    out.delta_offset.push_back(pair_cols);
    pair_cols += spec.pattern.dim();
  }
  const int rows = cfg.iterations / cfg.thinning;
  const int p = static_cast<int>(specs.size());
  out.beta.resize(rows, sampler.dim());
  out.sigma2.resize(rows);
  out.tau2.resize(rows, p);
  out.G0.resize(rows, p);
  out.delta.resize(rows, pair_cols);

  int sweep = 0;
  auto guarded_sweep = [&](bool warm) {
    try {
      sampler.sweep(warm);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (sweep " +
                           std::to_string(sweep) + ")");
    }
    ++sweep;
  };

  for (int i = 0; i < cfg.burnin; ++i) guarded_sweep(i < cfg.warm_start);
  int row = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    guarded_sweep(false);
    if ((it + 1) % cfg.thinning != 0) continue;
    const auto& st = sampler.state();
    out.beta.row(row) = st.beta.transpose();
    out.sigma2(row) = st.sigma2;
    out.tau2.row(row) = st.tau2.transpose();
    out.G0.row(row) = st.G0.transpose();
    int col = 0;
    for (int h = 0; h < p; ++h)
      for (const auto b : st.delta[h].bits) out.delta(row, col++) = b;
    ++row;
  }
  return out;
}

std::vector<PosteriorDraws> run_chains(
    const design::DesignMatrix& dm, const Eigen::VectorXd& y,
    const std::vector<design::CovariateSpec>& specs,
    const std::vector<prior::HyperParams>& hypers, const SamplerConfig& cfg,
    int parallel) {
  validate_run_config(cfg);
  const int n = cfg.chains;
  std::vector<PosteriorDraws> out(n);
  std::vector<std::exception_ptr> errors(n);
  const int workers = std::clamp(parallel, 1, n);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= n) return;
      try {
        out[idx] = run_chain(dm, y, specs, hypers, cfg, idx);
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return out;
}

IatResult integrated_autocorrelation_time(std::span<const double> series) {
  const int n = static_cast<int>(series.size());
  if (n < 4) return {1.0, true};
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double c0 = 0.0;
  for (double x : series) c0 += (x - mean) * (x - mean);
  c0 /= n;
  if (std::sqrt(c0) <= 1e-12 * (1.0 + std::abs(mean))) return {1.0, true};

  auto rho = [&](int t) {
    double s = 0.0;
    for (int i = 0; i + t < n; ++i)
      s += (series[i] - mean) * (series[i + t] - mean);
    return s / (n * c0);
  };
  // Geyer: sum successive lag pairs while their sum stays positive.
  double total = 0.0;
  for (int m = 0; 2 * m + 1 <= n / 2; ++m) {
    const double g = rho(2 * m) + rho(2 * m + 1);
    if (g <= 0.0) break;
    total += g;
  }
  if (total <= 0.0) return {1.0, false};
  return {2.0 * total - 1.0, false};
}

}  // namespace effusion::gibbs
