#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "effusion/select.hpp"

using namespace effusion::select;
using effusion::design::CovariateSpec;
using effusion::design::FusionPattern;
using effusion::design::Scale;
using effusion::rng::Stream;
using effusion::rng::derive;

namespace {

Eigen::MatrixXd random_similarity(int m, Stream& s) {
  Eigen::MatrixXd pi = Eigen::MatrixXd::Identity(m, m);
  for (int k = 1; k < m; ++k)
    for (int j = 0; j < k; ++j) {
      pi(k, j) = s.uniform();
      pi(j, k) = pi(k, j);
    }
  return pi;
}

// Reference enumeration over all partitions with the published tie rules,
// written independently of the library (plain recursion, no incremental
// cost), optionally restricted to contiguous partitions.
Partition reference_best(const Eigen::MatrixXd& pi, bool contiguous) {
  const int m = static_cast<int>(pi.rows());
  std::vector<int> labels(m, 0);
  Partition best;
  double best_obj = 0.0;
  bool have = false;
  auto consider = [&](const std::vector<int>& lab) {
    if (contiguous) {
      for (int i = 1; i < m; ++i)
        if (lab[i] != lab[i - 1] && lab[i] != lab[i - 1] + 1) return;
    }
    Partition p;
    p.labels = lab;
    const double obj = binder_objective(pi, p);
    const int cl = p.clusters();
    if (!have) {
      best = p;
      best_obj = obj;
      have = true;
      return;
    }
    const double eps = 1e-12;
    if (obj < best_obj - eps ||
        (std::fabs(obj - best_obj) <= eps &&
         (cl < best.clusters() ||
          (cl == best.clusters() && p.labels < best.labels)))) {
      best = p;
      best_obj = obj;
    }
  };
  std::function<void(int, int)> rec = [&](int i, int maxl) {
    if (i == m) {
      consider(labels);
      return;
    }
    for (int l = 0; l <= maxl + 1; ++l) {
      labels[i] = l;
      rec(i + 1, std::max(maxl, l));
    }
  };
  labels[0] = 0;
  rec(1, 0);
  return best;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("partitions canonicalise and report clusters") {
  const auto p = Partition::from_labels({2, 2, 4, 0, 4});
  CHECK(p.labels == std::vector<int>{0, 0, 1, 2, 1});
  CHECK(p.clusters() == 3);
  CHECK(p.fused(0, 1));
  CHECK(!p.fused(0, 2));
  CHECK(p.groups() ==
        std::vector<std::vector<int>>{{0, 1}, {2, 4}, {3}});
  CHECK(Partition::from_labels({2, 2, 2}).single_cluster());
  // Labels must index into {0..m-1}.
  CHECK_THROWS_AS(Partition::from_labels({0, 5}), effusion::ConfigError);
}

TEST_CASE("sweep partitions follow the spiked pairs") {
  // Ordinal pattern on 5 levels; spiking (2,1) and (3,2) glues {1,2,3}.
  const auto pat = FusionPattern::for_scale(Scale::ordinal, 4);
  const std::vector<std::uint8_t> bits{1, 0, 0, 1};
  const auto p = sweep_partition(pat, bits);
  CHECK(p.labels == std::vector<int>{0, 1, 1, 1, 2});

  // Baseline pairs fuse levels with level 0.
  const auto sel = FusionPattern::for_scale(Scale::selection, 3);
  const std::vector<std::uint8_t> sel_bits{0, 1, 0};
  const auto q = sweep_partition(sel, sel_bits);
  CHECK(q.labels == std::vector<int>{0, 0, 1, 0});

  // All slab: everything separate.
  const std::vector<std::uint8_t> ones{1, 1, 1, 1};
  CHECK(sweep_partition(pat, ones).clusters() == 5);
}

TEST_CASE("posterior similarity reports per-pair fusion frequencies") {
  // Hand-built indicator draws over a selection pattern with c = 2.
  using Draws = effusion::gibbs::PosteriorDraws;
  Draws d;
  d.specs = {CovariateSpec::make("x", {"0", "1", "2"}, Scale::selection)};
  d.delta_offset = {0};
  d.beta = Eigen::MatrixXd::Zero(4, 3);  // row count = kept sweeps
  d.delta.resize(4, 2);
  d.delta << 0, 0,   // both spiked
             0, 1,   // only (1,0) spiked
             0, 1,
             1, 1;   // both slab
  const auto pi = posterior_similarity(d, 0);
  REQUIRE(pi.rows() == 3);
  CHECK(pi(1, 0) == doctest::Approx(0.75));
  CHECK(pi(2, 0) == doctest::Approx(0.25));
  CHECK(pi(0, 1) == doctest::Approx(0.75));
  // No (2,1) indicator exists in the baseline pattern; the entry stays at
  // the neutral one half, which every Binder term weights as exactly zero.
  CHECK(pi(2, 1) == doctest::Approx(0.5));
  CHECK(pi(1, 2) == doctest::Approx(0.5));
  CHECK(pi(0, 0) == doctest::Approx(1.0));

  // Ordinal pattern: only adjacent pairs carry indicators.
  Draws o;
  o.specs = {CovariateSpec::make("z", {"0", "1", "2", "3"}, Scale::ordinal)};
  o.delta_offset = {0};
  o.beta = Eigen::MatrixXd::Zero(2, 4);
  o.delta.resize(2, 3);
  o.delta << 0, 1, 0,
             0, 1, 0;
  const auto po = posterior_similarity(o, 0);
  REQUIRE(po.rows() == 4);
  CHECK(po(1, 0) == doctest::Approx(1.0));
  CHECK(po(2, 1) == doctest::Approx(0.0));
  CHECK(po(3, 2) == doctest::Approx(1.0));
  CHECK(po(2, 0) == doctest::Approx(0.5));
  CHECK(po(3, 0) == doctest::Approx(0.5));
  CHECK(po(3, 1) == doctest::Approx(0.5));
}

TEST_CASE("binder objective on a known example") {
  Eigen::MatrixXd pi(3, 3);
  pi << 1.0, 0.9, 0.2, 0.9, 1.0, 0.3, 0.2, 0.3, 1.0;
  Partition together = Partition::from_labels({0, 0, 0});
  CHECK(binder_objective(pi, together) ==
        doctest::Approx((0.5 - 0.9) + (0.5 - 0.2) + (0.5 - 0.3)));
  Partition split = Partition::from_labels({0, 0, 1});
  CHECK(binder_objective(pi, split) == doctest::Approx(0.5 - 0.9));
  CHECK(binder_objective(pi, Partition::from_labels({0, 1, 2})) == 0.0);

  // The optimal partition keeps the strong pair and isolates the third.
  const auto best = minimize_binder_exact(pi);
  CHECK(best.labels == std::vector<int>{0, 0, 1});
}

TEST_CASE("exact ties resolve toward fusion") {
  Eigen::MatrixXd pi(2, 2);
  pi << 1.0, 0.5, 0.5, 1.0;
  const auto best = minimize_binder_exact(pi);
  CHECK(best.single_cluster());
  // Strictly below one half keeps the levels apart.
  pi(0, 1) = pi(1, 0) = 0.4999;
  CHECK(minimize_binder_exact(pi).clusters() == 2);
}

TEST_CASE("exact search matches an independent enumeration") {
  Stream s(derive(808, "exact-ref"));
  for (int rep = 0; rep < 40; ++rep) {
    const int m = 2 + static_cast<int>(s.uniform() * 5);  // up to 6 levels
    const auto pi = random_similarity(m, s);
    const auto got = minimize_binder_exact(pi);
    const auto want = reference_best(pi, false);
    CHECK(got.labels == want.labels);
  }
}

TEST_CASE("contiguous search is exact over contiguous partitions") {
  Stream s(derive(808, "dp-ref"));
  for (int rep = 0; rep < 50; ++rep) {
    const int m = 2 + static_cast<int>(s.uniform() * 7);  // up to 8 levels
    const auto pi = random_similarity(m, s);
    const auto got = minimize_binder_contiguous(pi);
    const auto want = reference_best(pi, true);
    CHECK(got.labels == want.labels);
    // Contiguity by construction.
    for (int i = 1; i < m; ++i) {
      CHECK(got.labels[i] >= got.labels[i - 1]);
      CHECK(got.labels[i] <= got.labels[i - 1] + 1);
    }
  }
}

TEST_CASE("greedy search is competitive and never absurd") {
  Stream s(derive(808, "greedy"));
  int matches = 0;
  const int cases = 60;
  for (int rep = 0; rep < cases; ++rep) {
    const int m = 7;
    const auto pi = random_similarity(m, s);
    const auto exact = minimize_binder_exact(pi);
    const auto greedy = minimize_binder_greedy(pi);
    const double oe = binder_objective(pi, exact);
    const double og = binder_objective(pi, greedy);
    CHECK(og >= oe - 1e-12);       // exact is a lower bound
    CHECK(og <= 0.0 + 1e-12);      // never worse than all-singletons
    matches += greedy.labels == exact.labels;
  }
  CHECK(matches >= cases * 90 / 100);
}

TEST_CASE("dispatcher respects the measurement scale") {
  // Similarity favouring the non-contiguous grouping {0,2} {1}.
  Eigen::MatrixXd pi(3, 3);
  pi << 1.0, 0.1, 0.9, 0.1, 1.0, 0.1, 0.9, 0.1, 1.0;
  const auto nominal = minimize_binder(pi, Scale::nominal);
  CHECK(nominal.labels == std::vector<int>{0, 1, 0});
  const auto ordinal = minimize_binder(pi, Scale::ordinal);
  // The contiguous optimum cannot skip level 1.
  CHECK(ordinal.labels == std::vector<int>{0, 1, 2});
}

TEST_CASE("hpd interval on known draws") {
  std::vector<double> grid(100);
  for (int i = 0; i < 100; ++i) grid[i] = i + 1.0;
  const auto [lo, hi] = hpd_interval(grid, 0.95);
  // All windows of 95 points tie on width; the first one wins.
  CHECK(lo == doctest::Approx(1.0));
  CHECK(hi == doctest::Approx(95.0));

  // A right-skewed sample pins the interval to the dense left side; the
  // grid windows tie on width up to rounding, so only the window location
  // is determined.
  std::vector<double> skew;
  for (int i = 0; i < 99; ++i) skew.push_back(i * 0.01);
  skew.push_back(50.0);
  const auto [slo, shi] = hpd_interval(skew, 0.95);
  CHECK(shi < 1.0);
  CHECK(slo >= 0.0);
  CHECK(slo <= 0.05);

  CHECK_THROWS_AS(hpd_interval({}, 0.95), effusion::NumericalError);
}

TEST_CASE("refit reproduces least squares under a flat prior") {
  // Two covariates; fuse b's two non-baseline levels, keep a saturated.
  std::vector<CovariateSpec> specs{
      CovariateSpec::make("a", {"0", "1"}, Scale::nominal),
      CovariateSpec::make("b", {"0", "1", "2"}, Scale::nominal)};
  std::vector<std::vector<int>> codes;
  Stream s(derive(99, "refit-data"));
  const int n = 200;
  for (int i = 0; i < n; ++i) codes.push_back({i % 2, (i / 2) % 3});
  const auto dm = effusion::design::build_design(codes, specs);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double a_eff = codes[i][0] == 1 ? 1.5 : 0.0;
    const double b_eff = codes[i][1] >= 1 ? -1.0 : 0.0;  // fused truth
    y(i) = 0.3 + a_eff + b_eff + 0.2 * s.normal();
  }
  std::vector<Partition> parts{Partition::from_labels({0, 1}),
                               Partition::from_labels({0, 1, 1})};
  RefitConfig cfg;
  const auto fit = refit_selected(dm, y, specs, parts, cfg, derive(99, "r"));

  REQUIRE(fit.coefficients.size() == 3);
  CHECK(fit.coefficients[0].name == "mu");
  CHECK(fit.coefficients[1].name == "a{1}");
  CHECK(fit.coefficients[2].name == "b{1,2}");

  // Closed-form least squares on the fused design.
  Eigen::MatrixXd Z(n, 3);
  for (int i = 0; i < n; ++i) {
    Z(i, 0) = 1.0;
    Z(i, 1) = codes[i][0] == 1 ? 1.0 : 0.0;
    Z(i, 2) = codes[i][1] >= 1 ? 1.0 : 0.0;
  }
  const Eigen::VectorXd ols =
      (Z.transpose() * Z).ldlt().solve(Z.transpose() * y);
  for (int k = 0; k < 3; ++k) {
    CHECK(fit.coefficients[k].mean ==
          doctest::Approx(ols(k)).epsilon(0.02));
    CHECK(fit.coefficients[k].hpd_low < fit.coefficients[k].mean);
    CHECK(fit.coefficients[k].hpd_high > fit.coefficients[k].mean);
  }
  CHECK(fit.sigma2_mean == doctest::Approx(0.04).epsilon(0.3));

  // Level effects replicate the fused coefficient per level.
  REQUIRE(fit.level_effects.size() == 2);
  CHECK(fit.level_effects[0](0) ==
        doctest::Approx(fit.coefficients[1].mean));
  CHECK(fit.level_effects[1](0) == fit.level_effects[1](1));

  // Fusing a level into the baseline cluster drops it from the design.
  std::vector<Partition> excl{Partition::from_labels({0, 0}),
                              Partition::from_labels({0, 1, 1})};
  const auto fit2 = refit_selected(dm, y, specs, excl, cfg, derive(99, "r2"));
  REQUIRE(fit2.coefficients.size() == 2);
  CHECK(fit2.coefficients[1].name == "b{1,2}");
  CHECK(fit2.level_effects[0](0) == 0.0);
}

TEST_CASE("selection report flows from draws to refit") {
  // Simulate a fit where covariate a matters and b does not.
  std::vector<CovariateSpec> specs{
      CovariateSpec::make("a", {"0", "1", "2"}, Scale::nominal),
      CovariateSpec::make("b", {"0", "1"}, Scale::nominal)};
  std::vector<std::vector<int>> codes;
  Stream s(derive(1234, "report-data"));
  const int n = 240;
  for (int i = 0; i < n; ++i) codes.push_back({i % 3, (i / 3) % 2});
  const auto dm = effusion::design::build_design(codes, specs);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double a_eff = codes[i][0] == 0 ? 0.0 : 2.0;  // levels 1,2 fused
    y(i) = 1.0 + a_eff + 0.3 * s.normal();
  }
  std::vector<effusion::prior::HyperParams> hypers(
      2, effusion::prior::HyperParams::defaults_for(Scale::nominal));
  effusion::gibbs::SamplerConfig cfg;
  cfg.burnin = 300;
  cfg.iterations = 900;
  cfg.warm_start = 100;
  cfg.seed = 2025;
  const auto draws =
      effusion::gibbs::run_chain(dm, y, specs, hypers, cfg, 0);

  RefitConfig rcfg;
  const auto report =
      selection_report(draws, dm, y, rcfg, derive(2025, "select-refit"));
  REQUIRE(report.covariates.size() == 2);
  CHECK(report.covariates[0].name == "a");
  CHECK(report.covariates[0].partition.labels ==
        std::vector<int>{0, 1, 1});
  CHECK(!report.covariates[0].excluded);
  CHECK(report.covariates[1].partition.single_cluster());
  CHECK(report.covariates[1].excluded);

  // The fused coefficient sits near the true gap of 2.
  bool found = false;
  for (const auto& coef : report.refit.coefficients)
    if (coef.name == "a{1,2}") {
      found = true;
      CHECK(coef.mean == doctest::Approx(2.0).epsilon(0.1));
    }
  CHECK(found);

  // JSON round trip carries the partition and the refit.
  const auto text = report_to_json(report);
  const auto parsed = nlohmann::json::parse(text);
  CHECK(parsed["covariates"][0]["name"] == "a");
  CHECK(parsed["covariates"][0]["excluded"] == false);
  CHECK(parsed["covariates"][1]["excluded"] == true);
  CHECK(parsed["refit"]["coefficients"].size() ==
        report.refit.coefficients.size());
}

}  // TEST_SUITE
