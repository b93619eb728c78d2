#include "effusion/simstudy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "effusion/csv.hpp"

namespace effusion::sim {

namespace {

TrueCovariate make_cov(const std::string& name, design::Scale scale,
                       std::vector<double> beta,
                       std::vector<double> level_probs) {
  TrueCovariate cov;
  std::vector<std::string> labels;
  for (std::size_t lv = 0; lv < level_probs.size(); ++lv)
    labels.push_back(std::to_string(lv));
  cov.spec = design::CovariateSpec::make(name, std::move(labels), scale);
  cov.beta = Eigen::Map<Eigen::VectorXd>(beta.data(),
                                         static_cast<Eigen::Index>(beta.size()));
  cov.level_probs = std::move(level_probs);
  if (cov.beta.size() != cov.spec.c())
    throw ConfigError("true effect vector of '" + cov.spec.name +
                      "' must cover levels 1..c");
  return cov;
}

}  // namespace

SimulationDesign SimulationDesign::benchmark() {
  const std::vector<double> p8{0.1, 0.1, 0.2, 0.05, 0.2, 0.1, 0.2, 0.05};
  const std::vector<double> p4{0.1, 0.4, 0.2, 0.3};
  SimulationDesign sd;
  sd.covariates.push_back(make_cov("x1", design::Scale::ordinal,
                                   {0, 1, 1, 2, 2, 4, 4}, p8));
  sd.covariates.push_back(make_cov("x2", design::Scale::ordinal,
                                   {0, 0, 0, 0, 0, 0, 0}, p8));
  sd.covariates.push_back(
      make_cov("x3", design::Scale::ordinal, {0, -2, -2}, p4));
  sd.covariates.push_back(make_cov("x4", design::Scale::ordinal, {0, 0, 0}, p4));
  sd.covariates.push_back(make_cov("x5", design::Scale::nominal,
                                   {0, 1, 1, 1, 1, -2, -2}, p8));
  sd.covariates.push_back(make_cov("x6", design::Scale::nominal,
                                   {0, 0, 0, 0, 0, 0, 0}, p8));
  sd.covariates.push_back(make_cov("x7", design::Scale::nominal, {0, 2, 2}, p4));
  sd.covariates.push_back(make_cov("x8", design::Scale::nominal, {0, 0, 0}, p4));
  return sd;
}

std::vector<design::CovariateSpec> SimulationDesign::specs() const {
  std::vector<design::CovariateSpec> out;
  for (const auto& cov : covariates) out.push_back(cov.spec);
  return out;
}

Eigen::VectorXd SimulationDesign::full_beta() const {
  int q = 0;
  for (const auto& cov : covariates) q += cov.spec.c();
  Eigen::VectorXd beta(q);
  int at = 0;
  for (const auto& cov : covariates) {
    beta.segment(at, cov.spec.c()) = cov.beta;
    at += cov.spec.c();
  }
  return beta;
}

namespace {

Dataset generate(const SimulationDesign& sd, int n,
                 std::uint64_t code_key, std::uint64_t noise_key) {
  rng::Stream codes_rng(code_key);
  rng::Stream noise_rng(noise_key);
  Dataset ds;
  ds.codes.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.codes[i].resize(sd.covariates.size());
    for (std::size_t h = 0; h < sd.covariates.size(); ++h)
      ds.codes[i][h] = codes_rng.categorical(sd.covariates[h].level_probs);
  }
  ds.dm = design::build_design(ds.codes, sd.specs());
  Eigen::VectorXd coef(ds.dm.cols());
  coef(0) = sd.intercept;
  coef.tail(ds.dm.cols() - 1) = sd.full_beta();
  ds.y = ds.dm.X * coef;
  for (int i = 0; i < n; ++i) ds.y(i) += sd.error_sd * noise_rng.normal();
  return ds;
}

}  // namespace

Dataset generate_dataset(const SimulationDesign& sd, std::uint64_t seed,
                         int replicate) {
  const auto rep = static_cast<std::uint64_t>(replicate);
  return generate(sd, sd.n, rng::derive(seed, "data", rep),
                  rng::derive(seed, "noise", rep));
}

Dataset generate_prediction_set(const SimulationDesign& sd,
                                std::uint64_t seed) {
  return generate(sd, sd.n_pred, rng::derive(seed, "pred-data"),
                  rng::derive(seed, "pred-noise"));
}

double mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size())
    throw ConfigError("effect estimate and truth have different lengths");
  return (estimate - truth).squaredNorm() / truth.size();
}

double mspe(const Eigen::VectorXd& predictions, const Eigen::VectorXd& y) {
  if (predictions.size() != y.size())
    throw ConfigError("predictions and responses have different lengths");
  return (predictions - y).squaredNorm() / y.size();
}

PairTruth pair_truth(const TrueCovariate& cov) {
  PairTruth out;
  for (const auto& pair : cov.spec.pattern.pairs()) {
    const double bk = cov.beta(pair.k - 1);
    const double bj = pair.j == 0 ? 0.0 : cov.beta(pair.j - 1);
    if (std::abs(bk - bj) > 1e-12)
      out.positives.push_back(pair);
    else
      out.negatives.push_back(pair);
  }
  return out;
}

SelectionRates selection_metrics(const select::Partition& partition,
                                 const PairTruth& truth) {
  SelectionRates r;
  for (const auto& p : truth.positives) {
    if (partition.fused(p.k, p.j))
      ++r.fn;
    else
      ++r.tp;
  }
  for (const auto& p : truth.negatives) {
    if (partition.fused(p.k, p.j))
      ++r.tn;
    else
      ++r.fp;
  }
  auto rate = [](int num, int den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return 100.0 * num / den;
  };
  r.tpr = rate(r.tp, r.tp + r.fn);
  r.tnr = rate(r.tn, r.tn + r.fp);
  r.ppv = rate(r.tp, r.tp + r.fp);
  r.npv = rate(r.tn, r.tn + r.fn);
  return r;
}

prior::HyperParams StudySetting::hyper_for(design::Scale scale) const {
  prior::HyperParams h;
  h.r = r;
  h.g0 = g0;
  h.G0 = scale == design::Scale::nominal ? G0_nominal : G0_ordinal;
  h.G0_random = G0_random;
  h.lambda = lambda;
  return h;
}

namespace {

// Everything fixed for one replicate/setting task.
struct TaskResult {
  ReplicateResult result;
};

Eigen::VectorXd stack_level_effects(const select::RefitSummary& refit,
                                    double intercept) {
  int q = 0;
  for (const auto& eff : refit.level_effects) q += eff.size();
  Eigen::VectorXd coef(1 + q);
  coef(0) = intercept;
  int at = 1;
  for (const auto& eff : refit.level_effects) {
    coef.segment(at, eff.size()) = eff;
    at += static_cast<int>(eff.size());
  }
  return coef;
}

}  // namespace

StudyReport run_study(const StudyConfig& cfg) {
  if (cfg.replicates < 1) throw ConfigError("study needs at least one replicate");
  if (cfg.settings.empty()) throw ConfigError("study needs at least one setting");
  const auto specs = cfg.design.specs();
  const int p = static_cast<int>(specs.size());

  std::vector<PairTruth> truths;
  std::vector<bool> truly_zero;
  for (const auto& cov : cfg.design.covariates) {
    truths.push_back(pair_truth(cov));
    truly_zero.push_back(cov.beta.isZero(0.0));
  }

  const Dataset pred = generate_prediction_set(cfg.design, cfg.sampler.seed);
  Eigen::VectorXd oracle_coef(pred.dm.cols());
  oracle_coef(0) = cfg.design.intercept;
  oracle_coef.tail(pred.dm.cols() - 1) = cfg.design.full_beta();
  const double oracle_mspe = mspe(pred.dm.X * oracle_coef, pred.y);

  // True-model partitions: levels with equal true effects fused (transitive
  // closure over the pattern pairs is an over-count; the truth clusters are
  // defined by equal effect values, baseline effect 0).
  std::vector<select::Partition> true_partitions;
  for (const auto& cov : cfg.design.covariates) {
    std::vector<int> labels(cov.spec.c() + 1, 0);
    std::vector<double> values{0.0};
    for (int k = 1; k <= cov.spec.c(); ++k) {
      const double v = cov.beta(k - 1);
      int found = -1;
      for (std::size_t g = 0; g < values.size(); ++g)
        if (std::abs(values[g] - v) <= 1e-12) found = static_cast<int>(g);
      if (found < 0) {
        values.push_back(v);
        found = static_cast<int>(values.size()) - 1;
      }
      labels[k] = found;
    }
    true_partitions.push_back(select::Partition::from_labels(std::move(labels)));
  }
  std::vector<select::Partition> singleton_partitions;
  for (const auto& spec : specs) {
    std::vector<int> labels(spec.c() + 1);
    std::iota(labels.begin(), labels.end(), 0);
    singleton_partitions.push_back(
        select::Partition::from_labels(std::move(labels)));
  }

  const int tasks = cfg.replicates * static_cast<int>(cfg.settings.size());
  std::vector<ReplicateResult> results(tasks);
  std::vector<std::exception_ptr> errors(tasks);
  std::atomic<int> next{0};

  auto run_task = [&](int task) {
    const int rep = task / static_cast<int>(cfg.settings.size());
    const int si = task % static_cast<int>(cfg.settings.size());
    const StudySetting& setting = cfg.settings[si];

    const Dataset data = generate_dataset(cfg.design, cfg.sampler.seed, rep);
    std::vector<prior::HyperParams> hypers;
    for (const auto& spec : specs) hypers.push_back(setting.hyper_for(spec.scale));

    gibbs::SamplerConfig scfg = cfg.sampler;
    scfg.seed = rng::derive(cfg.sampler.seed, "study", static_cast<std::uint64_t>(rep),
                            static_cast<std::uint64_t>(si));
    const gibbs::PosteriorDraws draws =
        gibbs::run_chain(data.dm, data.y, specs, hypers, scfg, 0);

    std::vector<select::Partition> selected;
    for (int h = 0; h < p; ++h) {
      const Eigen::MatrixXd pi = select::posterior_similarity(draws, h);
      selected.push_back(select::minimize_binder(pi, specs[h].scale));
    }

    const auto refit_fusion = select::refit_selected(
        data.dm, data.y, specs, selected, cfg.refit,
        rng::derive(scfg.seed, "refit-fusion"));
    const auto refit_full = select::refit_selected(
        data.dm, data.y, specs, singleton_partitions, cfg.refit,
        rng::derive(scfg.seed, "refit-full"));
    const auto refit_true = select::refit_selected(
        data.dm, data.y, specs, true_partitions, cfg.refit,
        rng::derive(scfg.seed, "refit-true"));

    ReplicateResult res;
    res.replicate = rep;
    res.setting = setting.name;
    for (int h = 0; h < p; ++h) {
      CovariateResult cr;
      cr.rates = selection_metrics(selected[h], truths[h]);
      cr.excluded = selected[h].single_cluster();
      cr.excluded_correct = cr.excluded == truly_zero[h];
      cr.mse_fusion =
          mse(refit_fusion.level_effects[h], cfg.design.covariates[h].beta);
      cr.mse_full =
          mse(refit_full.level_effects[h], cfg.design.covariates[h].beta);
      cr.mse_true =
          mse(refit_true.level_effects[h], cfg.design.covariates[h].beta);
      res.covariates.push_back(cr);
    }
    res.mspe_fusion = mspe(
        pred.dm.X * stack_level_effects(refit_fusion,
                                        refit_fusion.coefficients[0].mean),
        pred.y);
    res.mspe_full = mspe(
        pred.dm.X * stack_level_effects(refit_full,
                                        refit_full.coefficients[0].mean),
        pred.y);
    res.mspe_true = mspe(
        pred.dm.X * stack_level_effects(refit_true,
                                        refit_true.coefficients[0].mean),
        pred.y);
    res.mspe_oracle = oracle_mspe;
    results[task] = std::move(res);
  };

  auto work = [&]() {
    for (;;) {
      const int task = next.fetch_add(1);
      if (task >= tasks) return;
      try {
        run_task(task);
      } catch (...) {
        errors[task] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(cfg.parallel, 1, tasks);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  StudyReport report;
  report.config = cfg;
  report.results = std::move(results);
  return report;
}

std::vector<StudyReport::Aggregate> StudyReport::aggregates() const {
  std::vector<Aggregate> out;
  const int p = static_cast<int>(config.design.covariates.size());
  for (const auto& setting : config.settings) {
    for (int h = 0; h < p; ++h) {
      Aggregate agg;
      agg.setting = setting.name;
      agg.covariate = h;
      double tpr = 0, tnr = 0, ppv = 0, npv = 0;
      int ntpr = 0, ntnr = 0, nppv = 0, nnpv = 0, count = 0;
      for (const auto& res : results) {
        if (res.setting != setting.name) continue;
        const auto& cr = res.covariates[h];
        ++count;
        if (cr.rates.tpr) tpr += *cr.rates.tpr, ++ntpr;
        if (cr.rates.tnr) tnr += *cr.rates.tnr, ++ntnr;
        if (cr.rates.ppv) ppv += *cr.rates.ppv, ++nppv;
        if (cr.rates.npv) npv += *cr.rates.npv, ++nnpv;
        if (cr.excluded) ++agg.excluded_count;
        agg.mse_fusion += cr.mse_fusion;
        agg.mse_full += cr.mse_full;
        agg.mse_true += cr.mse_true;
      }
      if (count > 0) {
        agg.mse_fusion /= count;
        agg.mse_full /= count;
        agg.mse_true /= count;
      }
      if (ntpr) agg.tpr = tpr / ntpr;
      if (ntnr) agg.tnr = tnr / ntnr;
      if (nppv) agg.ppv = ppv / nppv;
      if (nnpv) agg.npv = npv / nnpv;
      out.push_back(agg);
    }
  }
  return out;
}

namespace {

double mean_of(const std::vector<ReplicateResult>& results,
               double ReplicateResult::* field) {
  if (results.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : results) acc += r.*field;
  return acc / results.size();
}

}  // namespace

double StudyReport::mean_mspe_fusion() const {
  return mean_of(results, &ReplicateResult::mspe_fusion);
}
double StudyReport::mean_mspe_full() const {
  return mean_of(results, &ReplicateResult::mspe_full);
}
double StudyReport::mean_mspe_true() const {
  return mean_of(results, &ReplicateResult::mspe_true);
}
double StudyReport::mean_mspe_oracle() const {
  return mean_of(results, &ReplicateResult::mspe_oracle);
}

void write_study_outputs(const StudyReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  auto fmt = csvio::format_double;
  auto opt = [&fmt](const std::optional<double>& v) {
    return v ? fmt(*v) : std::string();
  };

  csvio::Table rows;
  rows.header = {"replicate",  "setting",   "covariate", "tp",
                 "fp",         "tn",        "fn",        "tpr",
                 "tnr",        "ppv",       "npv",       "excluded",
                 "mse_fusion", "mse_full",  "mse_true",  "mspe_fusion",
                 "mspe_full",  "mspe_true", "mspe_oracle"};
  for (const auto& res : report.results) {
    for (std::size_t h = 0; h < res.covariates.size(); ++h) {
      const auto& cr = res.covariates[h];
      rows.rows.push_back({std::to_string(res.replicate), res.setting,
                           report.config.design.covariates[h].spec.name,
                           std::to_string(cr.rates.tp),
                           std::to_string(cr.rates.fp),
                           std::to_string(cr.rates.tn),
                           std::to_string(cr.rates.fn), opt(cr.rates.tpr),
                           opt(cr.rates.tnr), opt(cr.rates.ppv),
                           opt(cr.rates.npv), cr.excluded ? "1" : "0",
                           fmt(cr.mse_fusion), fmt(cr.mse_full),
                           fmt(cr.mse_true), fmt(res.mspe_fusion),
                           fmt(res.mspe_full), fmt(res.mspe_true),
                           fmt(res.mspe_oracle)});
    }
  }
  csvio::write_file((fs::path(dir) / "replicates.csv").string(), rows);

  csvio::Table agg;
  agg.header = {"setting",  "covariate",      "tpr",      "tnr",
                "ppv",      "npv",            "excluded", "mse_fusion",
                "mse_full", "mse_true"};
  for (const auto& a : report.aggregates()) {
    agg.rows.push_back(
        {a.setting, report.config.design.covariates[a.covariate].spec.name,
         opt(a.tpr), opt(a.tnr), opt(a.ppv), opt(a.npv),
         std::to_string(a.excluded_count), fmt(a.mse_fusion), fmt(a.mse_full),
         fmt(a.mse_true)});
  }
  csvio::write_file((fs::path(dir) / "aggregate.csv").string(), agg);

  nlohmann::json summary;
  summary["replicates"] = report.config.replicates;
  summary["settings"] = nlohmann::json::array();
  for (const auto& s : report.config.settings)
    summary["settings"].push_back(s.name);
  summary["mspe"] = {{"fusion", report.mean_mspe_fusion()},
                     {"full", report.mean_mspe_full()},
                     {"true", report.mean_mspe_true()},
                     {"oracle", report.mean_mspe_oracle()}};
  std::ofstream out(fs::path(dir) / "summary.json", std::ios::binary);
  if (!out) throw DataError("cannot write study summary to '" + dir + "'");
  out << summary.dump(2) << "\n";
}

}  // namespace effusion::sim
