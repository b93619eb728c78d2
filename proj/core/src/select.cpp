#include "effusion/select.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "effusion/csv.hpp"

namespace effusion::select {

namespace {
constexpr double tie_eps = 1e-12;
}

int Partition::clusters() const {
  int m = 0;
  for (int l : labels) m = std::max(m, l + 1);
  return m;
}

std::vector<std::vector<int>> Partition::groups() const {
  std::vector<std::vector<int>> g(clusters());
  for (std::size_t lv = 0; lv < labels.size(); ++lv)
    g[labels[lv]].push_back(static_cast<int>(lv));
  return g;
}

Partition Partition::from_labels(std::vector<int> raw) {
  std::vector<int> remap(raw.size(), -1);
  int next = 0;
  for (int& l : raw) {
    if (l < 0 || l >= static_cast<int>(raw.size()))
      throw ConfigError("partition label out of range");
    if (remap[l] < 0) remap[l] = next++;
    l = remap[l];
  }
  return Partition{std::move(raw)};
}

Partition sweep_partition(const design::FusionPattern& pattern,
                          std::span<const std::uint8_t> delta_bits) {
  const int m = pattern.c() + 1;
  std::vector<int> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> root = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  const auto& pairs = pattern.pairs();
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (delta_bits[i] == 0) parent[root(pairs[i].k)] = root(pairs[i].j);
  std::vector<int> labels(m);
  for (int v = 0; v < m; ++v) labels[v] = root(v);
  return Partition::from_labels(std::move(labels));
}

Eigen::MatrixXd posterior_similarity(const gibbs::PosteriorDraws& draws,
                                     int covariate) {
  const auto& pattern = draws.specs.at(covariate).pattern;
  const int m = pattern.c() + 1;
  const auto block = draws.delta_block(covariate);
  // Pairs without an indicator stay at the neutral 1/2 so they are
  // invisible to the Binder objective.
  Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(m, m, 0.5);
  for (int i = 0; i < pattern.dim(); ++i) {
    const auto& pr = pattern.pairs()[i];
    double fused = 0.0;
    for (int row = 0; row < draws.rows(); ++row)
      if (block(row, i) == 0) fused += 1.0;
    const double freq =
        draws.rows() > 0 ? fused / static_cast<double>(draws.rows()) : 0.0;
    pi(pr.k, pr.j) = freq;
    pi(pr.j, pr.k) = freq;
  }
  pi.diagonal().setOnes();
  return pi;
}

double binder_objective(const Eigen::MatrixXd& pi, const Partition& part) {
  const int m = part.levels();
  double obj = 0.0;
  for (int k = 1; k < m; ++k)
    for (int j = 0; j < k; ++j)
      if (part.fused(k, j)) obj += 0.5 - pi(k, j);
  return obj;
}

namespace {

// (objective, clusters, labels) ordering with a tolerance on the objective;
// smaller is better.
bool better(double obj_a, const std::vector<int>& a, double obj_b,
            const std::vector<int>& b) {
  if (obj_a < obj_b - tie_eps) return true;
  if (obj_a > obj_b + tie_eps) return false;
  const int ca = *std::max_element(a.begin(), a.end());
  const int cb = *std::max_element(b.begin(), b.end());
  if (ca != cb) return ca < cb;
  return a < b;
}

}  // namespace

Partition minimize_binder_exact(const Eigen::MatrixXd& pi) {
  const int m = static_cast<int>(pi.rows());
  if (m > 11)
    throw ConfigError("exact partition enumeration is limited to 11 levels");
  std::vector<int> labels(m, 0);
  std::vector<int> best;
  double best_obj = 0.0;
  // Enumerate restricted growth strings in lexicographic order; cost is
  // accumulated incrementally as items join clusters.
  std::function<void(int, int, double)> rec = [&](int i, int used,
                                                  double cost) {
    if (i == m) {
      if (best.empty() || better(cost, labels, best_obj, best)) {
        best = labels;
        best_obj = cost;
      }
      return;
    }
    for (int g = 0; g <= used; ++g) {
      double add = 0.0;
      for (int j = 0; j < i; ++j)
        if (labels[j] == g) add += 0.5 - pi(i, j);
      labels[i] = g;
      rec(i + 1, std::max(used, g + 1), cost + add);
    }
    labels[i] = 0;
  };
  labels[0] = 0;
  rec(1, 1, 0.0);
  if (best.empty()) best = {0};
  return Partition::from_labels(std::move(best));
}

Partition minimize_binder_contiguous(const Eigen::MatrixXd& pi) {
  const int m = static_cast<int>(pi.rows());
  // cost(i, e): Binder cost of the single cluster {i..e}.
  std::vector<std::vector<double>> cost(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    for (int e = i + 1; e < m; ++e) {
      double add = 0.0;
      for (int a = i; a < e; ++a) add += 0.5 - pi(a, e);
      cost[i][e] = cost[i][e - 1] + add;
    }
  }
  // dp over suffixes; scanning the first-cluster end from long to short makes
  // ties resolve toward fewer clusters and the lexicographically smallest
  // label string.
  struct Node {
    double obj = 0.0;
    int clusters = 0;
    int end = -1;  // last level of the first cluster
  };
  std::vector<Node> dp(m + 1);
  for (int i = m - 1; i >= 0; --i) {
    Node best;
    bool init = false;
    for (int e = m - 1; e >= i; --e) {
      const Node& rest = dp[e + 1];
      const double obj = cost[i][e] + rest.obj;
      const int clusters = 1 + rest.clusters;
      const bool take =
          !init || obj < best.obj - tie_eps ||
          (obj <= best.obj + tie_eps && clusters < best.clusters);
      if (take) {
        best = {obj, clusters, e};
        init = true;
      }
    }
    dp[i] = best;
  }
  std::vector<int> labels(m);
  int at = 0, cluster = 0;
  while (at < m) {
    const int end = dp[at].end;
    for (int v = at; v <= end; ++v) labels[v] = cluster;
    ++cluster;
    at = end + 1;
  }
  return Partition::from_labels(std::move(labels));
}

Partition minimize_binder_greedy(const Eigen::MatrixXd& pi) {
  const int m = static_cast<int>(pi.rows());
  std::vector<int> labels(m);
  std::iota(labels.begin(), labels.end(), 0);

  auto pair_cost = [&pi](int k, int j) { return 0.5 - pi(k, j); };

  // Single-element moves to the best strictly improving destination (an
  // existing cluster or a fresh singleton), until a full pass is clean.
  auto move_phase = [&](std::vector<int>& lab) {
    for (int pass = 0; pass < 100; ++pass) {
      bool moved = false;
      for (int v = 0; v < m; ++v) {
        const int nc = *std::max_element(lab.begin(), lab.end()) + 1;
        const int cur = lab[v];
        double out_gain = 0.0;  // cost removed by taking v out of its cluster
        for (int j = 0; j < m; ++j)
          if (j != v && lab[j] == cur)
            out_gain += pair_cost(std::max(v, j), std::min(v, j));
        double best_delta = -tie_eps;
        int best_target = -1;
        for (int t = 0; t <= nc; ++t) {  // t == nc opens a new singleton
          if (t == cur) continue;
          double in_cost = 0.0;
          for (int j = 0; j < m; ++j)
            if (lab[j] == t) in_cost += pair_cost(std::max(v, j),
                                                  std::min(v, j));
          const double delta = in_cost - out_gain;
          if (delta < best_delta) {
            best_delta = delta;
            best_target = t;
          }
        }
        if (best_target >= 0) {
          lab[v] = best_target;
          lab = Partition::from_labels(std::move(lab)).labels;
          moved = true;
        }
      }
      if (!moved) break;
    }
  };

  Partition best;
  double best_obj = 0.0;
  bool have = false;
  auto consider = [&](std::vector<int> lab) {
    move_phase(lab);
    Partition p = Partition::from_labels(std::move(lab));
    const double obj = binder_objective(pi, p);
    if (!have || obj < best_obj - tie_eps ||
        (obj <= best_obj + tie_eps &&
         (p.clusters() < best.clusters() ||
          (p.clusters() == best.clusters() && p.labels < best.labels)))) {
      best = std::move(p);
      best_obj = obj;
      have = true;
    }
  };

  // Agglomerative chain: always apply the cheapest merge, improving or not,
  // from all-singletons down to a single cluster.  Stopping at the first
  // non-improving merge strands the search in shallow local optima, so
  // instead every level of the chain is polished with the move search and
  // the best polished partition wins (ties toward fewer clusters, then the
  // smaller label string).  All-singletons is on the chain, so the result
  // never scores worse than zero.
  consider(labels);
  for (;;) {
    const int nc = *std::max_element(labels.begin(), labels.end()) + 1;
    if (nc == 1) break;
    double best_gain = std::numeric_limits<double>::infinity();
    int best_a = -1, best_b = -1;
    for (int a = 0; a < nc; ++a) {
      for (int b = a + 1; b < nc; ++b) {
        double gain = 0.0;
        for (int k = 0; k < m; ++k)
          if (labels[k] == a)
            for (int j = 0; j < m; ++j)
              if (labels[j] == b) gain += pair_cost(std::max(k, j),
                                                    std::min(k, j));
        if (gain < best_gain) {
          best_gain = gain;
          best_a = a;
          best_b = b;
        }
      }
    }
    for (int& l : labels)
      if (l == best_b) l = best_a;
    labels = Partition::from_labels(std::move(labels)).labels;
    consider(labels);
  }
  return best;
}

Partition minimize_binder(const Eigen::MatrixXd& pi, design::Scale scale) {
  if (scale == design::Scale::ordinal) return minimize_binder_contiguous(pi);
  if (pi.rows() <= 11) return minimize_binder_exact(pi);
  return minimize_binder_greedy(pi);
}

std::pair<double, double> hpd_interval(std::vector<double> draws,
                                       double mass) {
  if (draws.empty()) throw NumericalError("empty draw vector for HPD");
  std::sort(draws.begin(), draws.end());
  const int n = static_cast<int>(draws.size());
  const int span = std::min(
      n, std::max(1, static_cast<int>(std::ceil(mass * n))));
  int best = 0;
  double width = draws[span - 1] - draws[0];
  for (int i = 1; i + span <= n; ++i) {
    const double w = draws[i + span - 1] - draws[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {draws[best], draws[best + span - 1]};
}

RefitSummary refit_selected(const design::DesignMatrix& dm,
                            const Eigen::VectorXd& y,
                            const std::vector<design::CovariateSpec>& specs,
                            const std::vector<Partition>& partitions,
                            const RefitConfig& cfg,
                            std::uint64_t stream_key) {
  if (partitions.size() != specs.size())
    throw ConfigError("one partition per covariate is required");
  const int n = dm.n();

  // Fused design: intercept plus one summed dummy column per non-baseline
  // cluster.
  struct ColumnDef {
    int covariate;
    std::vector<int> levels;
  };
  std::vector<ColumnDef> defs;
  defs.push_back({-1, {}});
  for (std::size_t h = 0; h < specs.size(); ++h) {
    const auto& part = partitions[h];
    if (part.levels() != specs[h].c() + 1)
      throw ConfigError("partition of covariate '" + specs[h].name +
                        "' does not match its level count");
    const int baseline = part.labels[0];
    for (const auto& group : part.groups()) {
      if (part.labels[group.front()] == baseline) continue;
      defs.push_back({static_cast<int>(h), group});
    }
  }
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, defs.size());
  Z.col(0).setOnes();
  for (std::size_t cidx = 1; cidx < defs.size(); ++cidx) {
    const auto& def = defs[cidx];
    for (int lv : def.levels)
      Z.col(cidx) += dm.X.col(dm.block_start[def.covariate] + lv - 1);
  }

  const Eigen::MatrixXd ZtZ = Z.transpose() * Z;
  const Eigen::VectorXd Zty = Z.transpose() * y;
  const int d = static_cast<int>(defs.size());

  rng::Stream stream(stream_key);
  double sigma2 = 1.0;
  if (n >= 2) {
    const double mean = y.mean();
    sigma2 = std::max((y.array() - mean).square().sum() / (n - 1), 1e-12);
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd draws(cfg.iterations, d);
  Eigen::VectorXd sigma2_draws(cfg.iterations);

  for (int it = 0; it < cfg.burnin + cfg.iterations; ++it) {
    Eigen::MatrixXd P = ZtZ / sigma2;
    P.diagonal().array() += 1.0 / cfg.B0;
    Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success)
      throw NumericalError("refit precision is not positive definite");
    const Eigen::VectorXd b = llt.solve(Zty / sigma2);
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = stream.normal();
    beta = b + llt.matrixU().solve(z);

    const double shape = cfg.s0 + 0.5 * n;
    const double scale = cfg.S0 + 0.5 * (y - Z * beta).squaredNorm();
    if (!(shape > 0.0) || !(scale > 0.0))
      throw NumericalError("refit error variance conditional is improper");
    sigma2 = stream.inv_gamma(shape, scale);

    if (it >= cfg.burnin) {
      draws.row(it - cfg.burnin) = beta.transpose();
      sigma2_draws(it - cfg.burnin) = sigma2;
    }
  }

  RefitSummary out;
  out.sigma2_mean = sigma2_draws.mean();
  for (int cidx = 0; cidx < d; ++cidx) {
    RefitCoefficient coef;
    coef.covariate = defs[cidx].covariate;
    coef.levels = defs[cidx].levels;
    if (coef.covariate < 0) {
      coef.name = "mu";
    } else {
      coef.name = specs[coef.covariate].name + "{";
      for (std::size_t i = 0; i < coef.levels.size(); ++i) {
        if (i) coef.name += ",";
        coef.name += specs[coef.covariate].levels[coef.levels[i]];
      }
      coef.name += "}";
    }
    coef.mean = draws.col(cidx).mean();
    std::vector<double> col(draws.col(cidx).data(),
                            draws.col(cidx).data() + cfg.iterations);
    std::tie(coef.hpd_low, coef.hpd_high) = hpd_interval(std::move(col));
    out.coefficients.push_back(std::move(coef));
  }

  // Per-level effects implied by the cluster coefficients.
  for (std::size_t h = 0; h < specs.size(); ++h)
    out.level_effects.emplace_back(Eigen::VectorXd::Zero(specs[h].c()));
  for (int cidx = 1; cidx < d; ++cidx) {
    const auto& def = defs[cidx];
    for (int lv : def.levels)
      out.level_effects[def.covariate](lv - 1) = out.coefficients[cidx].mean;
  }
  return out;
}

SelectionReport selection_report(const gibbs::PosteriorDraws& draws,
                                 const design::DesignMatrix& dm,
                                 const Eigen::VectorXd& y,
                                 const RefitConfig& refit_cfg,
                                 std::uint64_t refit_stream_key) {
  SelectionReport report;
  std::vector<Partition> partitions;
  for (std::size_t h = 0; h < draws.specs.size(); ++h) {
    CovariateSelection sel;
    sel.name = draws.specs[h].name;
    sel.similarity = posterior_similarity(draws, static_cast<int>(h));
    sel.partition = minimize_binder(sel.similarity, draws.specs[h].scale);
    sel.excluded = sel.partition.single_cluster();
    partitions.push_back(sel.partition);
    report.covariates.push_back(std::move(sel));
  }
  report.refit = refit_selected(dm, y, draws.specs, partitions, refit_cfg,
                                refit_stream_key);
  return report;
}

std::string report_to_json(const SelectionReport& report) {
  nlohmann::json root;
  root["covariates"] = nlohmann::json::array();
  for (const auto& cov : report.covariates) {
    nlohmann::json jc;
    jc["name"] = cov.name;
    jc["excluded"] = cov.excluded;
    jc["labels"] = cov.partition.labels;
    jc["clusters"] = cov.partition.clusters();
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : cov.partition.groups()) groups.push_back(g);
    jc["groups"] = groups;
    root["covariates"].push_back(std::move(jc));
  }
  nlohmann::json refit;
  refit["sigma2_mean"] = report.refit.sigma2_mean;
  refit["coefficients"] = nlohmann::json::array();
  for (const auto& coef : report.refit.coefficients) {
    nlohmann::json jc;
    jc["name"] = coef.name;
    jc["covariate"] = coef.covariate;
    jc["levels"] = coef.levels;
    jc["mean"] = coef.mean;
    jc["hpd_low"] = coef.hpd_low;
    jc["hpd_high"] = coef.hpd_high;
    refit["coefficients"].push_back(std::move(jc));
  }
  root["refit"] = std::move(refit);
  return root.dump(2) + "\n";
}

}  // namespace effusion::select
