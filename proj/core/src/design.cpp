#include "effusion/design.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>

#include "effusion/csv.hpp"

namespace effusion::design {

std::string to_string(Scale s) {
  switch (s) {
    case Scale::nominal: return "nominal";
    case Scale::ordinal: return "ordinal";
    case Scale::selection: return "selection";
  }
  return "nominal";
}

Scale scale_from_string(const std::string& s) {
  if (s == "nominal") return Scale::nominal;
  if (s == "ordinal") return Scale::ordinal;
  if (s == "selection") return Scale::selection;
  throw ConfigError("unknown scale '" + s +
                    "' (expected nominal, ordinal or selection)");
}

FusionPattern::FusionPattern(int c, std::vector<LevelPair> pairs,
                             bool restricted)
    : c_(c), pairs_(std::move(pairs)), restricted_(restricted) {
  std::sort(pairs_.begin(), pairs_.end());
  index_.assign(static_cast<std::size_t>(c + 1) * (c + 1), -1);
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto [k, j] = pairs_[i];
    if (j < 0 || k <= j || k > c)
      throw ConfigError("fusion pair (" + std::to_string(k) + "," +
                        std::to_string(j) + ") is out of range for " +
                        std::to_string(c + 1) + " levels");
    if (index_[k * (c + 1) + j] >= 0)
      throw ConfigError("duplicate fusion pair (" + std::to_string(k) + "," +
                        std::to_string(j) + ")");
    index_[k * (c + 1) + j] = static_cast<int>(i);
  }
  // Connectivity of the pair graph over levels {0..c} decides whether the
  // implied quadratic form can be positive definite.
  std::vector<int> comp(c + 1);
  std::iota(comp.begin(), comp.end(), 0);
  auto root = [&comp](int v) {
    while (comp[v] != v) v = comp[v] = comp[comp[v]];
    return v;
  };
  for (const auto& p : pairs_) comp[root(p.k)] = root(p.j);
  connected_ = true;
  for (int v = 0; v <= c; ++v)
    if (root(v) != root(0)) connected_ = false;
}

FusionPattern FusionPattern::for_scale(Scale s, int c) {
  if (c < 1) throw ConfigError("a covariate needs at least two levels");
  std::vector<LevelPair> pairs;
  switch (s) {
    case Scale::nominal:
      for (int k = 1; k <= c; ++k)
        for (int j = 0; j < k; ++j) pairs.push_back({k, j});
      return FusionPattern(c, std::move(pairs), false);
    case Scale::ordinal:
      for (int k = 1; k <= c; ++k) pairs.push_back({k, k - 1});
      return FusionPattern(c, std::move(pairs), true);
    case Scale::selection:
      for (int k = 1; k <= c; ++k) pairs.push_back({k, 0});
      return FusionPattern(c, std::move(pairs), true);
  }
  throw ConfigError("unknown scale");
}

FusionPattern FusionPattern::custom(int c, std::vector<LevelPair> pairs) {
  const std::size_t all = static_cast<std::size_t>(c) * (c + 1) / 2;
  const bool restricted = pairs.size() < all;
  return FusionPattern(c, std::move(pairs), restricted);
}

int FusionPattern::index_of(int k, int j) const {
  if (j > k) std::swap(k, j);
  if (j < 0 || k > c_) return -1;
  return index_[k * (c_ + 1) + j];
}

int CovariateSpec::level_index(const std::string& label) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == label) return static_cast<int>(i);
  return -1;
}

bool CovariateSpec::is_frozen(int k, int j) const {
  if (j > k) std::swap(k, j);
  return std::find(frozen.begin(), frozen.end(), LevelPair{k, j}) !=
         frozen.end();
}

CovariateSpec CovariateSpec::make(std::string name,
                                  std::vector<std::string> levels, Scale scale,
                                  std::vector<LevelPair> frozen) {
  if (levels.size() < 2)
    throw ConfigError("covariate '" + name + "' needs at least two levels");
  std::set<std::string> uniq(levels.begin(), levels.end());
  if (uniq.size() != levels.size())
    throw ConfigError("covariate '" + name + "' has duplicate level labels");
  CovariateSpec spec;
  spec.name = std::move(name);
  spec.levels = std::move(levels);
  spec.scale = scale;
  spec.pattern = FusionPattern::for_scale(scale, spec.c());
  for (const auto& p : frozen)
    if (!spec.pattern.contains(p.k, p.j))
      throw ConfigError("frozen pair (" + std::to_string(p.k) + "," +
                        std::to_string(p.j) + ") of covariate '" + spec.name +
                        "' is not part of its fusion pattern");
  spec.frozen = std::move(frozen);
  if (!spec.pattern.connected())
    throw ConfigError("covariate '" + spec.name +
                      "' has a disconnected fusion pattern, the prior "
                      "precision would be singular");
  return spec;
}

DesignMatrix build_design(const std::vector<std::vector<int>>& codes,
                          const std::vector<CovariateSpec>& specs) {
  const int n = static_cast<int>(codes.size());
  const int p = static_cast<int>(specs.size());
  int q = 0;
  for (const auto& s : specs) q += s.c();

  DesignMatrix dm;
  dm.X = Eigen::MatrixXd::Zero(n, 1 + q);
  dm.X.col(0).setOnes();
  dm.columns.push_back({-1, 0});
  int col = 1;
  for (int h = 0; h < p; ++h) {
    dm.block_start.push_back(col);
    dm.block_size.push_back(specs[h].c());
    for (int k = 1; k <= specs[h].c(); ++k) dm.columns.push_back({h, k});
    col += specs[h].c();
  }
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(codes[i].size()) != p)
      throw DataError("level code row " + std::to_string(i) +
                      " does not match the number of covariates");
    for (int h = 0; h < p; ++h) {
      const int lv = codes[i][h];
      if (lv < 0 || lv > specs[h].c())
        throw DataError("level code " + std::to_string(lv) + " of covariate '" +
                        specs[h].name + "' is out of range");
      if (lv > 0) dm.X(i, dm.block_start[h] + lv - 1) = 1.0;
    }
  }
  return dm;
}

IngestResult ingest_rows(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows,
                         const std::string& response,
                         const std::vector<CovariateSpec>& specs,
                         const std::string& origin) {
  csvio::Table table;
  table.header = header;
  table.rows = rows;

  const int ycol = table.column(response);
  if (ycol < 0)
    throw DataError(origin + ": response column '" + response + "' not found");
  std::vector<int> cols;
  for (const auto& spec : specs) {
    const int c = table.column(spec.name);
    if (c < 0)
      throw DataError(origin + ": covariate column '" + spec.name +
                      "' not found");
    cols.push_back(c);
  }

  auto missing = [](const std::string& cell) {
    return cell.empty() || cell == "NA";
  };

  IngestResult res;
  std::vector<double> yvals;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const int lineno = static_cast<int>(i) + 2;  // header is line 1
    auto cell = [&](int c) -> const std::string& {
      static const std::string empty;
      return c < static_cast<int>(row.size()) ? row[c] : empty;
    };
    bool drop = missing(cell(ycol));
    for (int c : cols) drop = drop || missing(cell(c));
    if (drop) {
      ++res.dropped_rows;
      continue;
    }
    const std::string& ytext = cell(ycol);
    char* end = nullptr;
    const double yv = std::strtod(ytext.c_str(), &end);
    if (end == ytext.c_str() || *end != '\0')
      throw DataError(origin + ":" + std::to_string(lineno) +
                      ": response value '" + ytext + "' is not numeric");
    std::vector<int> code(specs.size());
    for (std::size_t h = 0; h < specs.size(); ++h) {
      const std::string& label = cell(cols[h]);
      const int lv = specs[h].level_index(label);
      if (lv < 0)
        throw DataError(origin + ":" + std::to_string(lineno) +
                        ": unknown level '" + label + "' in column '" +
                        specs[h].name + "'");
      code[static_cast<int>(h)] = lv;
    }
    yvals.push_back(yv);
    res.codes.push_back(std::move(code));
  }

  if (res.codes.empty()) throw DataError(origin + ": no usable data rows");

  // Every declared level must be left with at least one observation, or the
  // corresponding effect (or the intercept split) is unidentified.
  for (std::size_t h = 0; h < specs.size(); ++h) {
    std::vector<int> count(specs[h].c() + 1, 0);
    for (const auto& code : res.codes) ++count[code[h]];
    for (int lv = 0; lv <= specs[h].c(); ++lv)
      if (count[lv] == 0)
        throw DataError(origin + ": level '" + specs[h].levels[lv] +
                        "' of covariate '" + specs[h].name +
                        "' has no observations after row filtering");
  }

  res.design = build_design(res.codes, specs);
  res.y = Eigen::Map<Eigen::VectorXd>(yvals.data(),
                                      static_cast<Eigen::Index>(yvals.size()));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(res.design.X);
  if (qr.rank() < res.design.cols())
    throw DataError(origin + ": design matrix is rank deficient (rank " +
                    std::to_string(qr.rank()) + " of " +
                    std::to_string(res.design.cols()) + " columns)");
  return res;
}

IngestResult ingest_csv(const std::string& path, const std::string& response,
                        const std::vector<CovariateSpec>& specs) {
  const auto table = csvio::read_file(path);
  return ingest_rows(table.header, table.rows, response, specs, path);
}

bool ProprietyReport::ok() const {
  for (const auto& c : conditions)
    if (!c.ok) return false;
  return true;
}

ProprietyReport check_propriety(const DesignMatrix& design,
                                const Eigen::VectorXd& y,
                                const std::vector<double>& g0,
                                const std::vector<double>& G0, double s0,
                                double S0) {
  const int n = design.n();
  const int q = design.cols() - 1;
  ProprietyReport rep;
  rep.q = q;

  // Rank of the intercept-centered dummy block.
  Eigen::MatrixXd centered = design.X.rightCols(q);
  centered.rowwise() -= centered.colwise().mean();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(centered);
  rep.t = static_cast<int>(qr.rank());

  for (std::size_t h = 0; h < g0.size(); ++h) {
    ProprietyCondition cond;
    cond.description = "prior scale G0 of covariate " + std::to_string(h + 1) +
                       " positive";
    cond.lhs = G0[h];
    cond.rhs = 0.0;
    cond.ok = G0[h] > 0.0;
    rep.conditions.push_back(cond);
  }
  for (std::size_t h = 0; h < g0.size(); ++h) {
    ProprietyCondition cond;
    const double ch = design.block_size[static_cast<int>(h)];
    cond.description = "c_h + 2 g0 > q - t for covariate " +
                       std::to_string(h + 1);
    cond.lhs = ch + 2.0 * g0[h];
    cond.rhs = static_cast<double>(rep.q - rep.t);
    cond.ok = cond.lhs > cond.rhs;
    rep.conditions.push_back(cond);
  }
  {
    ProprietyCondition cond;
    cond.description = "n - 1 + 2 s0 > 0";
    cond.lhs = n - 1 + 2.0 * s0;
    cond.rhs = 0.0;
    cond.ok = cond.lhs > 0.0;
    rep.conditions.push_back(cond);
  }
  {
    // Least-squares residual sum of squares on the full design.
    const Eigen::VectorXd coef = design.X.colPivHouseholderQr().solve(y);
    rep.sse = (y - design.X * coef).squaredNorm();
    ProprietyCondition cond;
    cond.description = "2 S0 + SSE > 0";
    cond.lhs = 2.0 * S0 + rep.sse;
    cond.rhs = 0.0;
    cond.ok = cond.lhs > 0.0;
    rep.conditions.push_back(cond);
  }
  return rep;
}

}  // namespace effusion::design
