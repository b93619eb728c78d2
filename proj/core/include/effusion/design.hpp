#pragma once

// Categorical design handling: covariate declarations, the set of level pairs
// eligible for fusion, dummy-coded design matrices, and the propriety checks
// that must hold before a chain with improper priors is allowed to run.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "effusion/errors.hpp"

namespace effusion::design {

enum class Scale { nominal, ordinal, selection };

std::string to_string(Scale s);
Scale scale_from_string(const std::string& s);

// An unordered level pair (k, j) with 0 <= j < k <= c; j == 0 pairs fuse a
// level with the baseline.
struct LevelPair {
  int k = 0;
  int j = 0;
  friend bool operator==(const LevelPair&, const LevelPair&) = default;
  friend auto operator<=>(const LevelPair&, const LevelPair&) = default;
};

// Which level pairs of a covariate carry a fusion indicator.  Nominal scale
// admits all (c+1 choose 2) pairs, ordinal scale only neighbours (k, k-1),
// pure level selection only the baseline pairs (k, 0).  The pair graph on
// levels {0..c} must be connected or the implied prior precision is singular.
class FusionPattern {
 public:
  FusionPattern() = default;

  static FusionPattern for_scale(Scale s, int c);
  static FusionPattern custom(int c, std::vector<LevelPair> pairs);

  int c() const { return c_; }
  int dim() const { return static_cast<int>(pairs_.size()); }
  const std::vector<LevelPair>& pairs() const { return pairs_; }
  // Position of (k, j) in pairs(), or -1 when the pair is not in the pattern.
  int index_of(int k, int j) const;
  bool contains(int k, int j) const { return index_of(k, j) >= 0; }
  bool restricted() const { return restricted_; }  // proper subset of all pairs
  bool connected() const { return connected_; }

 private:
  FusionPattern(int c, std::vector<LevelPair> pairs, bool restricted);

  int c_ = 0;
  std::vector<LevelPair> pairs_;  // sorted by (k, j)
  std::vector<int> index_;        // flattened (c+1)^2 lookup, -1 when absent
  bool restricted_ = false;
  bool connected_ = false;
};

struct CovariateSpec {
  std::string name;
  std::vector<std::string> levels;  // c+1 labels, baseline first
  Scale scale = Scale::nominal;
  FusionPattern pattern;
  std::vector<LevelPair> frozen;  // pairs whose indicator is pinned at 1

  int c() const { return static_cast<int>(levels.size()) - 1; }
  int level_index(const std::string& label) const;  // -1 when unknown
  bool is_frozen(int k, int j) const;

  static CovariateSpec make(std::string name, std::vector<std::string> levels,
                            Scale scale, std::vector<LevelPair> frozen = {});
};

// Dummy-coded regression design: intercept column followed by one block per
// covariate holding indicators for levels 1..c_h (baseline omitted).
struct DesignMatrix {
  Eigen::MatrixXd X;  // n x (1 + sum c_h)
  struct Column {
    int covariate = -1;  // -1 for the intercept
    int level = 0;
  };
  std::vector<Column> columns;
  std::vector<int> block_start;  // column of beta_{h,1} per covariate
  std::vector<int> block_size;   // c_h per covariate

  int n() const { return static_cast<int>(X.rows()); }
  int cols() const { return static_cast<int>(X.cols()); }
  int covariates() const { return static_cast<int>(block_size.size()); }
};

// Build the design from integer level codes (codes[i][h] in 0..c_h).
DesignMatrix build_design(const std::vector<std::vector<int>>& codes,
                          const std::vector<CovariateSpec>& specs);

struct IngestResult {
  DesignMatrix design;
  Eigen::VectorXd y;
  std::vector<std::vector<int>> codes;
  int dropped_rows = 0;
};

// Read a CSV with a header row, pick the response and the declared covariate
// columns, drop incomplete rows, and dummy-code.  Unknown level labels and a
// declared level that never occurs are hard errors.
IngestResult ingest_csv(const std::string& path, const std::string& response,
                        const std::vector<CovariateSpec>& specs);

// Same, but from already-parsed cells (header + rows); used by tests.
IngestResult ingest_rows(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows,
                         const std::string& response,
                         const std::vector<CovariateSpec>& specs,
                         const std::string& origin = "<memory>");

// Posterior propriety under the default improper priors.  With q dummy
// columns of which the intercept-centered block has rank t, the conditions
// are: every prior scale G_h0 positive, c_h + 2 g_h0 > q - t per covariate,
// n - 1 + 2 s0 > 0, and 2 S0 + SSE > 0 with SSE the least-squares residual
// sum of squares of y on the full design.
struct ProprietyCondition {
  std::string description;
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

struct ProprietyReport {
  std::vector<ProprietyCondition> conditions;
  int q = 0;  // total dummy columns
  int t = 0;  // rank of the centered dummy block
  double sse = 0.0;
  bool ok() const;
};

// G0 holds the fixed prior scale per covariate, or the hyperprior mean when
// G_h0 is itself random; only its positivity enters the check.
ProprietyReport check_propriety(const DesignMatrix& design,
                                const Eigen::VectorXd& y,
                                const std::vector<double>& g0,
                                const std::vector<double>& G0, double s0,
                                double S0);

}  // namespace effusion::design
