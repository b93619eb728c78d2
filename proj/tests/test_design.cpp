#include <doctest.h>

#include <string>
#include <vector>

#include "effusion/design.hpp"

using namespace effusion::design;

TEST_SUITE("design") {

TEST_CASE("fusion patterns per scale") {
  const auto nom = FusionPattern::for_scale(Scale::nominal, 3);
  CHECK(nom.c() == 3);
  CHECK(nom.dim() == 6);
  CHECK(nom.contains(1, 0));
  CHECK(nom.contains(3, 2));
  CHECK(!nom.restricted());
  CHECK(nom.connected());

  const auto ord = FusionPattern::for_scale(Scale::ordinal, 3);
  CHECK(ord.dim() == 3);
  CHECK(ord.pairs() ==
        std::vector<LevelPair>{{1, 0}, {2, 1}, {3, 2}});
  CHECK(!ord.contains(2, 0));
  CHECK(ord.restricted());
  CHECK(ord.connected());

  const auto sel = FusionPattern::for_scale(Scale::selection, 3);
  CHECK(sel.pairs() ==
        std::vector<LevelPair>{{1, 0}, {2, 0}, {3, 0}});
  CHECK(sel.restricted());
  CHECK(sel.connected());

  // Pairs are ordered and indexed consistently.
  for (int i = 0; i < nom.dim(); ++i) {
    const auto p = nom.pairs()[i];
    CHECK(nom.index_of(p.k, p.j) == i);
  }
}

TEST_CASE("custom pattern connectivity") {
  // Levels {0,1,2} with only the (2,1) pair leaves level 0 isolated.
  const auto p = FusionPattern::custom(2, {{2, 1}});
  CHECK(!p.connected());
  CHECK(FusionPattern::custom(2, {{1, 0}, {2, 1}}).connected());
  CHECK_THROWS_AS(FusionPattern::custom(2, {{1, 1}}), effusion::ConfigError);
  CHECK_THROWS_AS(FusionPattern::custom(2, {{3, 0}}), effusion::ConfigError);
  CHECK_THROWS_AS(FusionPattern::custom(2, {{1, 0}, {1, 0}}),
                  effusion::ConfigError);
}

TEST_CASE("covariate spec validation") {
  auto spec = CovariateSpec::make("x", {"a", "b", "c"}, Scale::ordinal);
  CHECK(spec.c() == 2);
  CHECK(spec.level_index("b") == 1);
  CHECK(spec.level_index("zz") == -1);
  CHECK(!spec.is_frozen(1, 0));

  auto frozen = CovariateSpec::make("x", {"a", "b", "c"}, Scale::nominal,
                                    {{2, 1}});
  CHECK(frozen.is_frozen(2, 1));
  CHECK(!frozen.is_frozen(1, 0));

  CHECK_THROWS_AS(CovariateSpec::make("x", {"a"}, Scale::nominal),
                  effusion::ConfigError);
  CHECK_THROWS_AS(CovariateSpec::make("x", {"a", "a"}, Scale::nominal),
                  effusion::ConfigError);
  // Frozen pair must belong to the pattern: (2,0) is not an ordinal pair.
  CHECK_THROWS_AS(
      CovariateSpec::make("x", {"a", "b", "c"}, Scale::ordinal, {{2, 0}}),
      effusion::ConfigError);
}

static std::vector<CovariateSpec> abc_spec() {
  return {CovariateSpec::make("x", {"A", "B", "C"}, Scale::nominal)};
}

TEST_CASE("ingest dummy codes a small table") {
  const std::vector<std::string> header{"y", "x"};
  const std::vector<std::vector<std::string>> rows{
      {"1.0", "A"}, {"2.0", "B"}, {"3.0", "C"}, {"4.0", "B"}};
  const auto r = ingest_rows(header, rows, "y", abc_spec());
  CHECK(r.dropped_rows == 0);
  CHECK(r.design.n() == 4);
  CHECK(r.design.cols() == 3);
  CHECK(r.design.X.col(0) == Eigen::VectorXd::Ones(4));
  Eigen::MatrixXd block(4, 2);
  block << 0, 0, 1, 0, 0, 1, 1, 0;
  CHECK(r.design.X.rightCols(2) == block);
  CHECK(r.y(2) == 3.0);
  CHECK(r.codes[3] == std::vector<int>{1});
  CHECK(r.design.block_start[0] == 1);
  CHECK(r.design.block_size[0] == 2);
  CHECK(r.design.columns[1].covariate == 0);
  CHECK(r.design.columns[1].level == 1);
}

TEST_CASE("ingest drops incomplete rows and counts them") {
  const std::vector<std::string> header{"y", "x"};
  const std::vector<std::vector<std::string>> rows{
      {"1.0", "A"}, {"", "B"}, {"3.0", "NA"}, {"2.5", "C"}, {"4.0", "B"}};
  const auto r = ingest_rows(header, rows, "y", abc_spec());
  CHECK(r.dropped_rows == 2);
  CHECK(r.design.n() == 3);
}

TEST_CASE("ingest rejects bad input") {
  const std::vector<std::string> header{"y", "x"};
  // Unknown level label.
  CHECK_THROWS_WITH_AS(
      ingest_rows(header, {{"1", "A"}, {"2", "B"}, {"3", "C"}, {"1", "D"}},
                  "y", abc_spec(), "rows.csv"),
      doctest::Contains("rows.csv:5"), effusion::DataError);
  // Declared level never observed.
  CHECK_THROWS_WITH_AS(
      ingest_rows(header, {{"1", "A"}, {"2", "B"}, {"3", "B"}}, "y",
                  abc_spec()),
      doctest::Contains("has no observations"), effusion::DataError);
  // Non-numeric response.
  CHECK_THROWS_AS(
      ingest_rows(header, {{"1", "A"}, {"x2", "B"}, {"3", "C"}}, "y",
                  abc_spec()),
      effusion::DataError);
  // Missing columns.
  CHECK_THROWS_AS(ingest_rows({"z", "x"}, {{"1", "A"}}, "y", abc_spec()),
                  effusion::DataError);
  CHECK_THROWS_AS(ingest_rows({"y", "w"}, {{"1", "A"}}, "y", abc_spec()),
                  effusion::DataError);
}

TEST_CASE("ingest rejects a rank-deficient design") {
  // Two covariates that always move together give identical dummy blocks.
  std::vector<CovariateSpec> specs{
      CovariateSpec::make("a", {"0", "1"}, Scale::nominal),
      CovariateSpec::make("b", {"0", "1"}, Scale::nominal)};
  const std::vector<std::string> header{"y", "a", "b"};
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < 8; ++i) {
    const std::string lv = (i % 2 == 0) ? "0" : "1";
    rows.push_back({std::to_string(i * 0.5), lv, lv});
  }
  CHECK_THROWS_WITH_AS(ingest_rows(header, rows, "y", specs),
                       doctest::Contains("rank"), effusion::DataError);
}

TEST_CASE("design blocks line up for several covariates") {
  std::vector<CovariateSpec> specs{
      CovariateSpec::make("a", {"0", "1", "2"}, Scale::nominal),
      CovariateSpec::make("b", {"0", "1", "2", "3"}, Scale::ordinal)};
  std::vector<std::vector<int>> codes{{0, 1}, {1, 0}, {2, 3}, {1, 2}, {0, 0}};
  const auto d = build_design(codes, specs);
  CHECK(d.cols() == 1 + 2 + 3);
  CHECK(d.block_start == std::vector<int>{1, 3});
  CHECK(d.block_size == std::vector<int>{2, 3});
  for (int i = 0; i < d.n(); ++i) {
    // Each block has at most one active indicator, matching the level code.
    for (int h = 0; h < 2; ++h) {
      double sum = 0.0;
      for (int l = 0; l < d.block_size[h]; ++l) {
        const double v = d.X(i, d.block_start[h] + l);
        sum += v;
        CHECK((v == 0.0 || v == 1.0));
        if (v == 1.0) CHECK(codes[i][h] == l + 1);
      }
      CHECK(sum == (codes[i][h] > 0 ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("propriety holds for a healthy dataset") {
  const std::vector<std::string> header{"y", "x"};
  const std::vector<std::vector<std::string>> rows{
      {"1.1", "A"}, {"2.0", "B"}, {"3.2", "C"}, {"4.0", "B"}, {"0.7", "A"},
      {"2.9", "C"}};
  const auto r = ingest_rows(header, rows, "y", abc_spec());
  const auto rep =
      check_propriety(r.design, r.y, {5.0}, {2.0}, 0.0, 0.0);
  CHECK(rep.ok());
  CHECK(rep.q == 2);
  CHECK(rep.t == 2);
  CHECK(rep.sse > 0.0);
  CHECK(rep.conditions.size() == 4);
}

TEST_CASE("propriety flags a perfectly fitted response") {
  // Constant y has SSE zero, so 2 S0 + SSE > 0 fails when S0 = 0.
  const std::vector<std::string> header{"y", "x"};
  const std::vector<std::vector<std::string>> rows{
      {"2.0", "A"}, {"2.0", "B"}, {"2.0", "C"}, {"2.0", "B"}};
  const auto r = ingest_rows(header, rows, "y", abc_spec());
  const auto bad = check_propriety(r.design, r.y, {5.0}, {2.0}, 0.0, 0.0);
  CHECK(!bad.ok());
  const auto rescued = check_propriety(r.design, r.y, {5.0}, {2.0}, 0.0, 0.5);
  CHECK(rescued.ok());
}

TEST_CASE("propriety flags a non-positive prior scale") {
  const std::vector<std::string> header{"y", "x"};
  const std::vector<std::vector<std::string>> rows{
      {"1.1", "A"}, {"2.0", "B"}, {"3.2", "C"}, {"4.0", "B"}};
  const auto r = ingest_rows(header, rows, "y", abc_spec());
  CHECK(!check_propriety(r.design, r.y, {5.0}, {0.0}, 0.0, 0.0).ok());
  // Tiny g0 can violate the per-covariate rank condition only when the
  // centered block loses rank; with a healthy design it still passes.
  CHECK(check_propriety(r.design, r.y, {0.01}, {2.0}, 0.0, 0.0).ok());
}

}  // TEST_SUITE
