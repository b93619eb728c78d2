#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "effusion/csv.hpp"
#include "effusion/draws_io.hpp"

using namespace effusion::io;
using effusion::design::CovariateSpec;
using effusion::design::Scale;
using effusion::gibbs::PosteriorDraws;
using effusion::gibbs::SamplerConfig;
using effusion::prior::HyperParams;
using effusion::rng::Stream;
using effusion::rng::derive;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& f) const {
    return (path / f).string();
  }
};

// A real little posterior so saved draws carry plausible content.
PosteriorDraws tiny_chain(std::uint64_t seed = 3, int chain = 0) {
  std::vector<CovariateSpec> specs{
      CovariateSpec::make("x", {"a", "b", "c"}, Scale::nominal)};
  std::vector<std::vector<int>> codes;
  for (int i = 0; i < 21; ++i) codes.push_back({i % 3});
  const auto dm = effusion::design::build_design(codes, specs);
  Eigen::VectorXd y(21);
  Stream s(derive(seed, "io-fixture"));
  for (int i = 0; i < 21; ++i)
    y(i) = 1.0 + (codes[i][0] == 2 ? -1.0 : 0.0) + 0.4 * s.normal();
  auto hyper = HyperParams::defaults_for(Scale::nominal);
  hyper.r = 100.0;
  SamplerConfig cfg;
  cfg.burnin = 40;
  cfg.iterations = 60;
  cfg.warm_start = 10;
  cfg.seed = seed;
  cfg.s0 = 3.0;
  cfg.S0 = 2.0;
  return effusion::gibbs::run_chain(dm, y, specs, {hyper}, cfg, chain);
}

}  // namespace

TEST_SUITE("draws io") {

TEST_CASE("format names round trip") {
  CHECK(format_from_string("binary") == DrawsFormat::binary);
  CHECK(format_from_string("csv") == DrawsFormat::csv);
  CHECK(to_string(DrawsFormat::binary) == "binary");
  CHECK(to_string(DrawsFormat::csv) == "csv");
  CHECK_THROWS_AS(format_from_string("parquet"), effusion::ConfigError);
}

TEST_CASE("fingerprint tracks the model declaration") {
  std::vector<CovariateSpec> specs{
      CovariateSpec::make("x", {"a", "b", "c"}, Scale::nominal)};
  std::vector<HyperParams> hypers{HyperParams::defaults_for(Scale::nominal)};
  const auto base = model_fingerprint(specs, hypers);
  CHECK(base == model_fingerprint(specs, hypers));

  auto renamed = specs;
  renamed[0].name = "z";
  CHECK(model_fingerprint(renamed, hypers) != base);

  auto relabeled = specs;
  relabeled[0] = CovariateSpec::make("x", {"a", "b", "d"}, Scale::nominal);
  CHECK(model_fingerprint(relabeled, hypers) != base);

  auto rescaled = specs;
  rescaled[0] = CovariateSpec::make("x", {"a", "b", "c"}, Scale::ordinal);
  CHECK(model_fingerprint(rescaled, hypers) != base);

  auto rehypered = hypers;
  rehypered[0].r = 200.0;
  CHECK(model_fingerprint(specs, rehypered) != base);

  auto refrozen = specs;
  refrozen[0] =
      CovariateSpec::make("x", {"a", "b", "c"}, Scale::nominal, {{2, 1}});
  CHECK(model_fingerprint(refrozen, hypers) != base);
}

TEST_CASE("binary draws round trip exactly") {
  TempDir dir("effusion-io-bin");
  const auto draws = tiny_chain();
  save_draws(draws, dir / "chain0.bin", DrawsFormat::binary);
  const auto loaded = load_draws(dir / "chain0.bin", DrawsFormat::binary, draws);
  CHECK(loaded.beta == draws.beta);
  CHECK(loaded.sigma2 == draws.sigma2);
  CHECK(loaded.tau2 == draws.tau2);
  CHECK(loaded.G0 == draws.G0);
  CHECK(loaded.delta == draws.delta);
  CHECK(loaded.chain_index == draws.chain_index);
}

TEST_CASE("csv draws round trip exactly") {
  TempDir dir("effusion-io-csv");
  const auto draws = tiny_chain();
  save_draws(draws, dir / "chain0.csv", DrawsFormat::csv);
  const auto loaded = load_draws(dir / "chain0.csv", DrawsFormat::csv, draws);
  // Shortest round-trip formatting reproduces every double bit for bit.
  CHECK(loaded.beta == draws.beta);
  CHECK(loaded.sigma2 == draws.sigma2);
  CHECK(loaded.tau2 == draws.tau2);
  CHECK(loaded.delta == draws.delta);
}

TEST_CASE("binary loader rejects draws from another model") {
  TempDir dir("effusion-io-fp");
  const auto draws = tiny_chain();
  save_draws(draws, dir / "chain0.bin", DrawsFormat::binary);
  auto other = draws;
  other.hypers[0].r = 999.0;  // different model, different fingerprint
  CHECK_THROWS_WITH_AS(
      load_draws(dir / "chain0.bin", DrawsFormat::binary, other),
      doctest::Contains("fingerprint"), effusion::DataError);
}

TEST_CASE("metadata and fit directory round trip") {
  TempDir dir("effusion-io-fit");
  const auto c0 = tiny_chain(3, 0);
  const auto c1 = tiny_chain(3, 1);
  save_draws(c0, dir / "chain0.bin", DrawsFormat::binary);
  save_draws(c1, dir / "chain1.bin", DrawsFormat::binary);

  DataProvenance prov;
  prov.path = "input.csv";
  prov.response = "y";
  prov.standardized = true;
  prov.y_mean = 0.5;
  prov.y_sd = 2.0;
  prov.n = 21;
  prov.dropped_rows = 1;
  SamplerConfig cfg = c0.config;
  cfg.chains = 2;
  save_metadata(dir / "metadata.json", c0.specs, c0.hypers, cfg, prov,
                {"chain0.bin", "chain1.bin"}, DrawsFormat::binary);

  const auto fit = load_fit(dir.path.string());
  REQUIRE(fit.chains.size() == 2);
  CHECK(fit.chains[0].beta == c0.beta);
  CHECK(fit.chains[1].beta == c1.beta);
  CHECK(fit.chains[1].chain_index == 1);
  CHECK(fit.specs.size() == 1);
  CHECK(fit.specs[0].name == "x");
  CHECK(fit.specs[0].levels == std::vector<std::string>{"a", "b", "c"});
  CHECK(fit.specs[0].scale == Scale::nominal);
  CHECK(fit.hypers[0].r == doctest::Approx(100.0));
  CHECK(fit.config.seed == 3);
  CHECK(fit.config.chains == 2);
  CHECK(fit.data.standardized);
  CHECK(fit.data.y_mean == doctest::Approx(0.5));
  CHECK(fit.data.y_sd == doctest::Approx(2.0));
  CHECK(fit.data.dropped_rows == 1);

  // Tampering with the declared model must be caught on load.
  {
    std::ifstream in(dir / "metadata.json");
    auto meta = nlohmann::json::parse(in);
    in.close();
    meta["covariates"][0]["hyper"]["r"] = 12345.0;
    std::ofstream out(dir / "metadata.json");
    out << meta.dump(2) << "\n";
  }
  CHECK_THROWS_WITH_AS(load_fit(dir.path.string()),
                       doctest::Contains("fingerprint"), effusion::DataError);
}

TEST_CASE("missing files fail with data errors") {
  TempDir dir("effusion-io-miss");
  const auto draws = tiny_chain();
  CHECK_THROWS_AS(
      load_draws(dir / "nope.bin", DrawsFormat::binary, draws),
      effusion::DataError);
  CHECK_THROWS_AS(load_fit(dir.path.string()), effusion::DataError);
}

}  // TEST_SUITE

TEST_SUITE("csv utilities") {

TEST_CASE("parser handles quotes, escapes and line endings") {
  const std::string text =
      "a,b,c\r\n"
      "1,\"x,y\",\"he said \"\"hi\"\"\"\n"
      "2,,plain\n";
  const auto t = effusion::csvio::parse(text, "inline");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"1", "x,y", "he said \"hi\""});
  CHECK(t.rows[1] == std::vector<std::string>{"2", "", "plain"});
  CHECK(t.column("b") == 1);
  CHECK(t.column("zz") == -1);
}

TEST_CASE("write and escape round trip") {
  TempDir dir("effusion-csv-rt");
  effusion::csvio::Table t;
  t.header = {"name", "value"};
  t.rows = {{"plain", "1.5"}, {"with,comma", "quote\"inside"}, {"nl\nin", ""}};
  effusion::csvio::write_file(dir / "t.csv", t);
  const auto back = effusion::csvio::read_file(dir / "t.csv");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
}

TEST_CASE("doubles format to the shortest exact form") {
  using effusion::csvio::format_double;
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-3.25) == "-3.25");
  // A value needing all 17 digits survives.
  const double ugly = 0.1 + 0.2;
  const auto text = format_double(ugly);
  CHECK(std::strtod(text.c_str(), nullptr) == ugly);
  CHECK(format_double(1e300) == "1e+300");
}

TEST_CASE("malformed csv reports its location") {
  CHECK_THROWS_WITH_AS(
      effusion::csvio::parse("a,b\n\"unterminated\n", "bad.csv"),
      doctest::Contains("bad.csv"), effusion::DataError);
}

}  // TEST_SUITE
