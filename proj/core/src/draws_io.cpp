#include "effusion/draws_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "effusion/csv.hpp"
#include "effusion/hash.hpp"

namespace effusion::io {

namespace fs = std::filesystem;

DrawsFormat format_from_string(const std::string& s) {
  if (s == "binary") return DrawsFormat::binary;
  if (s == "csv") return DrawsFormat::csv;
  throw ConfigError("unknown draws format '" + s +
                    "' (expected binary or csv)");
}

std::string to_string(DrawsFormat f) {
  return f == DrawsFormat::binary ? "binary" : "csv";
}

std::uint64_t model_fingerprint(
    const std::vector<design::CovariateSpec>& specs,
    const std::vector<prior::HyperParams>& hypers) {
  std::ostringstream canon;
  for (std::size_t h = 0; h < specs.size(); ++h) {
    const auto& s = specs[h];
    canon << "cov|" << s.name << "|" << design::to_string(s.scale) << "|";
    for (const auto& lv : s.levels) canon << lv << ";";
    canon << "|pairs:";
    for (const auto& p : s.pattern.pairs()) canon << p.k << "," << p.j << ";";
    canon << "|frozen:";
    for (const auto& p : s.frozen) canon << p.k << "," << p.j << ";";
    const auto& hy = hypers.at(h);
    canon << "|hyper:" << csvio::format_double(hy.r) << ","
          << csvio::format_double(hy.g0) << ","
          << csvio::format_double(hy.G0) << "," << (hy.G0_random ? 1 : 0)
          << "," << csvio::format_double(hy.lambda) << "\n";
  }
  return fnv1a64(canon.str());
}

namespace {

constexpr char magic[8] = {'E', 'F', 'D', 'R', 'A', 'W', 'S', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("draws file '" + path + "' is truncated");
  return v;
}

void save_binary(const gibbs::PosteriorDraws& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write draws file '" + path + "'");
  out.write(magic, sizeof magic);
  put(out, model_fingerprint(d.specs, d.hypers));
  put(out, static_cast<std::int32_t>(d.rows()));
  put(out, static_cast<std::int32_t>(d.beta.cols()));
  put(out, static_cast<std::int32_t>(d.tau2.cols()));
  put(out, static_cast<std::int32_t>(d.pair_columns()));
  put(out, static_cast<std::int32_t>(d.chain_index));
  out.write(reinterpret_cast<const char*>(d.beta.data()),
            sizeof(double) * d.beta.size());
  out.write(reinterpret_cast<const char*>(d.sigma2.data()),
            sizeof(double) * d.sigma2.size());
  out.write(reinterpret_cast<const char*>(d.tau2.data()),
            sizeof(double) * d.tau2.size());
  out.write(reinterpret_cast<const char*>(d.G0.data()),
            sizeof(double) * d.G0.size());
  out.write(reinterpret_cast<const char*>(d.delta.data()), d.delta.size());
  if (!out) throw DataError("short write to draws file '" + path + "'");
}

gibbs::PosteriorDraws load_binary(const std::string& path,
                                  const gibbs::PosteriorDraws& layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open draws file '" + path + "'");
  char head[8];
  in.read(head, sizeof head);
  if (!in || std::memcmp(head, magic, sizeof magic) != 0)
    throw DataError("'" + path + "' is not a draws file");
  const auto fingerprint = take<std::uint64_t>(in, path);
  if (fingerprint != model_fingerprint(layout.specs, layout.hypers))
    throw DataError("draws file '" + path +
                    "' was produced under a different model (provenance "
                    "fingerprint mismatch)");
  const auto rows = take<std::int32_t>(in, path);
  const auto dim = take<std::int32_t>(in, path);
  const auto p = take<std::int32_t>(in, path);
  const auto pairs = take<std::int32_t>(in, path);
  const auto chain = take<std::int32_t>(in, path);

  gibbs::PosteriorDraws d = layout;
  d.chain_index = chain;
  d.beta.resize(rows, dim);
  d.sigma2.resize(rows);
  d.tau2.resize(rows, p);
  d.G0.resize(rows, p);
  d.delta.resize(rows, pairs);
  in.read(reinterpret_cast<char*>(d.beta.data()),
          sizeof(double) * d.beta.size());
  in.read(reinterpret_cast<char*>(d.sigma2.data()),
          sizeof(double) * d.sigma2.size());
  in.read(reinterpret_cast<char*>(d.tau2.data()),
          sizeof(double) * d.tau2.size());
  in.read(reinterpret_cast<char*>(d.G0.data()), sizeof(double) * d.G0.size());
  in.read(reinterpret_cast<char*>(d.delta.data()), d.delta.size());
  if (!in) throw DataError("draws file '" + path + "' is truncated");
  return d;
}

std::vector<std::string> draw_csv_header(const gibbs::PosteriorDraws& d) {
  std::vector<std::string> header = d.coef_names;
  header.push_back("sigma2");
  for (const auto& spec : d.specs) header.push_back("tau2_" + spec.name);
  for (const auto& spec : d.specs) header.push_back("G0_" + spec.name);
  for (const auto& spec : d.specs)
    for (const auto& pair : spec.pattern.pairs())
      header.push_back("delta_" + spec.name + "_" + std::to_string(pair.k) +
                       "_" + std::to_string(pair.j));
  return header;
}

void save_csv(const gibbs::PosteriorDraws& d, const std::string& path) {
  csvio::Table t;
  t.header = draw_csv_header(d);
  const int p = static_cast<int>(d.specs.size());
  for (int row = 0; row < d.rows(); ++row) {
    std::vector<std::string> cells;
    cells.reserve(t.header.size());
    for (int c = 0; c < d.beta.cols(); ++c)
      cells.push_back(csvio::format_double(d.beta(row, c)));
    cells.push_back(csvio::format_double(d.sigma2(row)));
    for (int h = 0; h < p; ++h)
      cells.push_back(csvio::format_double(d.tau2(row, h)));
    for (int h = 0; h < p; ++h)
      cells.push_back(csvio::format_double(d.G0(row, h)));
    for (int c = 0; c < d.pair_columns(); ++c)
      cells.push_back(d.delta(row, c) ? "1" : "0");
    t.rows.push_back(std::move(cells));
  }
  csvio::write_file(path, t);
}

gibbs::PosteriorDraws load_csv(const std::string& path,
                               const gibbs::PosteriorDraws& layout) {
  const auto t = csvio::read_file(path);
  gibbs::PosteriorDraws d = layout;
  const auto expected = draw_csv_header(d);
  if (t.header != expected)
    throw DataError("draws CSV '" + path +
                    "' does not match the declared model (column mismatch)");
  const int rows = static_cast<int>(t.rows.size());
  const int p = static_cast<int>(d.specs.size());
  const int dim = static_cast<int>(d.coef_names.size());
  int pairs = 0;
  for (const auto& spec : d.specs) pairs += spec.pattern.dim();
  d.beta.resize(rows, dim);
  d.sigma2.resize(rows);
  d.tau2.resize(rows, p);
  d.G0.resize(rows, p);
  d.delta.resize(rows, pairs);
  for (int row = 0; row < rows; ++row) {
    const auto& cells = t.rows[row];
    if (static_cast<int>(cells.size()) != static_cast<int>(expected.size()))
      throw DataError("draws CSV '" + path + "' row " + std::to_string(row) +
                      " has the wrong number of fields");
    int at = 0;
    auto num = [&]() { return std::strtod(cells[at++].c_str(), nullptr); };
    for (int c = 0; c < dim; ++c) d.beta(row, c) = num();
    d.sigma2(row) = num();
    for (int h = 0; h < p; ++h) d.tau2(row, h) = num();
    for (int h = 0; h < p; ++h) d.G0(row, h) = num();
    for (int c = 0; c < pairs; ++c)
      d.delta(row, c) = cells[at++] == "1" ? 1 : 0;
  }
  return d;
}

}  // namespace

void save_draws(const gibbs::PosteriorDraws& draws, const std::string& path,
                DrawsFormat format) {
  if (format == DrawsFormat::binary)
    save_binary(draws, path);
  else
    save_csv(draws, path);
}

gibbs::PosteriorDraws load_draws(const std::string& path, DrawsFormat format,
                                 const gibbs::PosteriorDraws& layout) {
  return format == DrawsFormat::binary ? load_binary(path, layout)
                                       : load_csv(path, layout);
}

namespace {

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fp));
  return buf;
}

nlohmann::json spec_to_json(const design::CovariateSpec& spec,
                            const prior::HyperParams& hyper) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["levels"] = spec.levels;
  j["scale"] = design::to_string(spec.scale);
  nlohmann::json frozen = nlohmann::json::array();
  for (const auto& p : spec.frozen)
    frozen.push_back(std::vector<int>{p.k, p.j});
  j["frozen"] = frozen;
  j["hyper"] = {{"r", hyper.r},
                {"g0", hyper.g0},
                {"G0", hyper.G0},
                {"G0_random", hyper.G0_random},
                {"lambda", hyper.lambda}};
  return j;
}

}  // namespace

void save_metadata(const std::string& path,
                   const std::vector<design::CovariateSpec>& specs,
                   const std::vector<prior::HyperParams>& hypers,
                   const gibbs::SamplerConfig& cfg, const DataProvenance& data,
                   const std::vector<std::string>& draw_files,
                   DrawsFormat format) {
  nlohmann::json j;
  j["format"] = to_string(format);
  j["draw_files"] = draw_files;
  j["fingerprint"] = fingerprint_hex(model_fingerprint(specs, hypers));
  j["sampler"] = {{"burnin", cfg.burnin},
                  {"iterations", cfg.iterations},
                  {"thinning", cfg.thinning},
                  {"warm_start", cfg.warm_start},
                  {"chains", cfg.chains},
                  {"seed", cfg.seed},
                  {"M0", cfg.M0},
                  {"s0", cfg.s0},
                  {"S0", cfg.S0}};
  j["data"] = {{"path", data.path},
               {"response", data.response},
               {"standardized", data.standardized},
               {"y_mean", data.y_mean},
               {"y_sd", data.y_sd},
               {"n", data.n},
               {"dropped_rows", data.dropped_rows}};
  j["covariates"] = nlohmann::json::array();
  for (std::size_t h = 0; h < specs.size(); ++h)
    j["covariates"].push_back(spec_to_json(specs[h], hypers[h]));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write metadata file '" + path + "'");
  out << j.dump(2) << "\n";
}

LoadedFit load_fit(const std::string& dir) {
  const fs::path meta_path = fs::path(dir) / "metadata.json";
  std::ifstream in(meta_path, std::ios::binary);
  if (!in)
    throw DataError("cannot open '" + meta_path.string() +
                    "'; is this a fit directory?");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed metadata in '" + meta_path.string() +
                    "': " + e.what());
  }

  LoadedFit fit;
  try {
    const auto format = format_from_string(j.at("format").get<std::string>());
    for (const auto& jc : j.at("covariates")) {
      std::vector<design::LevelPair> frozen;
      for (const auto& fp : jc.at("frozen"))
        frozen.push_back({fp.at(0).get<int>(), fp.at(1).get<int>()});
      auto spec = design::CovariateSpec::make(
          jc.at("name").get<std::string>(),
          jc.at("levels").get<std::vector<std::string>>(),
          design::scale_from_string(jc.at("scale").get<std::string>()),
          std::move(frozen));
      prior::HyperParams hyper;
      const auto& jh = jc.at("hyper");
      hyper.r = jh.at("r").get<double>();
      hyper.g0 = jh.at("g0").get<double>();
      hyper.G0 = jh.at("G0").get<double>();
      hyper.G0_random = jh.at("G0_random").get<bool>();
      hyper.lambda = jh.at("lambda").get<double>();
      fit.specs.push_back(std::move(spec));
      fit.hypers.push_back(hyper);
    }
    const auto& js = j.at("sampler");
    fit.config.burnin = js.at("burnin").get<int>();
    fit.config.iterations = js.at("iterations").get<int>();
    fit.config.thinning = js.at("thinning").get<int>();
    fit.config.warm_start = js.at("warm_start").get<int>();
    fit.config.chains = js.at("chains").get<int>();
    fit.config.seed = js.at("seed").get<std::uint64_t>();
    fit.config.M0 = js.at("M0").get<double>();
    fit.config.s0 = js.at("s0").get<double>();
    fit.config.S0 = js.at("S0").get<double>();
    const auto& jd = j.at("data");
    fit.data.path = jd.at("path").get<std::string>();
    fit.data.response = jd.at("response").get<std::string>();
    fit.data.standardized = jd.at("standardized").get<bool>();
    fit.data.y_mean = jd.at("y_mean").get<double>();
    fit.data.y_sd = jd.at("y_sd").get<double>();
    fit.data.n = jd.at("n").get<int>();
    fit.data.dropped_rows = jd.at("dropped_rows").get<int>();

    const auto stored = j.at("fingerprint").get<std::string>();
    if (stored != fingerprint_hex(model_fingerprint(fit.specs, fit.hypers)))
      throw DataError("metadata fingerprint of '" + meta_path.string() +
                      "' does not match its covariate declarations "
                      "(provenance mismatch)");

    gibbs::PosteriorDraws layout;
    layout.specs = fit.specs;
    layout.hypers = fit.hypers;
    layout.config = fit.config;
    layout.coef_names.push_back("mu");
    for (const auto& spec : fit.specs)
      for (int k = 1; k <= spec.c(); ++k)
        layout.coef_names.push_back(spec.name + "=" + spec.levels[k]);
    int pair_cols = 0;
    for (const auto& spec : fit.specs) {
      layout.delta_offset.push_back(pair_cols);
      pair_cols += spec.pattern.dim();
    }
    for (const auto& file : j.at("draw_files")) {
      const fs::path p = fs::path(dir) / file.get<std::string>();
      fit.chains.push_back(load_draws(p.string(), format, layout));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed metadata in '" + meta_path.string() +
                    "': " + e.what());
  }
  if (fit.chains.empty())
    throw DataError("fit directory '" + dir + "' lists no draw files");
  return fit;
}

}  // namespace effusion::io
