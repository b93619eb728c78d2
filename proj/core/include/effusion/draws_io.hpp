#pragma once

// Persistence for posterior draws: a compact binary format or CSV, plus a
// JSON metadata sidecar carrying the seed, sampler settings, covariate
// declarations and a fingerprint so later selection runs can refuse draws
// that do not match the model they were produced under.

#include <cstdint>
#include <string>
#include <vector>

#include "effusion/gibbs.hpp"

namespace effusion::io {

enum class DrawsFormat { binary, csv };

DrawsFormat format_from_string(const std::string& s);
std::string to_string(DrawsFormat f);

// Stable fingerprint of everything selection depends on: covariate names,
// levels, scales, patterns, frozen pairs and hyperparameters.
std::uint64_t model_fingerprint(
    const std::vector<design::CovariateSpec>& specs,
    const std::vector<prior::HyperParams>& hypers);

struct DataProvenance {
  std::string path;      // empty for in-memory data
  std::string response;
  bool standardized = false;
  double y_mean = 0.0;   // transformation applied when standardized
  double y_sd = 1.0;
  int n = 0;
  int dropped_rows = 0;
};

void save_draws(const gibbs::PosteriorDraws& draws, const std::string& path,
                DrawsFormat format);
gibbs::PosteriorDraws load_draws(const std::string& path, DrawsFormat format,
                                 const gibbs::PosteriorDraws& layout);

// metadata.json for a fit: seed, sampler config, covariates, data
// provenance, draw file names and the fingerprint.
void save_metadata(const std::string& path,
                   const std::vector<design::CovariateSpec>& specs,
                   const std::vector<prior::HyperParams>& hypers,
                   const gibbs::SamplerConfig& cfg,
                   const DataProvenance& data,
                   const std::vector<std::string>& draw_files,
                   DrawsFormat format);

struct LoadedFit {
  std::vector<gibbs::PosteriorDraws> chains;
  std::vector<design::CovariateSpec> specs;
  std::vector<prior::HyperParams> hypers;
  gibbs::SamplerConfig config;
  DataProvenance data;
};

// Read metadata + all draw files from a fit directory, verifying the
// fingerprint stored with the draws against the declared model.
LoadedFit load_fit(const std::string& dir);

}  // namespace effusion::io
