#pragma once

#include "mapest/risk.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mapest::cli {

using nlohmann::json;

enum class PriorSource { uniform, grid_file, solve_optimal, cosine };

struct ExperimentConfig {
  json raw;  // effective configuration after command-line overrides
  Manifold manifold = Manifold::circle(1.0);
  json map_spec;
  PriorSource prior = PriorSource::uniform;
  std::string prior_path;
  double prior_amplitude = 0;
  int prior_axis = 0;
  std::optional<double> weight_amplitude;  // a² ∝ 1 + c·cos θ_axis
  int weight_axis = 0;
  std::vector<double> epsilons = kDefaultEpsilons;
  std::size_t samples = 1000000;
  std::vector<int> resolution;
  int quadrature_resolution = 512;
  std::vector<std::string> estimators{"plugin", "second_order"};
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string points_path;
};

// Parses JSON text; throws ConfigError with line or field diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// git-style content hash: SHA-1 of "blob <len>\0" + canonical dump
std::string config_hash(const json& config);

Manifold manifold_from_json(const json& j);
MapDescriptor map_from_config(const ExperimentConfig& c);
QuadratureGrid grid_from_config(const ExperimentConfig& c);

std::string format_double(double v);

}  // namespace mapest::cli
