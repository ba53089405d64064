#pragma once

#include <string>

#include <Eigen/Dense>

#include "json.hpp"

#include "rtmpc/explicit_stage.hpp"
#include "rtmpc/geometry.hpp"
#include "rtmpc/sim.hpp"
#include "rtmpc/synthesis.hpp"

namespace rtmpc {

using nlohmann::json;

inline constexpr const char* kBundleSchema = "rtmpc-bundle/1";

json matrix_to_json(const MatrixXd& M);
json vector_to_json(const VectorXd& v);
/// Accepts an array of rows, or a number for a 1x1 matrix.
MatrixXd matrix_from_json(const json& j, const std::string& field);
VectorXd vector_from_json(const json& j, const std::string& field);

json polytope_to_json(const HPolytope& P);
HPolytope polytope_from_json(const json& j, const std::string& field);
json support_set_to_json(const SupportSet& S);
SupportSet support_set_from_json(const json& j, const std::string& field);

/// Controller configuration; missing fields take the case-study values.
struct Config {
  PlantModel model;
  CostWeights weights;
  int N = 20;
  int mbar = 5;
  double eps_rpi = 1e-4;
  double gamma_safety = 1.1;
};

Config default_config();
/// Throws Error(Config) with "source:line:col: message" diagnostics.
Config parse_config(const std::string& text, const std::string& source = "<config>");
Config load_config(const std::string& path);
json config_to_json(const Config& c);

struct Bundle {
  Config config;
  TubeSynthesis syn;
  ValidationReport report;
  double gamma = 1.0;  ///< rescale constant calibrated for config.N
};

json bundle_to_json(const Bundle& b);
Bundle bundle_from_json(const json& j);
void save_bundle(const std::string& path, const Bundle& b);
Bundle load_bundle(const std::string& path);

json explicit_map_to_json(const ExplicitStageMap& m);
ExplicitStageMap explicit_map_from_json(const json& j);
json explicit_maps_to_json(const ExplicitStageMaps& m);
ExplicitStageMaps explicit_maps_from_json(const json& j);
/// Bytes of the compact JSON encoding.
std::size_t serialized_size(const ExplicitStageMap& m);

/// Per-step tube cross-sections {q_k} (+) Z as vertex lists, plus Z, X_T and
/// X_T (+) Z (planar models only).
json tube_json(const SimTrace& trace, const TubeSynthesis& syn);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace rtmpc
