#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "stodec/bsde.hpp"
#include "stodec/convex_set.hpp"
#include "stodec/decision.hpp"
#include "stodec/hjb.hpp"
#include "stodec/sde.hpp"
#include "stodec/viability.hpp"

namespace stodec {

/// Parsed, validated experiment description. Parsing is strict: unknown keys
/// anywhere are rejected, and every cross-reference (set dimension vs driver
/// dimension, control mesh vs model, grids vs state dimension) is checked
/// before any compute starts.
struct ExperimentConfig {
  // Named presets with parameters.
  std::string model_name;
  nlohmann::json model_params;
  std::optional<double> ellipticity_floor;
  std::string cost_name;
  nlohmann::json cost_params;
  std::string driver_name;
  nlohmann::json driver_params;
  nlohmann::json set_spec;

  TimeGrid time_grid;
  std::optional<SpaceGrid> space_grid;
  int pde_n_steps = 0;  ///< 0 = reuse time_grid.n_steps

  // Control mesh.
  nlohmann::json control_mesh_spec;

  // Solver options.
  RegressionBasis basis;
  int picard_iters = 3;
  Scheme scheme = Scheme::Explicit;
  MinimizationMode mode = MinimizationMode::PerComponent;
  Eigen::VectorXd weights;
  PolicyLookup policy_lookup;

  // Simulation.
  Eigen::VectorXd x0;
  int n_paths = 10000;
  Eigen::VectorXd constant_control;  ///< empty = zero control / policy when available

  // Optional viability block.
  bool has_condition_check = false;
  SampleCloudSpec condition_sampler;
  double condition_constant = 1.0;
  double condition_h = 0.0;  ///< <= 0: auto step
  double condition_tolerance = 1e-9;
  double grid_eps = 1e-6;
  double empirical_eps_multiplier = 5.0;

  // Optional cross-validation block.
  std::vector<Eigen::VectorXd> crosscheck_x0;
  double crosscheck_extra_tolerance = 2e-3;
  int dp_r_index = 0;  ///< 0 = n_steps/2 of the value grid
  double dp_gap_tolerance = 0.0;  ///< extra slack beyond 3 SE + interpolation bound

  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// Strict parse + cross-reference validation; throws ConfigError.
  static ExperimentConfig parse(const nlohmann::json& j);
  /// Canonical JSON form; parse(to_json()) == *this.
  nlohmann::json to_json() const;

  // Materialized objects (catalog-backed).
  ControlSet make_control_set() const;
  DiffusionModel make_model_obj() const;
  CostModel make_cost_obj() const;
  Driver make_driver_obj() const;
  ConvexSet make_set_obj() const;
  TimeGrid pde_time_grid() const;
};

/// Applies `key=value` overrides with dotted paths (e.g. solver.picard_iters=5)
/// onto a raw JSON config; values parse as JSON when possible, else strings.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Reads the raw JSON and applies overrides in order (no validation).
nlohmann::json load_raw_config(const std::string& path,
                               const std::vector<std::string>& overrides);

/// Reads and parses a config file, applying overrides in order.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides);

}  // namespace stodec
