#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "stodec/bsde.hpp"
#include "stodec/decision.hpp"
#include "stodec/hjb.hpp"
#include "stodec/sde.hpp"

namespace stodec {

/// Shortest round-trip decimal form of a double ("%.17g"); CSV payloads are
/// built from these so identical runs produce identical bytes.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
void write_json_file(const std::string& path, const nlohmann::json& j);

/// One file per field (x.csv, dw.csv, controls.csv) plus manifest.json.
void save_path_bundle(const std::string& dir, const PathBundle& bundle);
PathBundle load_path_bundle(const std::string& dir);

/// y.csv, z.csv, regression_report.csv plus manifest.json.
void save_bsde_solution(const std::string& dir, const BsdeSolution& solution);

/// One plot-ready CSV per component (step, node, t, coordinates, value),
/// argmin.csv, plus manifest.json.
void save_value_grid(const std::string& dir, const ValueGrid& values);

void save_policy(const std::string& dir, const Policy& policy);

/// Single CSV row: components, standard errors, seed, n_paths.
void save_cost_outcome(const std::string& path, const CostOutcome& outcome);

}  // namespace stodec
