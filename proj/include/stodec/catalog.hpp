#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "stodec/bsde.hpp"
#include "stodec/convex_set.hpp"
#include "stodec/sde.hpp"

namespace stodec {

/// One named preset with a human-readable parameter schema.
struct CatalogEntry {
  std::string kind;    // "model" | "cost" | "driver" | "set"
  std::string name;
  std::string schema;  // parameter names with defaults
};

/// Stable, alphabetized listing of every built-in preset.
std::vector<CatalogEntry> catalog_list();

/// Instantiates a named diffusion preset; unknown names or parameter keys
/// raise ConfigError. The control set is supplied by the caller (it comes
/// from its own config section).
DiffusionModel make_model(const std::string& name, const nlohmann::json& params,
                          const ControlSet& controls);

CostModel make_cost(const std::string& name, const nlohmann::json& params);

Driver make_driver(const std::string& name, const nlohmann::json& params);

/// Sets are built directly from their JSON shape description.
ConvexSet make_set(const nlohmann::json& spec);

}  // namespace stodec
