#include "stodec/config.hpp"

#include <fstream>

#include "stodec/catalog.hpp"
#include "stodec/errors.hpp"

namespace stodec {

namespace {

void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

void reject_unknown(const nlohmann::json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError(path + ": unknown key '" + it.key() + "'");
  }
}

Eigen::VectorXd parse_vec(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(path + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

ControlSet ExperimentConfig::make_control_set() const {
  const auto& j = control_mesh_spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "mesh") {
    std::vector<Eigen::VectorXd> pts;
    for (const auto& p : j.at("points")) pts.push_back(parse_vec(p, "control_mesh.points"));
    return ControlSet::from_points(std::move(pts));
  }
  const Eigen::VectorXd lo = parse_vec(j.at("lo"), "control_mesh.lo");
  const Eigen::VectorXd hi = parse_vec(j.at("hi"), "control_mesh.hi");
  std::vector<int> mesh;
  for (const auto& m : j.at("mesh_per_dim")) mesh.push_back(m.get<int>());
  return ControlSet::from_box(lo, hi, mesh);
}

DiffusionModel ExperimentConfig::make_model_obj() const {
  return make_model(model_name, model_params, make_control_set());
}

CostModel ExperimentConfig::make_cost_obj() const { return make_cost(cost_name, cost_params); }

Driver ExperimentConfig::make_driver_obj() const {
  return make_driver(driver_name, driver_params);
}

ConvexSet ExperimentConfig::make_set_obj() const { return make_set(set_spec); }

TimeGrid ExperimentConfig::pde_time_grid() const {
  return pde_n_steps > 0 ? TimeGrid(time_grid.t0, time_grid.T, pde_n_steps) : time_grid;
}

ExperimentConfig ExperimentConfig::parse(const nlohmann::json& j) {
  require_object(j, "config");
  reject_unknown(j, "config",
                 {"model", "cost", "driver", "set", "time_grid", "space_grid", "control_mesh",
                  "solver", "simulation", "viability", "crosscheck", "seed", "output_dir"});
  ExperimentConfig c;

  for (const char* required : {"model", "cost", "driver", "set", "time_grid", "control_mesh"})
    if (!j.contains(required))
      throw ConfigError(std::string("config: missing required section '") + required + "'");

  {
    const auto& m = j.at("model");
    require_object(m, "model");
    reject_unknown(m, "model", {"name", "params", "ellipticity_floor"});
    c.model_name = m.at("name").get<std::string>();
    c.model_params = m.value("params", nlohmann::json::object());
    if (m.contains("ellipticity_floor"))
      c.ellipticity_floor = m.at("ellipticity_floor").get<double>();
  }
  {
    const auto& s = j.at("cost");
    require_object(s, "cost");
    reject_unknown(s, "cost", {"name", "params"});
    c.cost_name = s.at("name").get<std::string>();
    c.cost_params = s.value("params", nlohmann::json::object());
  }
  {
    const auto& s = j.at("driver");
    require_object(s, "driver");
    reject_unknown(s, "driver", {"name", "params"});
    c.driver_name = s.at("name").get<std::string>();
    c.driver_params = s.value("params", nlohmann::json::object());
  }
  c.set_spec = j.at("set");
  {
    const auto& t = j.at("time_grid");
    require_object(t, "time_grid");
    reject_unknown(t, "time_grid", {"t0", "T", "n_steps"});
    c.time_grid = TimeGrid(t.value("t0", 0.0), t.at("T").get<double>(),
                           t.at("n_steps").get<int>());
  }
  if (j.contains("space_grid")) {
    const auto& s = j.at("space_grid");
    require_object(s, "space_grid");
    reject_unknown(s, "space_grid", {"lo", "hi", "nodes_per_dim"});
    std::vector<int> nodes;
    for (const auto& n : s.at("nodes_per_dim")) nodes.push_back(n.get<int>());
    c.space_grid = SpaceGrid(parse_vec(s.at("lo"), "space_grid.lo"),
                             parse_vec(s.at("hi"), "space_grid.hi"), nodes);
  }
  {
    const auto& m = j.at("control_mesh");
    require_object(m, "control_mesh");
    const std::string kind = m.value("kind", "");
    if (kind == "mesh")
      reject_unknown(m, "control_mesh", {"kind", "points"});
    else if (kind == "box")
      reject_unknown(m, "control_mesh", {"kind", "lo", "hi", "mesh_per_dim"});
    else
      throw ConfigError("control_mesh.kind: expected 'mesh' or 'box'");
    c.control_mesh_spec = m;
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    require_object(s, "solver");
    reject_unknown(s, "solver",
                   {"basis", "picard_iters", "scheme", "pde_n_steps", "mode", "weights",
                    "policy_lookup"});
    if (s.contains("basis")) {
      const auto& b = s.at("basis");
      require_object(b, "solver.basis");
      reject_unknown(b, "solver.basis", {"kind", "degree", "cells_per_dim", "ridge"});
      const std::string kind = b.value("kind", "polynomial");
      if (kind == "polynomial")
        c.basis = RegressionBasis::polynomial(b.value("degree", 3), b.value("ridge", 1e-10));
      else if (kind == "local-partition")
        c.basis = RegressionBasis::local_partition(b.value("cells_per_dim", 4),
                                                   b.value("ridge", 1e-10));
      else
        throw ConfigError("solver.basis.kind: expected 'polynomial' or 'local-partition'");
    }
    c.picard_iters = s.value("picard_iters", 3);
    if (c.picard_iters < 1) throw ConfigError("solver.picard_iters: must be >= 1");
    const std::string scheme = s.value("scheme", "explicit");
    if (scheme == "explicit")
      c.scheme = Scheme::Explicit;
    else if (scheme == "semi-implicit")
      c.scheme = Scheme::SemiImplicitDiffusion;
    else
      throw ConfigError("solver.scheme: expected 'explicit' or 'semi-implicit'");
    c.pde_n_steps = s.value("pde_n_steps", 0);
    const std::string mode = s.value("mode", "per-component");
    if (mode == "per-component")
      c.mode = MinimizationMode::PerComponent;
    else if (mode == "scalarized")
      c.mode = MinimizationMode::Scalarized;
    else
      throw ConfigError("solver.mode: expected 'per-component' or 'scalarized'");
    if (s.contains("weights")) c.weights = parse_vec(s.at("weights"), "solver.weights");
    const std::string lookup = s.value("policy_lookup", "nearest");
    if (lookup == "nearest")
      c.policy_lookup = PolicyLookup::NearestNode;
    else if (lookup == "multilinear-snap")
      c.policy_lookup = PolicyLookup::MultilinearSnap;
    else
      throw ConfigError("solver.policy_lookup: expected 'nearest' or 'multilinear-snap'");
  } else {
    c.policy_lookup = PolicyLookup::NearestNode;
  }
  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    require_object(s, "simulation");
    reject_unknown(s, "simulation", {"x0", "n_paths", "constant_control"});
    if (s.contains("x0")) c.x0 = parse_vec(s.at("x0"), "simulation.x0");
    c.n_paths = s.value("n_paths", 10000);
    if (c.n_paths < 1) throw ConfigError("simulation.n_paths: must be >= 1");
    if (s.contains("constant_control"))
      c.constant_control = parse_vec(s.at("constant_control"), "simulation.constant_control");
  }
  if (j.contains("viability")) {
    const auto& v = j.at("viability");
    require_object(v, "viability");
    reject_unknown(v, "viability",
                   {"condition", "grid_eps", "empirical_eps_multiplier"});
    c.grid_eps = v.value("grid_eps", 1e-6);
    c.empirical_eps_multiplier = v.value("empirical_eps_multiplier", 5.0);
    if (v.contains("condition")) {
      const auto& cc = v.at("condition");
      require_object(cc, "viability.condition");
      reject_unknown(cc, "viability.condition",
                     {"n_samples", "t_lo", "t_hi", "x_lo", "x_hi", "y_lo", "y_hi", "z_lo",
                      "z_hi", "constant", "h", "tolerance"});
      c.has_condition_check = true;
      c.condition_sampler.n_samples = cc.value("n_samples", 10000L);
      c.condition_sampler.t_lo = cc.value("t_lo", 0.0);
      c.condition_sampler.t_hi = cc.value("t_hi", 1.0);
      c.condition_sampler.x_lo = parse_vec(cc.at("x_lo"), "viability.condition.x_lo");
      c.condition_sampler.x_hi = parse_vec(cc.at("x_hi"), "viability.condition.x_hi");
      c.condition_sampler.y_lo = parse_vec(cc.at("y_lo"), "viability.condition.y_lo");
      c.condition_sampler.y_hi = parse_vec(cc.at("y_hi"), "viability.condition.y_hi");
      c.condition_sampler.z_lo = cc.value("z_lo", -1.0);
      c.condition_sampler.z_hi = cc.value("z_hi", 1.0);
      c.condition_constant = cc.value("constant", 1.0);
      c.condition_h = cc.value("h", 0.0);
      c.condition_tolerance = cc.value("tolerance", 1e-9);
    }
  }
  if (j.contains("crosscheck")) {
    const auto& cc = j.at("crosscheck");
    require_object(cc, "crosscheck");
    reject_unknown(cc, "crosscheck",
                   {"x0_list", "extra_tolerance", "dp_r_index", "dp_gap_tolerance"});
    if (cc.contains("x0_list"))
      for (const auto& p : cc.at("x0_list"))
        c.crosscheck_x0.push_back(parse_vec(p, "crosscheck.x0_list"));
    c.crosscheck_extra_tolerance = cc.value("extra_tolerance", 2e-3);
    c.dp_r_index = cc.value("dp_r_index", 0);
    c.dp_gap_tolerance = cc.value("dp_gap_tolerance", 0.0);
  }
  c.seed = j.value("seed", 1ULL);
  c.output_dir = j.value("output_dir", "out");

  // Cross-reference validation. Materializing the presets also applies their
  // own strict parameter checks.
  const ControlSet controls = c.make_control_set();
  const DiffusionModel model = make_model(c.model_name, c.model_params, controls);
  const CostModel cost = make_cost(c.cost_name, c.cost_params);
  const Driver driver = make_driver(c.driver_name, c.driver_params);
  const ConvexSet set = make_set(c.set_spec);

  if (set.dim() != driver.dim_y)
    throw ConfigError("config: set.dim (" + std::to_string(set.dim()) +
                      ") must equal driver.dim_y (" + std::to_string(driver.dim_y) + ")");
  if (cost.dim_n != driver.dim_y)
    throw ConfigError("config: cost dimension (" + std::to_string(cost.dim_n) +
                      ") must equal driver.dim_y (" + std::to_string(driver.dim_y) + ")");
  if (c.space_grid && c.space_grid->dim() != model.dim_x)
    throw ConfigError("config: space_grid dimension (" + std::to_string(c.space_grid->dim()) +
                      ") must equal model.dim_x (" + std::to_string(model.dim_x) + ")");
  if (c.x0.size() > 0 && static_cast<int>(c.x0.size()) != model.dim_x)
    throw ConfigError("config: simulation.x0 dimension (" + std::to_string(c.x0.size()) +
                      ") must equal model.dim_x (" + std::to_string(model.dim_x) + ")");
  if (c.x0.size() == 0) c.x0 = Eigen::VectorXd::Zero(model.dim_x);
  if (c.constant_control.size() > 0 &&
      static_cast<int>(c.constant_control.size()) != controls.dim_u)
    throw ConfigError("config: simulation.constant_control dimension must match control mesh");
  if (c.mode == MinimizationMode::Scalarized && c.weights.size() > 0 &&
      static_cast<int>(c.weights.size()) != driver.dim_y)
    throw ConfigError("config: solver.weights length must equal driver.dim_y");
  if (c.has_condition_check) {
    if (static_cast<int>(c.condition_sampler.x_lo.size()) != model.dim_x)
      throw ConfigError("config: viability.condition x box must match model.dim_x");
    if (static_cast<int>(c.condition_sampler.y_lo.size()) != driver.dim_y)
      throw ConfigError("config: viability.condition y box must match driver.dim_y");
  }
  for (const auto& p : c.crosscheck_x0)
    if (static_cast<int>(p.size()) != model.dim_x)
      throw ConfigError("config: crosscheck.x0_list entries must match model.dim_x");
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["model"]["name"] = model_name;
  j["model"]["params"] = model_params;
  if (ellipticity_floor) j["model"]["ellipticity_floor"] = *ellipticity_floor;
  j["cost"]["name"] = cost_name;
  j["cost"]["params"] = cost_params;
  j["driver"]["name"] = driver_name;
  j["driver"]["params"] = driver_params;
  j["set"] = set_spec;
  j["time_grid"] = {{"t0", time_grid.t0}, {"T", time_grid.T}, {"n_steps", time_grid.n_steps}};
  if (space_grid) {
    j["space_grid"] = {{"lo", to_std(space_grid->lo)},
                       {"hi", to_std(space_grid->hi)},
                       {"nodes_per_dim", space_grid->nodes_per_dim}};
  }
  j["control_mesh"] = control_mesh_spec;
  nlohmann::json basis_j;
  if (basis.kind == RegressionBasis::Kind::Polynomial) {
    basis_j = {{"kind", "polynomial"}, {"degree", basis.degree}, {"ridge", basis.ridge}};
  } else {
    basis_j = {{"kind", "local-partition"},
               {"cells_per_dim", basis.cells_per_dim},
               {"ridge", basis.ridge}};
  }
  j["solver"] = {{"basis", basis_j},
                 {"picard_iters", picard_iters},
                 {"scheme", scheme == Scheme::Explicit ? "explicit" : "semi-implicit"},
                 {"pde_n_steps", pde_n_steps},
                 {"mode", mode == MinimizationMode::PerComponent ? "per-component"
                                                                 : "scalarized"},
                 {"policy_lookup", policy_lookup == PolicyLookup::NearestNode
                                       ? "nearest"
                                       : "multilinear-snap"}};
  if (weights.size() > 0) j["solver"]["weights"] = to_std(weights);
  j["simulation"] = {{"x0", to_std(x0)}, {"n_paths", n_paths}};
  if (constant_control.size() > 0)
    j["simulation"]["constant_control"] = to_std(constant_control);
  nlohmann::json v;
  v["grid_eps"] = grid_eps;
  v["empirical_eps_multiplier"] = empirical_eps_multiplier;
  if (has_condition_check) {
    v["condition"] = {{"n_samples", condition_sampler.n_samples},
                      {"t_lo", condition_sampler.t_lo},
                      {"t_hi", condition_sampler.t_hi},
                      {"x_lo", to_std(condition_sampler.x_lo)},
                      {"x_hi", to_std(condition_sampler.x_hi)},
                      {"y_lo", to_std(condition_sampler.y_lo)},
                      {"y_hi", to_std(condition_sampler.y_hi)},
                      {"z_lo", condition_sampler.z_lo},
                      {"z_hi", condition_sampler.z_hi},
                      {"constant", condition_constant},
                      {"h", condition_h},
                      {"tolerance", condition_tolerance}};
  }
  j["viability"] = v;
  if (!crosscheck_x0.empty()) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : crosscheck_x0) pts.push_back(to_std(p));
    j["crosscheck"] = {{"x0_list", pts},
                       {"extra_tolerance", crosscheck_extra_tolerance},
                       {"dp_r_index", dp_r_index},
                       {"dp_gap_tolerance", dp_gap_tolerance}};
  }
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  return j;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' must have the form key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;  // plain string
  }
  nlohmann::json* cursor = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "': empty path segment");
    if (dot == std::string::npos) {
      (*cursor)[key] = value;
      return;
    }
    cursor = &(*cursor)[key];
    start = dot + 1;
  }
}

nlohmann::json load_raw_config(const std::string& path,
                               const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: parse failure in '" + path + "': " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  return ExperimentConfig::parse(load_raw_config(path, overrides));
}

}  // namespace stodec
