#include "stodec/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "stodec/catalog.hpp"
#include "stodec/config.hpp"
#include "stodec/decision.hpp"
#include "stodec/errors.hpp"
#include "stodec/io.hpp"
#include "stodec/parallel.hpp"
#include "stodec/rng.hpp"
#include "stodec/viability.hpp"

namespace stodec {

std::optional<Command> parse_command(const std::string& name) {
  if (name == "simulate") return Command::Simulate;
  if (name == "solve-bsde") return Command::SolveBsde;
  if (name == "solve-pde") return Command::SolvePde;
  if (name == "check-viability") return Command::CheckViability;
  if (name == "extract-policy") return Command::ExtractPolicy;
  if (name == "evaluate") return Command::Evaluate;
  if (name == "cross-validate") return Command::CrossValidate;
  if (name == "all") return Command::All;
  return std::nullopt;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Holds the config plus lazily materialized artifacts so `all` reuses work.
struct Pipeline {
  ExperimentConfig cfg;
  std::string out_dir;
  nlohmann::json manifest_stages = nlohmann::json::array();
  std::vector<std::string> summary_lines;

  std::optional<PathBundle> bundle;
  std::optional<GExpectation> g_expectation;
  std::optional<ValueGrid> values;
  std::optional<Policy> policy;

  DiffusionModel model;
  CostModel cost;
  Driver driver;
  ConvexSet set = ConvexSet::full_space(1);

  explicit Pipeline(ExperimentConfig c, const std::string& out)
      : cfg(std::move(c)), out_dir(out) {
    model = cfg.make_model_obj();
    cost = cfg.make_cost_obj();
    driver = cfg.make_driver_obj();
    set = cfg.make_set_obj();
    if (cfg.ellipticity_floor) {
      std::vector<SamplePoint> cloud;
      CounterRng rng(cfg.seed, 0xe111u);
      for (int i = 0; i < 64; ++i) {
        SamplePoint s;
        s.t = rng.next_uniform(cfg.time_grid.t0, cfg.time_grid.T);
        s.x = Eigen::VectorXd::NullaryExpr(model.dim_x,
                                           [&](Eigen::Index) { return rng.next_uniform(-5.0, 5.0); });
        s.u = model.control_set.points[rng.next_index(model.control_set.points.size())];
        cloud.push_back(std::move(s));
      }
      const EllipticityReport rep = check_ellipticity(model, cloud, *cfg.ellipticity_floor);
      if (!rep.pass)
        throw ConfigError("model.ellipticity_floor: sampled min eigenvalue " +
                          std::to_string(rep.min_eigenvalue) + " is below the floor " +
                          std::to_string(*cfg.ellipticity_floor));
    }
  }

  template <typename Fn>
  void stage(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> outputs = fn();
    const auto end = std::chrono::steady_clock::now();
    nlohmann::json s;
    s["name"] = name;
    s["wall_ms"] = std::chrono::duration<double, std::milli>(end - start).count();
    s["outputs"] = outputs;
    manifest_stages.push_back(s);
  }

  ControlSource simulation_control() const {
    if (policy) return policy->as_control_source();
    const int dim_u = model.control_set.dim_u;
    const Eigen::VectorXd u = cfg.constant_control.size() > 0
                                  ? cfg.constant_control
                                  : Eigen::VectorXd::Zero(dim_u);
    return ControlSource::constant(u);
  }

  const PathBundle& ensure_bundle() {
    if (!bundle)
      bundle = simulate_paths(model, simulation_control(), cfg.x0, cfg.time_grid, cfg.n_paths,
                              cfg.seed);
    return *bundle;
  }

  const GExpectation& ensure_bsde() {
    if (!g_expectation)
      g_expectation = conditional_g_expectation(ensure_bundle(), driver, cost, cfg.basis,
                                                cfg.picard_iters);
    return *g_expectation;
  }

  const ValueGrid& ensure_values() {
    if (!values) {
      if (!cfg.space_grid)
        throw ConfigError("config: 'space_grid' is required for PDE stages");
      HjbOptions opts;
      opts.scheme = cfg.scheme;
      opts.mode = cfg.mode;
      opts.weights = cfg.weights;
      values = solve_hjb_system(model, cost, driver, *cfg.space_grid, cfg.pde_time_grid(), opts);
    }
    return *values;
  }

  const Policy& ensure_policy() {
    if (!policy) {
      const ValueGrid& v = ensure_values();
      const ExtractMode mode = v.mode == MinimizationMode::Scalarized
                                   ? ExtractMode::scalarized(v.weights)
                                   : ExtractMode::per_component(0);
      policy = extract_policy(v, mode, cfg.policy_lookup);
    }
    return *policy;
  }

  void run_simulate() {
    stage("simulate", [&] {
      save_path_bundle(out_dir + "/paths", ensure_bundle());
      return std::vector<std::string>{"paths/x.csv", "paths/dw.csv", "paths/controls.csv",
                                      "paths/manifest.json"};
    });
  }

  void run_solve_bsde() {
    stage("solve-bsde", [&] {
      const GExpectation& g = ensure_bsde();
      save_bsde_solution(out_dir + "/bsde", g.solution);
      nlohmann::json report;
      report["y0"] = std::vector<double>(g.y0.data(), g.y0.data() + g.y0.size());
      report["y0_spread"] =
          std::vector<double>(g.y0_spread.data(), g.y0_spread.data() + g.y0_spread.size());
      report["std_err"] =
          std::vector<double>(g.std_err.data(), g.std_err.data() + g.std_err.size());
      report["residual_scale"] = g.solution.residual_scale();
      write_json_file(out_dir + "/bsde/value.json", report);
      return std::vector<std::string>{"bsde/y.csv", "bsde/z.csv",
                                      "bsde/regression_report.csv", "bsde/manifest.json",
                                      "bsde/value.json"};
    });
  }

  void run_solve_pde() {
    stage("solve-pde", [&] {
      save_value_grid(out_dir + "/pde", ensure_values());
      std::vector<std::string> outputs;
      for (int j = 0; j < ensure_values().dim_n; ++j)
        outputs.push_back("pde/phi_" + std::to_string(j) + ".csv");
      outputs.push_back("pde/argmin.csv");
      outputs.push_back("pde/manifest.json");
      return outputs;
    });
  }

  void run_extract_policy() {
    stage("extract-policy", [&] {
      save_policy(out_dir + "/policy", ensure_policy());
      return std::vector<std::string>{"policy/u_star.csv", "policy/manifest.json"};
    });
  }

  void run_evaluate() {
    stage("evaluate", [&] {
      const CostOutcome outcome = closed_loop_cost(ensure_policy(), model, cost, driver,
                                                   cfg.x0, cfg.n_paths, cfg.basis, cfg.seed,
                                                   cfg.picard_iters);
      save_cost_outcome(out_dir + "/cost_outcome.csv", outcome);
      nlohmann::json j;
      j["domain_exit_fraction"] = outcome.domain_exit_fraction;
      j["reliable"] = outcome.reliable;
      write_json_file(out_dir + "/evaluate.json", j);
      return std::vector<std::string>{"cost_outcome.csv", "evaluate.json"};
    });
  }

  void run_check_viability() {
    stage("check-viability", [&] {
      std::vector<std::string> outputs;
      nlohmann::json combined;
      if (cfg.has_condition_check) {
        const ViabilityReport r = check_viability_condition(
            set, driver, cost, model, cfg.condition_sampler, cfg.condition_constant,
            cfg.condition_h, cfg.seed, cfg.condition_tolerance);
        combined["condition"] = r.to_json();
        summary_lines.push_back(std::string(r.pass ? "PASS" : "FAIL") +
                                " viability-condition worst_margin=" +
                                format_double(r.worst_margin));
      }
      if (cfg.space_grid) {
        const ViabilityReport r = grid_viability(ensure_values(), set, cfg.grid_eps);
        combined["grid"] = r.to_json();
        summary_lines.push_back(std::string(r.pass ? "PASS" : "FAIL") +
                                " grid-viability worst_margin=" +
                                format_double(r.worst_margin));
      }
      {
        const GExpectation& g = ensure_bsde();
        const double eps = cfg.empirical_eps_multiplier * g.solution.residual_scale();
        const ViabilityReport r = empirical_viability(g.solution, set, eps);
        combined["empirical"] = r.to_json();
        summary_lines.push_back(std::string(r.pass ? "PASS" : "FAIL") +
                                " empirical-viability worst_margin=" +
                                format_double(r.worst_margin) + " eps=" + format_double(eps));
      }
      write_json_file(out_dir + "/viability.json", combined);
      outputs.push_back("viability.json");
      return outputs;
    });
  }

  // Cross-validation: value grid vs probabilistic solve, plus the
  // dynamic-programming gap. Returns false when a tolerance is exceeded.
  bool run_cross_validate() {
    bool ok = true;
    stage("cross-validate", [&] {
      const ValueGrid& v = ensure_values();
      std::vector<Eigen::VectorXd> x0s = cfg.crosscheck_x0;
      if (x0s.empty()) x0s.push_back(cfg.x0);
      const FkReport fk = feynman_kac_crosscheck(v, model, cost, driver, x0s, cfg.n_paths,
                                                 cfg.basis, cfg.seed, cfg.picard_iters);
      nlohmann::json report;
      nlohmann::json points = nlohmann::json::array();
      double max_allowed = 0.0;
      for (const auto& pt : fk.points) {
        nlohmann::json pj;
        pj["x0"] = std::vector<double>(pt.x0.data(), pt.x0.data() + pt.x0.size());
        pj["pde_value"] =
            std::vector<double>(pt.pde_value.data(), pt.pde_value.data() + pt.pde_value.size());
        pj["bsde_value"] = std::vector<double>(pt.bsde_value.data(),
                                               pt.bsde_value.data() + pt.bsde_value.size());
        pj["std_err"] =
            std::vector<double>(pt.std_err.data(), pt.std_err.data() + pt.std_err.size());
        pj["discrepancy"] = pt.discrepancy;
        const double allowed = 3.0 * pt.std_err.maxCoeff() + cfg.crosscheck_extra_tolerance;
        max_allowed = std::max(max_allowed, allowed);
        const bool point_ok = pt.discrepancy <= allowed;
        ok = ok && point_ok;
        pj["pass"] = point_ok;
        points.push_back(pj);
        summary_lines.push_back(std::string(point_ok ? "PASS" : "FAIL") +
                                " feynman-kac discrepancy=" + format_double(pt.discrepancy) +
                                " tolerance=" + format_double(allowed));
      }
      report["points"] = points;
      report["max_discrepancy"] = fk.max_discrepancy;
      report["max_domain_exit_fraction"] = fk.max_domain_exit_fraction;

      const int r = cfg.dp_r_index > 0 ? cfg.dp_r_index : v.tgrid.n_steps / 2;
      const DpReport dp = dp_consistency(v, ensure_policy(), model, cost, driver, r, cfg.x0,
                                         cfg.n_paths, cfg.basis, cfg.seed + 1,
                                         cfg.picard_iters);
      nlohmann::json dpj;
      dpj["r"] = dp.r;
      dpj["gap"] = std::vector<double>(dp.gap.data(), dp.gap.data() + dp.gap.size());
      dpj["std_err"] =
          std::vector<double>(dp.std_err.data(), dp.std_err.data() + dp.std_err.size());
      dpj["interpolation_error_bound"] = dp.interpolation_error_bound;
      bool dp_ok = true;
      for (Eigen::Index jj = 0; jj < dp.gap.size(); ++jj) {
        const double allowed = 3.0 * dp.std_err[jj] + dp.interpolation_error_bound +
                               cfg.dp_gap_tolerance + cfg.crosscheck_extra_tolerance;
        if (std::abs(dp.gap[jj]) > allowed) dp_ok = false;
      }
      dpj["pass"] = dp_ok;
      ok = ok && dp_ok;
      summary_lines.push_back(std::string(dp_ok ? "PASS" : "FAIL") +
                              " dp-consistency max_gap=" +
                              format_double(dp.gap.cwiseAbs().maxCoeff()));
      report["dp"] = dpj;
      report["pass"] = ok;
      write_json_file(out_dir + "/crosscheck.json", report);
      return std::vector<std::string>{"crosscheck.json"};
    });
    return ok;
  }

  void write_manifest(const nlohmann::json& raw_config) {
    nlohmann::json manifest;
    manifest["tool_version"] = "0.1.0";
    manifest["config_hash"] = hex64(fnv1a(raw_config.dump()));
    manifest["seeds"] = {{"master", cfg.seed}, {"dp_consistency", cfg.seed + 1}};
    manifest["stages"] = manifest_stages;
    for (const auto& s : manifest_stages)
      for (const auto& f : s.at("outputs"))
        if (!std::filesystem::exists(out_dir + "/" + f.get<std::string>()))
          throw Error("pipeline: manifest lists missing output '" + f.get<std::string>() + "'");
    write_json_file(out_dir + "/run_manifest.json", manifest);
    if (!summary_lines.empty()) {
      std::ostringstream os;
      for (const auto& line : summary_lines) os << line << "\n";
      write_text_file(out_dir + "/summary.txt", os.str());
    }
  }
};

}  // namespace

int run_command(Command command, const std::string& config_path,
                const std::vector<std::string>& overrides,
                const std::optional<std::string>& out_dir_override,
                const std::optional<std::uint64_t>& seed_override, int threads) {
  set_worker_threads(threads);
  try {
    const nlohmann::json raw = load_raw_config(config_path, overrides);
    ExperimentConfig cfg = ExperimentConfig::parse(raw);
    if (seed_override) cfg.seed = *seed_override;
    const std::string out_dir = out_dir_override.value_or(cfg.output_dir);
    std::filesystem::create_directories(out_dir);
    Pipeline pipe(std::move(cfg), out_dir);

    bool cross_ok = true;
    switch (command) {
      case Command::Simulate:
        pipe.run_simulate();
        break;
      case Command::SolveBsde:
        pipe.run_solve_bsde();
        break;
      case Command::SolvePde:
        pipe.run_solve_pde();
        break;
      case Command::CheckViability:
        pipe.run_check_viability();
        break;
      case Command::ExtractPolicy:
        pipe.run_extract_policy();
        break;
      case Command::Evaluate:
        pipe.run_evaluate();
        break;
      case Command::CrossValidate:
        cross_ok = pipe.run_cross_validate();
        break;
      case Command::All:
        pipe.run_solve_pde();
        pipe.run_extract_policy();
        pipe.run_simulate();
        pipe.run_solve_bsde();
        pipe.run_evaluate();
        pipe.run_check_viability();
        cross_ok = pipe.run_cross_validate();
        break;
    }
    pipe.write_manifest(raw);
    for (const auto& line : pipe.summary_lines) std::cout << line << "\n";
    return cross_ok ? kExitOk : kExitCrossCheckFailed;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumericalError;
  }
}

}  // namespace stodec
