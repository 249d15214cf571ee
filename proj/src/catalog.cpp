#include "stodec/catalog.hpp"

#include <algorithm>
#include <cmath>

#include "stodec/errors.hpp"

namespace stodec {

namespace {

void check_params(const std::string& where, const nlohmann::json& params,
                  std::initializer_list<const char*> allowed) {
  if (params.is_null()) return;
  if (!params.is_object()) throw ConfigError(where + ": params must be an object");
  for (auto it = params.begin(); it != params.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError(where + ": unknown parameter '" + it.key() + "'");
  }
}

double get_num(const nlohmann::json& params, const char* key, double fallback) {
  return params.is_object() && params.contains(key) ? params.at(key).get<double>() : fallback;
}

int get_int(const nlohmann::json& params, const char* key, int fallback) {
  return params.is_object() && params.contains(key) ? params.at(key).get<int>() : fallback;
}

Eigen::VectorXd get_vec(const nlohmann::json& params, const char* key,
                        const Eigen::VectorXd& fallback) {
  if (!params.is_object() || !params.contains(key)) return fallback;
  const auto& arr = params.at(key);
  if (arr.is_number()) return Eigen::VectorXd::Constant(1, arr.get<double>());
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

std::vector<CatalogEntry> catalog_list() {
  std::vector<CatalogEntry> entries = {
      {"cost", "lq", "qx=1, qu=1, qt=1 (scalar: qx|x|^2 + qu|u|^2, terminal qt|x|^2)"},
      {"cost", "running-constant", "rate=[1] (constant rate, zero terminal)"},
      {"cost", "terminal-constant", "value=[1] (zero rate, constant terminal)"},
      {"cost", "terminal-identity", "n=1 (zero rate, terminal = first coordinate)"},
      {"cost", "terminal-square", "n=1 (zero rate, terminal |x|^2 per component)"},
      {"cost", "zero", "n=1"},
      {"driver", "constant", "n=1, value=[-1]"},
      {"driver", "linear-decay", "n=1, r=0.5 (g_j = -r y_j)"},
      {"driver", "soft-positive", "n=1, r=0.5 (g_j = r max(-y_j, 0))"},
      {"driver", "zero", "n=1"},
      {"model", "brownian", "dim=1, sigma=1 (zero drift, constant diffusion)"},
      {"model", "controlled-integrator", "dim=1, sigma=0.1 (drift = u)"},
      {"model", "lqr", "dim=1, sigma=0.1 (drift = u)"},
      {"model", "ou", "dim=1, theta=1, mu=0, sigma=1 (drift = -theta (x - mu))"},
      {"set", "ball", "center, radius"},
      {"set", "box", "lo, hi"},
      {"set", "fullspace", "dim"},
      {"set", "orthant", "dim"},
  };
  std::sort(entries.begin(), entries.end(), [](const CatalogEntry& a, const CatalogEntry& b) {
    return a.kind != b.kind ? a.kind < b.kind : a.name < b.name;
  });
  return entries;
}

DiffusionModel make_model(const std::string& name, const nlohmann::json& params,
                          const ControlSet& controls) {
  DiffusionModel m;
  m.control_set = controls;
  if (name == "brownian") {
    check_params("model brownian", params, {"dim", "sigma"});
    const int dim = get_int(params, "dim", 1);
    const double sigma = get_num(params, "sigma", 1.0);
    m.dim_x = dim;
    m.drift = [dim](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(dim).eval();
    };
    m.diffusion = [dim, sigma](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return (sigma * Eigen::MatrixXd::Identity(dim, dim)).eval();
    };
    m.lipschitz_hint = 0.0;
    return m;
  }
  if (name == "ou") {
    check_params("model ou", params, {"dim", "theta", "mu", "sigma"});
    const int dim = get_int(params, "dim", 1);
    const double theta = get_num(params, "theta", 1.0);
    const double mu = get_num(params, "mu", 0.0);
    const double sigma = get_num(params, "sigma", 1.0);
    m.dim_x = dim;
    m.drift = [theta, mu](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
      return (-theta * (x.array() - mu)).matrix().eval();
    };
    m.diffusion = [dim, sigma](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return (sigma * Eigen::MatrixXd::Identity(dim, dim)).eval();
    };
    m.lipschitz_hint = theta;
    return m;
  }
  if (name == "controlled-integrator" || name == "lqr") {
    check_params("model " + name, params, {"dim", "sigma"});
    const int dim = get_int(params, "dim", 1);
    const double sigma = get_num(params, "sigma", 0.1);
    if (controls.dim_u != dim)
      throw ConfigError("model " + name + ": control dimension must equal state dimension");
    m.dim_x = dim;
    m.drift = [](double, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
      return u.eval();
    };
    m.diffusion = [dim, sigma](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return (sigma * Eigen::MatrixXd::Identity(dim, dim)).eval();
    };
    m.lipschitz_hint = 1.0;
    return m;
  }
  throw ConfigError("model: unknown preset '" + name + "'");
}

CostModel make_cost(const std::string& name, const nlohmann::json& params) {
  CostModel c;
  if (name == "zero") {
    check_params("cost zero", params, {"n"});
    const int n = get_int(params, "n", 1);
    c.dim_n = n;
    c.running = [n](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(n).eval();
    };
    c.terminal = [n](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(n).eval(); };
    return c;
  }
  if (name == "terminal-square") {
    check_params("cost terminal-square", params, {"n"});
    const int n = get_int(params, "n", 1);
    c.dim_n = n;
    c.running = [n](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(n).eval();
    };
    c.terminal = [n](const Eigen::VectorXd& x) {
      return Eigen::VectorXd::Constant(n, x.squaredNorm()).eval();
    };
    return c;
  }
  if (name == "terminal-identity") {
    check_params("cost terminal-identity", params, {"n"});
    const int n = get_int(params, "n", 1);
    c.dim_n = n;
    c.running = [n](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(n).eval();
    };
    c.terminal = [n](const Eigen::VectorXd& x) {
      return Eigen::VectorXd::Constant(n, x[0]).eval();
    };
    return c;
  }
  if (name == "terminal-constant") {
    check_params("cost terminal-constant", params, {"value"});
    const Eigen::VectorXd value = get_vec(params, "value", Eigen::VectorXd::Ones(1));
    c.dim_n = static_cast<int>(value.size());
    c.running = [n = c.dim_n](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(n).eval();
    };
    c.terminal = [value](const Eigen::VectorXd&) { return value; };
    return c;
  }
  if (name == "running-constant") {
    check_params("cost running-constant", params, {"rate"});
    const Eigen::VectorXd rate = get_vec(params, "rate", Eigen::VectorXd::Ones(1));
    c.dim_n = static_cast<int>(rate.size());
    c.running = [rate](double, const Eigen::VectorXd&, const Eigen::VectorXd&) { return rate; };
    c.terminal = [n = c.dim_n](const Eigen::VectorXd&) {
      return Eigen::VectorXd::Zero(n).eval();
    };
    return c;
  }
  if (name == "lq") {
    check_params("cost lq", params, {"qx", "qu", "qt"});
    const double qx = get_num(params, "qx", 1.0);
    const double qu = get_num(params, "qu", 1.0);
    const double qt = get_num(params, "qt", 1.0);
    c.dim_n = 1;
    c.running = [qx, qu](double, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
      return Eigen::VectorXd::Constant(1, qx * x.squaredNorm() + qu * u.squaredNorm()).eval();
    };
    c.terminal = [qt](const Eigen::VectorXd& x) {
      return Eigen::VectorXd::Constant(1, qt * x.squaredNorm()).eval();
    };
    return c;
  }
  throw ConfigError("cost: unknown preset '" + name + "'");
}

Driver make_driver(const std::string& name, const nlohmann::json& params) {
  Driver d;
  if (name == "zero") {
    check_params("driver zero", params, {"n"});
    d.dim_y = get_int(params, "n", 1);
    d.g = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&, int) { return 0.0; };
    d.lipschitz_const = 0.0;
    return d;
  }
  if (name == "linear-decay") {
    check_params("driver linear-decay", params, {"n", "r"});
    d.dim_y = get_int(params, "n", 1);
    const double r = get_num(params, "r", 0.5);
    d.g = [r](double, const Eigen::VectorXd& y, const Eigen::VectorXd&, int j) {
      return -r * y[j];
    };
    d.lipschitz_const = std::abs(r);
    return d;
  }
  if (name == "soft-positive") {
    check_params("driver soft-positive", params, {"n", "r"});
    d.dim_y = get_int(params, "n", 1);
    const double r = get_num(params, "r", 0.5);
    d.g = [r](double, const Eigen::VectorXd& y, const Eigen::VectorXd&, int j) {
      return r * std::max(-y[j], 0.0);
    };
    d.lipschitz_const = std::abs(r);
    return d;
  }
  if (name == "constant") {
    check_params("driver constant", params, {"n", "value"});
    const int n = get_int(params, "n", 1);
    const Eigen::VectorXd value =
        get_vec(params, "value", Eigen::VectorXd::Constant(n, -1.0));
    if (static_cast<int>(value.size()) != n)
      throw ConfigError("driver constant: value length must equal n");
    d.dim_y = n;
    d.g = [value](double, const Eigen::VectorXd&, const Eigen::VectorXd&, int j) {
      return value[j];
    };
    d.lipschitz_const = 0.0;
    return d;
  }
  throw ConfigError("driver: unknown preset '" + name + "'");
}

ConvexSet make_set(const nlohmann::json& spec) { return ConvexSet::from_json(spec); }

}  // namespace stodec
