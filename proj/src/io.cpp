#include "stodec/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stodec/errors.hpp"

namespace stodec {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io: cannot open '" + path + "' for writing");
  out << content;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("io: cannot create directory '" + dir + "': " + ec.message());
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io: cannot open '" + path + "'");
  return nlohmann::json::parse(in);
}

}  // namespace

void save_path_bundle(const std::string& dir, const PathBundle& bundle) {
  ensure_dir(dir);
  {
    std::ostringstream os;
    os << "path,step";
    for (int i = 0; i < bundle.dim_x; ++i) os << ",x" << i;
    os << "\n";
    for (int p = 0; p < bundle.n_paths; ++p)
      for (int k = 0; k <= bundle.grid.n_steps; ++k) {
        os << p << "," << k;
        for (int i = 0; i < bundle.dim_x; ++i) os << "," << format_double(bundle.state(p, k, i));
        os << "\n";
      }
    write_text_file(dir + "/x.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "path,step";
    for (int i = 0; i < bundle.dim_x; ++i) os << ",dw" << i;
    os << "\n";
    for (int p = 0; p < bundle.n_paths; ++p)
      for (int k = 0; k < bundle.grid.n_steps; ++k) {
        os << p << "," << k;
        for (int i = 0; i < bundle.dim_x; ++i)
          os << "," << format_double(bundle.increment(p, k, i));
        os << "\n";
      }
    write_text_file(dir + "/dw.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "path,step";
    for (int i = 0; i < bundle.dim_u; ++i) os << ",u" << i;
    os << "\n";
    for (int p = 0; p < bundle.n_paths; ++p)
      for (int k = 0; k < bundle.grid.n_steps; ++k) {
        os << p << "," << k;
        for (int i = 0; i < bundle.dim_u; ++i)
          os << "," << format_double(bundle.control(p, k, i));
        os << "\n";
      }
    write_text_file(dir + "/controls.csv", os.str());
  }
  nlohmann::json manifest = {{"t0", bundle.grid.t0},     {"T", bundle.grid.T},
                             {"n_steps", bundle.grid.n_steps}, {"n_paths", bundle.n_paths},
                             {"dim_x", bundle.dim_x},    {"dim_u", bundle.dim_u},
                             {"seed", bundle.seed}};
  write_json_file(dir + "/manifest.json", manifest);
}

PathBundle load_path_bundle(const std::string& dir) {
  const nlohmann::json manifest = read_json(dir + "/manifest.json");
  PathBundle bundle;
  bundle.grid = TimeGrid(manifest.at("t0").get<double>(), manifest.at("T").get<double>(),
                         manifest.at("n_steps").get<int>());
  bundle.n_paths = manifest.at("n_paths").get<int>();
  bundle.dim_x = manifest.at("dim_x").get<int>();
  bundle.dim_u = manifest.at("dim_u").get<int>();
  bundle.seed = manifest.at("seed").get<std::uint64_t>();
  bundle.x.resize(static_cast<std::size_t>(bundle.n_paths) * (bundle.grid.n_steps + 1) *
                  bundle.dim_x);
  bundle.dw.resize(static_cast<std::size_t>(bundle.n_paths) * bundle.grid.n_steps *
                   bundle.dim_x);
  bundle.controls.resize(static_cast<std::size_t>(bundle.n_paths) * bundle.grid.n_steps *
                         bundle.dim_u);

  auto read_csv = [](const std::string& path, int value_cols, auto&& sink) {
    std::ifstream in(path);
    if (!in) throw Error("io: cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string field;
      std::getline(ls, field, ',');
      const int p = std::stoi(field);
      std::getline(ls, field, ',');
      const int k = std::stoi(field);
      for (int i = 0; i < value_cols; ++i) {
        std::getline(ls, field, ',');
        sink(p, k, i, std::stod(field));
      }
    }
  };
  read_csv(dir + "/x.csv", bundle.dim_x,
           [&](int p, int k, int i, double v) { bundle.state(p, k, i) = v; });
  read_csv(dir + "/dw.csv", bundle.dim_x,
           [&](int p, int k, int i, double v) { bundle.increment(p, k, i) = v; });
  read_csv(dir + "/controls.csv", bundle.dim_u,
           [&](int p, int k, int i, double v) { bundle.control(p, k, i) = v; });
  return bundle;
}

void save_bsde_solution(const std::string& dir, const BsdeSolution& solution) {
  ensure_dir(dir);
  {
    std::ostringstream os;
    os << "path,step";
    for (int j = 0; j < solution.dim_y; ++j) os << ",y" << j;
    os << "\n";
    for (int p = 0; p < solution.n_paths; ++p)
      for (int k = 0; k <= solution.n_steps; ++k) {
        os << p << "," << k;
        for (int j = 0; j < solution.dim_y; ++j)
          os << "," << format_double(solution.y_at(p, k, j));
        os << "\n";
      }
    write_text_file(dir + "/y.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "path,step";
    for (int j = 0; j < solution.dim_y; ++j)
      for (int m = 0; m < solution.dim_w; ++m) os << ",z" << j << "_" << m;
    os << "\n";
    for (int p = 0; p < solution.n_paths; ++p)
      for (int k = 0; k < solution.n_steps; ++k) {
        os << p << "," << k;
        for (int j = 0; j < solution.dim_y; ++j)
          for (int m = 0; m < solution.dim_w; ++m)
            os << "," << format_double(solution.z_at(p, k, j, m));
        os << "\n";
      }
    write_text_file(dir + "/z.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "step,component,condition_number,rms_residual\n";
    for (const auto& s : solution.regression_report)
      os << s.step << "," << s.component << "," << format_double(s.condition_number) << ","
         << format_double(s.rms_residual) << "\n";
    write_text_file(dir + "/regression_report.csv", os.str());
  }
  nlohmann::json manifest = {{"t0", solution.grid.t0},
                             {"T", solution.grid.T},
                             {"n_steps", solution.n_steps},
                             {"n_paths", solution.n_paths},
                             {"dim_y", solution.dim_y},
                             {"dim_w", solution.dim_w},
                             {"source_seed", solution.source_seed},
                             {"residual_scale", solution.residual_scale()}};
  write_json_file(dir + "/manifest.json", manifest);
}

void save_value_grid(const std::string& dir, const ValueGrid& values) {
  ensure_dir(dir);
  const long nodes = values.space.n_nodes();
  for (int j = 0; j < values.dim_n; ++j) {
    std::ostringstream os;
    os << "step,node,t";
    for (int a = 0; a < values.space.dim(); ++a) os << ",x" << a;
    os << ",phi\n";
    for (int k = 0; k <= values.tgrid.n_steps; ++k)
      for (long node = 0; node < nodes; ++node) {
        os << k << "," << node << "," << format_double(values.tgrid.time(k));
        const Eigen::VectorXd x = values.space.coords(node);
        for (int a = 0; a < values.space.dim(); ++a) os << "," << format_double(x[a]);
        os << "," << format_double(values.value(k, node, j)) << "\n";
      }
    write_text_file(dir + "/phi_" + std::to_string(j) + ".csv", os.str());
  }
  {
    std::ostringstream os;
    os << "step,node,slot";
    for (int i = 0; i < values.dim_u; ++i) os << ",u" << i;
    os << "\n";
    for (int k = 0; k <= values.tgrid.n_steps; ++k)
      for (long node = 0; node < nodes; ++node)
        for (int slot = 0; slot < values.n_argmin; ++slot) {
          os << k << "," << node << "," << slot;
          for (int i = 0; i < values.dim_u; ++i)
            os << "," << format_double(values.argmin(k, node, slot, i));
          os << "\n";
        }
    write_text_file(dir + "/argmin.csv", os.str());
  }
  nlohmann::json mesh = nlohmann::json::array();
  for (const auto& u : values.control_mesh)
    mesh.push_back(std::vector<double>(u.data(), u.data() + u.size()));
  nlohmann::json manifest = {
      {"t0", values.tgrid.t0},
      {"T", values.tgrid.T},
      {"n_steps", values.tgrid.n_steps},
      {"dim_n", values.dim_n},
      {"dim_u", values.dim_u},
      {"scheme", values.scheme == Scheme::Explicit ? "explicit" : "semi-implicit"},
      {"mode", values.mode == MinimizationMode::PerComponent ? "per-component" : "scalarized"},
      {"space",
       {{"lo", std::vector<double>(values.space.lo.data(),
                                   values.space.lo.data() + values.space.lo.size())},
        {"hi", std::vector<double>(values.space.hi.data(),
                                   values.space.hi.data() + values.space.hi.size())},
        {"nodes_per_dim", values.space.nodes_per_dim}}},
      {"control_mesh", mesh}};
  write_json_file(dir + "/manifest.json", manifest);
}

void save_policy(const std::string& dir, const Policy& policy) {
  ensure_dir(dir);
  const long nodes = policy.space.n_nodes();
  std::ostringstream os;
  os << "step,node,t";
  for (int a = 0; a < policy.space.dim(); ++a) os << ",x" << a;
  for (int i = 0; i < policy.dim_u; ++i) os << ",u" << i;
  os << "\n";
  for (int k = 0; k <= policy.tgrid.n_steps; ++k)
    for (long node = 0; node < nodes; ++node) {
      os << k << "," << node << "," << format_double(policy.tgrid.time(k));
      const Eigen::VectorXd x = policy.space.coords(node);
      for (int a = 0; a < policy.space.dim(); ++a) os << "," << format_double(x[a]);
      for (int i = 0; i < policy.dim_u; ++i) os << "," << format_double(policy.at(k, node, i));
      os << "\n";
    }
  write_text_file(dir + "/u_star.csv", os.str());
  nlohmann::json manifest = {{"t0", policy.tgrid.t0},
                             {"T", policy.tgrid.T},
                             {"n_steps", policy.tgrid.n_steps},
                             {"dim_u", policy.dim_u},
                             {"lookup", policy.lookup == PolicyLookup::NearestNode
                                            ? "nearest"
                                            : "multilinear-snap"}};
  write_json_file(dir + "/manifest.json", manifest);
}

void save_cost_outcome(const std::string& path, const CostOutcome& outcome) {
  std::ostringstream os;
  for (Eigen::Index j = 0; j < outcome.j_vector.size(); ++j) os << "j" << j << ",";
  for (Eigen::Index j = 0; j < outcome.std_err.size(); ++j) os << "se" << j << ",";
  os << "seed,n_paths\n";
  for (Eigen::Index j = 0; j < outcome.j_vector.size(); ++j)
    os << format_double(outcome.j_vector[j]) << ",";
  for (Eigen::Index j = 0; j < outcome.std_err.size(); ++j)
    os << format_double(outcome.std_err[j]) << ",";
  os << outcome.seed << "," << outcome.n_paths << "\n";
  write_text_file(path, os.str());
}

}  // namespace stodec
