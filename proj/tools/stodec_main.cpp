#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stodec/catalog.hpp"
#include "stodec/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::int64_t seed = -1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "experiment config (JSON)")->required();
  cmd->add_option("--override", args.overrides,
                  "dotted-path override, e.g. solver.picard_iters=5 (repeatable)");
  cmd->add_option("--out", args.out, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--threads", args.threads, "worker thread cap (results identical for any N)")
      ->default_val(1);
}

int dispatch(stodec::Command command, const CommonArgs& args) {
  return stodec::run_command(
      command, args.config, args.overrides,
      args.out.empty() ? std::nullopt : std::optional<std::string>(args.out),
      args.seed < 0 ? std::nullopt
                    : std::optional<std::uint64_t>(static_cast<std::uint64_t>(args.seed)),
      args.threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stodec: stochastic decision pipeline (forward SDE, vector BSDE, convex "
               "viability checks, HJB grid solver, policy evaluation)"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"simulate", "simulate controlled forward paths"},
      {"solve-bsde", "solve the vector BSDE along simulated paths"},
      {"solve-pde", "solve the backward grid system"},
      {"check-viability", "run the configured viability checks"},
      {"extract-policy", "materialize the minimizer policy"},
      {"evaluate", "closed-loop cost under the extracted policy"},
      {"cross-validate", "compare grid and probabilistic values"},
      {"all", "full pipeline"},
  };

  std::vector<std::unique_ptr<CommonArgs>> arg_blocks;
  for (const auto& [name, desc] : stages) {
    auto args = std::make_unique<CommonArgs>();
    CLI::App* cmd = app.add_subcommand(name, desc);
    add_common(cmd, *args);
    CommonArgs* raw = args.get();
    const std::string stage_name = name;
    cmd->callback([raw, stage_name]() {
      const auto command = stodec::parse_command(stage_name);
      std::exit(dispatch(*command, *raw));
    });
    arg_blocks.push_back(std::move(args));
  }

  CLI::App* catalog_cmd = app.add_subcommand("catalog", "list built-in presets");
  catalog_cmd->callback([]() {
    for (const auto& entry : stodec::catalog_list())
      std::cout << entry.kind << "  " << entry.name << "  (" << entry.schema << ")\n";
    std::exit(0);
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}
