// avagrad_lab: command-line driver.
//
//   avagrad_lab run      --config FILE [--alpha A] [--epsilon E] [--method M] ...
//   avagrad_lab synthfig [--out DIR] [--steps T] [--seeds N] [--workers N]
//   avagrad_lab sweep    --config FILE [--workers N]
//   avagrad_lab check    --config FILE

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "avagrad_lab/commands.hpp"

namespace {

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target,
                   const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void common_flags(CLI::App* app, avalab::CommandOptions& opt, bool needs_config) {
  auto* config = app->add_option("--config", opt.config_path, "Experiment config file");
  if (needs_config) config->required();
  optional_flag(app, "--workers", opt.workers, "Worker threads");
  optional_flag(app, "--seed", opt.seed, "Base seed (fallback: AVAGRAD_LAB_SEED)");
  optional_flag(app, "--out", opt.out, "Output directory");
  optional_flag(app, "--alpha", opt.alpha, "Global learning rate override");
  optional_flag(app, "--epsilon", opt.epsilon, "Epsilon override");
  optional_flag(app, "--method", opt.method, "Optimizer override");
  optional_flag(app, "--steps", opt.steps, "Number of steps T");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive gradient method experiments"};
  app.require_subcommand(1);

  avalab::CommandOptions opt;
  auto* run = app.add_subcommand("run", "Run one trial per seed and write trajectories");
  auto* synthfig = app.add_subcommand("synthfig", "Synthetic non-convergence figure data");
  auto* sweep = app.add_subcommand("sweep", "alpha x epsilon grid sweep");
  auto* check = app.add_subcommand("check", "Gradient, bias and bound checks");
  common_flags(run, opt, true);
  common_flags(synthfig, opt, false);
  optional_flag(synthfig, "--seeds", opt.seeds, "Number of seeds");
  common_flags(sweep, opt, true);
  common_flags(check, opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : avalab::kExitError;
  }

  if (run->parsed()) return avalab::cmd_run(opt, std::cout, std::cerr);
  if (synthfig->parsed()) return avalab::cmd_synthfig(opt, std::cout, std::cerr);
  if (sweep->parsed()) return avalab::cmd_sweep(opt, std::cout, std::cerr);
  return avalab::cmd_check(opt, std::cout, std::cerr);
}
