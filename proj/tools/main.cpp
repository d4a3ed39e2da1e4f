#include <CLI11.hpp>

#include "ecoplan/cli_app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ecoplan: energy-aware longitudinal motion planning toolkit"};
  app.require_subcommand(1);

  ecoplan::RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", cfg.scenario_path, "scenario JSON file")
        ->required();
    sub->add_option("--out", cfg.out_dir, "output directory")->required();
    sub->add_option("--set", cfg.overrides,
                    "override scenario fields, dotted.key=value (repeatable)");
    sub->add_option("--seed", cfg.seed, "override rng_seed");
    sub->add_flag("--quiet", cfg.quiet, "suppress the summary line");
  };

  CLI::App* run = app.add_subcommand("run", "simulate one planner");
  add_common(run);
  run->add_option("--planner", cfg.planner, "ehmpp|baseline")
      ->check(CLI::IsMember({"ehmpp", "baseline"}));

  CLI::App* compare = app.add_subcommand("compare", "A/B both planners");
  add_common(compare);

  CLI::App* sweep = app.add_subcommand("sweep", "compare across parameter values");
  add_common(sweep);
  sweep->add_option("--param", cfg.sweep_param, "dotted scenario key to sweep")
      ->required();
  sweep->add_option("--values", cfg.sweep_values, "comma-separated values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--jobs", cfg.jobs, "concurrent comparisons");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) return ecoplan::cmd_run(cfg);
  if (compare->parsed()) return ecoplan::cmd_compare(cfg);
  if (sweep->parsed()) return ecoplan::cmd_sweep(cfg);
  return 2;
}
