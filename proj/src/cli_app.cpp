#include "ecoplan/cli_app.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>

#include <omp.h>

#include "ecoplan/csv_io.hpp"
#include "ecoplan/scenario.hpp"
#include "ecoplan/sim_harness.hpp"

namespace ecoplan {

namespace fs = std::filesystem;

namespace {

// Loads the scenario with overrides and the optional seed override applied to
// the raw document, so the identity hash reflects the effective inputs.
Scenario load_effective_scenario(const RunConfig& cfg) {
  std::string text = read_file(cfg.scenario_path);
  std::vector<std::string> overrides = cfg.overrides;
  if (cfg.seed) overrides.push_back("rng_seed=" + std::to_string(*cfg.seed));
  text = apply_overrides(text, overrides);
  return scenario_from_json_text(text);
}

void write_run_outputs(const fs::path& dir, const Scenario& sc,
                       const RunResult& r) {
  fs::create_directories(dir);
  write_file((dir / "trace.csv").string(), trace_csv(r.trace));
  write_file((dir / "report.json").string(),
             report_json(r, sc.name, sc.rng_seed));
  write_file((dir / "refline.csv").string(),
             refline_csv(r.last_refline, r.last_refline_offset_s));
  if (r.last_path)
    write_file((dir / "path.csv").string(),
               path_csv(*r.last_path, r.last_path_offset_s));
  else
    write_file((dir / "path.csv").string(), "# schema_version=1\ns,l,dl,ddl\n");
  if (r.last_speed)
    write_file((dir / "speed.csv").string(),
               speed_csv(*r.last_speed, r.last_speed_offset_s));
  else
    write_file((dir / "speed.csv").string(),
               "# schema_version=1\nt,s,v,a,jerk,phase\n");
}

}  // namespace

int cmd_run(const RunConfig& cfg) {
  Scenario sc;
  try {
    sc = load_effective_scenario(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scenario error: %s\n", e.what());
    return 2;
  }
  PlannerKind kind;
  if (cfg.planner == "ehmpp")
    kind = PlannerKind::ehmpp;
  else if (cfg.planner == "baseline")
    kind = PlannerKind::baseline;
  else {
    std::fprintf(stderr, "scenario error: unknown planner '%s'\n",
                 cfg.planner.c_str());
    return 2;
  }

  RunResult result;
  try {
    result = run_closed_loop(sc, kind);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "planner error: %s\n", e.what());
    return 3;
  }
  try {
    write_run_outputs(cfg.out_dir, sc, result);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "output error: %s\n", e.what());
    return 3;
  }
  if (!cfg.quiet)
    std::printf("run %s planner=%s distance=%.1fm regen=%.1fJ traction=%.1fJ\n",
                sc.name.c_str(), planner_name(kind), result.report.distance_m,
                result.report.regen_energy_j, result.report.traction_energy_j);
  if (result.trace.emergency_stop) {
    std::fprintf(stderr, "planner failure: emergency stop engaged; outputs flagged\n");
    return 3;
  }
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  Scenario sc;
  try {
    sc = load_effective_scenario(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scenario error: %s\n", e.what());
    return 2;
  }

  ComparisonResult cmp;
  try {
    cmp = run_comparison(sc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "planner error: %s\n", e.what());
    return 3;
  }
  try {
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_run_outputs(dir / "ehmpp", sc, cmp.ehmpp);
    write_run_outputs(dir / "baseline", sc, cmp.baseline);
    write_file((dir / "comparison.json").string(),
               comparison_json(cmp, sc.name, sc.rng_seed));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "output error: %s\n", e.what());
    return 3;
  }
  if (!cfg.quiet) {
    std::printf("compare %s\n", sc.name.c_str());
    std::printf("  regen energy: ehmpp=%.1fJ baseline=%.1fJ delta=%.1fJ\n",
                cmp.ehmpp.report.regen_energy_j,
                cmp.baseline.report.regen_energy_j, cmp.summary.regen_delta_j);
    std::printf("  decel (0,0.5) bin occupancy delta: %.2f points\n",
                cmp.summary.decel_bin0_delta_points);
    std::printf("  mean |P - P_opt| at cruise: ehmpp=%.1fW baseline=%.1fW\n",
                cmp.ehmpp.cruise_power_gap_w, cmp.baseline.cruise_power_gap_w);
  }
  if (cmp.ehmpp.trace.emergency_stop || cmp.baseline.trace.emergency_stop) {
    std::fprintf(stderr, "planner failure in one of the runs; outputs flagged\n");
    return 3;
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  if (cfg.sweep_param.empty() || cfg.sweep_values.empty()) {
    std::fprintf(stderr, "sweep error: --param and --values are required\n");
    return 2;
  }
  // Validate the parameter and every value against the schema up front.
  std::string base_text;
  try {
    base_text = read_file(cfg.scenario_path);
    for (const auto& v : cfg.sweep_values) {
      std::vector<std::string> ov = cfg.overrides;
      ov.push_back(cfg.sweep_param + "=" + v);
      scenario_from_json_text(apply_overrides(base_text, ov));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sweep error: %s\n", e.what());
    return 2;
  }

  const int n = static_cast<int>(cfg.sweep_values.size());
  std::vector<ComparisonResult> results(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));

#pragma omp parallel for num_threads(std::max(1, cfg.jobs)) schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      RunConfig sub = cfg;
      sub.overrides.push_back(cfg.sweep_param + "=" +
                              cfg.sweep_values[static_cast<std::size_t>(i)]);
      Scenario sc = load_effective_scenario(sub);
      results[static_cast<std::size_t>(i)] = run_comparison(sc);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }

  fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  std::string csv = "# schema_version=1\n";
  csv += "param,value,regen_ehmpp_j,regen_baseline_j,decel_bin0_delta_points,"
         "cruise_gap_ehmpp_w,cruise_gap_baseline_w,min_conflict_gap_m\n";
  bool any_error = false;
  for (int i = 0; i < n; ++i) {
    const auto& val = cfg.sweep_values[static_cast<std::size_t>(i)];
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      any_error = true;
      std::fprintf(stderr, "sweep value %s failed: %s\n", val.c_str(),
                   errors[static_cast<std::size_t>(i)].c_str());
      continue;
    }
    const auto& r = results[static_cast<std::size_t>(i)];
    fs::path sub = dir / (cfg.sweep_param + "_" + val);
    try {
      Scenario sc_i = [&] {
        RunConfig c2 = cfg;
        c2.overrides.push_back(cfg.sweep_param + "=" + val);
        return load_effective_scenario(c2);
      }();
      fs::create_directories(sub);
      write_run_outputs(sub / "ehmpp", sc_i, r.ehmpp);
      write_run_outputs(sub / "baseline", sc_i, r.baseline);
      write_file((sub / "comparison.json").string(),
                 comparison_json(r, sc_i.name, sc_i.rng_seed));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "output error: %s\n", e.what());
      any_error = true;
      continue;
    }
    double min_gap = std::min(r.ehmpp.safety.min_conflict_gap_m,
                              r.baseline.safety.min_conflict_gap_m);
    csv += cfg.sweep_param + ',' + val + ',' +
           format_double(r.ehmpp.report.regen_energy_j) + ',' +
           format_double(r.baseline.report.regen_energy_j) + ',' +
           format_double(r.summary.decel_bin0_delta_points) + ',' +
           format_double(r.ehmpp.cruise_power_gap_w) + ',' +
           format_double(r.baseline.cruise_power_gap_w) + ',' +
           format_double(min_gap) + '\n';
  }
  write_file((dir / "sweep.csv").string(), csv);
  if (!cfg.quiet) std::printf("sweep %s over %d values done\n", cfg.sweep_param.c_str(), n);
  return any_error ? 3 : 0;
}

}  // namespace ecoplan
