// Command implementations behind the ecoplan binary; kept in the library so
// tests can drive them directly. Exit codes: 0 success, 2 bad input,
// 3 planner failure (partial outputs written).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ecoplan {

struct RunConfig {
  std::string scenario_path;
  std::string planner = "ehmpp";
  std::string out_dir;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  int jobs = 1;
  bool quiet = false;
};

int cmd_run(const RunConfig& cfg);
int cmd_compare(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg);

}  // namespace ecoplan
