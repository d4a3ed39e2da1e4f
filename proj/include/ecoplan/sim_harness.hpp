// Closed-loop desk-scale simulator: a longitudinal kinematic plant, the
// per-cycle plan pipeline (window -> reference line -> path DP/QP -> speed
// DP/QP), and A/B orchestration of the energy-aware planner against the
// comfort baseline.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecoplan/energy_model.hpp"
#include "ecoplan/frenet_frame.hpp"
#include "ecoplan/path_planner.hpp"
#include "ecoplan/scenario.hpp"
#include "ecoplan/speed_planner.hpp"
#include "ecoplan/vehicle_dynamics.hpp"

namespace ecoplan {

enum class PlannerKind { ehmpp, baseline };

const char* planner_name(PlannerKind k);

// Semi-implicit Euler step: v+ = max(0, v + a dt), s+ = s + v+ dt.
LongitudinalState step_plant(const LongitudinalState& state,
                             double commanded_accel, double dt);

struct TraceTick {
  double t = 0.0;
  double x = 0.0, y = 0.0;
  double s = 0.0, l = 0.0;
  double v = 0.0, a = 0.0;
  PhaseLabel phase = PhaseLabel::Cruise;
  double traction_w = 0.0, regen_w = 0.0, brake_w = 0.0;
};

struct QpCert {
  std::string name;  // refline_x, refline_y, path, speed
  QPStatus status = QPStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double coarse_objective = 0.0;
  double refined_objective = 0.0;
  bool fell_back = false;
};

struct CycleDiag {
  double t = 0.0;
  PhaseLabel phase = PhaseLabel::Cruise;
  double path_dp_cost = 0.0;
  double speed_dp_cost = 0.0;
  double corridor_l_min = 0.0;
  double corridor_l_max = 0.0;
  bool path_blocked = false;      // DP blocked; lane-keep + virtual stop wall
  bool speed_infeasible = false;  // horizon infeasible; previous plan reused
  bool smooth_fallback = false;
  std::vector<QpCert> qps;
};

struct SimTrace {
  std::vector<TraceTick> ticks;
  std::vector<CycleDiag> cycles;
  bool emergency_stop = false;
  std::uint64_t scenario_hash = 0;
  double plant_dt = 0.02;
};

// Exact per-channel work bookkeeping of the plant (midpoint-speed form), for
// the conservation audit.
struct EnergyAudit {
  double traction_j = 0.0;
  double delta_kinetic_j = 0.0;
  double resistive_j = 0.0;  // air + rolling + slope work
  double regen_j = 0.0;
  double brake_j = 0.0;
  double relative_imbalance = 0.0;
};

struct SafetyAudit {
  int conflict_violations = 0;     // longitudinal gap below d2 with lateral overlap
  int contact_violations = 0;      // footprint contact while passing
  double min_conflict_gap_m = 1e9; // smallest longitudinal gap in conflict
  double min_lateral_gap_m = 1e9;  // smallest lateral gap while passing
  // Commanded regen drag decelerations observed (for the envelope audit).
  std::vector<double> regen_decel_commands;
};

struct RunResult {
  PlannerKind kind = PlannerKind::ehmpp;
  SimTrace trace;
  EnergyReport report;
  EnergyAudit audit;
  SafetyAudit safety;
  double cruise_power_gap_w = 0.0;  // mean |P - P_opt| over cruise ticks
  // Final plans and reference line, for the CSV exports.
  std::vector<RefLinePoint> last_refline;
  double last_refline_offset_s = 0.0;
  std::optional<PathProfile> last_path;
  double last_path_offset_s = 0.0;
  std::optional<SpeedProfile> last_speed;
  double last_speed_offset_s = 0.0;
};

RunResult run_closed_loop(const Scenario& scenario, PlannerKind kind);

struct ComparisonResult {
  RunResult baseline;
  RunResult ehmpp;
  ComparisonSummary summary;
  double ehmpp_regen_per_m = 0.0;     // per-distance normalization
  double baseline_regen_per_m = 0.0;
};

ComparisonResult run_comparison(const Scenario& scenario);

}  // namespace ecoplan
