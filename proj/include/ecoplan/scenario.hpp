// Scenario files: JSON schema, dotted-key overrides, and the identity hash
// that ties A/B reports to the same experiment.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ecoplan/frenet_frame.hpp"
#include "ecoplan/path_planner.hpp"
#include "ecoplan/speed_planner.hpp"
#include "ecoplan/vehicle_dynamics.hpp"

namespace ecoplan {

inline constexpr int kScenarioSchemaVersion = 1;

struct ObstacleSpec {
  enum class Kind { StaticBox, MovingParticle };
  Kind kind = Kind::StaticBox;
  // StaticBox: axis-aligned footprint around center.
  Eigen::Vector2d center{0, 0};
  double half_length = 1.0;  // along x
  double half_width = 1.0;   // along y
  // MovingParticle: straight-line constant velocity.
  Eigen::Vector2d start_xy{0, 0};
  Eigen::Vector2d velocity_xy{0, 0};
  double radius = 1.0;

  std::vector<Eigen::Vector2d> polygon() const;          // StaticBox
  Eigen::Vector2d position_at(double t) const;           // MovingParticle
};

struct EventSpec {
  enum class Type { TargetSpeed, StopWall };
  double t = 0.0;
  Type type = Type::TargetSpeed;
  double value = 0.0;  // speed (m/s) or wall arc position (m)
};

// Planner knobs shared by both planner kinds (the A/B comparison varies cost
// targets only, never weights or grids).
struct ScenarioPlanner {
  PathCostWeights path;
  SpeedCostWeights speed;
  SmoothWeights smooth;
  double window_behind_m = 30.0;
  double window_ahead_m = 150.0;
  double path_lookahead_m = 120.0;
  double path_station_ds = 10.0;
  double path_offset_dl = 0.5;
  double path_qp_ds = 1.0;
  double speed_dt = 0.5;
  double speed_horizon_s = 8.0;
  double speed_ds = 1.0;
  double speed_corridor_width_m = 10.0;
  double st_obstacle_margin_m = 2.0;
  double stop_wall_margin_m = 2.0;
  bool freeze_v_ref_per_cycle = false;
};

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  std::string name = "unnamed";
  double duration_s = 30.0;
  double plant_dt_s = 0.02;
  double replan_dt_s = 0.5;
  std::uint64_t rng_seed = 0;
  VehicleParams vehicle;
  Environment env;
  double road_half_width_m = 3.5;
  double vehicle_half_width_m = 0.9;
  std::vector<Eigen::Vector2d> global_path;
  std::vector<ObstacleSpec> obstacles;
  std::vector<EventSpec> events;
  double start_s = 0.0;
  double start_v = 0.0;
  double start_l = 0.0;
  double speed_limit_ms = 16.7;
  ScenarioPlanner planner;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  // Digest of every field; identical scenarios hash identically.
  std::uint64_t identity_hash() const;
  std::string canonical_json() const;
};

// Throws std::invalid_argument with the field name on schema violations.
Scenario scenario_from_json_text(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json_text(const Scenario& sc);

// Applies "dotted.key=value" to the raw JSON document; unknown keys or type
// mismatches throw std::invalid_argument naming the key.
std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides);

}  // namespace ecoplan
