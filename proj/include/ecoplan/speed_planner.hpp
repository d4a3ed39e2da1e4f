// ST-graph speed planning along a fixed path: phase classification,
// phase-specific DP over the station/time lattice, and QP refinement of the
// coarse profile.
//
// Like the path planner, the DP stage relaxation is the OpenMP kernel here,
// with a serial twin for testing.

#pragma once

#include <functional>
#include <vector>

#include "ecoplan/common.hpp"
#include "ecoplan/path_planner.hpp"  // Exec
#include "ecoplan/qp_core.hpp"

namespace ecoplan {

enum class PhaseLabel { Acceleration, Deceleration, Cruise };

const char* phase_name(PhaseLabel p);

// Obstacle as a particle trajectory in the (t, s) plane with a safety radius.
struct STObstacle {
  std::vector<double> t;
  std::vector<double> s;
  double radius = 0.0;
};

struct STGraph {
  double dt = 0.5;
  int num_steps = 16;     // times t_k = k * dt, k = 0..num_steps
  double ds = 1.0;
  int num_stations = 0;   // stations s_j = j * ds, j = 0..num_stations
  std::vector<STObstacle> obstacles;

  double t_horizon() const { return dt * num_steps; }
  double s_top() const { return ds * num_stations; }
  // Clearance to the nearest obstacle polyline minus its radius, floored at
  // zero; large when no obstacle is present.
  double d_min_at(double t, double s) const;
  void validate() const;
};

struct SpeedCostWeights {
  double w_ref_speed = 1.0;
  double w_acc = 25.0;
  double w_je = 8.0;
  double w1 = 1.0;  // outer weight on the reference-speed cost
  double w2 = 1.0;  // outer weight on the accel/decel cost
  double w3 = 1.0;  // outer weight on the obstacle cost
  double d1 = 6.0;
  double d2 = 2.0;
  double k_obs = 10.0;  // numerator of the finite obstacle-cost branch

  void validate() const;
};

PhaseLabel classify_phase(double current_v, double v_target, bool stop_required,
                          double eps_v = 0.25);

// 0 above d1, k_obs / (d - d2) on (d2, d1], +inf at or below d2.
double st_obstacle_cost(double d_min, const SpeedCostWeights& w);
double ref_speed_cost(double v, double v_opt, const SpeedCostWeights& w);
double accel_phase_cost(double a, double jerk, double a_acc_opt,
                        const SpeedCostWeights& w);
double decel_phase_cost(double a, double jerk, double a_dec_opt,
                        const SpeedCostWeights& w);

struct SpeedSample {
  double t = 0.0;
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
  double j = 0.0;
};

struct SpeedProfile {
  std::vector<SpeedSample> samples;  // uniform dt
  PhaseLabel phase = PhaseLabel::Cruise;
  double dt = 0.5;

  // Piecewise-constant acceleration per knot interval.
  double s_at(double t) const;
  double v_at(double t) const;
  double a_at(double t) const;
  double duration() const { return samples.back().t; }
};

struct SpeedStart {
  double v = 0.0;
  double a = 0.0;
};

// Reference speed and phase acceleration target, evaluated per station so
// slope changes show up along the horizon. set to fixed lambdas to freeze
// them per cycle.
struct SpeedPlanContext {
  std::function<double(double s)> v_ref;
  std::function<double(double s, double v)> a_target;  // unused in Cruise
};

struct SpeedDpResult {
  SpeedProfile profile;
  double cost = 0.0;
  bool ended_at_top = false;  // terminated on the s = s_max boundary
};

// Stage-wise relaxation over (station, incoming-speed) states; node costs
// assemble the phase-matched sum with finite-difference derivatives. The
// endpoint is the cheapest node on the top or right boundary. Throws
// PlannerError{InfeasibleHorizon} when every boundary node is infinite.
SpeedDpResult dp_speed_search(const STGraph& graph, PhaseLabel phase,
                              const SpeedStart& start,
                              const SpeedCostWeights& w,
                              const SpeedPlanContext& ctx, double a_bound,
                              double v_max, Exec exec = Exec::Parallel);

struct SpeedCorridor {
  std::vector<double> t;
  std::vector<double> s_lo;
  std::vector<double> s_hi;

  void validate() const;
};

// Bounds around the coarse profile, minus obstacle hard zones (clearance
// <= d2 in the ST metric), clipped to [0, s_top].
SpeedCorridor build_speed_corridor(const STGraph& graph,
                                   const SpeedProfile& coarse,
                                   const SpeedCostWeights& w,
                                   double width = 10.0);

struct SpeedQpResult {
  SpeedProfile profile;
  QPSolution qp;
  double coarse_objective = 0.0;
  double refined_objective = 0.0;
  bool fell_back = false;
};

// Phase-matched quadratic objective over per-time (s, v, a) with
// constant-acceleration stepping between knots; obstacles enter through the
// corridor boxes.
SpeedQpResult qp_speed_refine(const SpeedProfile& coarse, PhaseLabel phase,
                              const SpeedCostWeights& w,
                              const SpeedCorridor& corridor,
                              const SpeedPlanContext& ctx, double a_bound,
                              double v_max, const SpeedStart& start);

}  // namespace ecoplan
