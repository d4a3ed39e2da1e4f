// SL-space path generation: quintic lattice connection, coarse dynamic
// programming over sampled offsets, convex-corridor extraction, and QP
// refinement of the lateral profile.
//
// The DP stage relaxation is the data-parallel kernel of this module: every
// destination node's best predecessor is independent, so the loop runs under
// OpenMP. A serial twin of the kernel is kept for testing and benchmarks.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "ecoplan/common.hpp"
#include "ecoplan/qp_core.hpp"

namespace ecoplan {

enum class Exec { Serial, Parallel };

struct SLObstacle {
  double s_lo = 0.0, s_hi = 0.0;
  double l_lo = 0.0, l_hi = 0.0;
};

// Uniform station/offset lattice with cached per-node obstacle clearance.
struct SLGrid {
  std::vector<double> stations;               // increasing, uniform spacing
  std::vector<std::vector<double>> offsets;   // per station
  std::vector<std::vector<double>> clearance; // per node, euclidean SL distance
  std::vector<SLObstacle> obstacles;
  double road_l_min = -2.6;
  double road_l_max = 2.6;

  double clearance_at(double s, double l) const;
  void validate() const;
};

struct SLGridConfig {
  double station_ds = 10.0;
  double offset_dl = 0.5;
  // Optional seeded lattice jitter (off by default; tests rely on the
  // deterministic lattice).
  bool jitter = false;
  std::uint64_t jitter_seed = 0;
};

SLGrid make_sl_grid(double s_start, double s_end, double road_l_min,
                    double road_l_max, const std::vector<SLObstacle>& obstacles,
                    const SLGridConfig& cfg = {});

struct PathKnot {
  double s = 0.0;
  double l = 0.0;
  double dl = 0.0;   // dl/ds
  double ddl = 0.0;  // d2l/ds2
};

// l(s) = sum a_k (s - s0)^k on [s0, s1].
struct QuinticSegment {
  double s0 = 0.0, s1 = 0.0;
  std::array<double, 6> coef{};

  double eval(double s, int order = 0) const;
};

QuinticSegment quintic_connect(const PathKnot& a, const PathKnot& b);

struct PathCostWeights {
  double w_obs = 1.0;
  double w_sm = 10.0;
  double w_re = 1.0;   // w_sm must stay >= 10 * w_re
  double w1 = 1.0;     // f'
  double w2 = 10.0;    // f''
  double w3 = 10.0;    // f'''
  double w4 = 5.0;     // deviation from the DP solution in the QP stage
  double d1 = 12.0;    // clearance where the obstacle penalty starts
  double d2 = 2.0;     // hard clearance bound
  double obstacle_ramp_gain = 100.0;

  void validate() const;
};

// 0 above d1, +inf below d2, linear decreasing ramp in between.
double obstacle_cost(double clearance, const PathCostWeights& w);

struct PathProfile {
  std::vector<PathKnot> knots;
  std::vector<QuinticSegment> segments;

  double eval(double s, int order = 0) const;
  double s_front() const { return knots.front().s; }
  double s_back() const { return knots.back().s; }
};

PathProfile profile_from_knots(const std::vector<PathKnot>& knots);

// w1 int f'^2 + w2 int f''^2 + w3 int f'''^2, closed form per segment.
double smoothness_cost(const QuinticSegment& seg, const PathCostWeights& w);
double smoothness_cost(const PathProfile& profile, const PathCostWeights& w);

// int (f - g)^2 ds with g == 0 (the reference line itself in Frenet frame).
double reference_cost(const QuinticSegment& seg);
double reference_cost(const PathProfile& profile);
// int (f - g)^2 ds against another profile sharing the same knot stations.
double reference_cost(const PathProfile& f, const PathProfile& g);

// Obstacle cost sampled at 5 uniform points per segment (excluding the
// segment start so node costs are not double counted along a path).
double segment_obstacle_cost(const QuinticSegment& seg, const SLGrid& grid,
                             const PathCostWeights& w);

// W_obs * C_obs + W_sm * C_sm + W_re * C_re on the connecting quintic.
double path_transition_cost(const PathKnot& a, const PathKnot& b,
                            const SLGrid& grid, const PathCostWeights& w);

struct PathDpResult {
  std::vector<int> node_indices;  // chosen offset index per station
  PathProfile profile;
  double cost = 0.0;
};

// Stage-wise Bellman search from the start knot over the lattice. Throws
// PlannerError{BlockedPath} when every terminal is infinite.
PathDpResult dp_search(const SLGrid& grid, const PathKnot& start,
                       const PathCostWeights& w, Exec exec = Exec::Parallel);

struct Corridor {
  std::vector<double> stations;
  std::vector<double> l_lo;
  std::vector<double> l_hi;
  std::vector<double> dp_l;  // DP profile sampled at the corridor stations

  void validate() const;
};

// Widest obstacle-free interval around the DP profile per fine station,
// clipped to the road and shrunk by the vehicle half width. Throws
// PlannerError{CorridorCollapse} when a station pinches shut.
Corridor build_corridor(const PathProfile& dp_profile, const SLGrid& grid,
                        double fine_ds, double vehicle_half_width);

struct PathQpResult {
  PathProfile profile;
  QPSolution qp;
  double coarse_objective = 0.0;
  double refined_objective = 0.0;
  bool fell_back = false;  // QP failed; DP profile returned unchanged
};

// Discretized Eq-17-style objective over per-station (l, l', l'') with
// piecewise-constant third derivative between stations.
PathQpResult qp_refine(const Corridor& corridor, const PathProfile& dp_profile,
                       const PathKnot& start, const PathCostWeights& w);

}  // namespace ecoplan
