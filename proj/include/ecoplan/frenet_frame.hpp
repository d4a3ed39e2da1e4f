// Reference-line construction from a windowed global path (elastic-band QP
// smoothing) and Cartesian <-> Frenet (SL) conversions.

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ecoplan/common.hpp"
#include "ecoplan/qp_core.hpp"

namespace ecoplan {

struct GlobalPath {
  std::vector<Eigen::Vector2d> points;

  // Throws std::invalid_argument: needs >= 2 points, consecutive distinct.
  void validate() const;
  double length() const;
};

struct RefLinePoint {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;    // rad, unwrapped against neighbors
  double curvature = 0.0;  // 1/m, from heading finite differences
};

// Uniformly resampled smooth line. Position interpolates linearly between
// samples; heading interpolates linearly (the projection equations use the
// same model, which is what makes round trips invert).
class ReferenceLine {
 public:
  explicit ReferenceLine(std::vector<RefLinePoint> pts);

  double length() const { return pts_.back().s; }
  const std::vector<RefLinePoint>& points() const { return pts_; }

  Eigen::Vector2d position_at(double s) const;
  double heading_at(double s) const;
  double curvature_at(double s) const;
  double max_abs_curvature() const;

 private:
  std::vector<RefLinePoint> pts_;
  friend struct ProjectionOps;
};

struct FrenetPoint {
  double s = 0.0;
  double l = 0.0;  // left of the line is positive
};

struct SmoothWeights {
  double fidelity = 1.0;
  double first_diff = 10.0;
  double second_diff = 100.0;
  double resample_ds = 1.0;
};

struct SmoothResult {
  ReferenceLine line;
  std::vector<Eigen::Vector2d> control_points;  // QP stage output, pre-resample
  bool qp_fallback = false;  // raw polyline used because the QP failed
  std::vector<QPSolution> qp_solutions;  // one per coordinate, for certification
};

struct WindowResult {
  GlobalPath path;
  double start_s = 0.0;  // arc offset of the window on the source path
};

// Sub-path spanning [s_proj - behind, s_proj + ahead] clamped to the path
// ends. Throws std::domain_error when the window is empty.
GlobalPath extract_window(const GlobalPath& path, const Eigen::Vector2d& ego,
                          double behind_m, double ahead_m);
WindowResult extract_window_info(const GlobalPath& path,
                                 const Eigen::Vector2d& ego, double behind_m,
                                 double ahead_m);

SmoothResult smooth_reference(const GlobalPath& raw,
                              const SmoothWeights& weights = {});

// Nearest projection onto the line. Throws AmbiguousProjectionError when two
// non-adjacent stretches tie within tolerance.
FrenetPoint to_frenet(const Eigen::Vector2d& pose, const ReferenceLine& line);

// position = line(s) + l * normal(s). Throws std::domain_error on s outside
// the domain or fold-over (|l * curvature| >= 1).
Eigen::Vector2d to_cartesian(const FrenetPoint& pt, const ReferenceLine& line);

// SL bounding region of a footprint; empty when the footprint projects
// entirely outside the window.
struct SLRegion {
  double s_lo = 0.0, s_hi = 0.0;
  double l_lo = 0.0, l_hi = 0.0;
  bool empty = true;
};

SLRegion project_polygon_sl(const std::vector<Eigen::Vector2d>& polygon,
                            const ReferenceLine& line);

// Particle trajectory sampled in the SL frame over a time horizon.
struct FrenetTrajectorySample {
  double t = 0.0;
  double s = 0.0;
  double l = 0.0;
};

std::vector<FrenetTrajectorySample> project_particle_st(
    const Eigen::Vector2d& start_xy, const Eigen::Vector2d& velocity_xy,
    double t0, double horizon, double dt, const ReferenceLine& line);

// Projection s of a point onto a raw polyline (used for window extraction
// and plant bookkeeping).
double polyline_project_s(const std::vector<Eigen::Vector2d>& pts,
                          const Eigen::Vector2d& p);
Eigen::Vector2d polyline_point_at(const std::vector<Eigen::Vector2d>& pts,
                                  double s);
double polyline_length(const std::vector<Eigen::Vector2d>& pts);

}  // namespace ecoplan
