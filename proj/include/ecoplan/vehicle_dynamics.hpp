// Longitudinal force and power model of the EV, plus the optimal operating
// points (cruise speed, acceleration, drag deceleration) that every planner
// cost function is tuned against.

#pragma once

#include <vector>

#include "ecoplan/common.hpp"

namespace ecoplan {

struct VehicleParams {
  double mass_kg = 1500.0;
  double drag_coeff = 0.3;        // Cd
  double frontal_area_m2 = 2.2;   // windward area
  double rolling_mu = 0.015;
  double p_opt_w = 30000.0;       // cruise optimal motor power
  double p2_w = 60000.0;          // acceleration-phase optimal motor power
  double pm_w = 20000.0;          // max-efficiency KERS power
  double p_regen_max_w = 60000.0; // KERS power ceiling
  double f_brake_max_n = 6000.0;  // max friction-brake force
  double regen_decel_min_ms2 = 0.5;  // KERS activation threshold
  double regen_decel_max_ms2 = 3.0;  // KERS drag ceiling
  double v_max_ms = 16.7;            // regulatory speed cap

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

// Piecewise-linear grade profile theta(s), positive = uphill. Queries
// outside [s_front, s_back] are a domain error.
class SlopeProfile {
 public:
  SlopeProfile();  // flat over [0, 1e9]
  SlopeProfile(std::vector<double> s, std::vector<double> theta_rad);

  double theta_at(double s) const;
  double s_min() const { return s_.front(); }
  double s_max() const { return s_.back(); }

  const std::vector<double>& breakpoints_s() const { return s_; }
  const std::vector<double>& breakpoints_theta() const { return theta_; }

 private:
  std::vector<double> s_;
  std::vector<double> theta_;
};

struct Environment {
  double air_density_kgm3 = 1.225;
  double gravity_ms2 = 9.81;
  SlopeProfile slope;

  void validate() const;
};

// Signed forces in newtons. All resistive channels are nonnegative;
// traction_n is positive when propelling; slope_n is positive uphill
// (opposing forward motion).
struct ForceBreakdown {
  double air_n = 0.0;
  double friction_n = 0.0;
  double slope_n = 0.0;
  double traction_n = 0.0;
  double regen_n = 0.0;
  double brake_n = 0.0;
};

struct LongitudinalState {
  double s_m = 0.0;
  double v_ms = 0.0;
  double a_ms2 = 0.0;
};

double air_drag(double v_ms, const Environment& env, const VehicleParams& p);
double rolling_friction(double s_m, const Environment& env, const VehicleParams& p);
double slope_force(double s_m, const Environment& env, const VehicleParams& p);

// air + rolling + slope at (s, v); slope channel keeps its sign.
ForceBreakdown resistive_forces(double s_m, double v_ms, const Environment& env,
                                const VehicleParams& p);
double total_resistance(double s_m, double v_ms, const Environment& env,
                        const VehicleParams& p);

// a = (F_traction - F_air - F_friction - F_slope) / m
double accel_dynamics(const LongitudinalState& state, double traction_n,
                      const Environment& env, const VehicleParams& p);

// a = -(F_air + F_friction + F_regen + F_brake + F_slope) / m.
// Throws std::invalid_argument when regen/brake bounds are violated.
double decel_dynamics(const LongitudinalState& state, double regen_n,
                      double brake_n, const Environment& env,
                      const VehicleParams& p);

struct CruiseSpeedResult {
  double v_ms = 0.0;
  bool capped_at_v_max = false;
  bool no_finite_root = false;
};

// Speed at which the resistive power balance V * F_total(V) equals the
// motor's optimal power, solved by bisection on [0, 3 * v_max] and capped
// at v_max. P_opt <= 0 is a domain error.
CruiseSpeedResult optimal_cruise_speed(double s_m, const Environment& env,
                                       const VehicleParams& p);

// a = (P2 / v - F_total) / m, speed floored at kSpeedFloor.
double optimal_accel(const LongitudinalState& state, const Environment& env,
                     const VehicleParams& p);

struct OptimalDecelResult {
  double a_ms2 = 0.0;    // negative
  bool brake_free = false;  // target achievable from regen + resistance alone
};

// Raw target -(Pm / v + F_total) / m with the magnitude clamped into
// [regen_decel_min, regen_decel_max].
OptimalDecelResult optimal_decel(const LongitudinalState& state,
                                 const Environment& env, const VehicleParams& p);

// Magnitude of the strongest achievable deceleration: regen (enveloped and
// power-capped) + friction brake + resistance.
double max_stopping_decel(const LongitudinalState& state, const Environment& env,
                          const VehicleParams& p);

// (v_cur^2 - v_f^2) / (2 a), magnitude convention. v_f > v_cur or
// a_dec_max <= 0 is a domain error.
double min_brake_distance(double v_cur_ms, double v_f_ms, double a_dec_max_ms2);

}  // namespace ecoplan
