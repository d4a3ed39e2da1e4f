#include "ecoplan/vehicle_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecoplan {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void VehicleParams::validate() const {
  if (!(mass_kg > 0.0)) throw std::invalid_argument("mass_kg must be > 0");
  if (drag_coeff < 0.0 || frontal_area_m2 < 0.0 || rolling_mu < 0.0)
    throw std::invalid_argument("drag/area/mu must be >= 0");
  if (p_opt_w < 0.0 || p2_w < 0.0 || pm_w < 0.0 || p_regen_max_w < 0.0 ||
      f_brake_max_n < 0.0)
    throw std::invalid_argument("powers and forces must be >= 0");
  if (!(regen_decel_min_ms2 >= 0.0 &&
        regen_decel_min_ms2 < regen_decel_max_ms2))
    throw std::invalid_argument(
        "require 0 <= regen_decel_min_ms2 < regen_decel_max_ms2");
  if (!(v_max_ms > 0.0)) throw std::invalid_argument("v_max_ms must be > 0");
}

SlopeProfile::SlopeProfile() : s_{0.0, 1e9}, theta_{0.0, 0.0} {}

SlopeProfile::SlopeProfile(std::vector<double> s, std::vector<double> theta_rad)
    : s_(std::move(s)), theta_(std::move(theta_rad)) {
  if (s_.size() < 2 || s_.size() != theta_.size())
    throw std::invalid_argument("slope profile needs >= 2 matched breakpoints");
  for (std::size_t i = 1; i < s_.size(); ++i)
    if (!(s_[i] > s_[i - 1]))
      throw std::invalid_argument("slope breakpoints must increase");
  for (double th : theta_)
    if (!(std::abs(th) < kPi / 2.0))
      throw std::invalid_argument("|theta| must be < pi/2");
}

double SlopeProfile::theta_at(double s) const {
  if (s < s_.front() || s > s_.back())
    throw std::domain_error("arc position outside slope profile domain");
  auto it = std::upper_bound(s_.begin(), s_.end(), s);
  if (it == s_.end()) return theta_.back();
  std::size_t hi = static_cast<std::size_t>(it - s_.begin());
  if (hi == 0) return theta_.front();
  std::size_t lo = hi - 1;
  double w = (s - s_[lo]) / (s_[hi] - s_[lo]);
  return theta_[lo] + w * (theta_[hi] - theta_[lo]);
}

void Environment::validate() const {
  if (air_density_kgm3 < 0.0)
    throw std::invalid_argument("air density must be >= 0");
  if (!(gravity_ms2 > 0.0)) throw std::invalid_argument("gravity must be > 0");
}

double air_drag(double v_ms, const Environment& env, const VehicleParams& p) {
  return 0.5 * env.air_density_kgm3 * v_ms * v_ms * p.drag_coeff *
         p.frontal_area_m2;
}

double rolling_friction(double s_m, const Environment& env,
                        const VehicleParams& p) {
  double theta = env.slope.theta_at(s_m);
  return p.rolling_mu * p.mass_kg * env.gravity_ms2 * std::cos(theta);
}

double slope_force(double s_m, const Environment& env, const VehicleParams& p) {
  double theta = env.slope.theta_at(s_m);
  return p.mass_kg * env.gravity_ms2 * std::sin(theta);
}

ForceBreakdown resistive_forces(double s_m, double v_ms, const Environment& env,
                                const VehicleParams& p) {
  ForceBreakdown f;
  f.air_n = air_drag(v_ms, env, p);
  f.friction_n = rolling_friction(s_m, env, p);
  f.slope_n = slope_force(s_m, env, p);
  return f;
}

double total_resistance(double s_m, double v_ms, const Environment& env,
                        const VehicleParams& p) {
  ForceBreakdown f = resistive_forces(s_m, v_ms, env, p);
  return f.air_n + f.friction_n + f.slope_n;
}

namespace {

// Rolling resistance opposes motion; it vanishes at rest.
double moving_resistance(const LongitudinalState& state, const Environment& env,
                         const VehicleParams& p) {
  ForceBreakdown f = resistive_forces(state.s_m, state.v_ms, env, p);
  double fric = state.v_ms > 0.0 ? f.friction_n : 0.0;
  return f.air_n + fric + f.slope_n;
}

}  // namespace

double accel_dynamics(const LongitudinalState& state, double traction_n,
                      const Environment& env, const VehicleParams& p) {
  return (traction_n - moving_resistance(state, env, p)) / p.mass_kg;
}

double decel_dynamics(const LongitudinalState& state, double regen_n,
                      double brake_n, const Environment& env,
                      const VehicleParams& p) {
  if (regen_n < 0.0) throw std::invalid_argument("regen force must be >= 0");
  if (brake_n < 0.0 || brake_n > p.f_brake_max_n)
    throw std::invalid_argument("brake force outside [0, f_brake_max_n]");
  if (regen_n * state.v_ms > p.p_regen_max_w * (1.0 + 1e-12))
    throw std::invalid_argument("regen power above p_regen_max_w");
  return -(moving_resistance(state, env, p) + regen_n + brake_n) / p.mass_kg;
}

CruiseSpeedResult optimal_cruise_speed(double s_m, const Environment& env,
                                       const VehicleParams& p) {
  if (!(p.p_opt_w > 0.0))
    throw std::domain_error("optimal cruise power must be > 0");

  const double fric = rolling_friction(s_m, env, p);
  const double slope = slope_force(s_m, env, p);
  auto balance = [&](double v) {
    return v * (air_drag(v, env, p) + fric + slope) - p.p_opt_w;
  };

  CruiseSpeedResult out;
  double hi = 3.0 * p.v_max_ms;
  if (balance(hi) <= 0.0) {
    // Either no resistance builds up within the bracket (no finite root) or
    // the root lies beyond it; the cap applies in both cases.
    out.v_ms = p.v_max_ms;
    out.capped_at_v_max = true;
    out.no_finite_root = (fric + slope <= 0.0 &&
                          p.drag_coeff * p.frontal_area_m2 *
                                  env.air_density_kgm3 <= 0.0);
    return out;
  }

  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-8; ++i) {
    double mid = 0.5 * (lo + hi);
    if (balance(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  double root = 0.5 * (lo + hi);
  if (root > p.v_max_ms) {
    out.v_ms = p.v_max_ms;
    out.capped_at_v_max = true;
  } else {
    out.v_ms = root;
  }
  return out;
}

double optimal_accel(const LongitudinalState& state, const Environment& env,
                     const VehicleParams& p) {
  double v = std::max(state.v_ms, kSpeedFloor);
  return (p.p2_w / v - total_resistance(state.s_m, v, env, p)) / p.mass_kg;
}

OptimalDecelResult optimal_decel(const LongitudinalState& state,
                                 const Environment& env,
                                 const VehicleParams& p) {
  double v = std::max(state.v_ms, kSpeedFloor);
  ForceBreakdown f = resistive_forces(state.s_m, v, env, p);
  double resist = f.air_n + f.friction_n + f.slope_n;
  double raw = -(p.pm_w / v + resist) / p.mass_kg;
  double mag =
      std::clamp(std::abs(raw), p.regen_decel_min_ms2, p.regen_decel_max_ms2);

  OptimalDecelResult out;
  out.a_ms2 = -mag;
  // Brake-free when regen (within its envelope and power ceiling) plus the
  // natural resistance can supply the clamped target on their own.
  double regen_force_needed = std::max(0.0, mag * p.mass_kg - resist);
  out.brake_free =
      regen_force_needed <= p.mass_kg * p.regen_decel_max_ms2 + 1e-9 &&
      regen_force_needed * v <= p.p_regen_max_w + 1e-9;
  return out;
}

double max_stopping_decel(const LongitudinalState& state, const Environment& env,
                          const VehicleParams& p) {
  double v = std::max(state.v_ms, kSpeedFloor);
  double f_regen_max = std::min(p.p_regen_max_w / v,
                                p.mass_kg * p.regen_decel_max_ms2);
  ForceBreakdown f = resistive_forces(state.s_m, state.v_ms, env, p);
  return (f_regen_max + p.f_brake_max_n + f.friction_n + f.air_n + f.slope_n) /
         p.mass_kg;
}

double min_brake_distance(double v_cur_ms, double v_f_ms,
                          double a_dec_max_ms2) {
  if (!(a_dec_max_ms2 > 0.0))
    throw std::domain_error("a_dec_max must be > 0");
  if (v_f_ms < 0.0 || v_f_ms > v_cur_ms)
    throw std::domain_error("require 0 <= v_f <= v_cur");
  return (v_cur_ms * v_cur_ms - v_f_ms * v_f_ms) / (2.0 * a_dec_max_ms2);
}

}  // namespace ecoplan
