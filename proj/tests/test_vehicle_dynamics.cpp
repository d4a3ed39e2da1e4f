#include <doctest.h>

#include <cmath>
#include <random>

#include "ecoplan/vehicle_dynamics.hpp"

using namespace ecoplan;

namespace {

VehicleParams default_params() {
  VehicleParams p;
  p.mass_kg = 1500.0;
  p.drag_coeff = 0.3;
  p.frontal_area_m2 = 2.2;
  p.rolling_mu = 0.015;
  p.p_opt_w = 30000.0;
  p.p2_w = 60000.0;
  p.pm_w = 20000.0;
  p.p_regen_max_w = 120000.0;
  p.f_brake_max_n = 6000.0;
  p.v_max_ms = 40.0;
  return p;
}

Environment flat_env() {
  Environment env;
  env.slope = SlopeProfile({0.0, 10000.0}, {0.0, 0.0});
  return env;
}

Environment graded_env(double theta) {
  Environment env;
  env.slope = SlopeProfile({0.0, 10000.0}, {theta, theta});
  return env;
}

// Independent force evaluation straight from the formulas.
double oracle_air(double v) { return 0.5 * 1.225 * v * v * 0.3 * 2.2; }
double oracle_friction(double theta) {
  return 0.015 * 1500.0 * 9.81 * std::cos(theta);
}
double oracle_slope(double theta) { return 1500.0 * 9.81 * std::sin(theta); }

}  // namespace

TEST_CASE("air drag follows the quadratic law") {
  auto p = default_params();
  auto env = flat_env();
  CHECK(air_drag(0.0, env, p) == 0.0);
  CHECK(air_drag(10.0, env, p) == doctest::Approx(40.425).epsilon(1e-9));
  // doubling v multiplies by exactly 4
  double f10 = air_drag(10.0, env, p);
  double f20 = air_drag(20.0, env, p);
  CHECK(f20 == doctest::Approx(4.0 * f10).epsilon(1e-12));
}

TEST_CASE("rolling friction") {
  auto p = default_params();
  CHECK(rolling_friction(0.0, flat_env(), p) ==
        doctest::Approx(220.725).epsilon(1e-9));
  auto p0 = p;
  p0.rolling_mu = 0.0;
  CHECK(rolling_friction(0.0, flat_env(), p0) == 0.0);
  // even in theta
  CHECK(rolling_friction(0.0, graded_env(0.07), p) ==
        doctest::Approx(rolling_friction(0.0, graded_env(-0.07), p))
            .epsilon(1e-12));
}

TEST_CASE("rolling friction outside slope domain is a domain error") {
  auto p = default_params();
  Environment env;
  env.slope = SlopeProfile({0.0, 100.0}, {0.0, 0.0});
  CHECK_THROWS_AS(rolling_friction(101.0, env, p), std::domain_error);
  CHECK_THROWS_AS(slope_force(-1.0, env, p), std::domain_error);
}

TEST_CASE("slope force sign convention") {
  auto p = default_params();
  CHECK(slope_force(0.0, flat_env(), p) == 0.0);
  double f = slope_force(0.0, graded_env(0.05), p);
  CHECK(f == doctest::Approx(oracle_slope(0.05)).epsilon(1e-9));
  CHECK(f > 0.0);  // uphill opposes forward motion
  CHECK(slope_force(0.0, graded_env(-0.05), p) ==
        doctest::Approx(-f).epsilon(1e-12));
}

TEST_CASE("accel dynamics hand fixtures") {
  auto p = default_params();
  auto env = flat_env();
  LongitudinalState st{0.0, 10.0, 0.0};

  // Newton with no resistance
  auto p_free = p;
  p_free.drag_coeff = 0.0;
  p_free.rolling_mu = 0.0;
  CHECK(accel_dynamics(st, 1500.0, env, p_free) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // equilibrium
  double resist = oracle_air(10.0) + oracle_friction(0.0);
  CHECK(accel_dynamics(st, resist, env, p) == doctest::Approx(0.0).epsilon(1e-12));

  // hand-evaluated chain through the force formulas
  double expected = (2000.0 - resist) / 1500.0;
  CHECK(accel_dynamics(st, 2000.0, env, p) ==
        doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("decel dynamics hand fixtures") {
  auto p = default_params();
  auto env = flat_env();

  LongitudinalState rest{0.0, 0.0, 0.0};
  CHECK(decel_dynamics(rest, 0.0, 0.0, env, p) == doctest::Approx(0.0).epsilon(1e-12));

  // steep downhill, no braking: the car speeds up
  LongitudinalState st{0.0, 1.0, 0.0};
  CHECK(decel_dynamics(st, 0.0, 0.0, graded_env(-0.2), p) > 0.0);

  LongitudinalState st10{0.0, 10.0, 0.0};
  double expected = -(oracle_air(10.0) + oracle_friction(0.0) + 1500.0) / 1500.0;
  CHECK(decel_dynamics(st10, 1500.0, 0.0, env, p) ==
        doctest::Approx(expected).epsilon(1e-9));

  CHECK_THROWS_AS(decel_dynamics(st10, -1.0, 0.0, env, p), std::invalid_argument);
  CHECK_THROWS_AS(decel_dynamics(st10, 0.0, 1e9, env, p), std::invalid_argument);
  // regen power bound: force * v above ceiling
  CHECK_THROWS_AS(decel_dynamics(st10, p.p_regen_max_w, 0.0, env, p),
                  std::invalid_argument);
}

TEST_CASE("force decomposition consistency on random states") {
  auto p = default_params();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> vdist(0.1, 35.0);
  std::uniform_real_distribution<double> tdist(-0.08, 0.08);
  std::uniform_real_distribution<double> fdist(0.0, 5000.0);
  for (int i = 0; i < 1000; ++i) {
    double theta = tdist(rng);
    auto env = graded_env(theta);
    LongitudinalState st{0.0, vdist(rng), 0.0};
    double trac = fdist(rng);
    double direct = (trac - oracle_air(st.v_ms) - oracle_friction(theta) -
                     oracle_slope(theta)) /
                    1500.0;
    double got = accel_dynamics(st, trac, env, p);
    CHECK(std::abs(got - direct) <= 1e-12 * std::max(1.0, std::abs(direct)));

    double regen = std::min(fdist(rng), p.p_regen_max_w / std::max(st.v_ms, 0.1));
    double brake = std::min(fdist(rng), p.f_brake_max_n);
    double direct_d = -(oracle_air(st.v_ms) + oracle_friction(theta) + regen +
                        brake + oracle_slope(theta)) /
                      1500.0;
    double got_d = decel_dynamics(st, regen, brake, env, p);
    CHECK(std::abs(got_d - direct_d) <= 1e-12 * std::max(1.0, std::abs(direct_d)));
  }
}

TEST_CASE("optimal cruise speed solves the power balance") {
  auto p = default_params();
  auto env = flat_env();
  auto r = optimal_cruise_speed(0.0, env, p);
  CHECK(!r.capped_at_v_max);
  // residual against the power balance
  double residual =
      std::abs(p.p_opt_w - r.v_ms * (oracle_air(r.v_ms) + oracle_friction(0.0)));
  CHECK(residual <= 1e-6 * p.p_opt_w);
  CHECK(r.v_ms == doctest::Approx(37.71).epsilon(1e-3));  // ~37.7 at 30 kW

  SUBCASE("no resistance caps at v_max with the advisory flag") {
    auto p0 = p;
    p0.drag_coeff = 0.0;
    p0.rolling_mu = 0.0;
    auto r0 = optimal_cruise_speed(0.0, env, p0);
    CHECK(r0.capped_at_v_max);
    CHECK(r0.no_finite_root);
    CHECK(r0.v_ms == p0.v_max_ms);
  }

  SUBCASE("uphill strictly decreases the root") {
    double v_flat = optimal_cruise_speed(0.0, flat_env(), p).v_ms;
    double v_up1 = optimal_cruise_speed(0.0, graded_env(0.02), p).v_ms;
    double v_up2 = optimal_cruise_speed(0.0, graded_env(0.05), p).v_ms;
    CHECK(v_up1 < v_flat);
    CHECK(v_up2 < v_up1);
  }

  SUBCASE("zero optimal power is a domain error") {
    auto pz = p;
    pz.p_opt_w = 0.0;
    CHECK_THROWS_AS(optimal_cruise_speed(0.0, env, pz), std::domain_error);
  }
}

TEST_CASE("optimal accel") {
  auto p = default_params();
  auto env = flat_env();

  // P2 balancing resistance exactly gives zero
  double resist = oracle_air(10.0) + oracle_friction(0.0);
  auto p_bal = p;
  p_bal.p2_w = resist * 10.0;
  CHECK(optimal_accel({0.0, 10.0, 0.0}, env, p_bal) ==
        doctest::Approx(0.0).epsilon(1e-12));

  double expected = (60000.0 / 10.0 - resist) / 1500.0;
  CHECK(optimal_accel({0.0, 10.0, 0.0}, env, p) ==
        doctest::Approx(expected).epsilon(1e-9));

  // decreasing in v on flat road
  double prev = optimal_accel({0.0, 5.0, 0.0}, env, p);
  for (double v = 7.0; v < 35.0; v += 2.0) {
    double cur = optimal_accel({0.0, v, 0.0}, env, p);
    CHECK(cur < prev);
    prev = cur;
  }

  // the speed floor guards the singularity
  CHECK(std::isfinite(optimal_accel({0.0, 0.0, 0.0}, env, p)));
  CHECK(optimal_accel({0.0, 0.0, 0.0}, env, p) ==
        doctest::Approx(optimal_accel({0.0, 0.05, 0.0}, env, p)).epsilon(1e-12));
}

TEST_CASE("optimal decel clamps into the recovery envelope") {
  auto p = default_params();
  auto env = flat_env();

  // raw within the envelope stays put
  double resist = oracle_air(20.0) + oracle_friction(0.0);
  double raw = -(20000.0 / 20.0 + resist) / 1500.0;
  auto r = optimal_decel({0.0, 20.0, 0.0}, env, p);
  CHECK(r.a_ms2 == doctest::Approx(raw).epsilon(1e-9));
  CHECK(r.brake_free);

  SUBCASE("weak raw clamps up to the activation floor") {
    auto pw = p;
    pw.pm_w = 100.0;  // nearly no recovery power
    auto pw_env = flat_env();
    auto rw = optimal_decel({0.0, 30.0, 0.0}, pw_env, pw);
    CHECK(rw.a_ms2 == doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("strong raw clamps down to the drag ceiling") {
    auto ps = p;
    ps.pm_w = 200000.0;
    auto rs = optimal_decel({0.0, 10.0, 0.0}, flat_env(), ps);
    CHECK(rs.a_ms2 == doctest::Approx(-3.0).epsilon(1e-12));
  }
  SUBCASE("magnitude always within the envelope") {
    for (double v = 0.0; v <= 40.0; v += 1.7) {
      for (double pm : {500.0, 5000.0, 20000.0, 80000.0, 300000.0}) {
        auto pv = p;
        pv.pm_w = pm;
        auto rv = optimal_decel({0.0, v, 0.0}, env, pv);
        CHECK(-rv.a_ms2 >= 0.5);
        CHECK(-rv.a_ms2 <= 3.0);
      }
    }
  }
}

TEST_CASE("max stopping decel") {
  auto p = default_params();
  auto env = flat_env();

  // envelope-capped regen force at 20 m/s: min(120kW/20, 1500*3) = 4500 N
  double resist = oracle_air(20.0) + oracle_friction(0.0);
  double expected = (4500.0 + 6000.0 + resist) / 1500.0;
  CHECK(max_stopping_decel({0.0, 20.0, 0.0}, env, p) ==
        doctest::Approx(expected).epsilon(1e-9));

  // downhill reduces the magnitude at the same speed
  CHECK(max_stopping_decel({0.0, 20.0, 0.0}, graded_env(-0.05), p) <
        max_stopping_decel({0.0, 20.0, 0.0}, env, p));

  // friction-only limit at rest
  auto p_bare = p;
  p_bare.p_regen_max_w = 0.0;
  p_bare.f_brake_max_n = 0.0;
  p_bare.drag_coeff = 0.0;
  CHECK(max_stopping_decel({0.0, 0.0, 0.0}, env, p_bare) ==
        doctest::Approx(0.015 * 9.81).epsilon(1e-9));
}

TEST_CASE("min brake distance") {
  CHECK(min_brake_distance(20.0, 0.0, 5.0) == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(min_brake_distance(13.0, 13.0, 3.0) == 0.0);
  CHECK(min_brake_distance(20.0, 0.0, 2.5) ==
        doctest::Approx(2.0 * min_brake_distance(20.0, 0.0, 5.0)).epsilon(1e-12));
  CHECK_THROWS_AS(min_brake_distance(5.0, 10.0, 3.0), std::domain_error);
  CHECK_THROWS_AS(min_brake_distance(5.0, 0.0, 0.0), std::domain_error);

  // matches a constant-decel kinematic simulation (trapezoid is exact for
  // linear v; v0/(a*dt) integral so the stop lands on a step boundary)
  double v0 = 17.0, a = 2.5;
  double dt = 1e-3, v = v0, d = 0.0;
  while (v > 0.0) {
    double v2 = std::max(0.0, v - a * dt);
    d += 0.5 * (v + v2) * dt;
    v = v2;
  }
  CHECK(std::abs(min_brake_distance(v0, 0.0, a) - d) / d <= 1e-9);
}

TEST_CASE("vehicle params invariants") {
  auto p = default_params();
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.mass_kg = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.regen_decel_min_ms2 = 3.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
