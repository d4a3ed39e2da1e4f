#include "ecoplan/energy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ecoplan {

int AccelHistogram::bin_of(double abs_a) {
  int b = static_cast<int>(std::floor(abs_a / 0.5));
  return std::min(b, kNumBins - 1);
}

double instantaneous_power(double f_total_n, double v_ms) {
  if (v_ms < 0.0) throw std::domain_error("speed must be >= 0");
  return f_total_n * v_ms;
}

double proxy_power(double a_ms2, double v_ms) {
  return std::abs(a_ms2) * std::abs(v_ms);
}

EnergyReport integrate_energy(std::span<const PowerSample> samples) {
  if (samples.size() < 2)
    throw std::domain_error("energy integration needs >= 2 samples");
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (!(samples[i].t > samples[i - 1].t))
      throw std::domain_error("timestamps must strictly increase");

  EnergyReport rep;
  double proxy = 0.0, dist = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& a = samples[i - 1];
    const auto& b = samples[i];
    double dt = b.t - a.t;
    rep.traction_energy_j += 0.5 * (a.traction_w + b.traction_w) * dt;
    rep.regen_energy_j += 0.5 * (a.regen_w + b.regen_w) * dt;
    rep.brake_loss_j += 0.5 * (a.brake_w + b.brake_w) * dt;
    proxy += 0.5 * (proxy_power(a.a, a.v) + proxy_power(b.a, b.v)) * dt;
    dist += 0.5 * (a.v + b.v) * dt;
  }
  rep.proxy_energy_j = proxy;
  rep.distance_m = dist;
  rep.duration_s = samples.back().t - samples.front().t;

  // Time-weighted |a| occupancy, split by the sign of a.
  double total_w = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double wl = i > 0 ? 0.5 * (samples[i].t - samples[i - 1].t) : 0.0;
    double wr = i + 1 < samples.size() ? 0.5 * (samples[i + 1].t - samples[i].t) : 0.0;
    double wt = wl + wr;
    int bin = AccelHistogram::bin_of(std::abs(samples[i].a));
    if (samples[i].a < 0.0)
      rep.accel_histogram.decel[static_cast<std::size_t>(bin)] += wt;
    else
      rep.accel_histogram.accel[static_cast<std::size_t>(bin)] += wt;
    total_w += wt;
  }
  for (auto& f : rep.accel_histogram.decel) f /= total_w;
  for (auto& f : rep.accel_histogram.accel) f /= total_w;
  return rep;
}

std::pair<double, double> regen_force_split(double v_ms,
                                            double commanded_decel_ms2,
                                            const VehicleParams& p) {
  if (commanded_decel_ms2 < 0.0)
    throw std::invalid_argument("commanded decel must be a magnitude >= 0");
  double total_force = p.mass_kg * commanded_decel_ms2;
  double regen_force = 0.0;
  if (commanded_decel_ms2 >= p.regen_decel_min_ms2) {
    regen_force =
        p.mass_kg * std::min(commanded_decel_ms2, p.regen_decel_max_ms2);
    if (regen_force * v_ms > p.p_regen_max_w)
      regen_force = p.p_regen_max_w / std::max(v_ms, kSpeedFloor);
  }
  double brake_force = std::max(0.0, total_force - regen_force);
  return {regen_force, brake_force};
}

std::pair<double, double> regen_power(const LongitudinalState& state,
                                      double commanded_decel_ms2,
                                      const VehicleParams& p) {
  auto [regen_force, brake_force] =
      regen_force_split(state.v_ms, commanded_decel_ms2, p);
  return {regen_force * state.v_ms, brake_force * state.v_ms};
}

ComparisonSummary compare_reports(const EnergyReport& baseline,
                                  const EnergyReport& candidate) {
  if (baseline.scenario_hash != candidate.scenario_hash)
    throw PlannerError(PlannerError::Code::ComparisonMismatch,
                       "reports come from different scenarios");
  ComparisonSummary s;
  s.traction_delta_j = candidate.traction_energy_j - baseline.traction_energy_j;
  s.regen_delta_j = candidate.regen_energy_j - baseline.regen_energy_j;
  s.brake_delta_j = candidate.brake_loss_j - baseline.brake_loss_j;
  s.proxy_delta_j = candidate.proxy_energy_j - baseline.proxy_energy_j;
  if (baseline.regen_energy_j > 0.0)
    s.regen_ratio = candidate.regen_energy_j / baseline.regen_energy_j;
  else
    s.regen_ratio = candidate.regen_energy_j > 0.0
                        ? std::numeric_limits<double>::infinity()
                        : 1.0;
  for (int b = 0; b < AccelHistogram::kNumBins; ++b) {
    s.decel_bin_delta_points[static_cast<std::size_t>(b)] =
        100.0 * (candidate.accel_histogram.decel[static_cast<std::size_t>(b)] -
                 baseline.accel_histogram.decel[static_cast<std::size_t>(b)]);
    s.accel_bin_delta_points[static_cast<std::size_t>(b)] =
        100.0 * (candidate.accel_histogram.accel[static_cast<std::size_t>(b)] -
                 baseline.accel_histogram.accel[static_cast<std::size_t>(b)]);
  }
  s.decel_bin0_delta_points = s.decel_bin_delta_points[0];
  double base0 = baseline.accel_histogram.decel[0];
  s.decel_bin0_relative =
      base0 > 0.0 ? (candidate.accel_histogram.decel[0] - base0) / base0 : 0.0;
  return s;
}

}  // namespace ecoplan
