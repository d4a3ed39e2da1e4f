// Power and energy accounting: channel integration, the |a|-bin occupancy
// histogram, KERS gating of commanded deceleration, and A/B report
// comparison.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ecoplan/vehicle_dynamics.hpp"

namespace ecoplan {

struct PowerSample {
  double t = 0.0;
  double v = 0.0;
  double a = 0.0;
  double traction_w = 0.0;
  double regen_w = 0.0;
  double brake_w = 0.0;
};

// |a| bins: [0,0.5), [0.5,1), ..., [2.5,3), [3,inf); one set for
// deceleration samples (a < 0) and a mirrored set for acceleration samples
// (a >= 0). Fractions are time weighted and sum to 1 across both sets.
struct AccelHistogram {
  static constexpr int kNumBins = 7;
  std::array<double, kNumBins> decel{};
  std::array<double, kNumBins> accel{};

  static int bin_of(double abs_a);
};

struct EnergyReport {
  double traction_energy_j = 0.0;
  double regen_energy_j = 0.0;
  double brake_loss_j = 0.0;
  double proxy_energy_j = 0.0;  // integral of |a| * |v|
  AccelHistogram accel_histogram;
  double distance_m = 0.0;
  double duration_s = 0.0;
  std::uint64_t scenario_hash = 0;
};

double instantaneous_power(double f_total_n, double v_ms);
double proxy_power(double a_ms2, double v_ms);

// Trapezoidal integration of each channel over t; throws std::domain_error
// with fewer than two samples or non-increasing timestamps.
EnergyReport integrate_energy(std::span<const PowerSample> samples);

// Splits a commanded deceleration magnitude (demand beyond natural drag)
// into regen and friction-brake FORCES at speed v. Regen only activates at
// or above the envelope floor, covers at most the envelope ceiling, and is
// capped by the KERS power ceiling.
std::pair<double, double> regen_force_split(double v_ms,
                                            double commanded_decel_ms2,
                                            const VehicleParams& p);

// Same split expressed as power at the state's speed.
std::pair<double, double> regen_power(const LongitudinalState& state,
                                      double commanded_decel_ms2,
                                      const VehicleParams& p);

struct ComparisonSummary {
  double traction_delta_j = 0.0;
  double regen_delta_j = 0.0;
  double brake_delta_j = 0.0;
  double proxy_delta_j = 0.0;
  double regen_ratio = 0.0;  // candidate / baseline; +inf when baseline is 0
  std::array<double, AccelHistogram::kNumBins> decel_bin_delta_points{};
  std::array<double, AccelHistogram::kNumBins> accel_bin_delta_points{};
  // The headline bin: (0, 0.5) m/s^2 deceleration occupancy delta, in
  // percentage points (candidate minus baseline) and relative terms.
  double decel_bin0_delta_points = 0.0;
  double decel_bin0_relative = 0.0;
};

// Throws PlannerError{ComparisonMismatch} when the reports carry different
// scenario hashes.
ComparisonSummary compare_reports(const EnergyReport& baseline,
                                  const EnergyReport& candidate);

}  // namespace ecoplan
