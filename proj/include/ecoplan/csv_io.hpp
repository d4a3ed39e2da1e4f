// CSV and JSON emitters for traces, plans, and reports. All numbers are
// written with shortest-round-trip formatting so reruns are byte identical.

#pragma once

#include <string>
#include <vector>

#include "ecoplan/sim_harness.hpp"

namespace ecoplan {

inline constexpr int kOutputSchemaVersion = 1;

std::string format_double(double v);

// trace.csv: t,x,y,s,l,v,a,phase,traction_w,regen_w,brake_w
std::string trace_csv(const SimTrace& trace);
// refline.csv: s,x,y,heading,curvature (s in global path arc length)
std::string refline_csv(const std::vector<RefLinePoint>& pts, double offset_s);
// path.csv: s,l,dl,ddl
std::string path_csv(const PathProfile& profile, double offset_s);
// speed.csv: t,s,v,a,jerk,phase
std::string speed_csv(const SpeedProfile& profile, double offset_s);
// report.json with energy channels, histogram, audits, and QP certificates.
std::string report_json(const RunResult& result, const std::string& scenario_name,
                        std::uint64_t seed);
std::string comparison_json(const ComparisonResult& cmp,
                            const std::string& scenario_name, std::uint64_t seed);

// Minimal CSV reader used by the round-trip tests: returns rows of cells,
// skipping '#' comment lines; the first non-comment row is the header.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace ecoplan
