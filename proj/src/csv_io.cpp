#include "ecoplan/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ecoplan {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "0";
  return std::string(buf, ptr);
}

namespace {

const char* status_name(QPStatus s) {
  switch (s) {
    case QPStatus::optimal: return "optimal";
    case QPStatus::max_iter: return "max_iter";
    case QPStatus::infeasible: return "infeasible";
  }
  return "?";
}

std::string header_line() {
  return "# schema_version=" + std::to_string(kOutputSchemaVersion) + "\n";
}

}  // namespace

std::string trace_csv(const SimTrace& trace) {
  std::string out = header_line();
  out += "t,x,y,s,l,v,a,phase,traction_w,regen_w,brake_w\n";
  for (const auto& tk : trace.ticks) {
    out += format_double(tk.t) + ',' + format_double(tk.x) + ',' +
           format_double(tk.y) + ',' + format_double(tk.s) + ',' +
           format_double(tk.l) + ',' + format_double(tk.v) + ',' +
           format_double(tk.a) + ',' + phase_name(tk.phase) + ',' +
           format_double(tk.traction_w) + ',' + format_double(tk.regen_w) +
           ',' + format_double(tk.brake_w) + '\n';
  }
  return out;
}

std::string refline_csv(const std::vector<RefLinePoint>& pts, double offset_s) {
  std::string out = header_line();
  out += "s,x,y,heading,curvature\n";
  for (const auto& p : pts)
    out += format_double(p.s + offset_s) + ',' + format_double(p.x) + ',' +
           format_double(p.y) + ',' + format_double(p.heading) + ',' +
           format_double(p.curvature) + '\n';
  return out;
}

std::string path_csv(const PathProfile& profile, double offset_s) {
  std::string out = header_line();
  out += "s,l,dl,ddl\n";
  for (const auto& k : profile.knots)
    out += format_double(k.s + offset_s) + ',' + format_double(k.l) + ',' +
           format_double(k.dl) + ',' + format_double(k.ddl) + '\n';
  return out;
}

std::string speed_csv(const SpeedProfile& profile, double offset_s) {
  std::string out = header_line();
  out += "t,s,v,a,jerk,phase\n";
  for (const auto& sm : profile.samples)
    out += format_double(sm.t) + ',' + format_double(sm.s + offset_s) + ',' +
           format_double(sm.v) + ',' + format_double(sm.a) + ',' +
           format_double(sm.j) + ',' + phase_name(profile.phase) + '\n';
  return out;
}

namespace {

json report_to_json(const RunResult& r) {
  json rep;
  rep["planner"] = planner_name(r.kind);
  rep["traction_energy_j"] = r.report.traction_energy_j;
  rep["regen_energy_j"] = r.report.regen_energy_j;
  rep["brake_loss_j"] = r.report.brake_loss_j;
  rep["proxy_energy_j"] = r.report.proxy_energy_j;
  rep["distance_m"] = r.report.distance_m;
  rep["duration_s"] = r.report.duration_s;
  rep["scenario_hash"] = r.report.scenario_hash;
  rep["decel_histogram"] = r.report.accel_histogram.decel;
  rep["accel_histogram"] = r.report.accel_histogram.accel;
  rep["cruise_power_gap_w"] = r.cruise_power_gap_w;
  rep["emergency_stop"] = r.trace.emergency_stop;

  json audit;
  audit["traction_j"] = r.audit.traction_j;
  audit["delta_kinetic_j"] = r.audit.delta_kinetic_j;
  audit["resistive_j"] = r.audit.resistive_j;
  audit["regen_j"] = r.audit.regen_j;
  audit["brake_j"] = r.audit.brake_j;
  audit["relative_imbalance"] = r.audit.relative_imbalance;
  rep["energy_audit"] = audit;

  json safety;
  safety["conflict_violations"] = r.safety.conflict_violations;
  safety["contact_violations"] = r.safety.contact_violations;
  safety["min_conflict_gap_m"] = r.safety.min_conflict_gap_m;
  safety["min_lateral_gap_m"] = r.safety.min_lateral_gap_m;
  rep["safety_audit"] = safety;

  json cycles = json::array();
  for (const auto& c : r.trace.cycles) {
    json jc;
    jc["t"] = c.t;
    jc["phase"] = phase_name(c.phase);
    jc["path_dp_cost"] = c.path_dp_cost;
    jc["speed_dp_cost"] = c.speed_dp_cost;
    jc["corridor_l_min"] = c.corridor_l_min;
    jc["corridor_l_max"] = c.corridor_l_max;
    jc["path_blocked"] = c.path_blocked;
    jc["speed_infeasible"] = c.speed_infeasible;
    jc["smooth_fallback"] = c.smooth_fallback;
    json qps = json::array();
    for (const auto& q : c.qps) {
      json jq;
      jq["name"] = q.name;
      jq["status"] = status_name(q.status);
      jq["primal_residual"] = q.primal_residual;
      jq["dual_residual"] = q.dual_residual;
      jq["coarse_objective"] = q.coarse_objective;
      jq["refined_objective"] = q.refined_objective;
      jq["fell_back"] = q.fell_back;
      qps.push_back(jq);
    }
    jc["qps"] = qps;
    cycles.push_back(jc);
  }
  rep["cycles"] = cycles;
  return rep;
}

}  // namespace

std::string report_json(const RunResult& result, const std::string& scenario_name,
                        std::uint64_t seed) {
  json doc;
  doc["schema_version"] = kOutputSchemaVersion;
  doc["scenario"] = scenario_name;
  doc["seed"] = seed;
  doc["report"] = report_to_json(result);
  return doc.dump(2) + "\n";
}

std::string comparison_json(const ComparisonResult& cmp,
                            const std::string& scenario_name,
                            std::uint64_t seed) {
  json doc;
  doc["schema_version"] = kOutputSchemaVersion;
  doc["scenario"] = scenario_name;
  doc["seed"] = seed;
  doc["scenario_hash"] = cmp.ehmpp.report.scenario_hash;

  json head;
  head["regen_energy_ratio"] =
      std::isfinite(cmp.summary.regen_ratio) ? json(cmp.summary.regen_ratio)
                                             : json("inf");
  head["regen_delta_j"] = cmp.summary.regen_delta_j;
  head["decel_bin0_delta_points"] = cmp.summary.decel_bin0_delta_points;
  head["decel_bin0_relative"] = cmp.summary.decel_bin0_relative;
  head["cruise_power_gap_w_ehmpp"] = cmp.ehmpp.cruise_power_gap_w;
  head["cruise_power_gap_w_baseline"] = cmp.baseline.cruise_power_gap_w;
  head["regen_per_m_ehmpp"] = cmp.ehmpp_regen_per_m;
  head["regen_per_m_baseline"] = cmp.baseline_regen_per_m;
  doc["headline"] = head;

  json deltas;
  deltas["traction_delta_j"] = cmp.summary.traction_delta_j;
  deltas["regen_delta_j"] = cmp.summary.regen_delta_j;
  deltas["brake_delta_j"] = cmp.summary.brake_delta_j;
  deltas["proxy_delta_j"] = cmp.summary.proxy_delta_j;
  deltas["decel_bin_delta_points"] = cmp.summary.decel_bin_delta_points;
  deltas["accel_bin_delta_points"] = cmp.summary.accel_bin_delta_points;
  doc["deltas"] = deltas;

  doc["ehmpp"] = report_to_json(cmp.ehmpp);
  doc["baseline"] = report_to_json(cmp.baseline);
  return doc.dump(2) + "\n";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ecoplan
