#include "ecoplan/scenario.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ecoplan {

using nlohmann::json;

std::vector<Eigen::Vector2d> ObstacleSpec::polygon() const {
  return {
      {center.x() - half_length, center.y() - half_width},
      {center.x() + half_length, center.y() - half_width},
      {center.x() + half_length, center.y() + half_width},
      {center.x() - half_length, center.y() + half_width},
  };
}

Eigen::Vector2d ObstacleSpec::position_at(double t) const {
  return start_xy + t * velocity_xy;
}

void Scenario::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("scenario field '" + field + "': " + why);
  };
  if (schema_version != kScenarioSchemaVersion)
    fail("schema_version", "unsupported version");
  if (!(duration_s > 0)) fail("duration_s", "must be > 0");
  if (!(plant_dt_s > 0)) fail("plant_dt_s", "must be > 0");
  if (!(replan_dt_s >= plant_dt_s))
    fail("replan_dt_s", "must be >= plant_dt_s");
  try {
    vehicle.validate();
  } catch (const std::exception& e) {
    fail("vehicle", e.what());
  }
  try {
    env.validate();
  } catch (const std::exception& e) {
    fail("env", e.what());
  }
  if (global_path.size() < 2) fail("global_path", "needs >= 2 waypoints");
  GlobalPath gp{global_path};
  try {
    gp.validate();
  } catch (const std::exception& e) {
    fail("global_path", e.what());
  }
  double len = gp.length();
  if (env.slope.s_min() > 0.0 || env.slope.s_max() < len)
    fail("env.slope", "must cover [0, path length]");
  if (!(road_half_width_m > vehicle_half_width_m))
    fail("road_half_width_m", "must exceed vehicle_half_width_m");
  if (start_s < 0 || start_s >= len) fail("start_s", "outside the path");
  if (start_v < 0) fail("start_v", "must be >= 0");
  if (!(speed_limit_ms > 0)) fail("speed_limit_ms", "must be > 0");
  try {
    planner.path.validate();
    planner.speed.validate();
  } catch (const std::exception& e) {
    fail("planner", e.what());
  }
  for (const auto& ev : events)
    if (ev.t < 0) fail("events", "event time must be >= 0");
}

namespace {

json vec2_to_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

Eigen::Vector2d vec2_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw std::invalid_argument("scenario field '" + field +
                                "': expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("scenario field '" + key + "': wrong type");
  }
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key))
    throw std::invalid_argument("scenario field '" + key + "': missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("scenario field '" + key + "': wrong type");
  }
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario parse error: ") + e.what());
  }

  Scenario sc;
  sc.schema_version = require<int>(doc, "schema_version");
  sc.name = get_or<std::string>(doc, "name", "unnamed");
  sc.duration_s = require<double>(doc, "duration_s");
  sc.plant_dt_s = get_or<double>(doc, "plant_dt_s", 0.02);
  sc.replan_dt_s = get_or<double>(doc, "replan_dt_s", 0.5);
  sc.rng_seed = get_or<std::uint64_t>(doc, "rng_seed", 0);

  const json& veh = doc.contains("vehicle") ? doc.at("vehicle") : json::object();
  VehicleParams vp;
  vp.mass_kg = get_or(veh, "mass_kg", vp.mass_kg);
  vp.drag_coeff = get_or(veh, "drag_coeff", vp.drag_coeff);
  vp.frontal_area_m2 = get_or(veh, "frontal_area_m2", vp.frontal_area_m2);
  vp.rolling_mu = get_or(veh, "rolling_mu", vp.rolling_mu);
  vp.p_opt_w = get_or(veh, "p_opt_w", vp.p_opt_w);
  vp.p2_w = get_or(veh, "p2_w", vp.p2_w);
  vp.pm_w = get_or(veh, "pm_w", vp.pm_w);
  vp.p_regen_max_w = get_or(veh, "p_regen_max_w", vp.p_regen_max_w);
  vp.f_brake_max_n = get_or(veh, "f_brake_max_n", vp.f_brake_max_n);
  vp.regen_decel_min_ms2 = get_or(veh, "regen_decel_min_ms2", vp.regen_decel_min_ms2);
  vp.regen_decel_max_ms2 = get_or(veh, "regen_decel_max_ms2", vp.regen_decel_max_ms2);
  vp.v_max_ms = get_or(veh, "v_max_ms", vp.v_max_ms);
  sc.vehicle = vp;

  const json& env = doc.contains("env") ? doc.at("env") : json::object();
  sc.env.air_density_kgm3 = get_or(env, "air_density_kgm3", 1.225);
  sc.env.gravity_ms2 = get_or(env, "gravity_ms2", 9.81);
  if (env.contains("slope_breakpoints")) {
    std::vector<double> ss, th;
    for (const auto& bp : env.at("slope_breakpoints")) {
      if (!bp.is_array() || bp.size() != 2)
        throw std::invalid_argument(
            "scenario field 'env.slope_breakpoints': expected [s, theta] pairs");
      ss.push_back(bp[0].get<double>());
      th.push_back(bp[1].get<double>());
    }
    try {
      sc.env.slope = SlopeProfile(ss, th);
    } catch (const std::exception& e) {
      throw std::invalid_argument(
          std::string("scenario field 'env.slope_breakpoints': ") + e.what());
    }
  }

  sc.road_half_width_m = get_or(doc, "road_half_width_m", 3.5);
  sc.vehicle_half_width_m = get_or(doc, "vehicle_half_width_m", 0.9);

  for (const auto& wp : require<json>(doc, "global_path"))
    sc.global_path.push_back(vec2_from_json(wp, "global_path"));

  if (doc.contains("obstacles")) {
    for (const auto& ob : doc.at("obstacles")) {
      ObstacleSpec spec;
      std::string kind = require<std::string>(ob, "kind");
      if (kind == "static_box") {
        spec.kind = ObstacleSpec::Kind::StaticBox;
        spec.center = vec2_from_json(require<json>(ob, "center"), "obstacles.center");
        spec.half_length = require<double>(ob, "half_length");
        spec.half_width = require<double>(ob, "half_width");
      } else if (kind == "moving_particle") {
        spec.kind = ObstacleSpec::Kind::MovingParticle;
        spec.start_xy = vec2_from_json(require<json>(ob, "start_xy"), "obstacles.start_xy");
        spec.velocity_xy =
            vec2_from_json(require<json>(ob, "velocity_xy"), "obstacles.velocity_xy");
        spec.radius = require<double>(ob, "radius");
      } else {
        throw std::invalid_argument("scenario field 'obstacles.kind': unknown kind '" +
                                    kind + "'");
      }
      sc.obstacles.push_back(spec);
    }
  }

  if (doc.contains("events")) {
    for (const auto& ev : doc.at("events")) {
      EventSpec spec;
      spec.t = require<double>(ev, "t");
      std::string type = require<std::string>(ev, "type");
      if (type == "target_speed")
        spec.type = EventSpec::Type::TargetSpeed;
      else if (type == "stop_wall")
        spec.type = EventSpec::Type::StopWall;
      else
        throw std::invalid_argument("scenario field 'events.type': unknown type '" +
                                    type + "'");
      spec.value = require<double>(ev, "value");
      sc.events.push_back(spec);
    }
  }

  sc.start_s = get_or(doc, "start_s", 0.0);
  sc.start_v = get_or(doc, "start_v", 0.0);
  sc.start_l = get_or(doc, "start_l", 0.0);
  sc.speed_limit_ms = get_or(doc, "speed_limit_ms", sc.vehicle.v_max_ms);

  if (doc.contains("planner")) {
    const json& pl = doc.at("planner");
    auto& p = sc.planner;
    p.path.w_obs = get_or(pl, "path_w_obs", p.path.w_obs);
    p.path.w_sm = get_or(pl, "path_w_sm", p.path.w_sm);
    p.path.w_re = get_or(pl, "path_w_re", p.path.w_re);
    p.path.w1 = get_or(pl, "path_w1", p.path.w1);
    p.path.w2 = get_or(pl, "path_w2", p.path.w2);
    p.path.w3 = get_or(pl, "path_w3", p.path.w3);
    p.path.w4 = get_or(pl, "path_w4", p.path.w4);
    p.path.obstacle_ramp_gain = get_or(pl, "path_obstacle_ramp_gain", p.path.obstacle_ramp_gain);
    p.speed.w_ref_speed = get_or(pl, "speed_w_ref", p.speed.w_ref_speed);
    p.speed.w_acc = get_or(pl, "speed_w_acc", p.speed.w_acc);
    p.speed.w_je = get_or(pl, "speed_w_je", p.speed.w_je);
    p.speed.w1 = get_or(pl, "speed_w1", p.speed.w1);
    p.speed.w2 = get_or(pl, "speed_w2", p.speed.w2);
    p.speed.w3 = get_or(pl, "speed_w3", p.speed.w3);
    p.speed.d1 = get_or(pl, "speed_d1", p.speed.d1);
    p.speed.d2 = get_or(pl, "speed_d2", p.speed.d2);
    p.speed.k_obs = get_or(pl, "speed_k_obs", p.speed.k_obs);
    p.smooth.fidelity = get_or(pl, "smooth_fidelity", p.smooth.fidelity);
    p.smooth.first_diff = get_or(pl, "smooth_first_diff", p.smooth.first_diff);
    p.smooth.second_diff = get_or(pl, "smooth_second_diff", p.smooth.second_diff);
    p.smooth.resample_ds = get_or(pl, "smooth_resample_ds", p.smooth.resample_ds);
    p.window_behind_m = get_or(pl, "window_behind_m", p.window_behind_m);
    p.window_ahead_m = get_or(pl, "window_ahead_m", p.window_ahead_m);
    p.path_lookahead_m = get_or(pl, "path_lookahead_m", p.path_lookahead_m);
    p.path_station_ds = get_or(pl, "path_station_ds", p.path_station_ds);
    p.path_offset_dl = get_or(pl, "path_offset_dl", p.path_offset_dl);
    p.path_qp_ds = get_or(pl, "path_qp_ds", p.path_qp_ds);
    p.speed_dt = get_or(pl, "speed_dt", p.speed_dt);
    p.speed_horizon_s = get_or(pl, "speed_horizon_s", p.speed_horizon_s);
    p.speed_ds = get_or(pl, "speed_ds", p.speed_ds);
    p.speed_corridor_width_m = get_or(pl, "speed_corridor_width_m", p.speed_corridor_width_m);
    p.st_obstacle_margin_m = get_or(pl, "st_obstacle_margin_m", p.st_obstacle_margin_m);
    p.stop_wall_margin_m = get_or(pl, "stop_wall_margin_m", p.stop_wall_margin_m);
    p.freeze_v_ref_per_cycle = get_or(pl, "freeze_v_ref_per_cycle", p.freeze_v_ref_per_cycle);
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

std::string scenario_to_json_text(const Scenario& sc) {
  json doc;
  doc["schema_version"] = sc.schema_version;
  doc["name"] = sc.name;
  doc["duration_s"] = sc.duration_s;
  doc["plant_dt_s"] = sc.plant_dt_s;
  doc["replan_dt_s"] = sc.replan_dt_s;
  doc["rng_seed"] = sc.rng_seed;
  json veh;
  veh["mass_kg"] = sc.vehicle.mass_kg;
  veh["drag_coeff"] = sc.vehicle.drag_coeff;
  veh["frontal_area_m2"] = sc.vehicle.frontal_area_m2;
  veh["rolling_mu"] = sc.vehicle.rolling_mu;
  veh["p_opt_w"] = sc.vehicle.p_opt_w;
  veh["p2_w"] = sc.vehicle.p2_w;
  veh["pm_w"] = sc.vehicle.pm_w;
  veh["p_regen_max_w"] = sc.vehicle.p_regen_max_w;
  veh["f_brake_max_n"] = sc.vehicle.f_brake_max_n;
  veh["regen_decel_min_ms2"] = sc.vehicle.regen_decel_min_ms2;
  veh["regen_decel_max_ms2"] = sc.vehicle.regen_decel_max_ms2;
  veh["v_max_ms"] = sc.vehicle.v_max_ms;
  doc["vehicle"] = veh;
  json env;
  env["air_density_kgm3"] = sc.env.air_density_kgm3;
  env["gravity_ms2"] = sc.env.gravity_ms2;
  json bps = json::array();
  for (std::size_t i = 0; i < sc.env.slope.breakpoints_s().size(); ++i)
    bps.push_back(json::array({sc.env.slope.breakpoints_s()[i],
                               sc.env.slope.breakpoints_theta()[i]}));
  env["slope_breakpoints"] = bps;
  doc["env"] = env;
  doc["road_half_width_m"] = sc.road_half_width_m;
  doc["vehicle_half_width_m"] = sc.vehicle_half_width_m;
  json path = json::array();
  for (const auto& wp : sc.global_path) path.push_back(vec2_to_json(wp));
  doc["global_path"] = path;
  json obstacles = json::array();
  for (const auto& ob : sc.obstacles) {
    json o;
    if (ob.kind == ObstacleSpec::Kind::StaticBox) {
      o["kind"] = "static_box";
      o["center"] = vec2_to_json(ob.center);
      o["half_length"] = ob.half_length;
      o["half_width"] = ob.half_width;
    } else {
      o["kind"] = "moving_particle";
      o["start_xy"] = vec2_to_json(ob.start_xy);
      o["velocity_xy"] = vec2_to_json(ob.velocity_xy);
      o["radius"] = ob.radius;
    }
    obstacles.push_back(o);
  }
  doc["obstacles"] = obstacles;
  json events = json::array();
  for (const auto& ev : sc.events) {
    json e;
    e["t"] = ev.t;
    e["type"] = ev.type == EventSpec::Type::TargetSpeed ? "target_speed" : "stop_wall";
    e["value"] = ev.value;
    events.push_back(e);
  }
  doc["events"] = events;
  doc["start_s"] = sc.start_s;
  doc["start_v"] = sc.start_v;
  doc["start_l"] = sc.start_l;
  doc["speed_limit_ms"] = sc.speed_limit_ms;
  json pl;
  pl["path_w_obs"] = sc.planner.path.w_obs;
  pl["path_w_sm"] = sc.planner.path.w_sm;
  pl["path_w_re"] = sc.planner.path.w_re;
  pl["path_w1"] = sc.planner.path.w1;
  pl["path_w2"] = sc.planner.path.w2;
  pl["path_w3"] = sc.planner.path.w3;
  pl["path_w4"] = sc.planner.path.w4;
  pl["path_obstacle_ramp_gain"] = sc.planner.path.obstacle_ramp_gain;
  pl["speed_w_ref"] = sc.planner.speed.w_ref_speed;
  pl["speed_w_acc"] = sc.planner.speed.w_acc;
  pl["speed_w_je"] = sc.planner.speed.w_je;
  pl["speed_w1"] = sc.planner.speed.w1;
  pl["speed_w2"] = sc.planner.speed.w2;
  pl["speed_w3"] = sc.planner.speed.w3;
  pl["speed_d1"] = sc.planner.speed.d1;
  pl["speed_d2"] = sc.planner.speed.d2;
  pl["speed_k_obs"] = sc.planner.speed.k_obs;
  pl["smooth_fidelity"] = sc.planner.smooth.fidelity;
  pl["smooth_first_diff"] = sc.planner.smooth.first_diff;
  pl["smooth_second_diff"] = sc.planner.smooth.second_diff;
  pl["smooth_resample_ds"] = sc.planner.smooth.resample_ds;
  pl["window_behind_m"] = sc.planner.window_behind_m;
  pl["window_ahead_m"] = sc.planner.window_ahead_m;
  pl["path_lookahead_m"] = sc.planner.path_lookahead_m;
  pl["path_station_ds"] = sc.planner.path_station_ds;
  pl["path_offset_dl"] = sc.planner.path_offset_dl;
  pl["path_qp_ds"] = sc.planner.path_qp_ds;
  pl["speed_dt"] = sc.planner.speed_dt;
  pl["speed_horizon_s"] = sc.planner.speed_horizon_s;
  pl["speed_ds"] = sc.planner.speed_ds;
  pl["speed_corridor_width_m"] = sc.planner.speed_corridor_width_m;
  pl["st_obstacle_margin_m"] = sc.planner.st_obstacle_margin_m;
  pl["stop_wall_margin_m"] = sc.planner.stop_wall_margin_m;
  pl["freeze_v_ref_per_cycle"] = sc.planner.freeze_v_ref_per_cycle;
  doc["planner"] = pl;
  return doc.dump(2) + "\n";
}

std::string Scenario::canonical_json() const { return scenario_to_json_text(*this); }

std::uint64_t Scenario::identity_hash() const {
  return fnv1a(canonical_json());
}

std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario parse error: ") + e.what());
  }
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override '" + kv + "': expected key=value");
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);

    // Walk the dotted path.
    json* node = &doc;
    std::size_t pos = 0;
    std::string leaf;
    while (true) {
      auto dot = key.find('.', pos);
      std::string part = key.substr(pos, dot - pos);
      if (dot == std::string::npos) {
        leaf = part;
        break;
      }
      if (!node->contains(part))
        throw std::invalid_argument("override key '" + key + "': unknown field '" +
                                    part + "'");
      node = &node->at(part);
      pos = dot + 1;
    }
    if (!node->is_object() || !node->contains(leaf))
      throw std::invalid_argument("override key '" + key + "': unknown field '" +
                                  leaf + "'");
    json& slot = node->at(leaf);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // bare strings
    }
    auto kindof = [](const json& j) {
      if (j.is_number()) return 0;
      if (j.is_boolean()) return 1;
      if (j.is_string()) return 2;
      return 3;
    };
    if (kindof(parsed) != kindof(slot))
      throw std::invalid_argument("override key '" + key +
                                  "': type mismatch against schema");
    slot = parsed;
  }
  return doc.dump();
}

}  // namespace ecoplan
