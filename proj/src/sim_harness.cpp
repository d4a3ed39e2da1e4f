#include "ecoplan/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecoplan {

const char* planner_name(PlannerKind k) {
  return k == PlannerKind::ehmpp ? "ehmpp" : "baseline";
}

LongitudinalState step_plant(const LongitudinalState& state,
                             double commanded_accel, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  LongitudinalState next;
  next.v_ms = std::max(0.0, state.v_ms + commanded_accel * dt);
  next.s_m = state.s_m + next.v_ms * dt;
  next.a_ms2 = (next.v_ms - state.v_ms) / dt;
  return next;
}

namespace {

constexpr double kStopTaperDecel = 1.5;  // shared stopping envelope, m/s^2
constexpr double kEndMargin = 5.0;       // stop simulating this close to the end

struct ActivePlan {
  double t_plan = 0.0;           // wall-clock time the plan was made
  double s_line_at_plan = 0.0;   // ego line-local arc at plan time
  double line_offset = 0.0;      // global arc of the window start
  std::optional<ReferenceLine> line;
  std::optional<PathProfile> path;
  std::optional<SpeedProfile> speed;
};

// Lateral state carried between cycles.
struct LateralState {
  double l = 0.0;
  double dl = 0.0;
  double ddl = 0.0;
};

struct BehaviorState {
  double v_event = 0.0;            // latest target-speed directive
  std::optional<double> wall_s;    // nearest active stop wall (global s)
};

BehaviorState behavior_at(const Scenario& sc, double t, double ego_s) {
  BehaviorState b;
  b.v_event = sc.speed_limit_ms;
  double latest = -1.0;
  for (const auto& ev : sc.events) {
    if (ev.t > t) continue;
    if (ev.type == EventSpec::Type::TargetSpeed) {
      if (ev.t >= latest) {
        latest = ev.t;
        b.v_event = ev.value;
      }
    } else if (ev.type == EventSpec::Type::StopWall) {
      if (ev.value > ego_s && (!b.wall_s || ev.value < *b.wall_s))
        b.wall_s = ev.value;
    }
  }
  return b;
}

}  // namespace

RunResult run_closed_loop(const Scenario& sc, PlannerKind kind) {
  sc.validate();
  RunResult out;
  out.kind = kind;

  GlobalPath global{sc.global_path};
  const double path_len = global.length();
  const auto& p = sc.vehicle;
  const auto& env = sc.env;
  const auto& cfg = sc.planner;

  // Clamp slope queries launched from lookahead positions that overshoot the
  // profile domain by resampling error.
  auto slope_safe_s = [&](double s) {
    return std::clamp(s, env.slope.s_min(), env.slope.s_max());
  };

  LongitudinalState state{sc.start_s, sc.start_v, 0.0};
  LateralState lat{sc.start_l, 0.0, 0.0};
  ActivePlan plan;
  int infeasible_streak = 0;
  bool emergency = false;

  out.trace.plant_dt = sc.plant_dt_s;
  out.trace.scenario_hash = sc.identity_hash();
  out.report.scenario_hash = out.trace.scenario_hash;

  const int replan_every =
      std::max(1, static_cast<int>(std::round(sc.replan_dt_s / sc.plant_dt_s)));
  const int n_ticks =
      static_cast<int>(std::round(sc.duration_s / sc.plant_dt_s));

  std::vector<PowerSample> power;
  power.reserve(static_cast<std::size_t>(n_ticks));

  double cruise_gap_sum = 0.0;
  int cruise_gap_count = 0;
  PhaseLabel cycle_phase = PhaseLabel::Cruise;

  // Obstacle SL footprints on the raw global path, for the safety audit.
  struct AuditObstacle {
    bool moving = false;
    double s_lo = 0, s_hi = 0, l_lo = 0, l_hi = 0;  // static
    const ObstacleSpec* spec = nullptr;
  };
  std::vector<AuditObstacle> audit_obs;
  for (const auto& ob : sc.obstacles) {
    AuditObstacle ao;
    ao.spec = &ob;
    if (ob.kind == ObstacleSpec::Kind::StaticBox) {
      double s_lo = 1e18, s_hi = -1e18, l_lo = 1e18, l_hi = -1e18;
      for (const auto& c : ob.polygon()) {
        double s = polyline_project_s(global.points, c);
        Eigen::Vector2d foot = polyline_point_at(global.points, s);
        Eigen::Vector2d next = polyline_point_at(global.points, std::min(path_len, s + 0.5));
        Eigen::Vector2d tan = (next - foot).normalized();
        Eigen::Vector2d nrm(-tan.y(), tan.x());
        double l = (c - foot).dot(nrm);
        s_lo = std::min(s_lo, s); s_hi = std::max(s_hi, s);
        l_lo = std::min(l_lo, l); l_hi = std::max(l_hi, l);
      }
      ao.s_lo = s_lo; ao.s_hi = s_hi; ao.l_lo = l_lo; ao.l_hi = l_hi;
    } else {
      ao.moving = true;
    }
    audit_obs.push_back(ao);
  }

  auto plan_cycle = [&](double t) {
    CycleDiag diag;
    diag.t = t;

    Eigen::Vector2d center = polyline_point_at(global.points, state.s_m);
    Eigen::Vector2d ahead =
        polyline_point_at(global.points, std::min(path_len, state.s_m + 0.5));
    Eigen::Vector2d tan = (ahead - center).normalized();
    Eigen::Vector2d nrm(-tan.y(), tan.x());
    Eigen::Vector2d ego_xy = center + lat.l * nrm;

    WindowResult window = extract_window_info(global, ego_xy, cfg.window_behind_m,
                                              cfg.window_ahead_m);
    SmoothResult smooth = smooth_reference(window.path, cfg.smooth);
    diag.smooth_fallback = smooth.qp_fallback;
    for (std::size_t i = 0; i < smooth.qp_solutions.size(); ++i) {
      const auto& qs = smooth.qp_solutions[i];
      diag.qps.push_back(QpCert{i == 0 ? "refline_x" : "refline_y", qs.status,
                                qs.primal_residual, qs.dual_residual, 0.0, 0.0,
                                false});
    }
    const ReferenceLine& line = smooth.line;
    FrenetPoint ego_fp = to_frenet(ego_xy, line);
    const double s_e = ego_fp.s;
    const double line_offset = window.start_s;

    BehaviorState behavior = behavior_at(sc, t, state.s_m);

    auto v_ref_global = [&, behavior](double s_g) {
      double base = std::min(behavior.v_event, sc.speed_limit_ms);
      if (kind == PlannerKind::ehmpp) {
        CruiseSpeedResult vo = optimal_cruise_speed(slope_safe_s(s_g), env, p);
        base = std::min(base, vo.v_ms);
      }
      if (behavior.wall_s) {
        double gap = std::max(0.0, *behavior.wall_s - s_g);
        base = std::min(base, std::sqrt(2.0 * kStopTaperDecel * gap));
      }
      return std::min(base, p.v_max_ms);
    };

    double v_target = v_ref_global(state.s_m);
    bool stop_required = false;
    if (behavior.wall_s) {
      double trigger = state.v_ms * state.v_ms / (2.0 * kStopTaperDecel) + 20.0;
      stop_required = (*behavior.wall_s - state.s_m) < trigger;
    }
    cycle_phase = classify_phase(state.v_ms, v_target, stop_required);
    diag.phase = cycle_phase;

    // --- path stage ---
    std::vector<SLObstacle> sl_obstacles;
    for (const auto& ob : sc.obstacles) {
      if (ob.kind == ObstacleSpec::Kind::StaticBox) {
        SLRegion r = project_polygon_sl(ob.polygon(), line);
        if (!r.empty)
          sl_obstacles.push_back(SLObstacle{r.s_lo, r.s_hi, r.l_lo, r.l_hi});
      } else {
        Eigen::Vector2d pos = ob.position_at(t);
        FrenetPoint fp = to_frenet(pos, line);
        if (fp.s > 1e-6 && fp.s < line.length() - 1e-6)
          sl_obstacles.push_back(SLObstacle{fp.s - ob.radius, fp.s + ob.radius,
                                            fp.l - ob.radius, fp.l + ob.radius});
      }
    }

    PathCostWeights pw = cfg.path;
    double a_stop = max_stopping_decel(state, env, p);
    pw.d2 = min_brake_distance(state.v_ms, 0.0, a_stop);
    pw.d1 = pw.d2 + 10.0;

    const double road_bound = sc.road_half_width_m - sc.vehicle_half_width_m;
    double look_end = std::min(s_e + cfg.path_lookahead_m, line.length());
    PathKnot start_knot{s_e, ego_fp.l, lat.dl, lat.ddl};

    std::optional<double> virtual_wall;  // line-local s
    PathProfile path_profile;
    try {
      SLGridConfig gc;
      gc.station_ds = cfg.path_station_ds;
      gc.offset_dl = cfg.path_offset_dl;
      SLGrid grid = make_sl_grid(s_e, look_end, -road_bound, road_bound,
                                 sl_obstacles, gc);
      PathDpResult dp = dp_search(grid, start_knot, pw);
      diag.path_dp_cost = dp.cost;
      Corridor corridor = build_corridor(dp.profile, grid, cfg.path_qp_ds,
                                         sc.vehicle_half_width_m);
      diag.corridor_l_min = *std::min_element(corridor.l_lo.begin(), corridor.l_lo.end());
      diag.corridor_l_max = *std::max_element(corridor.l_hi.begin(), corridor.l_hi.end());
      PathQpResult qr = qp_refine(corridor, dp.profile, start_knot, pw);
      diag.qps.push_back(QpCert{"path", qr.qp.status, qr.qp.primal_residual,
                                qr.qp.dual_residual, qr.coarse_objective,
                                qr.refined_objective, qr.fell_back});
      path_profile = qr.profile;
    } catch (const PlannerError&) {
      // Blocked or collapsed: hold the current offset and stop short of the
      // nearest obstacle ahead instead.
      diag.path_blocked = true;
      PathKnot end_knot{look_end, ego_fp.l, 0.0, 0.0};
      path_profile = profile_from_knots({start_knot, end_knot});
      double nearest = 1e18;
      for (const auto& ob : sl_obstacles)
        if (ob.s_hi > s_e) nearest = std::min(nearest, ob.s_lo);
      if (nearest < 1e17)
        virtual_wall = nearest - cfg.stop_wall_margin_m;
    }

    // --- speed stage ---
    STGraph graph;
    graph.dt = cfg.speed_dt;
    graph.num_steps =
        std::max(2, static_cast<int>(std::round(cfg.speed_horizon_s / cfg.speed_dt)));
    graph.ds = cfg.speed_ds;
    double s_room = std::max(2.0 * graph.ds,
                             std::min(p.v_max_ms * cfg.speed_horizon_s,
                                      line.length() - s_e - 1.0));
    graph.num_stations = std::max(2, static_cast<int>(std::floor(s_room / graph.ds)));

    auto lateral_conflict = [&](double s_line, double l_obs, double half_extent) {
      double s_clamped = std::clamp(s_line, path_profile.s_front(), path_profile.s_back());
      double path_l = path_profile.eval(s_clamped);
      return std::abs(l_obs - path_l) <=
             half_extent + sc.vehicle_half_width_m + 0.2;
    };

    for (const auto& ob : sc.obstacles) {
      if (ob.kind == ObstacleSpec::Kind::StaticBox) {
        SLRegion r = project_polygon_sl(ob.polygon(), line);
        if (r.empty || r.s_hi < s_e) continue;
        double mid_l = 0.5 * (r.l_lo + r.l_hi);
        double half_w = 0.5 * (r.l_hi - r.l_lo);
        double mid_s = 0.5 * (r.s_lo + r.s_hi);
        if (!lateral_conflict(mid_s, mid_l, half_w)) continue;
        STObstacle st;
        st.t = {0.0, graph.t_horizon()};
        st.s = {mid_s - s_e, mid_s - s_e};
        st.radius = 0.5 * (r.s_hi - r.s_lo) + cfg.st_obstacle_margin_m;
        graph.obstacles.push_back(st);
      } else {
        auto traj = project_particle_st(ob.start_xy, ob.velocity_xy, t,
                                        graph.t_horizon(), graph.dt, line);
        STObstacle st;
        st.radius = ob.radius + cfg.st_obstacle_margin_m;
        for (const auto& smp : traj) {
          if (!lateral_conflict(smp.s, smp.l, ob.radius)) continue;
          st.t.push_back(smp.t);
          st.s.push_back(smp.s - s_e);
        }
        if (!st.t.empty()) graph.obstacles.push_back(st);
      }
    }
    if (behavior.wall_s) {
      STObstacle st;
      st.t = {0.0, graph.t_horizon()};
      double rel = *behavior.wall_s - line_offset - s_e;
      st.s = {rel, rel};
      st.radius = 0.0;
      graph.obstacles.push_back(st);
    }
    if (virtual_wall) {
      STObstacle st;
      st.t = {0.0, graph.t_horizon()};
      st.s = {*virtual_wall - s_e, *virtual_wall - s_e};
      st.radius = 0.0;
      graph.obstacles.push_back(st);
    }

    SpeedPlanContext ctx;
    if (cfg.freeze_v_ref_per_cycle) {
      double frozen = v_ref_global(state.s_m);
      ctx.v_ref = [frozen](double) { return frozen; };
    } else {
      ctx.v_ref = [&, line_offset, s_e, v_ref_global](double s_rel) {
        return v_ref_global(line_offset + s_e + s_rel);
      };
    }
    PhaseLabel phase = cycle_phase;
    ctx.a_target = [&, line_offset, s_e, phase](double s_rel, double v_node) {
      if (kind == PlannerKind::baseline) return 0.0;
      LongitudinalState node_state{slope_safe_s(line_offset + s_e + s_rel),
                                   v_node, 0.0};
      if (phase == PhaseLabel::Acceleration)
        return optimal_accel(node_state, env, p);
      return optimal_decel(node_state, env, p).a_ms2;
    };

    try {
      SpeedDpResult coarse = dp_speed_search(graph, cycle_phase, {state.v_ms, state.a_ms2},
                                             cfg.speed, ctx, a_stop, p.v_max_ms);
      diag.speed_dp_cost = coarse.cost;
      SpeedCorridor sc_corr = build_speed_corridor(graph, coarse.profile, cfg.speed,
                                                   cfg.speed_corridor_width_m);
      SpeedQpResult qr = qp_speed_refine(coarse.profile, cycle_phase, cfg.speed,
                                         sc_corr, ctx, a_stop, p.v_max_ms,
                                         {state.v_ms, state.a_ms2});
      diag.qps.push_back(QpCert{"speed", qr.qp.status, qr.qp.primal_residual,
                                qr.qp.dual_residual, qr.coarse_objective,
                                qr.refined_objective, qr.fell_back});
      plan.t_plan = t;
      plan.s_line_at_plan = s_e;
      plan.line_offset = line_offset;
      plan.line = line;
      plan.path = path_profile;
      plan.speed = qr.profile;
      infeasible_streak = 0;
    } catch (const PlannerError&) {
      diag.speed_infeasible = true;
      ++infeasible_streak;
      if (infeasible_streak >= 2 || !plan.speed) emergency = true;
    }
    out.trace.cycles.push_back(std::move(diag));
  };

  double kinetic0 = 0.5 * p.mass_kg * state.v_ms * state.v_ms;

  for (int tick = 0; tick < n_ticks; ++tick) {
    double t = tick * sc.plant_dt_s;
    if (state.s_m >= path_len - kEndMargin) break;

    if (tick % replan_every == 0 && !emergency) {
      try {
        plan_cycle(t);
      } catch (const std::exception&) {
        // Treat any cycle failure like an infeasible horizon.
        ++infeasible_streak;
        if (infeasible_streak >= 2 || !plan.speed) emergency = true;
        CycleDiag diag;
        diag.t = t;
        diag.speed_infeasible = true;
        out.trace.cycles.push_back(diag);
      }
    }

    // Commanded acceleration from the active plan (or the emergency policy).
    double a_cmd;
    if (emergency) {
      out.trace.emergency_stop = true;
      a_cmd = -max_stopping_decel(state, env, p);
    } else if (plan.speed) {
      a_cmd = plan.speed->a_at(t - plan.t_plan);
    } else {
      a_cmd = 0.0;
    }

    // Clip to dynamic limits, split channels, step the plant.
    double s_eff = slope_safe_s(state.s_m);
    ForceBreakdown res = resistive_forces(s_eff, state.v_ms, env, p);
    double resistance = res.air_n + res.friction_n + res.slope_n;
    double a_floor = -max_stopping_decel(state, env, p);
    a_cmd = std::max(a_cmd, a_floor);

    double traction_f = 0.0, regen_f = 0.0, brake_f = 0.0;
    double regen_decel_cmd = 0.0;
    double f_needed = p.mass_kg * a_cmd + resistance;
    if (state.v_ms <= 0.0 && a_cmd <= 0.0) {
      // At rest with no drive demand; nothing moves and nothing dissipates.
      resistance = 0.0;
    } else if (f_needed >= 0.0) {
      traction_f = std::min(f_needed, p.p2_w / std::max(state.v_ms, kSpeedFloor));
    } else {
      double demand = -f_needed / p.mass_kg;  // decel beyond natural drag
      auto [rf, bf] = regen_force_split(state.v_ms, demand, p);
      regen_f = rf;
      brake_f = std::min(bf, p.f_brake_max_n);
      regen_decel_cmd = demand >= p.regen_decel_min_ms2
                            ? std::min(demand, p.regen_decel_max_ms2)
                            : 0.0;
    }
    double a_act =
        (traction_f - regen_f - brake_f - resistance) / p.mass_kg;

    LongitudinalState next = step_plant(state, a_act, sc.plant_dt_s);
    double v_bar = 0.5 * (state.v_ms + next.v_ms);
    double a_real = next.a_ms2;  // includes the v >= 0 clamp

    out.audit.traction_j += traction_f * v_bar * sc.plant_dt_s;
    out.audit.resistive_j += resistance * v_bar * sc.plant_dt_s;
    out.audit.regen_j += regen_f * v_bar * sc.plant_dt_s;
    out.audit.brake_j += brake_f * v_bar * sc.plant_dt_s;
    if (regen_decel_cmd > 0.0)
      out.safety.regen_decel_commands.push_back(regen_decel_cmd);

    // Lateral follow of the active path plan.
    if (plan.path) {
      double s_on_line = std::clamp(next.s_m - plan.line_offset,
                                    plan.path->s_front(), plan.path->s_back());
      lat.l = plan.path->eval(s_on_line);
      lat.dl = plan.path->eval(s_on_line, 1);
      lat.ddl = plan.path->eval(s_on_line, 2);
    }

    TraceTick tk;
    tk.t = t;
    tk.s = next.s_m;
    tk.l = lat.l;
    tk.v = next.v_ms;
    tk.a = a_real;
    tk.phase = cycle_phase;
    tk.traction_w = traction_f * v_bar;
    tk.regen_w = regen_f * v_bar;
    tk.brake_w = brake_f * v_bar;
    if (plan.line) {
      double s_on_line = std::clamp(next.s_m - plan.line_offset, 0.0,
                                    plan.line->length());
      Eigen::Vector2d xy = to_cartesian({s_on_line, lat.l}, *plan.line);
      tk.x = xy.x();
      tk.y = xy.y();
    } else {
      Eigen::Vector2d xy = polyline_point_at(global.points, next.s_m);
      tk.x = xy.x();
      tk.y = xy.y();
    }
    out.trace.ticks.push_back(tk);

    power.push_back(PowerSample{t, v_bar, a_real, tk.traction_w, tk.regen_w,
                                tk.brake_w});

    if (cycle_phase == PhaseLabel::Cruise) {
      cruise_gap_sum += std::abs(tk.traction_w - p.p_opt_w);
      ++cruise_gap_count;
    }

    // Safety audit versus every obstacle footprint.
    for (const auto& ao : audit_obs) {
      double ob_s_lo, ob_s_hi, ob_l_lo, ob_l_hi;
      if (ao.moving) {
        Eigen::Vector2d pos = ao.spec->position_at(t);
        double s = polyline_project_s(global.points, pos);
        Eigen::Vector2d foot = polyline_point_at(global.points, s);
        Eigen::Vector2d ahead2 =
            polyline_point_at(global.points, std::min(path_len, s + 0.5));
        Eigen::Vector2d tan2 = (ahead2 - foot).normalized();
        Eigen::Vector2d nrm2(-tan2.y(), tan2.x());
        double l = (pos - foot).dot(nrm2);
        ob_s_lo = s - ao.spec->radius;
        ob_s_hi = s + ao.spec->radius;
        ob_l_lo = l - ao.spec->radius;
        ob_l_hi = l + ao.spec->radius;
      } else {
        ob_s_lo = ao.s_lo; ob_s_hi = ao.s_hi;
        ob_l_lo = ao.l_lo; ob_l_hi = ao.l_hi;
      }
      double ego_lo = tk.l - sc.vehicle_half_width_m;
      double ego_hi = tk.l + sc.vehicle_half_width_m;
      bool lateral_overlap = !(ego_hi < ob_l_lo || ego_lo > ob_l_hi);
      if (lateral_overlap) {
        double gap = std::max({ob_s_lo - tk.s, tk.s - ob_s_hi, 0.0});
        out.safety.min_conflict_gap_m = std::min(out.safety.min_conflict_gap_m, gap);
        if (gap < cfg.speed.d2) ++out.safety.conflict_violations;
      } else if (tk.s >= ob_s_lo && tk.s <= ob_s_hi) {
        double lat_gap = ego_lo > ob_l_hi ? ego_lo - ob_l_hi : ob_l_lo - ego_hi;
        out.safety.min_lateral_gap_m = std::min(out.safety.min_lateral_gap_m, lat_gap);
        if (lat_gap < 0.0) ++out.safety.contact_violations;
      }
    }

    state = next;
  }

  if (power.size() >= 2) {
    EnergyReport rep = integrate_energy(power);
    rep.scenario_hash = out.trace.scenario_hash;
    out.report = rep;
  }
  out.audit.delta_kinetic_j =
      0.5 * p.mass_kg * state.v_ms * state.v_ms - kinetic0;
  double lhs = out.audit.traction_j;
  double rhs = out.audit.delta_kinetic_j + out.audit.resistive_j +
               out.audit.regen_j + out.audit.brake_j;
  double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
  out.audit.relative_imbalance = std::abs(lhs - rhs) / scale;
  out.cruise_power_gap_w =
      cruise_gap_count > 0 ? cruise_gap_sum / cruise_gap_count : 0.0;

  if (plan.line) {
    out.last_refline = plan.line->points();
    out.last_refline_offset_s = plan.line_offset;
  }
  if (plan.path) {
    out.last_path = plan.path;
    out.last_path_offset_s = plan.line_offset;
  }
  if (plan.speed) {
    out.last_speed = plan.speed;
    out.last_speed_offset_s = plan.line_offset + plan.s_line_at_plan;
  }
  return out;
}

ComparisonResult run_comparison(const Scenario& sc) {
  ComparisonResult out;
  out.ehmpp = run_closed_loop(sc, PlannerKind::ehmpp);
  out.baseline = run_closed_loop(sc, PlannerKind::baseline);
  out.summary = compare_reports(out.baseline.report, out.ehmpp.report);
  out.ehmpp_regen_per_m = out.ehmpp.report.distance_m > 0
                              ? out.ehmpp.report.regen_energy_j / out.ehmpp.report.distance_m
                              : 0.0;
  out.baseline_regen_per_m =
      out.baseline.report.distance_m > 0
          ? out.baseline.report.regen_energy_j / out.baseline.report.distance_m
          : 0.0;
  return out;
}

}  // namespace ecoplan
