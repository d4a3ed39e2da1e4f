#include "ecoplan/path_planner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace ecoplan {

void PathCostWeights::validate() const {
  if (w_obs < 0 || w_sm < 0 || w_re < 0 || w1 < 0 || w2 < 0 || w3 < 0 || w4 < 0)
    throw std::invalid_argument("path weights must be nonnegative");
  if (w_sm < 10.0 * w_re)
    throw std::invalid_argument("w_sm must be >= 10 * w_re");
  if (!(d1 > d2 && d2 >= 0.0))
    throw std::invalid_argument("require d1 > d2 >= 0");
}

double SLGrid::clearance_at(double s, double l) const {
  double best = 1e9;
  for (const auto& ob : obstacles) {
    double ds = std::max({ob.s_lo - s, s - ob.s_hi, 0.0});
    double dl = std::max({ob.l_lo - l, l - ob.l_hi, 0.0});
    best = std::min(best, std::hypot(ds, dl));
  }
  return best;
}

void SLGrid::validate() const {
  if (stations.size() < 2) throw std::invalid_argument("grid needs >= 2 stations");
  if (offsets.size() != stations.size())
    throw std::invalid_argument("offsets per station mismatch");
  double ds = stations[1] - stations[0];
  for (std::size_t i = 1; i < stations.size(); ++i) {
    double d = stations[i] - stations[i - 1];
    if (!(d > 0) || std::abs(d - ds) > 1e-6 * std::max(1.0, ds))
      throw std::invalid_argument("station spacing must be uniform");
    if (offsets[i].empty())
      throw std::invalid_argument("each station needs >= 1 offset");
  }
}

SLGrid make_sl_grid(double s_start, double s_end, double road_l_min,
                    double road_l_max, const std::vector<SLObstacle>& obstacles,
                    const SLGridConfig& cfg) {
  if (!(s_end > s_start)) throw std::invalid_argument("empty station range");
  SLGrid grid;
  grid.obstacles = obstacles;
  grid.road_l_min = road_l_min;
  grid.road_l_max = road_l_max;

  int n_st = std::max(2, static_cast<int>(std::floor((s_end - s_start) / cfg.station_ds)) + 1);
  double ds = (s_end - s_start) / (n_st - 1);
  std::mt19937_64 rng(cfg.jitter_seed);
  std::uniform_real_distribution<double> jitter(-0.25 * cfg.offset_dl,
                                                0.25 * cfg.offset_dl);
  for (int i = 0; i < n_st; ++i) {
    grid.stations.push_back(s_start + i * ds);
    std::vector<double> row;
    if (i == 0) {
      row.push_back(0.0);  // start station holds the start knot only
    } else {
      for (double l = road_l_min; l <= road_l_max + 1e-9; l += cfg.offset_dl) {
        double v = l;
        if (cfg.jitter) v = std::clamp(l + jitter(rng), road_l_min, road_l_max);
        row.push_back(v);
      }
    }
    grid.offsets.push_back(std::move(row));
  }
  grid.clearance.resize(grid.stations.size());
  for (std::size_t i = 0; i < grid.stations.size(); ++i) {
    grid.clearance[i].resize(grid.offsets[i].size());
    for (std::size_t j = 0; j < grid.offsets[i].size(); ++j)
      grid.clearance[i][j] = grid.clearance_at(grid.stations[i], grid.offsets[i][j]);
  }
  return grid;
}

QuinticSegment quintic_connect(const PathKnot& a, const PathKnot& b) {
  double T = b.s - a.s;
  if (!(T > 1e-9)) throw std::domain_error("degenerate quintic: s_b <= s_a");

  QuinticSegment seg;
  seg.s0 = a.s;
  seg.s1 = b.s;
  seg.coef[0] = a.l;
  seg.coef[1] = a.dl;
  seg.coef[2] = 0.5 * a.ddl;

  // Remaining three coefficients from the end conditions.
  double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  Eigen::Matrix3d M;
  M << T3, T4, T5,
       3 * T2, 4 * T3, 5 * T4,
       6 * T, 12 * T2, 20 * T3;
  Eigen::Vector3d rhs(b.l - (seg.coef[0] + seg.coef[1] * T + seg.coef[2] * T2),
                      b.dl - (seg.coef[1] + 2.0 * seg.coef[2] * T),
                      b.ddl - 2.0 * seg.coef[2]);
  Eigen::Vector3d abc = M.colPivHouseholderQr().solve(rhs);
  seg.coef[3] = abc[0];
  seg.coef[4] = abc[1];
  seg.coef[5] = abc[2];
  return seg;
}

double QuinticSegment::eval(double s, int order) const {
  double x = s - s0;
  Poly<6> p{coef};
  for (int k = 0; k < order; ++k) p = poly_derivative(p);
  return p.eval(x);
}

PathProfile profile_from_knots(const std::vector<PathKnot>& knots) {
  if (knots.size() < 2) throw std::invalid_argument("profile needs >= 2 knots");
  PathProfile prof;
  prof.knots = knots;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    prof.segments.push_back(quintic_connect(knots[i], knots[i + 1]));
  return prof;
}

double PathProfile::eval(double s, int order) const {
  if (segments.empty()) throw std::logic_error("empty profile");
  std::size_t i = 0;
  while (i + 1 < segments.size() && s > segments[i].s1) ++i;
  return segments[i].eval(std::clamp(s, segments[i].s0, segments[i].s1), order);
}

double obstacle_cost(double clearance, const PathCostWeights& w) {
  if (clearance < 0.0) throw std::domain_error("clearance must be >= 0");
  if (clearance > w.d1) return 0.0;
  if (clearance < w.d2) return kInfiniteCost;
  return w.obstacle_ramp_gain * (w.d1 - clearance) / (w.d1 - w.d2);
}

namespace {

// int f^(k)(x)^2 dx over the segment, exact polynomial integration.
double squared_derivative_integral(const QuinticSegment& seg, int order) {
  Poly<6> p{seg.coef};
  for (int k = 0; k < order; ++k) p = poly_derivative(p);
  auto sq = poly_multiply(p, p);
  return poly_integral(sq, seg.s1 - seg.s0);
}

}  // namespace

double smoothness_cost(const QuinticSegment& seg, const PathCostWeights& w) {
  return w.w1 * squared_derivative_integral(seg, 1) +
         w.w2 * squared_derivative_integral(seg, 2) +
         w.w3 * squared_derivative_integral(seg, 3);
}

double smoothness_cost(const PathProfile& profile, const PathCostWeights& w) {
  double total = 0.0;
  for (const auto& seg : profile.segments) total += smoothness_cost(seg, w);
  return total;
}

double reference_cost(const QuinticSegment& seg) {
  return squared_derivative_integral(seg, 0);
}

double reference_cost(const PathProfile& profile) {
  double total = 0.0;
  for (const auto& seg : profile.segments) total += reference_cost(seg);
  return total;
}

double reference_cost(const PathProfile& f, const PathProfile& g) {
  if (f.segments.size() != g.segments.size())
    throw std::invalid_argument("profiles must share knot stations");
  double total = 0.0;
  for (std::size_t i = 0; i < f.segments.size(); ++i) {
    const auto& a = f.segments[i];
    const auto& b = g.segments[i];
    if (std::abs(a.s0 - b.s0) > 1e-9 || std::abs(a.s1 - b.s1) > 1e-9)
      throw std::invalid_argument("profiles must share knot stations");
    QuinticSegment diff = a;
    for (int k = 0; k < 6; ++k) diff.coef[static_cast<std::size_t>(k)] -= b.coef[static_cast<std::size_t>(k)];
    total += reference_cost(diff);
  }
  return total;
}

double segment_obstacle_cost(const QuinticSegment& seg, const SLGrid& grid,
                             const PathCostWeights& w) {
  double total = 0.0;
  double T = seg.s1 - seg.s0;
  for (int k = 1; k <= 5; ++k) {
    double s = seg.s0 + T * k / 5.0;
    double c = obstacle_cost(grid.clearance_at(s, seg.eval(s)), w);
    if (is_blocked(c)) return kInfiniteCost;
    total += c;
  }
  return total;
}

double path_transition_cost(const PathKnot& a, const PathKnot& b,
                            const SLGrid& grid, const PathCostWeights& w) {
  QuinticSegment seg = quintic_connect(a, b);
  double c_obs = segment_obstacle_cost(seg, grid, w);
  if (is_blocked(c_obs)) return kInfiniteCost;
  return w.w_obs * c_obs + w.w_sm * smoothness_cost(seg, w) +
         w.w_re * reference_cost(seg);
}

PathDpResult dp_search(const SLGrid& grid, const PathKnot& start,
                       const PathCostWeights& w, Exec exec) {
  grid.validate();
  w.validate();
  const int n_st = static_cast<int>(grid.stations.size());
  if (start.l < grid.road_l_min - 1e-9 || start.l > grid.road_l_max + 1e-9)
    throw std::invalid_argument("start offset outside first-station bounds");

  // cost[i][j]: best cost from the start to node j at station i.
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(n_st));
  std::vector<std::vector<int>> parent(static_cast<std::size_t>(n_st));
  std::vector<std::vector<PathKnot>> knot(static_cast<std::size_t>(n_st));
  for (int i = 0; i < n_st; ++i) {
    std::size_t m = grid.offsets[static_cast<std::size_t>(i)].size();
    cost[static_cast<std::size_t>(i)].assign(m, kInfiniteCost);
    parent[static_cast<std::size_t>(i)].assign(m, -1);
    knot[static_cast<std::size_t>(i)].resize(m);
    for (std::size_t j = 0; j < m; ++j)
      knot[static_cast<std::size_t>(i)][j] =
          PathKnot{grid.stations[static_cast<std::size_t>(i)],
                   grid.offsets[static_cast<std::size_t>(i)][j], 0.0, 0.0};
  }
  knot[0][0] = PathKnot{grid.stations[0], start.l, start.dl, start.ddl};
  cost[0][0] = 0.0;

  for (int i = 0; i + 1 < n_st; ++i) {
    const auto& src_cost = cost[static_cast<std::size_t>(i)];
    const auto& src_knot = knot[static_cast<std::size_t>(i)];
    auto& dst_cost = cost[static_cast<std::size_t>(i + 1)];
    auto& dst_parent = parent[static_cast<std::size_t>(i + 1)];
    const auto& dst_knot = knot[static_cast<std::size_t>(i + 1)];
    const int n_dst = static_cast<int>(dst_cost.size());
    const int n_src = static_cast<int>(src_cost.size());

    // Stage relaxation kernel: destinations are independent.
    auto relax = [&](int j) {
      double best = kInfiniteCost;
      int best_p = -1;
      for (int p = 0; p < n_src; ++p) {
        if (is_blocked(src_cost[static_cast<std::size_t>(p)])) continue;
        double trans = path_transition_cost(src_knot[static_cast<std::size_t>(p)],
                                            dst_knot[static_cast<std::size_t>(j)], grid, w);
        double total = src_cost[static_cast<std::size_t>(p)] + trans;
        if (total < best) {
          best = total;
          best_p = p;
        }
      }
      dst_cost[static_cast<std::size_t>(j)] = best;
      dst_parent[static_cast<std::size_t>(j)] = best_p;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
      for (int j = 0; j < n_dst; ++j) relax(j);
    } else {
      for (int j = 0; j < n_dst; ++j) relax(j);
    }
  }

  const auto& terminal = cost[static_cast<std::size_t>(n_st - 1)];
  int best_j = -1;
  double best_cost = kInfiniteCost;
  for (std::size_t j = 0; j < terminal.size(); ++j) {
    if (terminal[j] < best_cost) {
      best_cost = terminal[j];
      best_j = static_cast<int>(j);
    }
  }
  if (best_j < 0)
    throw PlannerError(PlannerError::Code::BlockedPath,
                       "all terminal path costs are infinite");

  PathDpResult result;
  result.cost = best_cost;
  result.node_indices.assign(static_cast<std::size_t>(n_st), 0);
  int j = best_j;
  for (int i = n_st - 1; i >= 0; --i) {
    result.node_indices[static_cast<std::size_t>(i)] = j;
    if (i > 0) j = parent[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  std::vector<PathKnot> knots;
  for (int i = 0; i < n_st; ++i)
    knots.push_back(knot[static_cast<std::size_t>(i)]
                        [static_cast<std::size_t>(result.node_indices[static_cast<std::size_t>(i)])]);
  result.profile = profile_from_knots(knots);
  return result;
}

void Corridor::validate() const {
  if (stations.size() < 2 || stations.size() != l_lo.size() ||
      stations.size() != l_hi.size() || stations.size() != dp_l.size())
    throw std::invalid_argument("corridor arrays mismatch");
  for (std::size_t i = 0; i < stations.size(); ++i)
    if (!(l_lo[i] < l_hi[i]))
      throw std::invalid_argument("corridor bound inverted");
}

Corridor build_corridor(const PathProfile& dp_profile, const SLGrid& grid,
                        double fine_ds, double vehicle_half_width) {
  Corridor c;
  double s0 = dp_profile.s_front();
  double s1 = dp_profile.s_back();
  int n = std::max(2, static_cast<int>(std::round((s1 - s0) / fine_ds)) + 1);
  for (int i = 0; i < n; ++i) {
    double s = s0 + (s1 - s0) * i / (n - 1);
    double g = dp_profile.eval(s);
    double lo = grid.road_l_min;
    double hi = grid.road_l_max;
    for (const auto& ob : grid.obstacles) {
      if (s < ob.s_lo || s > ob.s_hi) continue;
      if (g > ob.l_hi) {
        lo = std::max(lo, ob.l_hi + vehicle_half_width);
      } else if (g < ob.l_lo) {
        hi = std::min(hi, ob.l_lo - vehicle_half_width);
      } else {
        throw PlannerError(PlannerError::Code::CorridorCollapse,
                           "DP path runs through an obstacle region");
      }
    }
    if (!(lo < hi) || g < lo - 1e-9 || g > hi + 1e-9)
      throw PlannerError(PlannerError::Code::CorridorCollapse,
                         "corridor pinched shut at a station");
    c.stations.push_back(s);
    c.l_lo.push_back(lo);
    c.l_hi.push_back(std::max(hi, lo + 1e-6));
    c.dp_l.push_back(std::clamp(g, lo, hi));
  }
  c.validate();
  return c;
}

namespace {

// Objective of the discretized path QP evaluated at explicit knot samples:
// w1 sum dl^2 + w2 sum ddl^2 + w3 sum ((ddl_{i+1}-ddl_i)/ds)^2 +
// w4 sum (l - g)^2.
double discretized_path_objective(const std::vector<PathKnot>& knots,
                                  const std::vector<double>& g,
                                  const PathCostWeights& w, double ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    total += w.w1 * knots[i].dl * knots[i].dl;
    total += w.w2 * knots[i].ddl * knots[i].ddl;
    total += w.w4 * (knots[i].l - g[i]) * (knots[i].l - g[i]);
    if (i + 1 < knots.size()) {
      double jerk = (knots[i + 1].ddl - knots[i].ddl) / ds;
      total += w.w3 * jerk * jerk;
    }
  }
  return total;
}

}  // namespace

PathQpResult qp_refine(const Corridor& corridor, const PathProfile& dp_profile,
                       const PathKnot& start, const PathCostWeights& w) {
  corridor.validate();
  const int n = static_cast<int>(corridor.stations.size());
  const double ds = corridor.stations[1] - corridor.stations[0];

  // Variables per station: (l, dl, ddl).
  const int nv = 3 * n;
  auto il = [](int i) { return 3 * i; };
  auto idl = [](int i) { return 3 * i + 1; };
  auto iddl = [](int i) { return 3 * i + 2; };

  QuadraticProgram qp = QuadraticProgram::unconstrained(nv);
  std::vector<Eigen::Triplet<double>> h;
  for (int i = 0; i < n; ++i) {
    h.emplace_back(il(i), il(i), 2.0 * w.w4);
    h.emplace_back(idl(i), idl(i), 2.0 * w.w1);
    h.emplace_back(iddl(i), iddl(i), 2.0 * w.w2);
    qp.linear_term[il(i)] = -2.0 * w.w4 * corridor.dp_l[static_cast<std::size_t>(i)];
    if (i + 1 < n) {
      double wj = 2.0 * w.w3 / (ds * ds);
      h.emplace_back(iddl(i), iddl(i), wj);
      h.emplace_back(iddl(i + 1), iddl(i + 1), wj);
      h.emplace_back(iddl(i), iddl(i + 1), -wj);
      h.emplace_back(iddl(i + 1), iddl(i), -wj);
    }
  }
  qp.hessian.setFromTriplets(h.begin(), h.end());

  // Constant-jerk Taylor linkage between stations plus the pinned start.
  std::vector<Eigen::Triplet<double>> eq;
  std::vector<double> rhs;
  int row = 0;
  auto add_eq = [&](std::initializer_list<std::pair<int, double>> terms, double b) {
    for (auto& [col, v] : terms) eq.emplace_back(row, col, v);
    rhs.push_back(b);
    ++row;
  };
  for (int i = 0; i + 1 < n; ++i) {
    add_eq({{il(i + 1), 1.0},
            {il(i), -1.0},
            {idl(i), -ds},
            {iddl(i), -ds * ds / 3.0},
            {iddl(i + 1), -ds * ds / 6.0}},
           0.0);
    add_eq({{idl(i + 1), 1.0},
            {idl(i), -1.0},
            {iddl(i), -ds / 2.0},
            {iddl(i + 1), -ds / 2.0}},
           0.0);
  }
  add_eq({{il(0), 1.0}}, start.l);
  add_eq({{idl(0), 1.0}}, start.dl);
  add_eq({{iddl(0), 1.0}}, start.ddl);
  qp.eq_matrix.resize(row, nv);
  qp.eq_matrix.setFromTriplets(eq.begin(), eq.end());
  qp.eq_rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), row);

  for (int i = 0; i < n; ++i) {
    qp.box_lo[il(i)] = corridor.l_lo[static_cast<std::size_t>(i)];
    qp.box_hi[il(i)] = corridor.l_hi[static_cast<std::size_t>(i)];
  }
  // The pinned start may sit outside a tight corridor station; widen that
  // one box so the equality cannot contradict it.
  qp.box_lo[il(0)] = std::min(qp.box_lo[il(0)], start.l);
  qp.box_hi[il(0)] = std::max(qp.box_hi[il(0)], start.l);

  PathQpResult result;

  // Coarse objective: the DP profile sampled under the same discretization.
  std::vector<PathKnot> coarse(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = corridor.stations[static_cast<std::size_t>(i)];
    coarse[static_cast<std::size_t>(i)] =
        PathKnot{s, dp_profile.eval(s), dp_profile.eval(s, 1), dp_profile.eval(s, 2)};
  }
  result.coarse_objective =
      discretized_path_objective(coarse, corridor.dp_l, w, ds);

  result.qp = solve(qp);
  if (result.qp.status != QPStatus::optimal) {
    result.fell_back = true;
    result.profile = dp_profile;
    result.refined_objective = result.coarse_objective;
    return result;
  }

  std::vector<PathKnot> knots(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = corridor.stations[static_cast<std::size_t>(i)];
    double l = std::clamp(result.qp.x[il(i)], corridor.l_lo[static_cast<std::size_t>(i)],
                          corridor.l_hi[static_cast<std::size_t>(i)]);
    knots[static_cast<std::size_t>(i)] =
        PathKnot{s, l, result.qp.x[idl(i)], result.qp.x[iddl(i)]};
  }
  knots[0] = PathKnot{corridor.stations[0], start.l, start.dl, start.ddl};
  result.refined_objective =
      discretized_path_objective(knots, corridor.dp_l, w, ds);
  result.profile = profile_from_knots(knots);
  return result;
}

}  // namespace ecoplan
