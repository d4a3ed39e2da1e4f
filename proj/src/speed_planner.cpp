#include "ecoplan/speed_planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace ecoplan {

const char* phase_name(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::Acceleration: return "acceleration";
    case PhaseLabel::Deceleration: return "deceleration";
    case PhaseLabel::Cruise: return "cruise";
  }
  return "?";
}

void SpeedCostWeights::validate() const {
  if (w_ref_speed < 0 || w_acc < 0 || w_je < 0 || w1 < 0 || w2 < 0 || w3 < 0 ||
      k_obs < 0)
    throw std::invalid_argument("speed weights must be nonnegative");
  if (!(d1 > d2 && d2 >= 0.0))
    throw std::invalid_argument("require d1 > d2 >= 0");
}

namespace {

double point_segment_distance(double px, double py, double ax, double ay,
                              double bx, double by) {
  double vx = bx - ax, vy = by - ay;
  double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  double fx = ax + t * vx, fy = ay + t * vy;
  return std::hypot(px - fx, py - fy);
}

}  // namespace

double STGraph::d_min_at(double t, double s) const {
  double best = 1e9;
  for (const auto& ob : obstacles) {
    double d = 1e9;
    if (ob.t.size() == 1) {
      d = std::hypot(t - ob.t[0], s - ob.s[0]);
    } else {
      for (std::size_t i = 0; i + 1 < ob.t.size(); ++i)
        d = std::min(d, point_segment_distance(t, s, ob.t[i], ob.s[i],
                                               ob.t[i + 1], ob.s[i + 1]));
    }
    best = std::min(best, std::max(0.0, d - ob.radius));
  }
  return best;
}

void STGraph::validate() const {
  if (!(dt > 0) || num_steps < 1 || !(ds > 0) || num_stations < 1)
    throw std::invalid_argument("degenerate ST graph");
  for (const auto& ob : obstacles) {
    if (ob.t.empty() || ob.t.size() != ob.s.size())
      throw std::invalid_argument("ST obstacle polyline mismatch");
    for (std::size_t i = 1; i < ob.t.size(); ++i)
      if (!(ob.t[i] >= ob.t[i - 1]))
        throw std::invalid_argument("ST obstacle times must be nondecreasing");
  }
}

PhaseLabel classify_phase(double current_v, double v_target, bool stop_required,
                          double eps_v) {
  if (current_v < 0.0) throw std::invalid_argument("current_v must be >= 0");
  if (stop_required || v_target < current_v - eps_v)
    return PhaseLabel::Deceleration;
  if (v_target > current_v + eps_v) return PhaseLabel::Acceleration;
  return PhaseLabel::Cruise;
}

double st_obstacle_cost(double d_min, const SpeedCostWeights& w) {
  double d = std::abs(d_min);
  if (d > w.d1) return 0.0;
  if (d <= w.d2) return kInfiniteCost;
  return w.k_obs / (d - w.d2);
}

double ref_speed_cost(double v, double v_opt, const SpeedCostWeights& w) {
  double e = v - v_opt;
  return w.w_ref_speed * e * e;
}

double accel_phase_cost(double a, double jerk, double a_acc_opt,
                        const SpeedCostWeights& w) {
  double e = a - a_acc_opt;
  return w.w_acc * e * e + w.w_je * jerk * jerk;
}

double decel_phase_cost(double a, double jerk, double a_dec_opt,
                        const SpeedCostWeights& w) {
  double e = a - a_dec_opt;
  return w.w_acc * e * e + w.w_je * jerk * jerk;
}

double SpeedProfile::s_at(double t) const {
  if (samples.empty()) throw std::logic_error("empty speed profile");
  if (t <= samples.front().t) return samples.front().s;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    if (t <= samples[i + 1].t) {
      double tau = t - samples[i].t;
      return samples[i].s + samples[i].v * tau + 0.5 * samples[i].a * tau * tau;
    }
  }
  const auto& b = samples.back();
  double tau = t - b.t;
  return b.s + b.v * tau;
}

double SpeedProfile::v_at(double t) const {
  if (samples.empty()) throw std::logic_error("empty speed profile");
  if (t <= samples.front().t) return samples.front().v;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    if (t <= samples[i + 1].t)
      return samples[i].v + samples[i].a * (t - samples[i].t);
  return samples.back().v;
}

double SpeedProfile::a_at(double t) const {
  if (samples.empty()) throw std::logic_error("empty speed profile");
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    if (t < samples[i + 1].t) return samples[i].a;
  return samples.back().a;
}

namespace {

// Per-node cost with the forward-difference speed at the node and the
// central second difference (difference of consecutive forward speeds).
// The DP stage leaves the jerk term to the QP refinement; the lattice
// cannot carry a four-point stencil without exploding the state space.
double node_cost(const STGraph& graph, PhaseLabel phase,
                 const SpeedCostWeights& w, const SpeedPlanContext& ctx,
                 double t, double s, double v_node, double a_node) {
  double c_obs = st_obstacle_cost(graph.d_min_at(t, s), w);
  if (is_blocked(c_obs)) return kInfiniteCost;
  double total = w.w1 * ref_speed_cost(v_node, ctx.v_ref(s), w) + w.w3 * c_obs;
  if (phase == PhaseLabel::Acceleration)
    total += w.w2 * accel_phase_cost(a_node, 0.0, ctx.a_target(s, v_node), w);
  else if (phase == PhaseLabel::Deceleration)
    total += w.w2 * decel_phase_cost(a_node, 0.0, ctx.a_target(s, v_node), w);
  return total;
}

double terminal_cost(const STGraph& graph, const SpeedCostWeights& w,
                     const SpeedPlanContext& ctx, double t, double s,
                     double v_in) {
  double c_obs = st_obstacle_cost(graph.d_min_at(t, s), w);
  if (is_blocked(c_obs)) return kInfiniteCost;
  return w.w1 * ref_speed_cost(v_in, ctx.v_ref(s), w) + w.w3 * c_obs;
}

}  // namespace

SpeedDpResult dp_speed_search(const STGraph& graph, PhaseLabel phase,
                              const SpeedStart& start,
                              const SpeedCostWeights& w,
                              const SpeedPlanContext& ctx, double a_bound,
                              double v_max, Exec exec) {
  graph.validate();
  w.validate();
  if (start.v < 0) throw std::invalid_argument("start speed must be >= 0");

  const int K = graph.num_steps;
  const int M = graph.num_stations;
  const double dt = graph.dt;
  const double ds = graph.ds;
  const double v_quantum = ds / dt;
  const int dv_max = std::min(
      M, static_cast<int>(std::ceil(std::max(v_max, start.v) / v_quantum)) + 1);
  const int n_dv = dv_max + 1;

  // State (stage k, station j, incoming step dv); flattened j * n_dv + dv.
  const int n_states = (M + 1) * n_dv;
  const double inf = kInfiniteCost;
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(K + 1));
  std::vector<std::vector<int>> parent_dv(static_cast<std::size_t>(K + 1));
  for (int k = 0; k <= K; ++k) {
    cost[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(n_states), inf);
    parent_dv[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(n_states), -1);
  }

  // Stage 0 -> 1: the incoming speed is the exact start speed, not a lattice
  // multiple, so relax it separately.
  for (int j1 = 0; j1 <= std::min(M, dv_max); ++j1) {
    double v0 = j1 * v_quantum;
    double a0 = (v0 - start.v) / dt;
    if (std::abs(a0) > a_bound + 1e-9) continue;
    double c = node_cost(graph, phase, w, ctx, 0.0, 0.0, v0, a0);
    if (is_blocked(c)) continue;
    cost[1][static_cast<std::size_t>(j1 * n_dv + j1)] = c;
    parent_dv[1][static_cast<std::size_t>(j1 * n_dv + j1)] = 0;
  }

  const int max_ddv =
      static_cast<int>(std::floor(a_bound * dt * dt / ds + 1e-9));
  for (int k = 1; k < K; ++k) {
    const auto& src = cost[static_cast<std::size_t>(k)];
    auto& dst = cost[static_cast<std::size_t>(k + 1)];
    auto& dst_parent = parent_dv[static_cast<std::size_t>(k + 1)];
    const double t_k = k * dt;

    // Relaxation kernel over destination states; sources at the top
    // boundary are frozen terminals and do not extend.
    auto relax = [&](int dst_state) {
      int j_next = dst_state / n_dv;
      int dv_next = dst_state % n_dv;
      int j = j_next - dv_next;
      if (j < 0 || j >= M) return;  // j == M states are terminal
      double v_node = dv_next * v_quantum;
      double best = inf;
      int best_dv = -1;
      int dv_lo = std::max(0, dv_next - max_ddv);
      int dv_hi = std::min(dv_max, dv_next + max_ddv);
      for (int dv = dv_lo; dv <= dv_hi; ++dv) {
        double prev = src[static_cast<std::size_t>(j * n_dv + dv)];
        if (is_blocked(prev)) continue;
        double a_node = (dv_next - dv) * ds / (dt * dt);
        if (std::abs(a_node) > a_bound + 1e-9) continue;
        double c = node_cost(graph, phase, w, ctx, t_k, j * ds, v_node, a_node);
        if (is_blocked(c)) continue;
        double total = prev + c;
        if (total < best) {
          best = total;
          best_dv = dv;
        }
      }
      dst[static_cast<std::size_t>(dst_state)] = best;
      dst_parent[static_cast<std::size_t>(dst_state)] = best_dv;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
      for (int st = 0; st < n_states; ++st) relax(st);
    } else {
      for (int st = 0; st < n_states; ++st) relax(st);
    }
  }

  // Endpoint: cheapest node on the union of the top boundary (s = s_max,
  // any stage) and the right boundary (t = T, any station).
  double best_total = inf;
  int best_k = -1, best_state = -1;
  auto consider = [&](int k, int state) {
    double c = cost[static_cast<std::size_t>(k)][static_cast<std::size_t>(state)];
    if (is_blocked(c)) return;
    int j = state / n_dv;
    int dv = state % n_dv;
    double term = terminal_cost(graph, w, ctx, k * dt, j * ds, dv * v_quantum);
    if (is_blocked(term)) return;
    if (c + term < best_total) {
      best_total = c + term;
      best_k = k;
      best_state = state;
    }
  };
  for (int k = 1; k <= K; ++k)
    for (int dv = 0; dv < n_dv; ++dv) consider(k, M * n_dv + dv);
  for (int j = 0; j < M; ++j)
    for (int dv = 0; dv < n_dv; ++dv) consider(K, j * n_dv + dv);

  if (best_state < 0)
    throw PlannerError(PlannerError::Code::InfeasibleHorizon,
                       "all speed-plan boundary nodes are infinite");

  // Backtrack the station chain.
  std::vector<int> stations(static_cast<std::size_t>(best_k + 1), 0);
  int state = best_state;
  for (int k = best_k; k >= 1; --k) {
    int j = state / n_dv;
    int dv = state % n_dv;
    stations[static_cast<std::size_t>(k)] = j;
    int j_prev = j - dv;
    int dv_prev = parent_dv[static_cast<std::size_t>(k)][static_cast<std::size_t>(state)];
    state = j_prev * n_dv + dv_prev;
  }

  SpeedDpResult result;
  result.cost = best_total;
  result.ended_at_top = (stations.back() == M && best_k < K);
  result.profile.phase = phase;
  result.profile.dt = dt;
  const int E = best_k;
  std::vector<double> v_fwd(static_cast<std::size_t>(E + 1), 0.0);
  for (int i = 0; i < E; ++i)
    v_fwd[static_cast<std::size_t>(i)] =
        (stations[static_cast<std::size_t>(i + 1)] - stations[static_cast<std::size_t>(i)]) *
        v_quantum;
  v_fwd[static_cast<std::size_t>(E)] = E > 0 ? v_fwd[static_cast<std::size_t>(E - 1)] : start.v;
  for (int i = 0; i <= E; ++i) {
    SpeedSample sm;
    sm.t = i * dt;
    sm.s = stations[static_cast<std::size_t>(i)] * ds;
    sm.v = v_fwd[static_cast<std::size_t>(i)];
    double v_prev = i > 0 ? v_fwd[static_cast<std::size_t>(i - 1)] : start.v;
    sm.a = (v_fwd[static_cast<std::size_t>(i)] - v_prev) / dt;
    result.profile.samples.push_back(sm);
  }
  for (int i = 0; i <= E; ++i) {
    auto& sm = result.profile.samples[static_cast<std::size_t>(i)];
    sm.j = (i < E)
               ? (result.profile.samples[static_cast<std::size_t>(i + 1)].a - sm.a) / dt
               : 0.0;
  }
  return result;
}

void SpeedCorridor::validate() const {
  if (t.size() < 2 || t.size() != s_lo.size() || t.size() != s_hi.size())
    throw std::invalid_argument("speed corridor arrays mismatch");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!(s_lo[i] <= s_hi[i]))
      throw std::invalid_argument("speed corridor bound inverted");
}

SpeedCorridor build_speed_corridor(const STGraph& graph,
                                   const SpeedProfile& coarse,
                                   const SpeedCostWeights& w, double width) {
  SpeedCorridor c;
  for (const auto& sm : coarse.samples) {
    double lo = std::max(0.0, sm.s - width);
    double hi = std::min(graph.s_top(), sm.s + width);
    auto clearance = [&](double s) { return graph.d_min_at(sm.t, s); };
    if (clearance(sm.s) <= w.d2)
      throw PlannerError(PlannerError::Code::InfeasibleHorizon,
                         "coarse profile enters an obstacle hard zone");
    // Pull each bound toward the coarse sample until the hard zone is
    // excluded with a hair of slack; bisection on the clearance along s.
    const double gate = w.d2 + 1e-6;
    auto pull_in = [&](double outside) {
      double bad = outside, good = sm.s;
      if (clearance(bad) > gate) return bad;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (bad + good);
        if (clearance(mid) > gate) good = mid; else bad = mid;
      }
      return good;
    };
    lo = pull_in(lo);
    hi = std::max(lo, pull_in(hi));
    c.t.push_back(sm.t);
    c.s_lo.push_back(lo);
    c.s_hi.push_back(hi);
  }
  c.validate();
  return c;
}

SpeedQpResult qp_speed_refine(const SpeedProfile& coarse, PhaseLabel phase,
                              const SpeedCostWeights& w,
                              const SpeedCorridor& corridor,
                              const SpeedPlanContext& ctx, double a_bound,
                              double v_max, const SpeedStart& start) {
  corridor.validate();
  const int n = static_cast<int>(coarse.samples.size());
  if (static_cast<int>(corridor.t.size()) != n)
    throw std::invalid_argument("corridor must match the coarse profile");
  const double dt = coarse.dt;

  const int nv = 3 * n;
  auto is_ = [](int i) { return 3 * i; };
  auto iv = [](int i) { return 3 * i + 1; };
  auto ia = [](int i) { return 3 * i + 2; };

  // Frozen per-sample targets from the coarse profile.
  std::vector<double> v_ref_i(static_cast<std::size_t>(n)), a_tgt_i(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& sm = coarse.samples[static_cast<std::size_t>(i)];
    v_ref_i[static_cast<std::size_t>(i)] = ctx.v_ref(sm.s);
    if (phase != PhaseLabel::Cruise)
      a_tgt_i[static_cast<std::size_t>(i)] = ctx.a_target(sm.s, sm.v);
  }

  const bool with_accel_term = phase != PhaseLabel::Cruise;

  QuadraticProgram qp = QuadraticProgram::unconstrained(nv);
  std::vector<Eigen::Triplet<double>> h;
  for (int i = 0; i < n; ++i) {
    h.emplace_back(iv(i), iv(i), 2.0 * w.w1 * w.w_ref_speed);
    qp.linear_term[iv(i)] =
        -2.0 * w.w1 * w.w_ref_speed * v_ref_i[static_cast<std::size_t>(i)];
    if (with_accel_term) {
      h.emplace_back(ia(i), ia(i), 2.0 * w.w2 * w.w_acc);
      qp.linear_term[ia(i)] = -2.0 * w.w2 * w.w_acc * a_tgt_i[static_cast<std::size_t>(i)];
      if (i + 1 < n) {
        double wj = 2.0 * w.w2 * w.w_je / (dt * dt);
        h.emplace_back(ia(i), ia(i), wj);
        h.emplace_back(ia(i + 1), ia(i + 1), wj);
        h.emplace_back(ia(i), ia(i + 1), -wj);
        h.emplace_back(ia(i + 1), ia(i), -wj);
      }
    }
  }
  qp.hessian.setFromTriplets(h.begin(), h.end());

  // Constant-acceleration stepping (one accel value per interval) keeps the
  // per-step kinematic identity exact; jerk is the accel difference
  // quotient penalized above.
  std::vector<Eigen::Triplet<double>> eq;
  std::vector<double> rhs;
  int row = 0;
  auto add_eq = [&](std::initializer_list<std::pair<int, double>> terms, double b) {
    for (auto& [col, val] : terms) eq.emplace_back(row, col, val);
    rhs.push_back(b);
    ++row;
  };
  for (int i = 0; i + 1 < n; ++i) {
    add_eq({{is_(i + 1), 1.0}, {is_(i), -1.0}, {iv(i), -dt}, {ia(i), -0.5 * dt * dt}},
           0.0);
    add_eq({{iv(i + 1), 1.0}, {iv(i), -1.0}, {ia(i), -dt}}, 0.0);
  }
  add_eq({{is_(0), 1.0}}, coarse.samples.front().s);
  add_eq({{iv(0), 1.0}}, start.v);
  qp.eq_matrix.resize(row, nv);
  qp.eq_matrix.setFromTriplets(eq.begin(), eq.end());
  qp.eq_rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), row);

  for (int i = 0; i < n; ++i) {
    qp.box_lo[is_(i)] = corridor.s_lo[static_cast<std::size_t>(i)];
    qp.box_hi[is_(i)] = corridor.s_hi[static_cast<std::size_t>(i)];
    qp.box_lo[iv(i)] = 0.0;
    qp.box_hi[iv(i)] = v_max;
    qp.box_lo[ia(i)] = -a_bound;
    qp.box_hi[ia(i)] = a_bound;
  }
  qp.box_lo[is_(0)] = std::min(qp.box_lo[is_(0)], coarse.samples.front().s);
  qp.box_hi[is_(0)] = std::max(qp.box_hi[is_(0)], coarse.samples.front().s);
  qp.box_hi[iv(0)] = std::max(qp.box_hi[iv(0)], start.v);

  auto objective_at = [&](const std::vector<SpeedSample>& samples) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& sm = samples[static_cast<std::size_t>(i)];
      double ev = sm.v - v_ref_i[static_cast<std::size_t>(i)];
      total += w.w1 * w.w_ref_speed * ev * ev;
      if (with_accel_term) {
        double ea = sm.a - a_tgt_i[static_cast<std::size_t>(i)];
        total += w.w2 * w.w_acc * ea * ea;
        if (i + 1 < n) {
          double jerk = (samples[static_cast<std::size_t>(i + 1)].a - sm.a) / dt;
          total += w.w2 * w.w_je * jerk * jerk;
        }
      }
    }
    return total;
  };

  SpeedQpResult result;
  result.coarse_objective = objective_at(coarse.samples);
  result.qp = solve(qp);
  if (result.qp.status != QPStatus::optimal) {
    result.fell_back = true;
    result.profile = coarse;
    result.refined_objective = result.coarse_objective;
    return result;
  }

  result.profile.phase = phase;
  result.profile.dt = dt;
  result.profile.samples.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& sm = result.profile.samples[static_cast<std::size_t>(i)];
    sm.t = coarse.samples[static_cast<std::size_t>(i)].t;
    sm.s = std::clamp(result.qp.x[is_(i)], corridor.s_lo[static_cast<std::size_t>(i)],
                      corridor.s_hi[static_cast<std::size_t>(i)]);
    sm.v = result.qp.x[iv(i)];
    sm.a = result.qp.x[ia(i)];
  }
  for (int i = 0; i < n; ++i) {
    auto& sm = result.profile.samples[static_cast<std::size_t>(i)];
    sm.j = (i + 1 < n)
               ? (result.profile.samples[static_cast<std::size_t>(i + 1)].a - sm.a) / dt
               : 0.0;
  }
  result.refined_objective = objective_at(result.profile.samples);
  return result;
}

}  // namespace ecoplan
