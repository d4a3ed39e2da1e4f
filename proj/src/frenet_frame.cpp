#include "ecoplan/frenet_frame.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ecoplan/qp_core.hpp"

namespace ecoplan {

namespace {

constexpr double kTieTolerance = 1e-9;

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

std::vector<double> cumulative_arc(const std::vector<Eigen::Vector2d>& pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
  return s;
}

}  // namespace

void GlobalPath::validate() const {
  if (points.size() < 2)
    throw std::invalid_argument("global path needs >= 2 waypoints");
  for (std::size_t i = 1; i < points.size(); ++i)
    if ((points[i] - points[i - 1]).norm() < 1e-9)
      throw std::invalid_argument("consecutive waypoints must be distinct");
}

double GlobalPath::length() const { return polyline_length(points); }

double polyline_length(const std::vector<Eigen::Vector2d>& pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    total += (pts[i] - pts[i - 1]).norm();
  return total;
}

double polyline_project_s(const std::vector<Eigen::Vector2d>& pts,
                          const Eigen::Vector2d& p) {
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double s0 = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Eigen::Vector2d a = pts[i], b = pts[i + 1];
    Eigen::Vector2d ab = b - a;
    double len = ab.norm();
    double t = std::clamp((p - a).dot(ab) / (len * len), 0.0, 1.0);
    Eigen::Vector2d foot = a + t * ab;
    double d2 = (p - foot).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_s = s0 + t * len;
    }
    s0 += len;
  }
  return best_s;
}

Eigen::Vector2d polyline_point_at(const std::vector<Eigen::Vector2d>& pts,
                                  double s) {
  if (s <= 0.0) return pts.front();
  double s0 = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double len = (pts[i + 1] - pts[i]).norm();
    if (s <= s0 + len)
      return pts[i] + (s - s0) / len * (pts[i + 1] - pts[i]);
    s0 += len;
  }
  return pts.back();
}

WindowResult extract_window_info(const GlobalPath& path,
                                 const Eigen::Vector2d& ego, double behind_m,
                                 double ahead_m) {
  path.validate();
  double s_proj = polyline_project_s(path.points, ego);
  double total = path.length();
  double s_lo = std::max(0.0, s_proj - behind_m);
  double s_hi = std::min(total, s_proj + ahead_m);
  if (!(s_hi - s_lo > 1e-9)) throw std::domain_error("empty path window");

  std::vector<double> arc = cumulative_arc(path.points);
  WindowResult out;
  out.start_s = s_lo;
  out.path.points.push_back(polyline_point_at(path.points, s_lo));
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    if (arc[i] > s_lo + 1e-9 && arc[i] < s_hi - 1e-9)
      out.path.points.push_back(path.points[i]);
  }
  out.path.points.push_back(polyline_point_at(path.points, s_hi));
  out.path.validate();
  return out;
}

GlobalPath extract_window(const GlobalPath& path, const Eigen::Vector2d& ego,
                          double behind_m, double ahead_m) {
  return extract_window_info(path, ego, behind_m, ahead_m).path;
}

ReferenceLine::ReferenceLine(std::vector<RefLinePoint> pts)
    : pts_(std::move(pts)) {
  if (pts_.size() < 2)
    throw std::invalid_argument("reference line needs >= 2 points");
  for (std::size_t i = 1; i < pts_.size(); ++i) {
    if (!(pts_[i].s > pts_[i - 1].s))
      throw std::invalid_argument("arc length must strictly increase");
    if (std::abs(wrap_angle(pts_[i].heading - pts_[i - 1].heading)) > M_PI - 1e-6)
      throw std::invalid_argument("heading jump between neighbors");
  }
}

namespace {

struct Interp {
  Eigen::Vector2d pos;
  double heading;
  double curvature;
};

Interp interp_at(const std::vector<RefLinePoint>& pts, double s) {
  const auto cmp = [](const RefLinePoint& p, double v) { return p.s < v; };
  auto it = std::lower_bound(pts.begin(), pts.end(), s, cmp);
  std::size_t hi = static_cast<std::size_t>(it - pts.begin());
  if (hi == 0) hi = 1;
  if (hi >= pts.size()) hi = pts.size() - 1;
  std::size_t lo = hi - 1;
  double w = (s - pts[lo].s) / (pts[hi].s - pts[lo].s);
  Interp out;
  out.pos = Eigen::Vector2d(pts[lo].x + w * (pts[hi].x - pts[lo].x),
                            pts[lo].y + w * (pts[hi].y - pts[lo].y));
  out.heading =
      pts[lo].heading + w * wrap_angle(pts[hi].heading - pts[lo].heading);
  out.curvature = pts[lo].curvature + w * (pts[hi].curvature - pts[lo].curvature);
  return out;
}

}  // namespace

Eigen::Vector2d ReferenceLine::position_at(double s) const {
  return interp_at(pts_, s).pos;
}
double ReferenceLine::heading_at(double s) const {
  return interp_at(pts_, s).heading;
}
double ReferenceLine::curvature_at(double s) const {
  return interp_at(pts_, s).curvature;
}
double ReferenceLine::max_abs_curvature() const {
  double m = 0.0;
  for (const auto& p : pts_) m = std::max(m, std::abs(p.curvature));
  return m;
}

SmoothResult smooth_reference(const GlobalPath& raw,
                              const SmoothWeights& weights) {
  raw.validate();
  if (raw.points.size() < 3)
    throw std::invalid_argument("smoothing needs >= 3 points");

  const int n = static_cast<int>(raw.points.size());
  bool fallback = false;
  std::vector<Eigen::Vector2d> control(raw.points);
  std::vector<QPSolution> solutions;

  // Per-coordinate elastic band: fidelity + squared first and second
  // differences. The two coordinates decouple, so solve two small QPs.
  for (int coord = 0; coord < 2; ++coord) {
    QuadraticProgram qp = QuadraticProgram::unconstrained(n);
    std::vector<Eigen::Triplet<double>> trips;
    auto add = [&](int i, int j, double v) { trips.emplace_back(i, j, v); };
    for (int i = 0; i < n; ++i) add(i, i, 2.0 * weights.fidelity);
    for (int i = 0; i + 1 < n; ++i) {
      // (x_{i+1} - x_i)^2
      add(i, i, 2.0 * weights.first_diff);
      add(i + 1, i + 1, 2.0 * weights.first_diff);
      add(i, i + 1, -2.0 * weights.first_diff);
      add(i + 1, i, -2.0 * weights.first_diff);
    }
    for (int i = 1; i + 1 < n; ++i) {
      // (x_{i+1} - 2 x_i + x_{i-1})^2
      const double w = weights.second_diff;
      add(i - 1, i - 1, 2.0 * w);
      add(i, i, 8.0 * w);
      add(i + 1, i + 1, 2.0 * w);
      add(i - 1, i, -4.0 * w);
      add(i, i - 1, -4.0 * w);
      add(i, i + 1, -4.0 * w);
      add(i + 1, i, -4.0 * w);
      add(i - 1, i + 1, 2.0 * w);
      add(i + 1, i - 1, 2.0 * w);
    }
    qp.hessian.setFromTriplets(trips.begin(), trips.end());
    for (int i = 0; i < n; ++i)
      qp.linear_term[i] = -2.0 * weights.fidelity * raw.points[static_cast<std::size_t>(i)][coord];

    QPSolution sol = solve(qp);
    solutions.push_back(sol);
    if (sol.status != QPStatus::optimal) {
      fallback = true;
      break;
    }
    for (int i = 0; i < n; ++i) control[static_cast<std::size_t>(i)][coord] = sol.x[i];
  }
  if (fallback) control = raw.points;

  // Resample at fixed ds, then rebuild headings and curvature.
  std::vector<double> arc = cumulative_arc(control);
  double total = arc.back();
  double ds = std::max(1e-3, weights.resample_ds);
  int m = std::max(2, static_cast<int>(std::ceil(total / ds)) + 1);
  std::vector<Eigen::Vector2d> sampled(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double s = std::min(total, total * i / (m - 1));
    sampled[static_cast<std::size_t>(i)] = polyline_point_at(control, s);
  }

  std::vector<RefLinePoint> pts(static_cast<std::size_t>(m));
  std::vector<double> rs = cumulative_arc(sampled);
  for (int i = 0; i < m; ++i) {
    Eigen::Vector2d d;
    if (i == 0)
      d = sampled[1] - sampled[0];
    else if (i == m - 1)
      d = sampled[static_cast<std::size_t>(m - 1)] - sampled[static_cast<std::size_t>(m - 2)];
    else
      d = sampled[static_cast<std::size_t>(i + 1)] - sampled[static_cast<std::size_t>(i - 1)];
    pts[static_cast<std::size_t>(i)].s = rs[static_cast<std::size_t>(i)];
    pts[static_cast<std::size_t>(i)].x = sampled[static_cast<std::size_t>(i)].x();
    pts[static_cast<std::size_t>(i)].y = sampled[static_cast<std::size_t>(i)].y();
    pts[static_cast<std::size_t>(i)].heading = std::atan2(d.y(), d.x());
  }
  // Unwrap headings, then curvature = dheading/ds (central differences).
  for (int i = 1; i < m; ++i) {
    double prev = pts[static_cast<std::size_t>(i - 1)].heading;
    double cur = pts[static_cast<std::size_t>(i)].heading;
    pts[static_cast<std::size_t>(i)].heading = prev + wrap_angle(cur - prev);
  }
  for (int i = 0; i < m; ++i) {
    int a = std::max(0, i - 1), b = std::min(m - 1, i + 1);
    double dh = pts[static_cast<std::size_t>(b)].heading - pts[static_cast<std::size_t>(a)].heading;
    double dss = pts[static_cast<std::size_t>(b)].s - pts[static_cast<std::size_t>(a)].s;
    pts[static_cast<std::size_t>(i)].curvature = dss > 0 ? dh / dss : 0.0;
  }

  SmoothResult out{ReferenceLine(std::move(pts)), std::move(control), fallback,
                   std::move(solutions)};
  return out;
}

FrenetPoint to_frenet(const Eigen::Vector2d& pose, const ReferenceLine& line) {
  const auto& pts = line.points();
  const int n = static_cast<int>(pts.size());

  // Coarse pass over chords; keeps per-segment foot points so that ties
  // between well-separated stretches of the line can be detected.
  std::vector<double> seg_d(static_cast<std::size_t>(n - 1));
  std::vector<double> seg_s(static_cast<std::size_t>(n - 1));
  for (int i = 0; i + 1 < n; ++i) {
    Eigen::Vector2d a(pts[static_cast<std::size_t>(i)].x, pts[static_cast<std::size_t>(i)].y);
    Eigen::Vector2d b(pts[static_cast<std::size_t>(i + 1)].x, pts[static_cast<std::size_t>(i + 1)].y);
    Eigen::Vector2d ab = b - a;
    double t = std::clamp((pose - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    seg_d[static_cast<std::size_t>(i)] = (pose - (a + t * ab)).norm();
    seg_s[static_cast<std::size_t>(i)] =
        pts[static_cast<std::size_t>(i)].s +
        t * (pts[static_cast<std::size_t>(i + 1)].s - pts[static_cast<std::size_t>(i)].s);
  }
  std::size_t best_i = static_cast<std::size_t>(
      std::min_element(seg_d.begin(), seg_d.end()) - seg_d.begin());
  double best_s = seg_s[best_i];
  double sep = 2.5 * (pts[1].s - pts[0].s);
  for (std::size_t i = 0; i < seg_d.size(); ++i) {
    if (std::abs(seg_s[i] - best_s) <= sep) continue;
    if (std::abs(seg_d[i] - seg_d[best_i]) <= kTieTolerance)
      throw AmbiguousProjectionError(best_s, seg_s[i]);
  }

  // Refine on the interpolated-heading model: find s with
  // (pose - pos(s)) . tangent(s) = 0. g is strictly decreasing while
  // |l * curvature| < 1, so bisection on a sign bracket is safe.
  auto g = [&](double s) {
    Eigen::Vector2d p = line.position_at(s);
    double h = line.heading_at(s);
    Eigen::Vector2d tan(std::cos(h), std::sin(h));
    return (pose - p).dot(tan);
  };
  double span = line.length();
  double step = std::max(pts[1].s - pts[0].s, 1e-3);
  double lo = std::max(0.0, best_s - step);
  double hi = std::min(span, best_s + step);
  for (int grow = 0; grow < 30 && g(lo) < 0.0 && lo > 0.0; ++grow)
    lo = std::max(0.0, lo - step);
  for (int grow = 0; grow < 30 && g(hi) > 0.0 && hi < span; ++grow)
    hi = std::min(span, hi + step);

  double s_star;
  double glo = g(lo), ghi = g(hi);
  if (glo < 0.0)
    s_star = lo;  // projects at/before the start
  else if (ghi > 0.0)
    s_star = hi;  // projects at/after the end
  else {
    for (int i = 0; i < 100 && hi - lo > 1e-12; ++i) {
      double mid = 0.5 * (lo + hi);
      if (g(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    s_star = 0.5 * (lo + hi);
  }

  Eigen::Vector2d p = line.position_at(s_star);
  double h = line.heading_at(s_star);
  Eigen::Vector2d normal(-std::sin(h), std::cos(h));
  FrenetPoint out;
  out.s = s_star;
  out.l = (pose - p).dot(normal);
  return out;
}

Eigen::Vector2d to_cartesian(const FrenetPoint& pt, const ReferenceLine& line) {
  if (pt.s < -1e-9 || pt.s > line.length() + 1e-9)
    throw std::domain_error("s outside reference line domain");
  double kappa = line.curvature_at(pt.s);
  if (std::abs(pt.l * kappa) >= 1.0)
    throw std::domain_error("frenet fold-over: |l * curvature| >= 1");
  Eigen::Vector2d p = line.position_at(pt.s);
  double h = line.heading_at(pt.s);
  Eigen::Vector2d normal(-std::sin(h), std::cos(h));
  return p + pt.l * normal;
}

SLRegion project_polygon_sl(const std::vector<Eigen::Vector2d>& polygon,
                            const ReferenceLine& line) {
  SLRegion region;
  if (polygon.empty()) return region;
  double s_lo = std::numeric_limits<double>::infinity(), s_hi = -s_lo;
  double l_lo = s_lo, l_hi = -s_lo;
  for (const auto& corner : polygon) {
    FrenetPoint fp = to_frenet(corner, line);
    s_lo = std::min(s_lo, fp.s);
    s_hi = std::max(s_hi, fp.s);
    l_lo = std::min(l_lo, fp.l);
    l_hi = std::max(l_hi, fp.l);
  }
  if (s_hi <= 1e-9 || s_lo >= line.length() - 1e-9) return region;  // outside window
  region.empty = false;
  region.s_lo = s_lo;
  region.s_hi = s_hi;
  region.l_lo = l_lo;
  region.l_hi = l_hi;
  return region;
}

std::vector<FrenetTrajectorySample> project_particle_st(
    const Eigen::Vector2d& start_xy, const Eigen::Vector2d& velocity_xy,
    double t0, double horizon, double dt, const ReferenceLine& line) {
  std::vector<FrenetTrajectorySample> samples;
  for (double tau = 0.0; tau <= horizon + 1e-9; tau += dt) {
    Eigen::Vector2d p = start_xy + (t0 + tau) * velocity_xy;
    FrenetPoint fp = to_frenet(p, line);
    if (fp.s <= 1e-9 || fp.s >= line.length() - 1e-9) continue;
    samples.push_back({tau, fp.s, fp.l});
  }
  return samples;
}

}  // namespace ecoplan
