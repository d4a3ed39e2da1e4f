#include "ecoplan/qp_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace ecoplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSigma = 1e-6;       // proximal regularization
constexpr double kAlpha = 1.6;        // over-relaxation
constexpr double kRhoEqScale = 1e3;   // stiffer penalty on equality rows
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr int kCheckInterval = 25;

// Stacked constraint view: rows of [A_eq; A_in; I_box(finite)], with
// two-sided bounds l <= Ax <= u (equalities have l == u).
struct Stacked {
  Eigen::SparseMatrix<double> A;   // m x n
  Eigen::VectorXd l, u;
  std::vector<bool> is_eq;
  int m = 0;
};

Stacked stack_constraints(const QuadraticProgram& qp) {
  const int n = qp.num_vars();
  const int me = static_cast<int>(qp.eq_rhs.size());
  const int mi = static_cast<int>(qp.ineq_rhs.size());

  std::vector<int> box_rows;
  for (int i = 0; i < n; ++i)
    if (std::isfinite(qp.box_lo[i]) || std::isfinite(qp.box_hi[i]))
      box_rows.push_back(i);
  const int mb = static_cast<int>(box_rows.size());

  Stacked st;
  st.m = me + mi + mb;
  st.A.resize(st.m, n);
  st.l.resize(st.m);
  st.u.resize(st.m);
  st.is_eq.assign(static_cast<std::size_t>(st.m), false);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(qp.eq_matrix.nonZeros() +
                                         qp.ineq_matrix.nonZeros() + mb));
  for (int k = 0; k < qp.eq_matrix.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.eq_matrix, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  for (int k = 0; k < qp.ineq_matrix.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.ineq_matrix, k); it;
         ++it)
      trips.emplace_back(me + static_cast<int>(it.row()),
                         static_cast<int>(it.col()), it.value());
  for (int r = 0; r < mb; ++r)
    trips.emplace_back(me + mi + r, box_rows[static_cast<std::size_t>(r)], 1.0);
  st.A.setFromTriplets(trips.begin(), trips.end());

  for (int r = 0; r < me; ++r) {
    st.l[r] = qp.eq_rhs[r];
    st.u[r] = qp.eq_rhs[r];
    st.is_eq[static_cast<std::size_t>(r)] = true;
  }
  for (int r = 0; r < mi; ++r) {
    st.l[me + r] = -kInf;
    st.u[me + r] = qp.ineq_rhs[r];
  }
  for (int r = 0; r < mb; ++r) {
    int i = box_rows[static_cast<std::size_t>(r)];
    st.l[me + mi + r] = qp.box_lo[i];
    st.u[me + mi + r] = qp.box_hi[i];
    if (qp.box_lo[i] == qp.box_hi[i]) st.is_eq[static_cast<std::size_t>(me + mi + r)] = true;
  }
  return st;
}

double objective_value(const QuadraticProgram& qp, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(qp.hessian * x) + qp.linear_term.dot(x);
}

void check_psd(const QuadraticProgram& qp) {
  const int n = qp.num_vars();
  Eigen::SparseMatrix<double> shifted = qp.hessian;
  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();
  shifted += 1e-10 * eye;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  double scale = 1.0;
  for (int k = 0; k < qp.hessian.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.hessian, k); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  if (ldlt.info() != Eigen::Success ||
      (n > 0 && ldlt.vectorD().minCoeff() < -1e-8 * scale))
    throw std::domain_error("hessian is not positive semidefinite");
}

// Direct solve for the unconstrained case; residual-certified, no ADMM bias.
QPSolution solve_unconstrained(const QuadraticProgram& qp,
                               const QPSettings& settings) {
  const int n = qp.num_vars();
  Eigen::SparseMatrix<double> H = qp.hessian;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
  Eigen::VectorXd x;
  if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
    x = ldlt.solve(-qp.linear_term);
  } else {
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    Eigen::SparseMatrix<double> Hs = H + 1e-12 * eye;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> shifted(Hs);
    x = shifted.solve(-qp.linear_term);
    for (int pass = 0; pass < 3; ++pass)
      x += shifted.solve(-(qp.linear_term + H * x));
  }
  QPSolution sol;
  sol.x = x;
  sol.objective = objective_value(qp, x);
  sol.primal_residual = 0.0;
  sol.dual_residual = (H * x + qp.linear_term).lpNorm<Eigen::Infinity>();
  sol.status = sol.dual_residual <= settings.tol ? QPStatus::optimal
                                                 : QPStatus::max_iter;
  sol.iterations = 0;
  return sol;
}

Eigen::VectorXd clamp_to(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

struct Residuals {
  double primal = 0.0;  // violation of l <= Ax <= u
  double dual = 0.0;    // stationarity + complementarity
  double worst() const { return std::max(primal, dual); }
};

Residuals kkt_residuals(const QuadraticProgram& qp, const Stacked& st,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Residuals r;
  Eigen::VectorXd ax = st.A * x;
  Eigen::VectorXd viol = ax - clamp_to(ax, st.l, st.u);
  r.primal = st.m > 0 ? viol.lpNorm<Eigen::Infinity>() : 0.0;
  Eigen::VectorXd station =
      qp.hessian * x + qp.linear_term + st.A.transpose() * y;
  r.dual = station.size() > 0 ? station.lpNorm<Eigen::Infinity>() : 0.0;
  // Complementary slackness: a positive multiplier must sit on its upper
  // bound, a negative one on its lower bound. Without this, a stationary
  // point pinned to the wrong active set would certify as optimal.
  for (int i = 0; i < st.m; ++i) {
    if (st.is_eq[static_cast<std::size_t>(i)]) continue;
    if (y[i] > 0.0) {
      double slack = std::isfinite(st.u[i]) ? std::max(0.0, st.u[i] - ax[i])
                                            : std::numeric_limits<double>::infinity();
      r.dual = std::max(r.dual, std::isfinite(slack) ? y[i] * slack : y[i]);
    } else if (y[i] < 0.0) {
      double slack = std::isfinite(st.l[i]) ? std::max(0.0, ax[i] - st.l[i])
                                            : std::numeric_limits<double>::infinity();
      r.dual = std::max(r.dual, std::isfinite(slack) ? -y[i] * slack : -y[i]);
    }
  }
  return r;
}

// Active-set polish: solve the equality-constrained KKT system on the rows
// the ADMM multipliers mark active, then keep the result if it tightens the
// residuals.
bool polish(const QuadraticProgram& qp, const Stacked& st, Eigen::VectorXd& x,
            Eigen::VectorXd& y, Residuals& res) {
  const int n = qp.num_vars();
  std::vector<int> act_rows;
  std::vector<double> act_rhs;
  for (int r = 0; r < st.m; ++r) {
    if (st.is_eq[static_cast<std::size_t>(r)]) {
      act_rows.push_back(r);
      act_rhs.push_back(st.u[r]);
    } else if (y[r] > 0.0 && std::isfinite(st.u[r])) {
      act_rows.push_back(r);
      act_rhs.push_back(st.u[r]);
    } else if (y[r] < 0.0 && std::isfinite(st.l[r])) {
      act_rows.push_back(r);
      act_rhs.push_back(st.l[r]);
    }
  }
  const int ma = static_cast<int>(act_rows.size());

  Eigen::SparseMatrix<double> K(n + ma, n + ma);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < qp.hessian.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.hessian, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  const double delta = 1e-9;
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, delta);
  for (int a = 0; a < ma; ++a) trips.emplace_back(n + a, n + a, -delta);
  // A is column-major; gather active rows per column.
  {
    std::vector<int> row_to_act(static_cast<std::size_t>(st.m), -1);
    for (int a = 0; a < ma; ++a)
      row_to_act[static_cast<std::size_t>(act_rows[static_cast<std::size_t>(a)])] = a;
    for (int col = 0; col < st.A.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(st.A, col); it; ++it) {
        int a = row_to_act[static_cast<std::size_t>(it.row())];
        if (a >= 0) {
          trips.emplace_back(n + a, col, it.value());
          trips.emplace_back(col, n + a, it.value());
        }
      }
  }
  K.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd rhs(n + ma);
  rhs.head(n) = -qp.linear_term;
  for (int a = 0; a < ma; ++a) rhs[n + a] = act_rhs[static_cast<std::size_t>(a)];

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(K);
  if (lu.info() != Eigen::Success) return false;
  Eigen::VectorXd sol = lu.solve(rhs);

  // Iterative refinement against the unregularized KKT operator.
  auto apply_kkt = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n + ma);
    Eigen::VectorXd nu = v.tail(ma);
    Eigen::VectorXd at_nu = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd av = Eigen::VectorXd::Zero(ma);
    {
      std::vector<int> row_to_act(static_cast<std::size_t>(st.m), -1);
      for (int a = 0; a < ma; ++a)
        row_to_act[static_cast<std::size_t>(act_rows[static_cast<std::size_t>(a)])] = a;
      for (int col = 0; col < st.A.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(st.A, col); it; ++it) {
          int a = row_to_act[static_cast<std::size_t>(it.row())];
          if (a >= 0) {
            at_nu[col] += it.value() * nu[a];
            av[a] += it.value() * v[col];
          }
        }
    }
    out.head(n) = qp.hessian * v.head(n) + at_nu;
    out.tail(ma) = av;
    return out;
  };
  for (int pass = 0; pass < 3; ++pass)
    sol += lu.solve(rhs - apply_kkt(sol));

  Eigen::VectorXd x_pol = sol.head(n);
  Eigen::VectorXd y_pol = Eigen::VectorXd::Zero(st.m);
  for (int a = 0; a < ma; ++a)
    y_pol[act_rows[static_cast<std::size_t>(a)]] = sol[n + a];

  Residuals pol = kkt_residuals(qp, st, x_pol, y_pol);
  if (pol.worst() <= res.worst()) {
    x = x_pol;
    y = y_pol;
    res = pol;
    return true;
  }
  return false;
}

}  // namespace

QuadraticProgram QuadraticProgram::unconstrained(int n) {
  QuadraticProgram qp;
  qp.hessian.resize(n, n);
  qp.linear_term = Eigen::VectorXd::Zero(n);
  qp.box_lo = Eigen::VectorXd::Constant(n, -kInf);
  qp.box_hi = Eigen::VectorXd::Constant(n, kInf);
  qp.eq_matrix.resize(0, n);
  qp.eq_rhs.resize(0);
  qp.ineq_matrix.resize(0, n);
  qp.ineq_rhs.resize(0);
  return qp;
}

void QuadraticProgram::validate() const {
  const int n = num_vars();
  if (hessian.rows() != n || hessian.cols() != n)
    throw std::invalid_argument("hessian dimension mismatch");
  if (box_lo.size() != n || box_hi.size() != n)
    throw std::invalid_argument("box bound dimension mismatch");
  Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(hessian.transpose()) - hessian;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
      if (std::abs(it.value()) > 1e-12)
        throw std::invalid_argument("hessian not symmetric within 1e-12");
  for (int i = 0; i < n; ++i)
    if (box_lo[i] > box_hi[i])
      throw std::invalid_argument("box with lo > hi");
  if (eq_matrix.rows() != eq_rhs.size() || eq_matrix.cols() != n)
    throw std::invalid_argument("equality block dimension mismatch");
  if (ineq_matrix.rows() != ineq_rhs.size() || ineq_matrix.cols() != n)
    throw std::invalid_argument("inequality block dimension mismatch");
}

QPSolution solve(const QuadraticProgram& qp, const QPSettings& settings) {
  qp.validate();
  check_psd(qp);

  const int n = qp.num_vars();
  Stacked st = stack_constraints(qp);
  if (st.m == 0) return solve_unconstrained(qp, settings);

  const double eps_target = std::max(1e-10, settings.tol * 1e-2);

  double rho = 0.1;
  auto row_rho = [&](int r) {
    return st.is_eq[static_cast<std::size_t>(r)] ? rho * kRhoEqScale : rho;
  };

  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  double factored_rho = -1.0;
  auto refactor = [&]() {
    Eigen::VectorXd rdiag(st.m);
    for (int r = 0; r < st.m; ++r) rdiag[r] = row_rho(r);
    Eigen::SparseMatrix<double> K =
        qp.hessian + kSigma * eye +
        Eigen::SparseMatrix<double>(st.A.transpose() * rdiag.asDiagonal() *
                                    st.A);
    ldlt.compute(K);
    factored_rho = rho;
  };
  refactor();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = clamp_to(Eigen::VectorXd::Zero(st.m), st.l, st.u);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(st.m);

  QPSolution sol;
  Residuals res;
  int iter = 0;
  bool primal_infeasible = false;

  for (iter = 1; iter <= settings.max_iter; ++iter) {
    Eigen::VectorXd rz_minus_y(st.m);
    for (int r = 0; r < st.m; ++r) rz_minus_y[r] = row_rho(r) * z[r] - y[r];
    Eigen::VectorXd rhs =
        kSigma * x - qp.linear_term + st.A.transpose() * rz_minus_y;
    Eigen::VectorXd x_tilde = ldlt.solve(rhs);
    Eigen::VectorXd z_tilde = st.A * x_tilde;

    Eigen::VectorXd x_next = kAlpha * x_tilde + (1.0 - kAlpha) * x;
    Eigen::VectorXd z_bar = kAlpha * z_tilde + (1.0 - kAlpha) * z;
    Eigen::VectorXd z_next(st.m), y_next(st.m);
    for (int r = 0; r < st.m; ++r) {
      double rr = row_rho(r);
      double cand = z_bar[r] + y[r] / rr;
      z_next[r] = std::min(std::max(cand, st.l[r]), st.u[r]);
      y_next[r] = y[r] + rr * (z_bar[r] - z_next[r]);
    }

    Eigen::VectorXd dy = y_next - y;
    x = x_next;
    z = z_next;
    y = y_next;

    if (iter % kCheckInterval == 0 || iter == settings.max_iter) {
      // ADMM residuals: consensus gap and stationarity. Complementarity of
      // (z, y) holds by construction of the projection step.
      double r_gap = (st.A * x - z).lpNorm<Eigen::Infinity>();
      double r_sta =
          (qp.hessian * x + qp.linear_term + st.A.transpose() * y)
              .lpNorm<Eigen::Infinity>();
      res.primal = r_gap;
      res.dual = r_sta;
      if (std::max(r_gap, r_sta) <= eps_target) break;

      // Primal infeasibility certificate (OSQP-style test on the dual step).
      double dy_norm = dy.lpNorm<Eigen::Infinity>();
      if (dy_norm > 1e-12) {
        Eigen::VectorXd dyn = dy / dy_norm;
        double at_dy = (st.A.transpose() * dyn).lpNorm<Eigen::Infinity>();
        double support = 0.0;
        bool unbounded_support = false;
        for (int r = 0; r < st.m; ++r) {
          if (dyn[r] > 1e-12) {
            if (!std::isfinite(st.u[r])) unbounded_support = true;
            else support += st.u[r] * dyn[r];
          } else if (dyn[r] < -1e-12) {
            if (!std::isfinite(st.l[r])) unbounded_support = true;
            else support += st.l[r] * dyn[r];
          }
        }
        if (!unbounded_support && at_dy <= 1e-10 && support < -1e-10) {
          primal_infeasible = true;
          break;
        }
      }

      // Adaptive rho (rescale and refactor when it drifts far).
      double ax_n = (st.A * x).lpNorm<Eigen::Infinity>();
      double z_n = z.lpNorm<Eigen::Infinity>();
      double hx_n = (qp.hessian * x).lpNorm<Eigen::Infinity>();
      double aty_n = (st.A.transpose() * y).lpNorm<Eigen::Infinity>();
      double q_n = qp.linear_term.lpNorm<Eigen::Infinity>();
      double sp = std::max({ax_n, z_n, 1e-12});
      double sd = std::max({hx_n, aty_n, q_n, 1e-12});
      double ratio = (res.primal / sp) / std::max(res.dual / sd, 1e-16);
      double rho_new = std::clamp(rho * std::sqrt(ratio), kRhoMin, kRhoMax);
      if (rho_new > factored_rho * 5.0 || rho_new < factored_rho / 5.0) {
        rho = rho_new;
        refactor();
      }
    }
  }

  sol.iterations = std::min(iter, settings.max_iter);
  if (primal_infeasible) {
    sol.x = x;
    sol.objective = objective_value(qp, x);
    sol.status = QPStatus::infeasible;
    sol.primal_residual = res.primal;
    sol.dual_residual = res.dual;
    return sol;
  }

  res = kkt_residuals(qp, st, x, y);
  sol.polished = polish(qp, st, x, y, res);
  sol.x = x;
  sol.objective = objective_value(qp, x);
  sol.primal_residual = res.primal;
  sol.dual_residual = res.dual;
  sol.status = (std::max(res.primal, res.dual) <= settings.tol)
                   ? QPStatus::optimal
                   : QPStatus::max_iter;
  return sol;
}

ConvexityReport validate_convexity(const QuadraticProgram& qp) {
  ConvexityReport rep;
  const int n = qp.num_vars();
  double scale = 1.0;
  for (int k = 0; k < qp.hessian.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.hessian, k); it; ++it) {
      rep.bandwidth = std::max(
          rep.bandwidth, std::abs(static_cast<int>(it.row()) -
                                  static_cast<int>(it.col())));
      scale = std::max(scale, std::abs(it.value()));
    }
  if (n == 0) {
    rep.convex = true;
    return rep;
  }
  if (n <= 2000) {
    Eigen::MatrixXd dense(qp.hessian);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense,
                                                      Eigen::EigenvaluesOnly);
    rep.min_eigenvalue_estimate = es.eigenvalues().minCoeff();
  } else {
    // Gershgorin lower bound as a cheap estimate for very large hessians.
    Eigen::VectorXd diag = qp.hessian.diagonal();
    Eigen::VectorXd offsum = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < qp.hessian.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(qp.hessian, k); it;
           ++it)
        if (it.row() != it.col()) offsum[it.row()] += std::abs(it.value());
    rep.min_eigenvalue_estimate = (diag - offsum).minCoeff();
  }
  rep.convex = rep.min_eigenvalue_estimate >= -1e-8 * scale;
  return rep;
}

}  // namespace ecoplan
