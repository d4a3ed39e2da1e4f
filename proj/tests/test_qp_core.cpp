#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "ecoplan/qp_core.hpp"

using namespace ecoplan;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QuadraticProgram diag_qp(const Eigen::VectorXd& diag, const Eigen::VectorXd& f) {
  int n = static_cast<int>(diag.size());
  QuadraticProgram qp = QuadraticProgram::unconstrained(n);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, diag[i]);
  qp.hessian.setFromTriplets(t.begin(), t.end());
  qp.linear_term = f;
  return qp;
}

// Projected-gradient oracle for box-constrained PSD problems, run to a tight
// gradient-mapping tolerance.
Eigen::VectorXd projected_gradient_oracle(const Eigen::MatrixXd& H,
                                          const Eigen::VectorXd& f,
                                          const Eigen::VectorXd& lo,
                                          const Eigen::VectorXd& hi) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  double L = std::max(1e-6, es.eigenvalues().maxCoeff());
  double step = 1.0 / L;
  Eigen::VectorXd x = lo.cwiseMax(Eigen::VectorXd::Zero(f.size())).cwiseMin(hi);
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd g = H * x + f;
    Eigen::VectorXd x_new = (x - step * g).cwiseMax(lo).cwiseMin(hi);
    if ((x_new - x).lpNorm<Eigen::Infinity>() < 1e-10 * step) {
      x = x_new;
      break;
    }
    x = x_new;
  }
  return x;
}

}  // namespace

TEST_CASE("active bound: min x^2 s.t. x >= 3") {
  QuadraticProgram qp = diag_qp(Eigen::VectorXd::Constant(1, 2.0),
                                Eigen::VectorXd::Zero(1));
  qp.box_lo[0] = 3.0;
  auto sol = solve(qp);
  CHECK(sol.status == QPStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sol.primal_residual <= 1e-6);
  CHECK(sol.dual_residual <= 1e-6);
}

TEST_CASE("unconstrained minimum is -f for the identity hessian") {
  Eigen::VectorXd f(2);
  f << -2.0, -4.0;
  QuadraticProgram qp = diag_qp(Eigen::VectorXd::Constant(2, 1.0), f);
  auto sol = solve(qp);
  CHECK(sol.status == QPStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(sol.x[1] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("random box-constrained instances match the projected-gradient oracle") {
  std::mt19937 rng(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.2, 2.0);
  for (int inst = 0; inst < 12; ++inst) {
    const int n = 20;
    // banded PSD hessian: tridiagonal diagonally dominant
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      H(i, i) = 2.0 + ud(rng);
      if (i + 1 < n) {
        double off = 0.5 * nd(rng);
        H(i, i + 1) = off;
        H(i + 1, i) = off;
      }
    }
    Eigen::VectorXd f(n), lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      f[i] = nd(rng);
      lo[i] = -0.5 - ud(rng);
      hi[i] = 0.5 + ud(rng);
    }
    QuadraticProgram qp = QuadraticProgram::unconstrained(n);
    qp.hessian = H.sparseView();
    qp.linear_term = f;
    qp.box_lo = lo;
    qp.box_hi = hi;

    auto sol = solve(qp);
    REQUIRE(sol.status == QPStatus::optimal);
    Eigen::VectorXd xo = projected_gradient_oracle(H, f, lo, hi);
    double obj_oracle = 0.5 * xo.dot(H * xo) + f.dot(xo);
    CHECK(std::abs(sol.objective - obj_oracle) <= 1e-6 * std::max(1.0, std::abs(obj_oracle)));
  }
}

TEST_CASE("equality-only problems match the direct KKT solve") {
  std::mt19937 rng(23);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = 12, m = 4;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) H(i, i) = 1.5 + 0.1 * i;
  for (int i = 0; i + 1 < n; ++i) {
    H(i, i + 1) = 0.3;
    H(i + 1, i) = 0.3;
  }
  Eigen::MatrixXd A(m, n);
  Eigen::VectorXd b(m), f(n);
  for (int r = 0; r < m; ++r) {
    b[r] = nd(rng);
    for (int c = 0; c < n; ++c) A(r, c) = nd(rng);
  }
  for (int i = 0; i < n; ++i) f[i] = nd(rng);

  QuadraticProgram qp = QuadraticProgram::unconstrained(n);
  qp.hessian = H.sparseView();
  qp.linear_term = f;
  qp.eq_matrix = A.sparseView();
  qp.eq_rhs = b;
  auto sol = solve(qp);
  REQUIRE(sol.status == QPStatus::optimal);

  Eigen::MatrixXd K(n + m, n + m);
  K.setZero();
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  Eigen::VectorXd rhs(n + m);
  rhs.head(n) = -f;
  rhs.tail(m) = b;
  Eigen::VectorXd kkt = K.fullPivLu().solve(rhs);
  CHECK((sol.x - kkt.head(n)).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("translation consistency of boxes and linear term") {
  std::mt19937 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = 8;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) H(i, i) = 2.0 + 0.2 * i;
  for (int i = 0; i + 1 < n; ++i) {
    H(i, i + 1) = -0.4;
    H(i + 1, i) = -0.4;
  }
  Eigen::VectorXd f(n), lo(n), hi(n), t(n);
  for (int i = 0; i < n; ++i) {
    f[i] = nd(rng);
    lo[i] = -1.0;
    hi[i] = 1.0;
    t[i] = nd(rng);
  }
  QuadraticProgram qp1 = QuadraticProgram::unconstrained(n);
  qp1.hessian = H.sparseView();
  qp1.linear_term = f;
  qp1.box_lo = lo;
  qp1.box_hi = hi;
  auto s1 = solve(qp1);
  REQUIRE(s1.status == QPStatus::optimal);

  QuadraticProgram qp2 = qp1;
  qp2.box_lo = lo + t;
  qp2.box_hi = hi + t;
  qp2.linear_term = f - H * t;
  auto s2 = solve(qp2);
  REQUIRE(s2.status == QPStatus::optimal);
  CHECK((s2.x - (s1.x + t)).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("deterministic given identical inputs") {
  Eigen::VectorXd f(3);
  f << 1.0, -2.0, 0.5;
  QuadraticProgram qp = diag_qp(Eigen::VectorXd::Constant(3, 1.0), f);
  qp.box_lo = Eigen::VectorXd::Constant(3, -0.7);
  qp.box_hi = Eigen::VectorXd::Constant(3, 0.7);
  auto a = solve(qp);
  auto b = solve(qp);
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);
  CHECK(a.objective == b.objective);
}

TEST_CASE("contradictory constraints report infeasible") {
  QuadraticProgram qp = diag_qp(Eigen::VectorXd::Constant(1, 2.0),
                                Eigen::VectorXd::Zero(1));
  // x <= -1 and x >= 1 via inequality rows
  Eigen::SparseMatrix<double> A(2, 1);
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {1, 0, -1.0}};
  A.setFromTriplets(t.begin(), t.end());
  qp.ineq_matrix = A;
  qp.ineq_rhs = Eigen::VectorXd(2);
  qp.ineq_rhs << -1.0, -1.0;
  auto sol = solve(qp);
  CHECK(sol.status == QPStatus::infeasible);
}

TEST_CASE("non-PSD hessian is a domain error") {
  QuadraticProgram qp = diag_qp(Eigen::VectorXd::Constant(2, 1.0),
                                Eigen::VectorXd::Zero(2));
  std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {1, 1, -1.0}};
  qp.hessian.setZero();
  qp.hessian.setFromTriplets(t.begin(), t.end());
  CHECK_THROWS_AS(solve(qp), std::domain_error);
}

TEST_CASE("box with lo > hi is rejected") {
  QuadraticProgram qp = diag_qp(Eigen::VectorXd::Constant(1, 1.0),
                                Eigen::VectorXd::Zero(1));
  qp.box_lo[0] = 1.0;
  qp.box_hi[0] = -1.0;
  CHECK_THROWS_AS(solve(qp), std::invalid_argument);
}

TEST_CASE("convexity report") {
  SUBCASE("identity") {
    QuadraticProgram qp = diag_qp(Eigen::VectorXd::Constant(4, 1.0),
                                  Eigen::VectorXd::Zero(4));
    auto rep = validate_convexity(qp);
    CHECK(rep.min_eigenvalue_estimate == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.convex);
    CHECK(rep.bandwidth == 0);
  }
  SUBCASE("zero hessian is still PSD") {
    QuadraticProgram qp = QuadraticProgram::unconstrained(3);
    qp.hessian.resize(3, 3);
    auto rep = validate_convexity(qp);
    CHECK(rep.min_eigenvalue_estimate == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rep.convex);
  }
  SUBCASE("spectrally synthesized negative eigenvalue is flagged") {
    // H = Q diag(2, 1, -0.1) Q^T with a fixed rotation Q
    Eigen::Matrix3d Q;
    double c = std::cos(0.7), s = std::sin(0.7);
    Q << c, -s, 0, s, c, 0, 0, 0, 1;
    Eigen::Matrix3d D = Eigen::Vector3d(2.0, 1.0, -0.1).asDiagonal();
    Eigen::Matrix3d H = Q * D * Q.transpose();
    H = 0.5 * (H + H.transpose().eval());
    QuadraticProgram qp = QuadraticProgram::unconstrained(3);
    qp.hessian = H.sparseView();
    auto rep = validate_convexity(qp);
    CHECK(rep.min_eigenvalue_estimate == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(!rep.convex);
  }
}

TEST_CASE("banded hessian bandwidth is reported") {
  const int n = 9;
  QuadraticProgram qp = QuadraticProgram::unconstrained(n);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, 4.0);
  for (int i = 0; i + 3 < n; ++i) {
    t.emplace_back(i, i + 3, 0.5);
    t.emplace_back(i + 3, i, 0.5);
  }
  qp.hessian.setFromTriplets(t.begin(), t.end());
  auto rep = validate_convexity(qp);
  CHECK(rep.bandwidth == 3);
  CHECK(rep.convex);

  // solver handles it with inequality rows: sum x_i <= -1
  qp.linear_term = Eigen::VectorXd::Zero(n);
  Eigen::SparseMatrix<double> A(1, n);
  std::vector<Eigen::Triplet<double>> at;
  for (int i = 0; i < n; ++i) at.emplace_back(0, i, 1.0);
  A.setFromTriplets(at.begin(), at.end());
  qp.ineq_matrix = A;
  qp.ineq_rhs = Eigen::VectorXd::Constant(1, -1.0);
  auto sol = solve(qp);
  CHECK(sol.status == QPStatus::optimal);
  double sum = sol.x.sum();
  CHECK(sum <= -1.0 + 1e-6);
  (void)kInf;
}
