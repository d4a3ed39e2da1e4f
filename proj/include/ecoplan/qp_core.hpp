// Self-contained convex QP solver (operator-splitting with an active-set
// polish step) used by reference-line smoothing and the path/speed
// refinement stages.
//
// Solves   min 0.5 x'Hx + f'x
//          s.t. lo <= x <= hi, A_eq x = b_eq, A_in x <= b_in
//
// Solutions carry KKT residuals so callers can certify optimality.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ecoplan {

struct QuadraticProgram {
  Eigen::SparseMatrix<double> hessian;     // n x n, symmetric PSD
  Eigen::VectorXd linear_term;             // n
  Eigen::VectorXd box_lo;                  // n, -inf allowed
  Eigen::VectorXd box_hi;                  // n, +inf allowed
  Eigen::SparseMatrix<double> eq_matrix;   // me x n (may be 0 x n)
  Eigen::VectorXd eq_rhs;                  // me
  Eigen::SparseMatrix<double> ineq_matrix; // mi x n (may be 0 x n)
  Eigen::VectorXd ineq_rhs;                // mi

  int num_vars() const { return static_cast<int>(linear_term.size()); }

  // Sets unconstrained boxes and empty constraint blocks for n variables.
  static QuadraticProgram unconstrained(int n);

  // Throws std::invalid_argument on asymmetry beyond 1e-12 or lo > hi.
  void validate() const;
};

enum class QPStatus { optimal, max_iter, infeasible };

struct QPSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  QPStatus status = QPStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool polished = false;
};

struct QPSettings {
  double tol = 1e-6;
  int max_iter = 20000;
};

// Throws std::domain_error if the hessian fails the PSD factorization check.
QPSolution solve(const QuadraticProgram& qp, const QPSettings& settings = {});

struct ConvexityReport {
  double min_eigenvalue_estimate = 0.0;
  int bandwidth = 0;
  bool convex = false;
};

ConvexityReport validate_convexity(const QuadraticProgram& qp);

}  // namespace ecoplan
