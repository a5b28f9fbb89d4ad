#pragma once

#include <Eigen/Core>

namespace otdenoise {

/// Equality-form linear program: min c'x subject to A x = b, x >= 0.
struct LpProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

struct LpSolution {
  bool feasible = false;
  double value = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd duals;  // one multiplier per row
  int iterations = 0;
};

//! Two-phase dense tableau simplex.
//!
//! Handles redundant equality rows (artificials allowed to stay basic at
//! zero) and degenerate pivots (Bland's rule after a long stalled streak).
//! Intended for the small relaxation instances in this project, not as a
//! general-purpose solver.
LpSolution solve_lp(const LpProblem& problem, double tol = 1e-9,
                    int max_iterations = 50000);

}  // namespace otdenoise
