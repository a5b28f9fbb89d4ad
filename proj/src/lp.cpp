#include "otdenoise/lp.hpp"

#include <cmath>
#include <vector>

#include "otdenoise/errors.hpp"

namespace otdenoise {
namespace {

// Full-tableau simplex on T = [A | I_art | b] with an extra objective row.
// Columns [0, n) are structural, [n, n+m) artificial. The artificial block
// stays in the tableau through phase 2 (barred from entering) so the final
// objective row yields the row multipliers directly.
class Tableau {
public:
  Tableau(const LpProblem& p, double tol) : tol_(tol) {
    m_ = static_cast<int>(p.A.rows());
    n_ = static_cast<int>(p.A.cols());
    T_.resize(m_ + 1, n_ + m_ + 1);
    T_.setZero();
    T_.block(0, 0, m_, n_) = p.A;
    T_.block(0, n_, m_, m_).setIdentity();
    T_.block(0, n_ + m_, m_, 1) = p.b;
    for (int i = 0; i < m_; ++i) {
      if (T_(i, n_ + m_) < 0.0) T_.row(i) = -T_.row(i);
    }
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
  }

  // Returns false on iteration blowup.
  bool run_phase(const Eigen::VectorXd& cost, bool phase_one, int max_iter,
                 int* used_iters) {
    // Objective row: reduced costs z_j = c_j - c_B' B^{-1} A_j.
    Eigen::RowVectorXd obj = Eigen::RowVectorXd::Zero(n_ + m_ + 1);
    for (int j = 0; j < cost.size(); ++j) obj[j] = cost[j];
    for (int i = 0; i < m_; ++i) {
      const double cb = basis_[i] < cost.size() ? cost[basis_[i]] : 0.0;
      if (cb != 0.0) obj -= cb * T_.row(i);
    }
    T_.row(m_) = obj;

    int stalled = 0;
    const int stall_limit = 4 * (m_ + n_);
    for (int iter = 0; iter < max_iter; ++iter) {
      const bool bland = stalled > stall_limit;
      int enter = pick_entering(phase_one, bland);
      if (enter < 0) {
        *used_iters += iter;
        return true;  // optimal
      }
      int leave = ratio_test(enter, bland);
      if (leave < 0) {
        // Unbounded; cannot happen for the bounded instances built here,
        // treat as failure.
        *used_iters += iter;
        return false;
      }
      if (T_(leave, n_ + m_) <= tol_) {
        ++stalled;
      } else {
        stalled = 0;
      }
      pivot(leave, enter);
    }
    *used_iters += max_iter;
    return false;
  }

  double rhs(int row) const { return T_(row, n_ + m_); }
  double objective() const { return -T_(m_, n_ + m_); }
  int basis(int row) const { return basis_[row]; }
  int rows() const { return m_; }
  int cols() const { return n_; }

  // After phase 1: pivot artificials out of the basis where possible; rows
  // that stay artificial-basic at level ~0 are redundant and get neutralized.
  void eliminate_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      int enter = -1;
      for (int j = 0; j < n_; ++j) {
        if (std::abs(T_(i, j)) > 1e-7) {
          enter = j;
          break;
        }
      }
      if (enter >= 0) {
        pivot(i, enter);
      } else {
        T_.row(i).setZero();  // redundant constraint
        T_(i, n_ + basis_index_row(i)) = 1.0;
      }
    }
  }

  // Dual multipliers: y_i = -(reduced cost of artificial column i).
  Eigen::VectorXd dual_multipliers() const {
    Eigen::VectorXd y(m_);
    for (int i = 0; i < m_; ++i) y[i] = -T_(m_, n_ + i);
    return y;
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) x[basis_[i]] = std::max(0.0, T_(i, n_ + m_));
    }
    return x;
  }

private:
  int basis_index_row(int i) const { return basis_[i] - n_; }

  int pick_entering(bool phase_one, bool bland) const {
    // Artificials may not re-enter; in phase 2 they are barred entirely.
    const int limit = phase_one ? n_ : n_;
    int best = -1;
    double best_val = -tol_;
    for (int j = 0; j < limit; ++j) {
      const double rc = T_(m_, j);
      if (rc < -tol_) {
        if (bland) return j;
        if (rc < best_val) {
          best_val = rc;
          best = j;
        }
      }
    }
    return best;
  }

  int ratio_test(int enter, bool bland) const {
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m_; ++i) {
      const double a = T_(i, enter);
      if (a > tol_) {
        const double r = T_(i, n_ + m_) / a;
        if (r < best - 1e-12 ||
            (r < best + 1e-12 && leave >= 0 &&
             (bland ? basis_[i] < basis_[leave] : i < leave))) {
          best = r;
          leave = i;
        }
      }
    }
    return leave;
  }

  void pivot(int row, int col) {
    T_.row(row) /= T_(row, col);
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    basis_[row] = col;
  }

  int m_ = 0, n_ = 0;
  double tol_;
  Eigen::MatrixXd T_;
  std::vector<int> basis_;
};

}  // namespace

LpSolution solve_lp(const LpProblem& problem, double tol, int max_iterations) {
  if (problem.A.rows() != problem.b.size() || problem.A.cols() != problem.c.size())
    throw DimError("lp: inconsistent problem dimensions");

  Tableau tab(problem, tol);
  LpSolution sol;

  // Phase 1: minimize the sum of artificials.
  Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(problem.c.size() + problem.A.rows());
  phase1_cost.tail(problem.A.rows()).setOnes();
  if (!tab.run_phase(phase1_cost, true, max_iterations, &sol.iterations))
    throw Error("lp: phase 1 did not terminate");
  if (tab.objective() > 1e-7) {
    sol.feasible = false;
    return sol;
  }
  tab.eliminate_artificials();

  // Phase 2: true objective.
  if (!tab.run_phase(problem.c, false, max_iterations, &sol.iterations))
    throw Error("lp: phase 2 did not terminate");

  sol.feasible = true;
  sol.x = tab.primal();
  sol.value = problem.c.dot(sol.x);
  sol.duals = tab.dual_multipliers();
  return sol;
}

}  // namespace otdenoise
