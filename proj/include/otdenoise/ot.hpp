#pragma once

#include <functional>

#include <Eigen/Core>

#include "otdenoise/measure.hpp"

namespace otdenoise {

enum class OTMethod { exact_lp, sinkhorn, monotone_1d };

/// Solver configuration. epsilon is the entropic regularization strength
/// (sinkhorn only); tolerance is the L1 marginal-violation stop rule and
/// must lie in (0, 1e-2].
struct OTConfig {
  OTMethod method = OTMethod::exact_lp;
  double epsilon = 0.05;
  int max_iters = 20000;
  double tolerance = 1e-6;
};

using CostFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// |x_i - y_j|^2 for all atom pairs.
Eigen::MatrixXd squared_cost_matrix(const DiscreteMeasure& source,
                                    const DiscreteMeasure& target);

/// Sinkhorn failed to reach the marginal tolerance; carries the last
/// (polytope-rounded) iterate.
class ConvergeError : public Error {
public:
  ConvergeError(const std::string& msg, TransportPlan last)
      : Error(msg), last_(std::move(last)) {}
  const TransportPlan& last_iterate() const { return last_; }

private:
  TransportPlan last_;
};

//! Solve the discrete 2-marginal OT problem for an explicit cost matrix.
//!
//! exact_lp runs a transportation simplex and returns a vertex plan with
//! exact dual potentials (normalized so the first source potential is 0).
//! Ties among optimal vertices are broken by the deterministic pivot order;
//! when the optimum is non-unique, only the cost and barycentric
//! projections of the returned plan are contractual, not the plan itself.
//! sinkhorn runs log-domain scaling until the L1 marginal violation drops
//! below cfg.tolerance, then rounds the plan onto the transport polytope;
//! its duals are tagged regularized. monotone_1d requires 1-d marginals.
TransportPlan solve_ot(const DiscreteMeasure& source, const DiscreteMeasure& target,
                       const Eigen::MatrixXd& cost, const OTConfig& cfg);

TransportPlan solve_ot(const DiscreteMeasure& source, const DiscreteMeasure& target,
                       const CostFn& cost, const OTConfig& cfg);

/// Squared 2-Wasserstein distance (squared-Euclidean cost).
double w2_squared(const DiscreteMeasure& source, const DiscreteMeasure& target,
                  const OTConfig& cfg = {});

/// North-west-corner quantile coupling of two 1-d measures, sorted
/// ascending (stable in the original atom order). Optimal for any convex
/// cost; cost_value reported for the quadratic cost.
TransportPlan solve_monotone_1d(const DiscreteMeasure& source,
                                const DiscreteMeasure& target);

/// Row-conditional means: out_i = sum_j pi_ij y_j / sum_j pi_ij.
Eigen::MatrixXd barycentric_projection(const TransportPlan& plan);

/// Extends a discrete target-side potential to all of R^d via the
/// c-transform phi(x) = min_j ( c(x, y_j) - psi_j ).
std::function<double(const Eigen::VectorXd&)> c_transform_extend(
    const Eigen::VectorXd& potential, const DiscreteMeasure& target,
    const CostFn& cost);

}  // namespace otdenoise
