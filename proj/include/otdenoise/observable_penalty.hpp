#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "otdenoise/likelihood.hpp"
#include "otdenoise/measure.hpp"
#include "otdenoise/ot.hpp"

namespace otdenoise {

/// Decision variables of the sample problem: one latent value per
/// observation index.
struct DeltaTable {
  Eigen::MatrixXd values;  // n x m
};

//! Discretized feasible set for the coupling relaxation.
//!
//! z_atoms carries the empirical observation measure (first and fourth
//! marginals), theta_grid the candidate latent atoms, z3_grid the cells
//! discretizing the synthetic observation marginal, and likelihood_matrix
//! row j the probability masses of p(.|theta_j) over the z3 cells (each
//! row sums to 1 within 1e-6).
struct RelaxationInstance {
  DiscreteMeasure z_atoms;
  Eigen::MatrixXd theta_grid;         // J x m
  Eigen::MatrixXd z3_grid;            // L x d
  Eigen::MatrixXd likelihood_matrix;  // J x L
  double tau = 1.0;

  void validate() const;

  /// The LP is reproducible from these fields alone.
  nlohmann::json to_json() const;
  static RelaxationInstance from_json(const nlohmann::json& j);
};

/// Build an instance for a 1-d model: the kernel rows are cell-midpoint
/// densities times cell width, renormalized to sum to one.
RelaxationInstance make_relaxation_instance(const LikelihoodModel& model,
                                            const DiscreteMeasure& mu_n,
                                            const Eigen::MatrixXd& theta_grid,
                                            const Eigen::VectorXd& z3_centers,
                                            double tau);

/// Monte Carlo representation of the synthetic observation marginal:
/// uniform measure on n*K points, K conditional draws per observation
/// (stream i drives the draws of observation i).
DiscreteMeasure mu_delta_sample(const LikelihoodModel& model, const DeltaTable& delta,
                                int K, std::uint64_t seed);

struct ObjectiveValue {
  double fitted = 0.0;     // (1/n) sum |delta_i - theta_bar_i|^2
  double penalty = 0.0;    // (1/(2 tau)) W2^2(mu_delta, mu_n)
  double r_bayes = 0.0;    // plug-in Bayes risk constant
  double total = 0.0;
};

/// Monte Carlo objective. The W2 term uses exact_lp when n*K <= 2000 and
/// sinkhorn otherwise (cfg supplies the sinkhorn parameters).
ObjectiveValue objective_E_tau(const LikelihoodModel& model, const DiscreteMeasure& mu_n,
                               const Eigen::MatrixXd& theta_bar_values, double r_bayes_hat,
                               const DeltaTable& delta, double tau, int K,
                               const OTConfig& cfg, std::uint64_t seed);

/// Deterministic variant: mu_delta is pushed through the instance's
/// likelihood_matrix (delta values snapped to the nearest theta-grid atom)
/// and the penalty solved exactly on the z3 grid.
ObjectiveValue objective_E_tau_discretized(const RelaxationInstance& instance,
                                           const Eigen::MatrixXd& theta_bar_values,
                                           double r_bayes_hat, const DeltaTable& delta);

struct GradientResult {
  Eigen::MatrixXd grad;          // n x m, fitted_term + penalty_term / (2 tau)
  Eigen::MatrixXd fitted_term;   // 2 (delta_i - theta_bar_i), no Monte Carlo
  Eigen::MatrixXd penalty_term;  // E_hat[psi(z') score(z'|delta_i)] per row
  bool degenerate = false;  // OT solve hit a degenerate vertex; duals may be non-unique
};

/// Gateaux gradient estimate at delta:
/// 2(delta_i - theta_bar_i) + (1/(2 tau)) (1/K) sum_k psi(z'_ik) score(z'_ik | delta_i),
/// with psi the mu_delta-side dual of the OT solve between mu_n and the
/// sampled mu_delta (same draws as mu_delta_sample under the same seed).
GradientResult gradient_E_tau(const LikelihoodModel& model, const DiscreteMeasure& mu_n,
                              const Eigen::MatrixXd& theta_bar_values,
                              const DeltaTable& delta, double tau, int K,
                              const OTConfig& cfg, std::uint64_t seed);

struct DescentTrace {
  std::vector<DeltaTable> iterates;    // includes the initial table
  std::vector<double> objective;       // common-random-numbers estimates per iterate
};

/// Fixed-step projected gradient descent (fresh draws each step, projection
/// onto Omega after each update). No convergence guarantee; the trace is
/// returned for inspection.
DescentTrace gradient_descent(const LikelihoodModel& model, const DiscreteMeasure& mu_n,
                              const Eigen::MatrixXd& theta_bar_values,
                              const DeltaTable& init, double tau, double lambda,
                              int iterations, int K, const OTConfig& cfg,
                              std::uint64_t seed);

struct RelaxationSolution {
  double value = 0.0;
  double fitted_term = 0.0;   // sum pi12 |theta - theta_bar|^2
  double penalty_sum = 0.0;   // sum pi34 |z3 - z4|^2 (unweighted by 1/(2 tau))
  Eigen::MatrixXd pi12;       // n x J
  Eigen::VectorXd gamma2;     // J
  Eigen::VectorXd gamma3;     // L
  Eigen::MatrixXd pi34;       // L x n
  Eigen::MatrixXd delta_values;  // n x m, barycentric projection of pi12
};

/// Exact LP over the factorized coupling (pi12, gamma2, gamma3, pi34) with
/// the kernel constraint gamma3 = P' gamma2.
RelaxationSolution solve_relaxation(const RelaxationInstance& instance,
                                    const Eigen::MatrixXd& theta_bar_values);

struct TauSweepPoint {
  double tau = 0.0;
  double value = 0.0;
  double penalty_sum = 0.0;
  double l2_distance = 0.0;  // (1/n) sum |delta_tau(Z_i) - delta*(Z_i)|^2
};

/// Solve the relaxation along a decreasing tau schedule and report L2
/// distances to the reference map (OT denoiser built from the true prior).
std::vector<TauSweepPoint> tau_sweep_convergence(
    const LikelihoodModel& model, const JointSample& joint,
    const DiscreteMeasure& g_star, const std::vector<double>& taus,
    const std::function<RelaxationInstance(double)>& instance_builder);

}  // namespace otdenoise
