#pragma once

#include <vector>

#include <Eigen/Core>

#include "otdenoise/likelihood.hpp"
#include "otdenoise/measure.hpp"

namespace otdenoise {

/// Fixed-support NPMLE configuration. tol is the relative log-likelihood
/// improvement threshold of the main loop; optimality_target is the
/// first-order residual (per observation) the certification loop then
/// drives down to.
struct NpmleConfig {
  enum class Algorithm { em, frank_wolfe };
  Eigen::MatrixXd grid;  // candidate atoms, one per row
  int max_iters = 50000;
  double tol = 1e-10;
  Algorithm algorithm = Algorithm::em;
  double optimality_target = 1e-6;
  double prune_threshold = 1e-10;
};

struct NpmleResult {
  DiscreteMeasure g_hat;
  std::vector<double> loglik_trace;  // average log marginal likelihood per iteration
  double optimality_residual = 0.0;  // max_j (1/n) sum_i p_ij/f_i - 1
  int iterations = 0;
  bool converged = false;
};

/// Maximize the average log marginal likelihood over priors supported on
/// cfg.grid. The log-likelihood is nondecreasing along the trace; atoms
/// with weight below cfg.prune_threshold are pruned from the result.
/// InfeasibleSampleError if some observation has zero likelihood under
/// every grid atom.
NpmleResult npmle_fit(const LikelihoodModel& model, const Eigen::MatrixXd& sample,
                      const NpmleConfig& cfg);

/// (1/n) sum_i log f_G(Z_i); InfeasibleSampleError on a vanishing marginal.
double loglik(const LikelihoodModel& model, const Eigen::MatrixXd& sample,
              const DiscreteMeasure& g);

/// First-order optimality residual of the NPMLE problem at G:
/// max over grid atoms of (1/n) sum_i p(Z_i|theta_j)/f_G(Z_i) - 1
/// (nonpositive up to tolerance exactly at the optimum).
double npmle_optimality_residual(const LikelihoodModel& model,
                                 const Eigen::MatrixXd& sample,
                                 const Eigen::MatrixXd& grid, const DiscreteMeasure& g);

/// Equally spaced grid over the per-dimension range of the given values,
/// padded by 20% on each side.
Eigen::MatrixXd default_grid(const Eigen::MatrixXd& values, int atoms_per_dim);

}  // namespace otdenoise
