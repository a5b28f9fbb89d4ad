#include "otdenoise/npmle.hpp"

#include <cmath>
#include <limits>

namespace otdenoise {
namespace {

// Likelihood matrix with rows scaled by their maximum (EM updates and the
// first-order residual are invariant to row scaling; the scale logs are
// kept so the reported log-likelihood is exact).
struct ScaledLikelihood {
  Eigen::MatrixXd a;        // n x J, row maxima are 1
  Eigen::VectorXd log_row;  // log of each row's original maximum
};

ScaledLikelihood build_likelihood_matrix(const LikelihoodModel& model,
                                         const Eigen::MatrixXd& sample,
                                         const Eigen::MatrixXd& grid) {
  const int n = static_cast<int>(sample.rows());
  const int j_count = static_cast<int>(grid.rows());
  Eigen::MatrixXd logs(n, j_count);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = sample.row(i).transpose();
    for (int j = 0; j < j_count; ++j)
      logs(i, j) = model.log_density(z, grid.row(j).transpose());
  }
  ScaledLikelihood out;
  out.a.resize(n, j_count);
  out.log_row.resize(n);
  for (int i = 0; i < n; ++i) {
    const double mx = logs.row(i).maxCoeff();
    if (!std::isfinite(mx))
      throw InfeasibleSampleError(
          "observation " + std::to_string(i) + " has zero likelihood under every grid atom",
          i);
    out.log_row[i] = mx;
    out.a.row(i) = (logs.row(i).array() - mx).exp();
  }
  return out;
}

double average_loglik(const ScaledLikelihood& sl, const Eigen::VectorXd& f) {
  return (f.array().log() + sl.log_row.array()).mean();
}

// Exact line search for t in [0,1]: maximize mean log((1-t) f + t a).
// The objective is strictly concave in t; bisection on the derivative.
double line_search(const Eigen::VectorXd& f, const Eigen::VectorXd& a) {
  const auto deriv = [&](double t) {
    return ((a - f).array() / ((1.0 - t) * f + t * a).array()).mean();
  };
  if (deriv(0.0) <= 0.0) return 0.0;
  double hi = 1.0 - 1e-12;
  if (deriv(hi) >= 0.0) return hi;
  double lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Exact line search for the pairwise direction f + t * d, t in [0, t_max];
// boundary steps (t = t_max) remove the donor atom exactly.
double pairwise_line_search(const Eigen::VectorXd& f, const Eigen::VectorXd& d,
                            double t_max) {
  const auto deriv = [&](double t) {
    return (d.array() / (f + t * d).array()).mean();
  };
  if (deriv(0.0) <= 0.0) return 0.0;
  if (deriv(t_max) >= 0.0) return t_max;
  double lo = 0.0, hi = t_max;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

NpmleResult npmle_fit(const LikelihoodModel& model, const Eigen::MatrixXd& sample,
                      const NpmleConfig& cfg) {
  if (cfg.grid.rows() == 0) throw EmptySampleError("npmle grid is empty");
  if (!(cfg.tol > 0.0)) throw InvariantError("npmle tol must be positive");
  for (int j = 0; j < cfg.grid.rows(); ++j) {
    if (!model.domain().contains(cfg.grid.row(j).transpose()))
      throw DomainError("grid atom " + std::to_string(j) + " outside Omega");
  }

  const ScaledLikelihood sl = build_likelihood_matrix(model, sample, cfg.grid);
  const int n = static_cast<int>(sample.rows());
  const int j_count = static_cast<int>(cfg.grid.rows());

  Eigen::VectorXd w = Eigen::VectorXd::Constant(j_count, 1.0 / j_count);
  Eigen::VectorXd f = sl.a * w;

  std::vector<double> trace;
  trace.push_back(average_loglik(sl, f));

  const bool use_em = cfg.algorithm == NpmleConfig::Algorithm::em;
  int iter = 0;
  bool loglik_converged = false;

  auto em_sweep = [&]() {
    // w_j <- w_j * (1/n) sum_i a_ij / f_i
    w.array() *= (sl.a.transpose() * f.cwiseInverse()).array() / n;
    w /= w.sum();
    f = sl.a * w;
  };
  auto gradient = [&]() -> Eigen::VectorXd {
    return (sl.a.transpose() * f.cwiseInverse()) / n;
  };
  auto exchange_step = [&]() {
    // Move mass toward the steepest grid atom with an exact line search.
    const Eigen::VectorXd grad = gradient();
    int jstar = 0;
    grad.maxCoeff(&jstar);
    const Eigen::VectorXd a_col = sl.a.col(jstar);
    const double t = line_search(f, a_col);
    if (t <= 0.0) return;
    w *= (1.0 - t);
    w[jstar] += t;
    f = (1.0 - t) * f + t * a_col;
  };
  // Pairwise (vertex-exchange) step: shift mass from the flattest support
  // atom toward the steepest candidate; a boundary step zeroes the donor.
  auto pairwise_step = [&]() {
    const Eigen::VectorXd grad = gradient();
    int jup = 0;
    grad.maxCoeff(&jup);
    int jdown = -1;
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < j_count; ++j) {
      if (w[j] > 0.0 && j != jup && grad[j] < worst) {
        worst = grad[j];
        jdown = j;
      }
    }
    if (jdown < 0) return false;
    const Eigen::VectorXd dir = sl.a.col(jup) - sl.a.col(jdown);
    const double t = pairwise_line_search(f, dir, w[jdown]);
    if (t <= 0.0) return false;
    w[jup] += t;
    w[jdown] -= t;
    if (w[jdown] < 1e-300) w[jdown] = 0.0;
    f += t * dir;
    return true;
  };

  auto residual = [&]() { return gradient().maxCoeff() - 1.0; };

  // Main loop: the configured algorithm until the relative log-likelihood
  // improvement drops below tol. Capped at half the budget so slow EM
  // tails cannot starve the certification loop; an occasional residual
  // check allows a fully-converged early exit.
  while (iter < cfg.max_iters / 2) {
    ++iter;
    if (use_em) {
      em_sweep();
    } else {
      exchange_step();
      em_sweep();
    }
    const double ll = average_loglik(sl, f);
    const double prev = trace.back();
    trace.push_back(ll);
    if (ll - prev < cfg.tol * std::abs(prev)) {
      loglik_converged = true;
      break;
    }
    if ((iter & 63) == 0 && residual() <= cfg.optimality_target) {
      loglik_converged = true;
      break;
    }
  }

  // Cleanup pass: atoms whose gradient sits clearly below the tight level
  // cannot carry NPMLE mass; donate their mass to the steepest atom when
  // the exact line search accepts the full transfer.
  auto cleanup_pass = [&]() {
    bool moved = false;
    const Eigen::VectorXd grad = gradient();
    int jup = 0;
    grad.maxCoeff(&jup);
    for (int j = 0; j < j_count && iter < cfg.max_iters; ++j) {
      if (j == jup || w[j] <= 0.0 || grad[j] >= 1.0 - 1e-4) continue;
      const Eigen::VectorXd dir = sl.a.col(jup) - sl.a.col(j);
      const double t = pairwise_line_search(f, dir, w[j]);
      if (t < w[j]) continue;  // interior optimum: the atom keeps mass
      ++iter;
      w[jup] += t;
      w[j] = 0.0;
      f += t * dir;
      trace.push_back(average_loglik(sl, f));
      moved = true;
    }
    return moved;
  };

  // Certification: pairwise exchange plus EM rebalancing until the
  // first-order residual meets the target, then cleanup; a cleanup move
  // shifts f, so re-certify until both settle. Every step is an
  // exact-line-search or EM ascent, so the trace stays nondecreasing.
  double r = residual();
  while (iter < cfg.max_iters) {
    while (r > cfg.optimality_target && iter < cfg.max_iters) {
      ++iter;
      pairwise_step();
      em_sweep();
      trace.push_back(average_loglik(sl, f));
      r = residual();
    }
    const bool moved = cleanup_pass();
    r = residual();
    if (!moved && r <= cfg.optimality_target) break;
  }

  // Prune and renormalize.
  std::vector<int> keep;
  for (int j = 0; j < j_count; ++j)
    if (w[j] >= cfg.prune_threshold) keep.push_back(j);
  if (keep.empty()) throw DegenerateError("all NPMLE weights pruned");
  Eigen::MatrixXd atoms(static_cast<int>(keep.size()), cfg.grid.cols());
  Eigen::VectorXd weights(static_cast<int>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    atoms.row(static_cast<int>(k)) = cfg.grid.row(keep[k]);
    weights[static_cast<int>(k)] = w[keep[k]];
  }
  weights /= weights.sum();
  return NpmleResult{DiscreteMeasure(std::move(atoms), std::move(weights)),
                     std::move(trace), r, iter,
                     loglik_converged && r <= cfg.optimality_target};
}

double loglik(const LikelihoodModel& model, const Eigen::MatrixXd& sample,
              const DiscreteMeasure& g) {
  double total = 0.0;
  for (int i = 0; i < sample.rows(); ++i) {
    const double l = log_marginal_density(model, g, sample.row(i).transpose());
    if (!std::isfinite(l))
      throw InfeasibleSampleError(
          "observation " + std::to_string(i) + " has zero marginal density", i);
    total += l;
  }
  return total / sample.rows();
}

double npmle_optimality_residual(const LikelihoodModel& model,
                                 const Eigen::MatrixXd& sample,
                                 const Eigen::MatrixXd& grid, const DiscreteMeasure& g) {
  const int n = static_cast<int>(sample.rows());
  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid.rows(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd z = sample.row(i).transpose();
      const double fi = marginal_density(model, g, z);
      if (fi <= 0.0)
        throw InfeasibleSampleError("zero marginal density at observation " + std::to_string(i),
                                    i);
      acc += model.density(z, grid.row(j).transpose()) / fi;
    }
    worst = std::max(worst, acc / n - 1.0);
  }
  return worst;
}

Eigen::MatrixXd default_grid(const Eigen::MatrixXd& values, int atoms_per_dim) {
  const int d = static_cast<int>(values.cols());
  if (d != 1)
    throw UnsupportedError("default_grid supports 1-d latent spaces");
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  const double pad = 0.2 * std::max(hi - lo, 1e-12);
  Eigen::MatrixXd grid(atoms_per_dim, 1);
  for (int j = 0; j < atoms_per_dim; ++j)
    grid(j, 0) = (lo - pad) + (hi - lo + 2 * pad) * j / std::max(1, atoms_per_dim - 1);
  return grid;
}

}  // namespace otdenoise
