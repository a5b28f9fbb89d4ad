#pragma once

// Shared independent oracles for the test suites: brute-force transport,
// quadrature, normal distribution helpers, and the small latent-penalty LP.
// Everything here must stay independent of the implementation paths it
// checks.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "otdenoise/lp.hpp"
#include "otdenoise/measure.hpp"
#include "otdenoise/rng.hpp"

namespace testsupport {

/// Minimal assignment cost over all permutations (equal-weight n vs n
/// instances only; n <= ~8).
inline double brute_force_ot_cost(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += cost(i, perm[static_cast<size_t>(i)]);
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

/// Composite Simpson rule on [a, b].
template <typename F>
double simpson(const F& f, double a, double b, int intervals = 2000) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int k = 1; k < intervals; ++k) acc += f(a + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

inline double normal_pdf(double x, double mean = 0.0, double sd = 1.0) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

/// Quantile by bisection on the cdf (plenty for test accuracy).
inline double normal_quantile(double p, double mean = 0.0, double sd = 1.0) {
  double lo = mean - 12 * sd, hi = mean + 12 * sd;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid, mean, sd) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline Eigen::MatrixXd random_points(otdenoise::SplitRng& rng, int n, int dim,
                                     double scale = 1.0) {
  Eigen::MatrixXd m(n, dim);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < dim; ++k) m(i, k) = scale * rng.normal();
  return m;
}

struct LatentRelaxationResult {
  double value = 0.0;
  Eigen::MatrixXd delta_values;  // barycentric projection of the z-side plan
};

/// LP oracle for the soft latent-penalty problem over couplings: variables
/// pi (mu x grid), pi_tilde (grid x G), and the shared free marginal on the
/// grid; grid = all pairwise barycenter points T(z_i, theta_j).
inline LatentRelaxationResult solve_latent_relaxation_lp(
    const Eigen::MatrixXd& theta_bar_values,  // n x m (theta_bar at z_i, uniform mu)
    const otdenoise::DiscreteMeasure& g_star, double tau) {
  const int n = static_cast<int>(theta_bar_values.rows());
  const int g = g_star.size();
  const int m = static_cast<int>(theta_bar_values.cols());
  const double wb = 2.0 * tau / (1.0 + 2.0 * tau);
  const double wo = 1.0 / (1.0 + 2.0 * tau);

  // Candidate grid of intermediate atoms.
  const int grid_n = n * g;
  Eigen::MatrixXd grid(grid_n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g; ++j)
      grid.row(i * g + j) = wb * theta_bar_values.row(i) + wo * g_star.atoms().row(j);

  // Variables: pi (n*grid_n), pt (grid_n*g), nu (grid_n).
  const int off_pt = n * grid_n;
  const int off_nu = off_pt + grid_n * g;
  const int total = off_nu + grid_n;
  const int rows = n + grid_n + grid_n + g;
  otdenoise::LpProblem lp;
  lp.A = Eigen::MatrixXd::Zero(rows, total);
  lp.b = Eigen::VectorXd::Zero(rows);
  lp.c = Eigen::VectorXd::Zero(total);
  const auto pi = [&](int i, int k) { return i * grid_n + k; };
  const auto pt = [&](int k, int j) { return off_pt + k * g + j; };

  int row = 0;
  for (int i = 0; i < n; ++i, ++row) {  // pi row sums = 1/n
    for (int k = 0; k < grid_n; ++k) lp.A(row, pi(i, k)) = 1.0;
    lp.b[row] = 1.0 / n;
  }
  for (int k = 0; k < grid_n; ++k, ++row) {  // pi col sums = nu
    for (int i = 0; i < n; ++i) lp.A(row, pi(i, k)) = 1.0;
    lp.A(row, off_nu + k) = -1.0;
  }
  for (int k = 0; k < grid_n; ++k, ++row) {  // pt row sums = nu
    for (int j = 0; j < g; ++j) lp.A(row, pt(k, j)) = 1.0;
    lp.A(row, off_nu + k) = -1.0;
  }
  for (int j = 0; j < g; ++j, ++row) {  // pt col sums = G weights
    for (int k = 0; k < grid_n; ++k) lp.A(row, pt(k, j)) = 1.0;
    lp.b[row] = g_star.weights()[j];
  }

  for (int i = 0; i < n; ++i)
    for (int k = 0; k < grid_n; ++k)
      lp.c[pi(i, k)] = (theta_bar_values.row(i) - grid.row(k)).squaredNorm();
  for (int k = 0; k < grid_n; ++k)
    for (int j = 0; j < g; ++j)
      lp.c[pt(k, j)] =
          (grid.row(k) - g_star.atoms().row(j)).squaredNorm() / (2.0 * tau);

  const otdenoise::LpSolution sol = otdenoise::solve_lp(lp);
  LatentRelaxationResult out;
  out.value = sol.value;
  out.delta_values.resize(n, m);
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(m);
    double mass = 0.0;
    for (int k = 0; k < grid_n; ++k) {
      const double p = sol.x[pi(i, k)];
      if (p > 0.0) {
        acc += p * grid.row(k);
        mass += p;
      }
    }
    out.delta_values.row(i) = acc / mass;
  }
  return out;
}

}  // namespace testsupport
