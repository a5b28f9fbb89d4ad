#include "otdenoise/observable_penalty.hpp"

#include <cmath>

#include "otdenoise/lp.hpp"
#include "otdenoise/posterior_mean.hpp"
#include "otdenoise/denoiser.hpp"

namespace otdenoise {

namespace {

// Spec'd switch point between the exact and regularized W2 backends.
constexpr int kExactAtomLimit = 2000;

TransportPlan penalty_plan(const DiscreteMeasure& mu_n, const DiscreteMeasure& mu_delta,
                           const OTConfig& cfg) {
  OTConfig local = cfg;
  local.method =
      mu_delta.size() <= kExactAtomLimit ? OTMethod::exact_lp : OTMethod::sinkhorn;
  return solve_ot(mu_n, mu_delta, squared_cost_matrix(mu_n, mu_delta), local);
}

nlohmann::json dense_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd dense_from_json(const nlohmann::json& j) {
  const int n = static_cast<int>(j.size());
  const int k = n == 0 ? 0 : static_cast<int>(j[0].size());
  Eigen::MatrixXd m(n, k);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c)
      m(i, c) = j[static_cast<size_t>(i)][static_cast<size_t>(c)].get<double>();
  return m;
}

int nearest_grid_row(const Eigen::MatrixXd& grid, const Eigen::VectorXd& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid.rows(); ++j) {
    const double d = (grid.row(j).transpose() - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

void RelaxationInstance::validate() const {
  if (theta_grid.rows() == 0 || z3_grid.rows() == 0)
    throw EmptySampleError("relaxation grids must be nonempty");
  if (likelihood_matrix.rows() != theta_grid.rows() ||
      likelihood_matrix.cols() != z3_grid.rows())
    throw DimError("likelihood_matrix shape does not match the grids");
  if (!(tau > 0.0)) throw InvariantError("tau must be positive");
  for (int j = 0; j < likelihood_matrix.rows(); ++j) {
    const double s = likelihood_matrix.row(j).sum();
    if (std::abs(s - 1.0) > 1e-6)
      throw InvariantError("likelihood_matrix row " + std::to_string(j) +
                           " sums to " + std::to_string(s));
  }
  if ((likelihood_matrix.array() < 0.0).any())
    throw InvariantError("likelihood_matrix has negative entries");
}

nlohmann::json RelaxationInstance::to_json() const {
  return {{"z_atoms", z_atoms.to_json()},
          {"theta_grid", dense_to_json(theta_grid)},
          {"z3_grid", dense_to_json(z3_grid)},
          {"likelihood_matrix", dense_to_json(likelihood_matrix)},
          {"tau", tau}};
}

RelaxationInstance RelaxationInstance::from_json(const nlohmann::json& j) {
  RelaxationInstance inst{DiscreteMeasure::from_json(j.at("z_atoms")),
                          dense_from_json(j.at("theta_grid")),
                          dense_from_json(j.at("z3_grid")),
                          dense_from_json(j.at("likelihood_matrix")),
                          j.at("tau").get<double>()};
  inst.validate();
  return inst;
}

RelaxationInstance make_relaxation_instance(const LikelihoodModel& model,
                                            const DiscreteMeasure& mu_n,
                                            const Eigen::MatrixXd& theta_grid,
                                            const Eigen::VectorXd& z3_centers,
                                            double tau) {
  if (model.obs_dim() != 1)
    throw UnsupportedError("instance builder supports 1-d observation spaces");
  const int j_count = static_cast<int>(theta_grid.rows());
  const int l_count = static_cast<int>(z3_centers.size());
  Eigen::MatrixXd z3(l_count, 1);
  z3.col(0) = z3_centers;

  // Cell widths from midpoints between neighbors.
  Eigen::VectorXd width(l_count);
  for (int l = 0; l < l_count; ++l) {
    const double left = l == 0 ? z3_centers[0] - 0.5 * (z3_centers[1] - z3_centers[0])
                               : 0.5 * (z3_centers[l - 1] + z3_centers[l]);
    const double right = l == l_count - 1
                             ? z3_centers[l] + 0.5 * (z3_centers[l] - z3_centers[l - 1])
                             : 0.5 * (z3_centers[l] + z3_centers[l + 1]);
    width[l] = right - left;
  }

  Eigen::MatrixXd p(j_count, l_count);
  Eigen::VectorXd z(1);
  for (int j = 0; j < j_count; ++j) {
    for (int l = 0; l < l_count; ++l) {
      z[0] = z3_centers[l];
      p(j, l) = model.density(z, theta_grid.row(j).transpose()) * width[l];
    }
    const double s = p.row(j).sum();
    if (s <= 0.0)
      throw InfeasibleError("theta-grid atom " + std::to_string(j) +
                            " puts no mass on the z3 grid");
    p.row(j) /= s;
  }
  RelaxationInstance inst{mu_n, theta_grid, std::move(z3), std::move(p), tau};
  inst.validate();
  return inst;
}

DiscreteMeasure mu_delta_sample(const LikelihoodModel& model, const DeltaTable& delta,
                                int K, std::uint64_t seed) {
  if (K < 1) throw InvariantError("K must be at least 1");
  const int n = static_cast<int>(delta.values.rows());
  if (n == 0) throw EmptySampleError("empty delta table");
  Eigen::MatrixXd atoms(n * K, model.obs_dim());
  for (int i = 0; i < n; ++i) {
    SplitRng rng(seed, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd theta = delta.values.row(i).transpose();
    for (int k = 0; k < K; ++k)
      atoms.row(i * K + k) = model.sample(theta, rng).transpose();
  }
  return DiscreteMeasure::empirical(atoms);
}

ObjectiveValue objective_E_tau(const LikelihoodModel& model, const DiscreteMeasure& mu_n,
                               const Eigen::MatrixXd& theta_bar_values, double r_bayes_hat,
                               const DeltaTable& delta, double tau, int K,
                               const OTConfig& cfg, std::uint64_t seed) {
  if (!(tau > 0.0)) throw InvariantError("tau must be positive");
  const int n = static_cast<int>(delta.values.rows());
  if (theta_bar_values.rows() != n) throw AlignError("theta_bar table size mismatch");

  ObjectiveValue out;
  out.fitted = (delta.values - theta_bar_values).rowwise().squaredNorm().mean();
  const DiscreteMeasure mu_delta = mu_delta_sample(model, delta, K, seed);
  out.penalty = penalty_plan(mu_n, mu_delta, cfg).cost_value() / (2.0 * tau);
  out.r_bayes = r_bayes_hat;
  out.total = out.fitted + out.penalty + out.r_bayes;
  return out;
}

ObjectiveValue objective_E_tau_discretized(const RelaxationInstance& instance,
                                           const Eigen::MatrixXd& theta_bar_values,
                                           double r_bayes_hat, const DeltaTable& delta) {
  instance.validate();
  const int n = instance.z_atoms.size();
  if (delta.values.rows() != n || theta_bar_values.rows() != n)
    throw AlignError("delta/theta_bar tables do not match the instance");

  ObjectiveValue out;
  out.fitted = 0.0;
  Eigen::VectorXd mu_delta_w = Eigen::VectorXd::Zero(instance.z3_grid.rows());
  for (int i = 0; i < n; ++i) {
    const double w = instance.z_atoms.weights()[i];
    out.fitted += w * (delta.values.row(i) - theta_bar_values.row(i)).squaredNorm();
    const int j = nearest_grid_row(instance.theta_grid, delta.values.row(i).transpose());
    mu_delta_w += w * instance.likelihood_matrix.row(j).transpose();
  }
  mu_delta_w /= mu_delta_w.sum();
  const DiscreteMeasure mu_delta(instance.z3_grid, mu_delta_w);
  out.penalty =
      w2_squared(mu_delta, instance.z_atoms, OTConfig{}) / (2.0 * instance.tau);
  out.r_bayes = r_bayes_hat;
  out.total = out.fitted + out.penalty + out.r_bayes;
  return out;
}

GradientResult gradient_E_tau(const LikelihoodModel& model, const DiscreteMeasure& mu_n,
                              const Eigen::MatrixXd& theta_bar_values,
                              const DeltaTable& delta, double tau, int K,
                              const OTConfig& cfg, std::uint64_t seed) {
  if (!(tau > 0.0)) throw InvariantError("tau must be positive");
  if (!model.has_score())
    throw UnsupportedError("gradient needs a family differentiable in theta");
  const int n = static_cast<int>(delta.values.rows());
  const int m = model.latent_dim();
  if (theta_bar_values.rows() != n) throw AlignError("theta_bar table size mismatch");

  const DiscreteMeasure mu_delta = mu_delta_sample(model, delta, K, seed);
  const TransportPlan plan = penalty_plan(mu_n, mu_delta, cfg);
  if (!plan.duals())
    throw DegenerateError("penalty OT solve produced no dual potentials");
  const Eigen::VectorXd& psi = plan.duals()->target;

  GradientResult res;
  res.grad.resize(n, m);
  res.penalty_term.resize(n, m);
  res.fitted_term = 2.0 * (delta.values - theta_bar_values);
  // Degenerate vertex: strictly fewer positive entries than a spanning tree.
  const int positive = static_cast<int>((plan.matrix().array() > 1e-15).count());
  res.degenerate = positive < mu_n.size() + mu_delta.size() - 1;

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd theta = delta.values.row(i).transpose();
    Eigen::VectorXd mc = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < K; ++k) {
      const int atom = i * K + k;
      mc += psi[atom] * model.score_theta(mu_delta.atom(atom), theta);
    }
    res.penalty_term.row(i) = (mc / static_cast<double>(K)).transpose();
    res.grad.row(i) = res.fitted_term.row(i) + res.penalty_term.row(i) / (2.0 * tau);
  }
  return res;
}

DescentTrace gradient_descent(const LikelihoodModel& model, const DiscreteMeasure& mu_n,
                              const Eigen::MatrixXd& theta_bar_values,
                              const DeltaTable& init, double tau, double lambda,
                              int iterations, int K, const OTConfig& cfg,
                              std::uint64_t seed) {
  if (!(lambda >= 0.0)) throw InvariantError("lambda must be nonnegative");
  DescentTrace trace;
  DeltaTable current = init;
  const std::uint64_t eval_seed = SplitRng::derive_key(seed, 0xE7A1);

  auto record = [&](const DeltaTable& table) {
    trace.iterates.push_back(table);
    trace.objective.push_back(
        objective_E_tau(model, mu_n, theta_bar_values, 0.0, table, tau, K, cfg, eval_seed)
            .total);
  };
  record(current);

  for (int it = 0; it < iterations; ++it) {
    const std::uint64_t step_seed = SplitRng::derive_key(seed, static_cast<std::uint64_t>(it + 1));
    const GradientResult g =
        gradient_E_tau(model, mu_n, theta_bar_values, current, tau, K, cfg, step_seed);
    current.values -= lambda * g.grad;
    for (int i = 0; i < current.values.rows(); ++i)
      current.values.row(i) =
          model.domain().project(current.values.row(i).transpose()).transpose();
    record(current);
  }
  return trace;
}

RelaxationSolution solve_relaxation(const RelaxationInstance& instance,
                                    const Eigen::MatrixXd& theta_bar_values) {
  instance.validate();
  const int n = instance.z_atoms.size();
  const int j_count = static_cast<int>(instance.theta_grid.rows());
  const int l_count = static_cast<int>(instance.z3_grid.rows());
  if (theta_bar_values.rows() != n)
    throw AlignError("theta_bar table does not match the instance");

  // Variable layout: pi12 (n*J), pi34 (L*n), gamma2 (J), gamma3 (L).
  const int v12 = n * j_count;
  const int v34 = l_count * n;
  const int off34 = v12;
  const int off_g2 = v12 + v34;
  const int off_g3 = off_g2 + j_count;
  const int total_vars = off_g3 + l_count;
  const int rows = 2 * n + j_count + 2 * l_count;

  LpProblem lp;
  lp.A = Eigen::MatrixXd::Zero(rows, total_vars);
  lp.b = Eigen::VectorXd::Zero(rows);
  lp.c = Eigen::VectorXd::Zero(total_vars);

  const auto idx12 = [&](int i, int j) { return i * j_count + j; };
  const auto idx34 = [&](int l, int i) { return off34 + l * n + i; };

  int row = 0;
  // (a) pi12 row sums = mu_n weights.
  for (int i = 0; i < n; ++i, ++row) {
    for (int j = 0; j < j_count; ++j) lp.A(row, idx12(i, j)) = 1.0;
    lp.b[row] = instance.z_atoms.weights()[i];
  }
  // (b) pi12 column sums - gamma2 = 0.
  for (int j = 0; j < j_count; ++j, ++row) {
    for (int i = 0; i < n; ++i) lp.A(row, idx12(i, j)) = 1.0;
    lp.A(row, off_g2 + j) = -1.0;
  }
  // (c) gamma3 - P' gamma2 = 0.
  for (int l = 0; l < l_count; ++l, ++row) {
    lp.A(row, off_g3 + l) = 1.0;
    for (int j = 0; j < j_count; ++j) lp.A(row, off_g2 + j) = -instance.likelihood_matrix(j, l);
  }
  // (d) pi34 row sums - gamma3 = 0.
  for (int l = 0; l < l_count; ++l, ++row) {
    for (int i = 0; i < n; ++i) lp.A(row, idx34(l, i)) = 1.0;
    lp.A(row, off_g3 + l) = -1.0;
  }
  // (e) pi34 column sums = mu_n weights.
  for (int i = 0; i < n; ++i, ++row) {
    for (int l = 0; l < l_count; ++l) lp.A(row, idx34(l, i)) = 1.0;
    lp.b[row] = instance.z_atoms.weights()[i];
  }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < j_count; ++j)
      lp.c[idx12(i, j)] =
          (instance.theta_grid.row(j) - theta_bar_values.row(i)).squaredNorm();
  const double half_inv_tau = 1.0 / (2.0 * instance.tau);
  for (int l = 0; l < l_count; ++l)
    for (int i = 0; i < n; ++i)
      lp.c[idx34(l, i)] =
          half_inv_tau *
          (instance.z3_grid.row(l) - instance.z_atoms.atoms().row(i)).squaredNorm();

  const LpSolution sol = solve_lp(lp);
  if (!sol.feasible)
    throw InfeasibleError("relaxation LP infeasible (check the kernel discretization)");

  RelaxationSolution out;
  out.value = sol.value;
  out.pi12.resize(n, j_count);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < j_count; ++j) out.pi12(i, j) = sol.x[idx12(i, j)];
  out.pi34.resize(l_count, n);
  for (int l = 0; l < l_count; ++l)
    for (int i = 0; i < n; ++i) out.pi34(l, i) = sol.x[idx34(l, i)];
  out.gamma2 = sol.x.segment(off_g2, j_count);
  out.gamma3 = sol.x.segment(off_g3, l_count);

  out.fitted_term = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < j_count; ++j)
      if (out.pi12(i, j) > 0.0)
        out.fitted_term +=
            out.pi12(i, j) *
            (instance.theta_grid.row(j) - theta_bar_values.row(i)).squaredNorm();
  out.penalty_sum = 0.0;
  for (int l = 0; l < l_count; ++l)
    for (int i = 0; i < n; ++i)
      if (out.pi34(l, i) > 0.0)
        out.penalty_sum +=
            out.pi34(l, i) *
            (instance.z3_grid.row(l) - instance.z_atoms.atoms().row(i)).squaredNorm();

  // delta_gamma(Z_i): barycentric projection of the pi12 row.
  out.delta_values.resize(n, instance.theta_grid.cols());
  for (int i = 0; i < n; ++i) {
    const double mass = out.pi12.row(i).sum();
    if (mass <= 0.0) throw ZeroRowError("relaxation left observation " + std::to_string(i) +
                                        " without mass");
    out.delta_values.row(i) = out.pi12.row(i) * instance.theta_grid / mass;
  }
  return out;
}

std::vector<TauSweepPoint> tau_sweep_convergence(
    const LikelihoodModel& model, const JointSample& joint,
    const DiscreteMeasure& g_star, const std::vector<double>& taus,
    const std::function<RelaxationInstance(double)>& instance_builder) {
  for (size_t k = 1; k < taus.size(); ++k)
    if (!(taus[k] < taus[k - 1]))
      throw InvariantError("taus must be strictly decreasing");

  // Reference map: OT denoiser built from the true prior.
  const PosteriorMeanEstimator theta_bar =
      PosteriorMeanEstimator::discrete(model, g_star);
  const DenoiserMap reference = build_ot_denoiser(joint.zs, theta_bar, g_star, OTConfig{});
  const Eigen::MatrixXd tb_values = theta_bar.evaluate_rows(joint.zs);

  std::vector<TauSweepPoint> sweep;
  sweep.reserve(taus.size());
  for (const double tau : taus) {
    RelaxationInstance inst = instance_builder(tau);
    const RelaxationSolution sol = solve_relaxation(inst, tb_values);
    TauSweepPoint pt;
    pt.tau = tau;
    pt.value = sol.value;
    pt.penalty_sum = sol.penalty_sum;
    pt.l2_distance =
        (sol.delta_values - reference.values()).rowwise().squaredNorm().mean();
    sweep.push_back(pt);
  }
  return sweep;
}

}  // namespace otdenoise
