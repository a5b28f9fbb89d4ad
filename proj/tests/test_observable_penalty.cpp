#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "otdenoise/denoiser.hpp"
#include "otdenoise/observable_penalty.hpp"
#include "test_support.hpp"

using namespace otdenoise;
namespace ts = testsupport;

namespace {
Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

Eigen::MatrixXd column(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<int>(v.size()), 1);
  for (int i = 0; i < m.rows(); ++i) m(i, 0) = v[static_cast<size_t>(i)];
  return m;
}

Eigen::VectorXd linspace(double lo, double hi, int count) {
  Eigen::VectorXd v(count);
  for (int i = 0; i < count; ++i) v[i] = lo + (hi - lo) * i / (count - 1);
  return v;
}
}  // namespace

TEST_CASE("mu_delta_sample") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 1.0);

  SUBCASE("K=1, n=1: one conditional draw") {
    DeltaTable delta{column({0.7})};
    const DiscreteMeasure m = mu_delta_sample(model, delta, 1, 5);
    CHECK(m.size() == 1);
    CHECK(m.weights()[0] == doctest::Approx(1.0));
  }
  SUBCASE("matched moments when delta holds the true latents") {
    GenerativeSpec spec{model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}),
                        909};
    const JointSample joint = sample_joint(spec, 400);
    DeltaTable delta{joint.thetas};
    const DiscreteMeasure m = mu_delta_sample(model, delta, 50, 11);
    CHECK(m.size() == 400 * 50);
    const double mc_mean = m.atoms().col(0).mean();
    const double mc_second = m.atoms().col(0).array().square().mean();
    // Z = Theta + eps: matches the joint sample's moments within MC error.
    const double ref_second = joint.thetas.array().square().mean() + 1.0;
    CHECK(std::abs(mc_mean - joint.thetas.mean()) < 0.03);
    CHECK(std::abs(mc_second - ref_second) < 0.06);
  }
  SUBCASE("noiseless limit concentrates at the delta values") {
    const LikelihoodModel tight = LikelihoodModel::gaussian_location(1, 1e-6);
    DeltaTable delta{column({-0.5, 0.25, 3.0})};
    const DiscreteMeasure m = mu_delta_sample(tight, delta, 4, 17);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 4; ++k)
        CHECK(m.atoms()(i * 4 + k, 0) == doctest::Approx(delta.values(i, 0)).epsilon(1e-4));
  }
  SUBCASE("deterministic in the seed, stream split per observation") {
    DeltaTable delta{column({0.0, 1.0})};
    const DiscreteMeasure a = mu_delta_sample(model, delta, 8, 3);
    const DiscreteMeasure b = mu_delta_sample(model, delta, 8, 3);
    CHECK(a.atoms() == b.atoms());
  }
}

TEST_CASE("objective_E_tau") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 1.0);
  GenerativeSpec spec{model, GaussianPrior{scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0)},
                      2222};
  const JointSample joint = sample_joint(spec, 30);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const GaussianClosedFormDenoiser closed(scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0),
                                          Eigen::MatrixXd::Constant(1, 1, 1.0));
  const Eigen::MatrixXd tb = closed.tabulate_bayes(joint.zs).values();
  const double r_bayes = 0.5;

  SUBCASE("bayes point at huge tau: objective is the Bayes constant") {
    DeltaTable delta{tb};
    const ObjectiveValue v =
        objective_E_tau(model, mu_n, tb, r_bayes, delta, 1e12, 20, OTConfig{}, 5);
    CHECK(v.fitted == doctest::Approx(0.0));
    CHECK(v.total == doctest::Approx(r_bayes).epsilon(1e-6));
  }
  SUBCASE("noiseless model with identity delta: penalty vanishes") {
    const LikelihoodModel tight = LikelihoodModel::gaussian_location(1, 1e-9);
    DeltaTable delta{joint.zs};
    const ObjectiveValue v =
        objective_E_tau(tight, mu_n, tb, 0.0, delta, 0.5, 3, OTConfig{}, 6);
    CHECK(v.penalty < 1e-12);
  }
}

TEST_CASE("relaxation instance builder normalizes kernel rows") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 0.5);
  const DiscreteMeasure mu_n =
      DiscreteMeasure::empirical(std::vector<double>{-1.0, 0.0, 1.0});
  const RelaxationInstance inst = make_relaxation_instance(
      model, mu_n, column({-1.0, 1.0}), linspace(-3, 3, 31), 0.5);
  CHECK(inst.likelihood_matrix.rows() == 2);
  CHECK(inst.likelihood_matrix.cols() == 31);
  for (int j = 0; j < 2; ++j)
    CHECK(inst.likelihood_matrix.row(j).sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_NOTHROW(inst.validate());

  // Round trip: the LP is reproducible from the serialized fields alone.
  const RelaxationInstance back = RelaxationInstance::from_json(inst.to_json());
  CHECK(back.likelihood_matrix == inst.likelihood_matrix);
  CHECK(back.theta_grid == inst.theta_grid);
  CHECK(back.z3_grid == inst.z3_grid);
  CHECK(back.tau == inst.tau);
  const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(
      model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}));
  const Eigen::MatrixXd tbv = tb.evaluate_rows(mu_n.atoms());
  CHECK(solve_relaxation(back, tbv).value ==
        doctest::Approx(solve_relaxation(inst, tbv).value).epsilon(1e-12));
}

TEST_CASE("solve_relaxation structure and limits") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 0.5);
  GenerativeSpec spec{model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}),
                      808};
  const JointSample joint = sample_joint(spec, 4);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(
      model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}));
  const Eigen::MatrixXd tb_values = tb.evaluate_rows(joint.zs);
  const Eigen::MatrixXd theta_grid = column({-1.0, -0.5, 0.0, 0.5, 1.0});

  SUBCASE("huge tau snaps gamma2 to the grid-projected posterior means") {
    const RelaxationInstance inst = make_relaxation_instance(
        model, mu_n, theta_grid, linspace(-3, 3, 25), 1e9);
    const RelaxationSolution sol = solve_relaxation(inst, tb_values);
    // Fitted term: each observation transported to the grid atom nearest
    // its posterior mean.
    double expected_fit = 0.0;
    for (int i = 0; i < 4; ++i) {
      double best = 1e300;
      for (int j = 0; j < theta_grid.rows(); ++j)
        best = std::min(best,
                        (theta_grid.row(j) - tb_values.row(i)).squaredNorm());
      expected_fit += 0.25 * best;
    }
    CHECK(sol.fitted_term == doctest::Approx(expected_fit).epsilon(1e-7));
    // Marginal bookkeeping holds.
    CHECK(sol.gamma2.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.gamma3.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((sol.pi12.rowwise().sum() - mu_n.weights()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((sol.pi34.colwise().sum().transpose() - mu_n.weights()).cwiseAbs().maxCoeff() <
          1e-9);
    CHECK((sol.gamma3 - inst.likelihood_matrix.transpose() * sol.gamma2)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
  SUBCASE("penalty-sum bound: sum pi34 |z3-z4|^2 <= 2 tau value") {
    for (const double tau : {10.0, 1.0, 0.1}) {
      const RelaxationInstance inst = make_relaxation_instance(
          model, mu_n, theta_grid, linspace(-3, 3, 25), tau);
      const RelaxationSolution sol = solve_relaxation(inst, tb_values);
      CHECK(sol.penalty_sum <= 2.0 * tau * sol.value + 1e-9);
    }
  }
}

TEST_CASE("relaxation value identity with the discretized objective") {
  // 4-point 1-d instances: LP value + R_Bayes equals the discretized
  // objective at the induced map. The identity requires the optimal pi12
  // rows to be deterministic (the coupling has map form, as in the
  // population statement); the pinned seeds below produce such vertices,
  // and the test asserts that structural precondition explicitly.
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 0.6);
  for (const std::uint64_t seed : {900, 901, 903, 905, 906}) {
    GenerativeSpec spec{model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}),
                        seed};
    const JointSample joint = sample_joint(spec, 4);
    const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
    const DiscreteMeasure prior = DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0});
    const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(model, prior);
    const Eigen::MatrixXd tb_values = tb.evaluate_rows(joint.zs);

    const RelaxationInstance inst = make_relaxation_instance(
        model, mu_n, column({-1.3, -0.6, 0.1, 0.8, 1.5}), linspace(-3.5, 3.5, 29), 0.7);
    const RelaxationSolution sol = solve_relaxation(inst, tb_values);

    for (int i = 0; i < 4; ++i)
      REQUIRE((sol.pi12.row(i).array() > 1e-12).count() == 1);

    const double r_bayes = 0.123;  // arbitrary constant, must cancel in the identity
    DeltaTable induced{sol.delta_values};
    const ObjectiveValue obj =
        objective_E_tau_discretized(inst, tb_values, r_bayes, induced);
    CHECK(obj.total - r_bayes == doctest::Approx(sol.value).epsilon(1e-6));
  }
}

TEST_CASE("relaxation lower-bounds the discretized objective at any table") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 0.6);
  GenerativeSpec spec{model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}),
                      1313};
  const JointSample joint = sample_joint(spec, 4);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(
      model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}));
  const Eigen::MatrixXd tb_values = tb.evaluate_rows(joint.zs);
  const Eigen::MatrixXd theta_grid = column({-1.5, -0.75, 0.0, 0.75, 1.5});
  const RelaxationInstance inst =
      make_relaxation_instance(model, mu_n, theta_grid, linspace(-3.5, 3.5, 29), 0.4);
  const RelaxationSolution sol = solve_relaxation(inst, tb_values);

  SplitRng rng(83, 0);
  for (int rep = 0; rep < 8; ++rep) {
    // Random tables with on-grid values (the discretization is exact there).
    Eigen::MatrixXd values(4, 1);
    for (int i = 0; i < 4; ++i)
      values(i, 0) = theta_grid(static_cast<int>(rng.next_u64() % 5), 0);
    const ObjectiveValue obj =
        objective_E_tau_discretized(inst, tb_values, 0.0, DeltaTable{values});
    CHECK(sol.value <= obj.total + 1e-9);
  }
}

TEST_CASE("gradient_E_tau") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 1.0);
  GenerativeSpec spec{model, GaussianPrior{scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0)},
                      777};
  const JointSample joint = sample_joint(spec, 3);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const GaussianClosedFormDenoiser closed(scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0),
                                          Eigen::MatrixXd::Constant(1, 1, 1.0));
  const Eigen::MatrixXd tb = closed.tabulate_bayes(joint.zs).values();

  SUBCASE("huge tau: gradient collapses to the analytic first term") {
    DeltaTable delta{column({0.4, -0.2, 1.0})};
    const GradientResult g =
        gradient_E_tau(model, mu_n, tb, delta, 1e12, 50, OTConfig{}, 4);
    const Eigen::MatrixXd first = 2.0 * (delta.values - tb);
    CHECK((g.grad - first).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("first term is exactly analytic at moderate tau") {
    DeltaTable delta{column({0.4, -0.2, 1.0})};
    const GradientResult g =
        gradient_E_tau(model, mu_n, tb, delta, 0.5, 50, OTConfig{}, 4);
    DeltaTable delta2{delta.values};
    const GradientResult g2 =
        gradient_E_tau(model, mu_n, tb, delta2, 1e12, 50, OTConfig{}, 4);
    // Subtracting the huge-tau gradient (pure first term, same draws)
    // leaves exactly the penalty part, which scales as 1/(2 tau).
    const Eigen::MatrixXd penalty_part = g.grad - g2.grad;
    CHECK(penalty_part.cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("unsupported family raises") {
    const LikelihoodModel u = LikelihoodModel::uniform_scale();
    DeltaTable delta{column({0.5, 0.5, 0.5})};
    CHECK_THROWS_AS(gradient_E_tau(u, mu_n, tb, delta, 1.0, 10, OTConfig{}, 1),
                    UnsupportedError);
  }
}

TEST_CASE("gradient matches common-random-numbers finite differences") {
  // Reparametrized draws: for the Gaussian location family the sampled
  // mu_delta atoms move one-for-one with delta, so the CRN objective is a
  // deterministic piecewise-smooth function of the table.
  const double sigma = 1.0;
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, sigma);
  GenerativeSpec spec{model, GaussianPrior{scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0)},
                      409};
  const int n = 3, K = 200;
  const JointSample joint = sample_joint(spec, n);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const GaussianClosedFormDenoiser closed(scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0),
                                          Eigen::MatrixXd::Constant(1, 1, 1.0));
  const Eigen::MatrixXd tb = closed.tabulate_bayes(joint.zs).values();
  const double tau = 1.0;
  const std::uint64_t seed = 99;

  DeltaTable base{tb};
  base.values(0, 0) += 0.3;
  base.values(1, 0) -= 0.2;

  // Frozen standard-normal draws, one stream per observation (identical to
  // the generator inside mu_delta_sample).
  Eigen::MatrixXd xi(n, K);
  for (int i = 0; i < n; ++i) {
    SplitRng rng(seed, static_cast<std::uint64_t>(i));
    for (int k = 0; k < K; ++k) xi(i, k) = rng.normal();
  }
  const auto crn_objective = [&](const DeltaTable& delta) {
    Eigen::MatrixXd atoms(n * K, 1);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) atoms(i * K + k, 0) = delta.values(i, 0) + sigma * xi(i, k);
    const DiscreteMeasure mu_delta = DiscreteMeasure::empirical(atoms);
    const double fitted = (delta.values - tb).rowwise().squaredNorm().mean();
    return fitted + w2_squared(mu_n, mu_delta, OTConfig{}) / (2.0 * tau);
  };

  // Sanity: the reparametrized atoms match mu_delta_sample bit for bit.
  const DiscreteMeasure check = mu_delta_sample(model, base, K, seed);
  Eigen::MatrixXd expect(n * K, 1);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) expect(i * K + k, 0) = base.values(i, 0) + sigma * xi(i, k);
  REQUIRE((check.atoms() - expect).cwiseAbs().maxCoeff() < 1e-12);

  const GradientResult g = gradient_E_tau(model, mu_n, tb, base, tau, K, OTConfig{}, seed);

  SplitRng dir_rng(271828, 0);
  const double h = 1e-4;
  int passed = 0;
  for (int rep = 0; rep < 8; ++rep) {
    Eigen::VectorXd dir = dir_rng.normal_vec(n);
    dir /= dir.norm();
    DeltaTable plus = base, minus = base;
    plus.values.col(0) += h * dir;
    minus.values.col(0) -= h * dir;
    const double fd = (crn_objective(plus) - crn_objective(minus)) / (2.0 * h);
    // L2(mu_n) pairing: (1/n) sum_i g_i d_i.
    const double pairing = (g.grad.col(0).array() * dir.array()).mean();
    if (std::abs(fd - pairing) <= 5e-2 * std::max(1.0, std::abs(fd))) ++passed;
  }
  CHECK(passed == 8);
}

TEST_CASE("gradient descent") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 1.0);
  GenerativeSpec spec{model, GaussianPrior{scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0)},
                      5150};
  const JointSample joint = sample_joint(spec, 50);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const GaussianClosedFormDenoiser closed(scalar(0.0), Eigen::MatrixXd::Constant(1, 1, 1.0),
                                          Eigen::MatrixXd::Constant(1, 1, 1.0));
  const Eigen::MatrixXd tb = closed.tabulate_bayes(joint.zs).values();

  SUBCASE("lambda = 0 keeps iterates constant") {
    DeltaTable init{joint.zs};
    const DescentTrace trace =
        gradient_descent(model, mu_n, tb, init, 10.0, 0.0, 3, 10, OTConfig{}, 8);
    for (const DeltaTable& it : trace.iterates)
      CHECK((it.values - joint.zs).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("weak penalty: fitted term shrinks from the identity start") {
    DeltaTable init{joint.zs};
    const DescentTrace trace =
        gradient_descent(model, mu_n, tb, init, 10.0, 0.1, 25, 30, OTConfig{}, 8);
    const double before = (trace.iterates.front().values - tb).rowwise().squaredNorm().mean();
    const double after = (trace.iterates.back().values - tb).rowwise().squaredNorm().mean();
    CHECK(after < before);
  }
  SUBCASE("projection keeps iterates inside Omega") {
    const LikelihoodModel sc = LikelihoodModel::gaussian_scale(1e-2);
    GenerativeSpec sc_spec{sc, DiscreteMeasure::empirical(std::vector<double>{0.5, 1.5}), 66};
    const JointSample sc_joint = sample_joint(sc_spec, 12);
    const DiscreteMeasure sc_mu = DiscreteMeasure::empirical(sc_joint.zs);
    const PosteriorMeanEstimator sc_tb = PosteriorMeanEstimator::discrete(
        sc, DiscreteMeasure::empirical(std::vector<double>{0.5, 1.5}));
    const Eigen::MatrixXd sc_tbv = sc_tb.evaluate_rows(sc_joint.zs);
    DeltaTable init{Eigen::MatrixXd::Constant(12, 1, 0.02)};
    const DescentTrace trace =
        gradient_descent(sc, sc_mu, sc_tbv, init, 0.2, 0.02, 10, 20, OTConfig{}, 9);
    for (const DeltaTable& it : trace.iterates)
      CHECK((it.values.array() >= 1e-2).all());
  }
}

TEST_CASE("descent stays put at the relaxation optimum (stationarity probe)") {
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 0.6);
  GenerativeSpec spec{model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}),
                      424242};
  const JointSample joint = sample_joint(spec, 6);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(
      model, DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0}));
  const Eigen::MatrixXd tb_values = tb.evaluate_rows(joint.zs);
  Eigen::VectorXd z3 = Eigen::VectorXd::LinSpaced(25, -3.0, 3.0);
  const RelaxationInstance inst = make_relaxation_instance(
      model, mu_n, column({-1.0, -0.5, 0.0, 0.5, 1.0}), z3, 1.0);
  const RelaxationSolution sol = solve_relaxation(inst, tb_values);

  DeltaTable init{sol.delta_values};
  const DescentTrace trace =
      gradient_descent(model, mu_n, tb_values, init, 1.0, 0.05, 10, 60, OTConfig{}, 13);
  // Objective trace is CRN-evaluated; allow an MC noise band.
  const double start = trace.objective.front();
  for (const double v : trace.objective) CHECK(v <= start + 0.35 * std::abs(start) + 0.05);
}

TEST_CASE("tau sweep drives the relaxation map to the reference denoiser") {
  const double sigma = 0.5;
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, sigma);
  const DiscreteMeasure g_star = DiscreteMeasure::empirical(std::vector<double>{-1.0, 1.0});
  GenerativeSpec spec{model, g_star, 13};
  const JointSample joint = sample_joint(spec, 30);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);

  const double z_lo = joint.zs.minCoeff() - 1.0;
  const double z_hi = joint.zs.maxCoeff() + 1.0;
  const Eigen::MatrixXd theta_grid = [&] {
    Eigen::MatrixXd g(21, 1);
    for (int i = 0; i < 21; ++i) g(i, 0) = -2.0 + 4.0 * i / 20.0;
    return g;
  }();
  const auto builder = [&](double tau) {
    return make_relaxation_instance(model, mu_n, theta_grid, linspace(z_lo, z_hi, 41), tau);
  };

  const std::vector<double> taus = {10.0, 1.0, 0.1, 0.01};
  const auto sweep = tau_sweep_convergence(model, joint, g_star, taus, builder);

  REQUIRE(sweep.size() == 4);
  for (const auto& pt : sweep)
    CHECK(pt.penalty_sum <= 2.0 * pt.tau * pt.value + 1e-9);
  // Grid-resolution floor: theta spacing 0.2 squared.
  CHECK(sweep.back().l2_distance < 0.04);
  // The sweep's final distance improves on the large-tau start.
  CHECK(sweep.back().l2_distance < sweep.front().l2_distance);
}

TEST_CASE("non-identifiable toy: distances logged, convergence not asserted") {
  // Uniform[0, theta_min + spread] likelihood over a theta set it cannot
  // distinguish: the sweep must still run and report finite distances.
  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 2.5);
  const DiscreteMeasure g_star =
      DiscreteMeasure::empirical(std::vector<double>{-0.1, 0.1});
  GenerativeSpec spec{model, g_star, 77};
  const JointSample joint = sample_joint(spec, 10);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const Eigen::MatrixXd theta_grid = column({-0.1, 0.1});
  const auto builder = [&](double tau) {
    return make_relaxation_instance(model, mu_n, theta_grid,
                                    linspace(joint.zs.minCoeff() - 2, joint.zs.maxCoeff() + 2, 31),
                                    tau);
  };
  const auto sweep = tau_sweep_convergence(model, joint, g_star, {1.0, 0.1}, builder);
  for (const auto& pt : sweep) CHECK(std::isfinite(pt.l2_distance));
}
