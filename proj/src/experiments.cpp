#include "otdenoise/experiments.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "otdenoise/denoiser.hpp"
#include "otdenoise/npmle.hpp"
#include "otdenoise/observable_penalty.hpp"
#include "otdenoise/risk.hpp"

namespace otdenoise {
namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }
Eigen::MatrixXd scalar_mat(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

// Static index chunking: outputs land in preallocated slots, so results do
// not depend on scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int i = t; i < count; i += threads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// --- config access helpers -------------------------------------------------

const nlohmann::json& require_field(const nlohmann::json& cfg, const char* key) {
  if (!cfg.contains(key))
    throw ConfigError(std::string("missing required config field \"") + key + "\"");
  return cfg.at(key);
}

double require_number(const nlohmann::json& cfg, const char* key) {
  const auto& v = require_field(cfg, key);
  if (!v.is_number())
    throw ConfigError(std::string("config field \"") + key + "\" must be a number");
  return v.get<double>();
}

int require_int(const nlohmann::json& cfg, const char* key) {
  const auto& v = require_field(cfg, key);
  if (!v.is_number_integer())
    throw ConfigError(std::string("config field \"") + key + "\" must be an integer");
  return v.get<int>();
}

double number_or(const nlohmann::json& cfg, const char* key, double fallback) {
  return cfg.contains(key) ? require_number(cfg, key) : fallback;
}

int int_or(const nlohmann::json& cfg, const char* key, int fallback) {
  return cfg.contains(key) ? require_int(cfg, key) : fallback;
}

Eigen::VectorXd grid_from_config(const nlohmann::json& spec, const char* what) {
  if (spec.is_array()) {
    Eigen::VectorXd v(static_cast<int>(spec.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = spec[static_cast<size_t>(i)].get<double>();
    return v;
  }
  if (spec.is_object() && spec.contains("lo") && spec.contains("hi") &&
      spec.contains("count")) {
    const double lo = spec.at("lo").get<double>();
    const double hi = spec.at("hi").get<double>();
    const int count = spec.at("count").get<int>();
    if (count < 2 || !(hi > lo))
      throw ConfigError(std::string(what) + ": need count >= 2 and hi > lo");
    Eigen::VectorXd v(count);
    for (int i = 0; i < count; ++i) v[i] = lo + (hi - lo) * i / (count - 1);
    return v;
  }
  throw ConfigError(std::string(what) + ": expected an array or {lo, hi, count}");
}

DiscreteMeasure measure_from_config(const nlohmann::json& spec, const char* what) {
  try {
    if (spec.is_array()) {  // bare 1-d atom list, uniform weights
      std::vector<double> atoms = spec.get<std::vector<double>>();
      return DiscreteMeasure::empirical(atoms);
    }
    return DiscreteMeasure::from_json(spec);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

// --- artifact writers --------------------------------------------------------

class ArtifactWriter {
public:
  ArtifactWriter(std::string out_dir, nlohmann::json config)
      : out_dir_(std::move(out_dir)), config_(std::move(config)) {
    std::filesystem::create_directories(out_dir_);
  }

  void write_text(const std::string& name, const std::string& body) {
    std::ofstream os(path(name), std::ios::binary);
    if (!os) throw Error("cannot open " + path(name) + " for writing");
    os << body;
    artifacts_.push_back(name);
  }

  void write_json(const std::string& name, const nlohmann::json& j) {
    write_text(name, j.dump(2) + "\n");
  }

  void describe(const std::string& name, const std::string& schema) {
    schemas_[name] = schema;
  }

  std::vector<std::string> finish() {
    nlohmann::json manifest;
    manifest["kind"] = config_.at("kind");
    manifest["seed"] = config_.at("seed");
    manifest["config"] = config_;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(config_hash(config_)));
    manifest["config_hash"] = hash;
    manifest["version"] = kVersion;
    manifest["artifacts"] = artifacts_;
    manifest["schemas"] = schemas_;
    write_json("manifest.json", manifest);
    return artifacts_;
  }

private:
  std::string path(const std::string& name) const { return out_dir_ + "/" + name; }

  std::string out_dir_;
  nlohmann::json config_;
  std::vector<std::string> artifacts_;
  nlohmann::json schemas_ = nlohmann::json::object();
};

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- experiment kinds --------------------------------------------------------

// Scatter-plus-segments data for the 1-d normal-normal panel: observations,
// latents, Bayes estimates and OT-denoised values per index.
void run_figure1_left(const nlohmann::json& cfg, ArtifactWriter& w) {
  const int n = int_or(cfg, "n", 60);
  const double tau2 = number_or(cfg, "tau2", 1.0);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

  GenerativeSpec spec{LikelihoodModel::gaussian_location(1, 1.0),
                      GaussianPrior{scalar(0.0), scalar_mat(tau2)}, seed};
  const JointSample joint = sample_joint(spec, n);
  const GaussianClosedFormDenoiser closed(scalar(0.0), scalar_mat(tau2), scalar_mat(1.0));

  std::string csv = "index,z,theta,bayes,ot_denoiser\n";
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = joint.zs.row(i).transpose();
    csv += std::to_string(i) + ',' + fmt(z[0]) + ',' + fmt(joint.thetas(i, 0)) + ',' +
           fmt(closed.theta_bar(z)[0]) + ',' + fmt(closed.delta_star(z)[0]) + '\n';
  }
  w.describe("points.csv", "index,z,theta,bayes,ot_denoiser");
  w.write_text("points.csv", csv);
}

void run_figure1_risk_curve(const nlohmann::json& cfg, ArtifactWriter& w, int threads) {
  const Eigen::VectorXd tau2_grid =
      grid_from_config(require_field(cfg, "tau2_grid"), "tau2_grid");
  const int n_rep = int_or(cfg, "n_rep", 50000);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  if (n_rep < 2) throw ConfigError("n_rep must be at least 2");

  const std::vector<double> grid(tau2_grid.begin(), tau2_grid.end());
  const ClosedFormRisks cf = closed_form_risks(grid);

  struct Cell {
    RiskEstimate est;
    double closed = 0.0;
  };
  const int points = static_cast<int>(grid.size());
  std::vector<std::array<Cell, 3>> cells(static_cast<size_t>(points));

  parallel_for(points, threads, [&](int k) {
    const double tau2 = grid[static_cast<size_t>(k)];
    GenerativeSpec spec{LikelihoodModel::gaussian_location(1, 1.0),
                        GaussianPrior{scalar(0.0), scalar_mat(tau2)}, seed};
    const GaussianClosedFormDenoiser closed(scalar(0.0), scalar_mat(tau2), scalar_mat(1.0));
    auto& row = cells[static_cast<size_t>(k)];
    row[0].est = mc_risk(
        spec, [](const Eigen::VectorXd& z) { return z; }, n_rep, 3 * k);
    row[0].closed = cf.identity[static_cast<size_t>(k)];
    row[1].est = mc_risk(
        spec, [&](const Eigen::VectorXd& z) { return closed.theta_bar(z); }, n_rep,
        3 * k + 1);
    row[1].closed = cf.bayes[static_cast<size_t>(k)];
    row[2].est = mc_risk(
        spec, [&](const Eigen::VectorXd& z) { return closed.delta_star(z); }, n_rep,
        3 * k + 2);
    row[2].closed = cf.ot_denoiser[static_cast<size_t>(k)];
  });

  RiskReport report;
  report.sweep_parameter = "tau2";
  const char* names[3] = {"identity", "bayes", "ot_denoiser"};
  for (int k = 0; k < points; ++k) {
    for (int e = 0; e < 3; ++e) {
      const Cell& c = cells[static_cast<size_t>(k)][static_cast<size_t>(e)];
      report.rows.push_back({grid[static_cast<size_t>(k)], names[e], c.est.risk,
                             c.est.std_error, c.est.n_rep, c.closed});
    }
  }
  std::ostringstream os;
  report.write_csv(os);
  w.describe("risk_curve.csv", "sweep_value,estimator,risk,stderr,n_rep,closed_form");
  w.write_text("risk_curve.csv", os.str());
}

void run_figure2_circle(const nlohmann::json& cfg, ArtifactWriter& w) {
  const int n = int_or(cfg, "n", 60);
  const double sigma = number_or(cfg, "sigma", 0.3);
  const int m_atoms = int_or(cfg, "prior_atoms", 1200);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

  Eigen::MatrixXd atoms(m_atoms, 2);
  for (int k = 0; k < m_atoms; ++k) {
    const double ang = 2.0 * M_PI * k / m_atoms;
    atoms(k, 0) = std::cos(ang);
    atoms(k, 1) = std::sin(ang);
  }
  const DiscreteMeasure circle = DiscreteMeasure::empirical(atoms);
  GenerativeSpec spec{LikelihoodModel::gaussian_location(2, sigma), circle, seed};
  const JointSample joint = sample_joint(spec, n);
  const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(spec.model, circle);
  const DenoiserMap map = build_ot_denoiser(joint.zs, tb, circle, OTConfig{});

  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    worst = std::max(worst, std::abs(map.values().row(i).norm() - 1.0));

  nlohmann::json out;
  out["z"] = matrix_rows(joint.zs);
  out["theta"] = matrix_rows(joint.thetas);
  out["bayes"] = matrix_rows(map.theta_bar_at_eval());
  out["ot_denoiser"] = matrix_rows(map.values());
  out["max_circle_deviation"] = worst;
  w.describe("figure2.json", "z/theta/bayes/ot_denoiser: n x 2 row arrays");
  w.write_json("figure2.json", out);
}

void run_npmle_pipeline(const nlohmann::json& cfg, ArtifactWriter& w) {
  const int n = require_int(cfg, "n");
  const double sigma = number_or(cfg, "sigma", 1.0);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const DiscreteMeasure g_star =
      measure_from_config(require_field(cfg, "g_star"), "g_star");

  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, sigma);
  GenerativeSpec spec{model, g_star, seed};
  const JointSample joint = sample_joint(spec, n);

  const bool skip_npmle = cfg.contains("skip_npmle") && cfg.at("skip_npmle").get<bool>();

  nlohmann::json diagnostics;
  DiscreteMeasure g_hat = g_star;
  if (!skip_npmle) {
    NpmleConfig ncfg;
    if (cfg.contains("grid")) {
      const Eigen::VectorXd grid = grid_from_config(cfg.at("grid"), "grid");
      ncfg.grid.resize(grid.size(), 1);
      ncfg.grid.col(0) = grid;
    } else {
      ncfg.grid = default_grid(joint.zs, 41);
    }
    ncfg.max_iters = int_or(cfg, "max_iters", 50000);
    ncfg.tol = number_or(cfg, "tol", 1e-10);
    const NpmleResult fit = npmle_fit(model, joint.zs, ncfg);
    g_hat = fit.g_hat;

    std::string trace = "iteration,loglik\n";
    for (size_t k = 0; k < fit.loglik_trace.size(); ++k)
      trace += std::to_string(k) + ',' + fmt(fit.loglik_trace[k]) + '\n';
    w.describe("loglik_trace.csv", "iteration,loglik");
    w.write_text("loglik_trace.csv", trace);

    diagnostics["optimality_residual"] = fit.optimality_residual;
    diagnostics["iterations"] = fit.iterations;
    diagnostics["converged"] = fit.converged;
    diagnostics["w2_to_g_star"] = std::sqrt(w2_squared(g_hat, g_star));
  }

  const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(model, g_hat);
  OTConfig ot_cfg;
  ot_cfg.method = OTMethod::exact_lp;
  const DenoiserMap map = build_ot_denoiser(joint.zs, tb, g_hat, ot_cfg);

  w.describe("g_hat.json", "measure: {dim, atoms, weights}");
  w.write_json("g_hat.json", g_hat.to_json());
  w.describe("denoiser.json",
             "denoiser map: {eval_points, values, theta_bar, extension, provenance}");
  w.write_json("denoiser.json", map.to_json());

  std::string table = "index,z,theta,theta_bar,delta\n";
  for (int i = 0; i < n; ++i)
    table += std::to_string(i) + ',' + fmt(joint.zs(i, 0)) + ',' +
             fmt(joint.thetas(i, 0)) + ',' + fmt(map.theta_bar_at_eval()(i, 0)) + ',' +
             fmt(map.values()(i, 0)) + '\n';
  w.describe("delta_table.csv", "index,z,theta,theta_bar,delta");
  w.write_text("delta_table.csv", table);

  w.describe("diagnostics.json", "npmle fit diagnostics");
  w.write_json("diagnostics.json", diagnostics);
}

void run_tau_sweep(const nlohmann::json& cfg, ArtifactWriter& w, int threads) {
  const int n = int_or(cfg, "n", 30);
  const double sigma = number_or(cfg, "sigma", 0.5);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const DiscreteMeasure g_star =
      measure_from_config(require_field(cfg, "g_star"), "g_star");
  const auto& taus_json = require_field(cfg, "taus");
  std::vector<double> taus = taus_json.get<std::vector<double>>();

  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, sigma);
  GenerativeSpec spec{model, g_star, seed};
  const JointSample joint = sample_joint(spec, n);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);

  Eigen::VectorXd theta_grid_v = cfg.contains("theta_grid")
                                     ? grid_from_config(cfg.at("theta_grid"), "theta_grid")
                                     : grid_from_config({{"lo", -2.0}, {"hi", 2.0}, {"count", 21}},
                                                        "theta_grid");
  Eigen::MatrixXd theta_grid(theta_grid_v.size(), 1);
  theta_grid.col(0) = theta_grid_v;
  const int z3_cells = int_or(cfg, "z3_cells", 41);
  const double lo = joint.zs.minCoeff() - 1.0;
  const double hi = joint.zs.maxCoeff() + 1.0;
  Eigen::VectorXd z3(z3_cells);
  for (int i = 0; i < z3_cells; ++i) z3[i] = lo + (hi - lo) * i / (z3_cells - 1);

  const auto builder = [&](double tau) {
    return make_relaxation_instance(model, mu_n, theta_grid, z3, tau);
  };

  // The sweep points are independent solves; parallelize but keep the
  // deterministic output order.
  const PosteriorMeanEstimator tb_star = PosteriorMeanEstimator::discrete(model, g_star);
  const DenoiserMap reference = build_ot_denoiser(joint.zs, tb_star, g_star, OTConfig{});
  const Eigen::MatrixXd tb_values = tb_star.evaluate_rows(joint.zs);
  std::vector<TauSweepPoint> points(taus.size());
  parallel_for(static_cast<int>(taus.size()), threads, [&](int k) {
    const RelaxationSolution sol =
        solve_relaxation(builder(taus[static_cast<size_t>(k)]), tb_values);
    TauSweepPoint pt;
    pt.tau = taus[static_cast<size_t>(k)];
    pt.value = sol.value;
    pt.penalty_sum = sol.penalty_sum;
    pt.l2_distance =
        (sol.delta_values - reference.values()).rowwise().squaredNorm().mean();
    points[static_cast<size_t>(k)] = pt;
  });

  std::string csv = "tau,value,penalty_sum,l2_distance,penalty_bound_ok\n";
  for (const auto& pt : points)
    csv += fmt(pt.tau) + ',' + fmt(pt.value) + ',' + fmt(pt.penalty_sum) + ',' +
           fmt(pt.l2_distance) + ',' +
           (pt.penalty_sum <= 2.0 * pt.tau * pt.value + 1e-9 ? "1" : "0") + '\n';
  w.describe("sweep.csv", "tau,value,penalty_sum,l2_distance,penalty_bound_ok");
  w.write_text("sweep.csv", csv);
}

void run_relaxation_demo(const nlohmann::json& cfg, ArtifactWriter& w) {
  const int n = int_or(cfg, "n", 4);
  const double sigma = number_or(cfg, "sigma", 0.6);
  const double tau = number_or(cfg, "tau", 0.7);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const DiscreteMeasure g_star =
      measure_from_config(require_field(cfg, "g_star"), "g_star");

  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, sigma);
  GenerativeSpec spec{model, g_star, seed};
  const JointSample joint = sample_joint(spec, n);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const PosteriorMeanEstimator tb = PosteriorMeanEstimator::discrete(model, g_star);
  const Eigen::MatrixXd tb_values = tb.evaluate_rows(joint.zs);

  Eigen::VectorXd theta_grid_v = cfg.contains("theta_grid")
                                     ? grid_from_config(cfg.at("theta_grid"), "theta_grid")
                                     : grid_from_config({{"lo", -1.5}, {"hi", 1.5}, {"count", 7}},
                                                        "theta_grid");
  Eigen::MatrixXd theta_grid(theta_grid_v.size(), 1);
  theta_grid.col(0) = theta_grid_v;
  const int z3_cells = int_or(cfg, "z3_cells", 29);
  Eigen::VectorXd z3(z3_cells);
  const double lo = joint.zs.minCoeff() - 1.5, hi = joint.zs.maxCoeff() + 1.5;
  for (int i = 0; i < z3_cells; ++i) z3[i] = lo + (hi - lo) * i / (z3_cells - 1);

  const RelaxationInstance inst =
      make_relaxation_instance(model, mu_n, theta_grid, z3, tau);
  const RelaxationSolution sol = solve_relaxation(inst, tb_values);

  const double r_bayes = 0.0;
  DeltaTable induced{sol.delta_values};
  const ObjectiveValue obj = objective_E_tau_discretized(inst, tb_values, r_bayes, induced);

  nlohmann::json out;
  out["value"] = sol.value;
  out["fitted_term"] = sol.fitted_term;
  out["penalty_sum"] = sol.penalty_sum;
  out["gamma2"] = std::vector<double>(sol.gamma2.begin(), sol.gamma2.end());
  out["gamma3"] = std::vector<double>(sol.gamma3.begin(), sol.gamma3.end());
  out["delta_values"] = matrix_rows(sol.delta_values);
  out["objective_at_induced_map"] = obj.total;
  out["identity_gap"] = obj.total - sol.value;
  w.describe("relaxation.json", "relaxation LP solution and the induced-map objective");
  w.write_json("relaxation.json", out);
}

void run_grad_descent_demo(const nlohmann::json& cfg, ArtifactWriter& w) {
  const int n = int_or(cfg, "n", 50);
  const double tau2 = number_or(cfg, "tau2", 1.0);
  const double tau = number_or(cfg, "tau", 10.0);
  const double lambda = number_or(cfg, "lambda", 0.1);
  const int iterations = int_or(cfg, "iterations", 25);
  const int k_draws = int_or(cfg, "K", 30);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

  const LikelihoodModel model = LikelihoodModel::gaussian_location(1, 1.0);
  GenerativeSpec spec{model, GaussianPrior{scalar(0.0), scalar_mat(tau2)}, seed};
  const JointSample joint = sample_joint(spec, n);
  const DiscreteMeasure mu_n = DiscreteMeasure::empirical(joint.zs);
  const GaussianClosedFormDenoiser closed(scalar(0.0), scalar_mat(tau2), scalar_mat(1.0));
  const Eigen::MatrixXd tb = closed.tabulate_bayes(joint.zs).values();

  DeltaTable init{joint.zs};
  const DescentTrace trace = gradient_descent(model, mu_n, tb, init, tau, lambda,
                                              iterations, k_draws, OTConfig{}, seed);

  std::string csv = "iteration,objective,fitted\n";
  for (size_t k = 0; k < trace.objective.size(); ++k) {
    const double fitted =
        (trace.iterates[k].values - tb).rowwise().squaredNorm().mean();
    csv += std::to_string(k) + ',' + fmt(trace.objective[k]) + ',' + fmt(fitted) + '\n';
  }
  w.describe("descent.csv", "iteration,objective,fitted");
  w.write_text("descent.csv", csv);
}

}  // namespace

std::uint64_t config_hash(const nlohmann::json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {
      "figure1_left",   "figure1_risk_curve", "figure2_circle", "npmle_pipeline",
      "tau_sweep",      "relaxation_demo",    "grad_descent_demo"};
  return kinds;
}

std::vector<std::string> run_experiment(const nlohmann::json& config,
                                        const std::string& out_dir, int threads) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  const std::string kind = require_field(config, "kind").get<std::string>();
  if (!config.contains("seed") || !config.at("seed").is_number_integer())
    throw ConfigError("missing required config field \"seed\" (integer)");
  if (threads < 1) throw ConfigError("threads must be >= 1");

  ArtifactWriter writer(out_dir, config);
  if (kind == "figure1_left") {
    run_figure1_left(config, writer);
  } else if (kind == "figure1_risk_curve") {
    run_figure1_risk_curve(config, writer, threads);
  } else if (kind == "figure2_circle") {
    run_figure2_circle(config, writer);
  } else if (kind == "npmle_pipeline") {
    run_npmle_pipeline(config, writer);
  } else if (kind == "tau_sweep") {
    run_tau_sweep(config, writer, threads);
  } else if (kind == "relaxation_demo") {
    run_relaxation_demo(config, writer);
  } else if (kind == "grad_descent_demo") {
    run_grad_descent_demo(config, writer);
  } else {
    throw ConfigError("unknown experiment kind \"" + kind + "\"");
  }
  return writer.finish();
}

}  // namespace otdenoise
