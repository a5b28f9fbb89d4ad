#include "otdenoise/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace otdenoise {

namespace {

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m, bool inverse = false) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw MatrixError("eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] <= 0.0) throw MatrixError("matrix square root of a non-PD matrix");
    ev[i] = inverse ? 1.0 / std::sqrt(ev[i]) : std::sqrt(ev[i]);
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::string extension_name(Extension e) {
  return e == Extension::nearest_posterior_mean ? "nearest_posterior_mean"
                                                : "monotone_1d_interp";
}

Extension extension_from_name(const std::string& s) {
  if (s == "nearest_posterior_mean") return Extension::nearest_posterior_mean;
  if (s == "monotone_1d_interp") return Extension::monotone_1d_interp;
  throw Error("unknown extension: " + s);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int n = static_cast<int>(j.size());
  if (n == 0) return {};
  const int k = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(n, k);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) m(i, c) = j[static_cast<size_t>(i)][static_cast<size_t>(c)];
  return m;
}

}  // namespace

DenoiserMap::DenoiserMap(Eigen::MatrixXd eval_points, Eigen::MatrixXd values,
                         Extension extension, std::string provenance,
                         Eigen::MatrixXd theta_bar_at_eval)
    : eval_points_(std::move(eval_points)),
      values_(std::move(values)),
      theta_bar_(std::move(theta_bar_at_eval)),
      extension_(extension),
      provenance_(std::move(provenance)) {
  if (eval_points_.rows() == 0) throw EmptySampleError("denoiser map has no points");
  if (values_.rows() != eval_points_.rows())
    throw DimError("denoiser map: values/eval_points length mismatch");
  if (theta_bar_.rows() != 0 && theta_bar_.rows() != eval_points_.rows())
    throw DimError("denoiser map: theta_bar table length mismatch");
  if (extension_ == Extension::monotone_1d_interp) {
    if (obs_dim() != 1 || latent_dim() != 1)
      throw DimError("monotone_1d_interp requires d = m = 1");
    sorted_.resize(static_cast<size_t>(size()));
    std::iota(sorted_.begin(), sorted_.end(), 0);
    std::stable_sort(sorted_.begin(), sorted_.end(), [&](int a, int b) {
      return eval_points_(a, 0) < eval_points_(b, 0);
    });
    for (size_t k = 1; k < sorted_.size(); ++k) {
      if (values_(sorted_[k], 0) < values_(sorted_[k - 1], 0) - 1e-12)
        throw InvariantError("monotone_1d_interp requires nondecreasing values");
    }
  }
}

Eigen::VectorXd DenoiserMap::value_at_theta_bar(const Eigen::VectorXd& tb) const {
  if (theta_bar_.rows() == 0)
    throw UnsupportedError("map carries no fitted posterior-mean atoms");
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i) {
    const double d = (theta_bar_.row(i).transpose() - tb).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return value_row(best);
}

Eigen::VectorXd DenoiserMap::evaluate(const Eigen::VectorXd& z,
                                      const PosteriorMeanEstimator& theta_bar) const {
  if (extension_ == Extension::monotone_1d_interp) {
    Eigen::VectorXd out(1);
    out[0] = interpolate_1d(z[0]);
    return out;
  }
  return value_at_theta_bar(theta_bar(z));
}

double DenoiserMap::interpolate_1d(double z) const {
  if (extension_ != Extension::monotone_1d_interp)
    throw UnsupportedError("map does not use 1-d interpolation");
  const auto x = [&](size_t k) { return eval_points_(sorted_[k], 0); };
  const auto y = [&](size_t k) { return values_(sorted_[k], 0); };
  if (z <= x(0)) return y(0);
  const size_t last = sorted_.size() - 1;
  if (z >= x(last)) return y(last);
  size_t lo = 0, hi = last;
  while (hi - lo > 1) {
    const size_t mid = (lo + hi) / 2;
    (x(mid) <= z ? lo : hi) = mid;
  }
  const double span = x(hi) - x(lo);
  if (span <= 0.0) return y(lo);
  const double t = (z - x(lo)) / span;
  return (1.0 - t) * y(lo) + t * y(hi);
}

nlohmann::json DenoiserMap::to_json() const {
  nlohmann::json j = {{"eval_points", matrix_to_json(eval_points_)},
                      {"values", matrix_to_json(values_)},
                      {"extension", extension_name(extension_)},
                      {"provenance", provenance_}};
  if (theta_bar_.rows() > 0) j["theta_bar"] = matrix_to_json(theta_bar_);
  return j;
}

DenoiserMap DenoiserMap::from_json(const nlohmann::json& j) {
  Eigen::MatrixXd tb;
  if (j.contains("theta_bar")) tb = matrix_from_json(j.at("theta_bar"));
  return DenoiserMap(matrix_from_json(j.at("eval_points")), matrix_from_json(j.at("values")),
                     extension_from_name(j.at("extension").get<std::string>()),
                     j.at("provenance").get<std::string>(), std::move(tb));
}

DenoiserMap build_ot_denoiser(const Eigen::MatrixXd& sample,
                              const PosteriorMeanEstimator& theta_bar,
                              const DiscreteMeasure& g_hat, const OTConfig& cfg,
                              Extension extension) {
  if (!std::isfinite(g_hat.second_moment()))
    throw InvariantError("target prior has infinite second moment");
  const Eigen::MatrixXd b = theta_bar.evaluate_rows(sample);
  const DiscreteMeasure pushed = DiscreteMeasure::empirical(b);
  const TransportPlan plan =
      solve_ot(pushed, g_hat, squared_cost_matrix(pushed, g_hat), cfg);
  Eigen::MatrixXd values = barycentric_projection(plan);

  // Barycentric projections are convex combinations of target atoms; a
  // bounding-box check catches solver breakage cheaply.
  for (int k = 0; k < values.cols(); ++k) {
    const double lo = g_hat.atoms().col(k).minCoeff();
    const double hi = g_hat.atoms().col(k).maxCoeff();
    if (values.col(k).minCoeff() < lo - 1e-8 || values.col(k).maxCoeff() > hi + 1e-8)
      throw InvariantError("denoiser values escape the target hull");
  }
  return DenoiserMap(sample, std::move(values), extension, "ot_plugin", b);
}

DenoiserMap quantile_denoiser_1d(const Eigen::VectorXd& theta_bar_values,
                                 const DiscreteMeasure& g_hat, const Eigen::MatrixXd& zs) {
  if (g_hat.dim() != 1) throw DimError("quantile denoiser requires a 1-d target");
  const int n = static_cast<int>(theta_bar_values.size());
  if (n == 0) throw EmptySampleError("no posterior-mean values");
  if (zs.rows() != 0 && (zs.rows() != n || zs.cols() != 1))
    throw DimError("zs must be n x 1 when provided");

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return theta_bar_values[a] < theta_bar_values[b];
  });
  std::vector<int> g_order(static_cast<size_t>(g_hat.size()));
  std::iota(g_order.begin(), g_order.end(), 0);
  std::stable_sort(g_order.begin(), g_order.end(), [&](int a, int b) {
    return g_hat.atoms()(a, 0) < g_hat.atoms()(b, 0);
  });

  // Each sorted atom owns the mass interval ((r-1)/n, r/n]; its image is
  // the average of the G quantile function over that interval.
  Eigen::VectorXd values(n);
  int k = 0;
  double used = 0.0;  // mass of the current G atom already consumed
  for (int r = 0; r < n; ++r) {
    double remaining = 1.0 / n;
    double acc = 0.0;
    while (true) {
      const double wk = g_hat.weights()[g_order[static_cast<size_t>(k)]];
      const double gk = g_hat.atoms()(g_order[static_cast<size_t>(k)], 0);
      const double avail = wk - used;
      if (avail >= remaining - 1e-15 || k + 1 == g_hat.size()) {
        acc += remaining * gk;
        used += remaining;
        break;
      }
      acc += avail * gk;
      remaining -= avail;
      ++k;
      used = 0.0;
    }
    if (k + 1 < g_hat.size() &&
        used >= g_hat.weights()[g_order[static_cast<size_t>(k)]] - 1e-15) {
      ++k;
      used = 0.0;
    }
    values[order[static_cast<size_t>(r)]] = acc * n;
  }

  Eigen::MatrixXd eval = zs.rows() > 0 ? zs : Eigen::MatrixXd(theta_bar_values);
  Eigen::MatrixXd tb(n, 1);
  tb.col(0) = theta_bar_values;
  Eigen::MatrixXd vals(n, 1);
  vals.col(0) = values;
  return DenoiserMap(std::move(eval), std::move(vals),
                     Extension::nearest_posterior_mean, "quantile_1d", std::move(tb));
}

DenoiserMap interpolate_denoiser(const DenoiserMap& bayes, const DenoiserMap& ot,
                                 double tau) {
  if (!(tau > 0.0)) throw InvariantError("tau must be positive");
  if (bayes.size() != ot.size() ||
      !bayes.eval_points().isApprox(ot.eval_points(), 1e-12))
    throw AlignError("maps are tabulated on different points");
  const double w_bayes = 2.0 * tau / (1.0 + 2.0 * tau);
  const double w_ot = 1.0 / (1.0 + 2.0 * tau);
  Eigen::MatrixXd values = w_bayes * bayes.values() + w_ot * ot.values();
  Eigen::MatrixXd tb = bayes.theta_bar_at_eval().rows() > 0 ? bayes.theta_bar_at_eval()
                                                            : ot.theta_bar_at_eval();
  char tag[64];
  std::snprintf(tag, sizeof(tag), "interpolant(%.6g)", tau);
  return DenoiserMap(bayes.eval_points(), std::move(values),
                     Extension::nearest_posterior_mean, tag, std::move(tb));
}

GaussianClosedFormDenoiser::GaussianClosedFormDenoiser(Eigen::VectorXd theta_star,
                                                       Eigen::MatrixXd sigma_star,
                                                       Eigen::MatrixXd sigma)
    : posterior_(std::move(theta_star), std::move(sigma_star), std::move(sigma)) {
  const Eigen::MatrixXd& a = posterior_.pushforward_cov();
  const Eigen::MatrixXd a_half = spd_sqrt(a);
  const Eigen::MatrixXd a_half_inv = spd_sqrt(a, true);
  const Eigen::MatrixXd inner = a_half * posterior_.prior_cov() * a_half;
  b_ = a_half_inv * spd_sqrt(inner) * a_half_inv;
}

Eigen::VectorXd GaussianClosedFormDenoiser::theta_bar(const Eigen::VectorXd& z) const {
  return posterior_.posterior_mean(z);
}

Eigen::VectorXd GaussianClosedFormDenoiser::delta_star(const Eigen::VectorXd& z) const {
  return posterior_.prior_mean() + b_ * (theta_bar(z) - posterior_.prior_mean());
}

DenoiserMap GaussianClosedFormDenoiser::tabulate(const Eigen::MatrixXd& zs) const {
  const int n = static_cast<int>(zs.rows());
  Eigen::MatrixXd values(n, posterior_.dim()), tb(n, posterior_.dim());
  for (int i = 0; i < n; ++i) {
    tb.row(i) = theta_bar(zs.row(i).transpose()).transpose();
    values.row(i) = (posterior_.prior_mean() +
                     b_ * (tb.row(i).transpose() - posterior_.prior_mean()))
                        .transpose();
  }
  return DenoiserMap(zs, std::move(values), Extension::nearest_posterior_mean,
                     "gaussian_closed_form", std::move(tb));
}

DenoiserMap GaussianClosedFormDenoiser::tabulate_bayes(const Eigen::MatrixXd& zs) const {
  const int n = static_cast<int>(zs.rows());
  Eigen::MatrixXd tb(n, posterior_.dim());
  for (int i = 0; i < n; ++i) tb.row(i) = theta_bar(zs.row(i).transpose()).transpose();
  return DenoiserMap(zs, tb, Extension::nearest_posterior_mean, "bayes", tb);
}

double latent_penalty_objective(const DenoiserMap& delta, const JointSample& joint,
                                const DiscreteMeasure& g_hat, double tau,
                                const OTConfig& cfg) {
  if (!(tau > 0.0)) throw InvariantError("tau must be positive");
  if (joint.zs.rows() != delta.size())
    throw AlignError("joint sample and map sizes differ");
  const int n = delta.size();
  double risk = 0.0;
  for (int i = 0; i < n; ++i)
    risk += (delta.values().row(i) - joint.thetas.row(i)).squaredNorm();
  risk /= n;
  const DiscreteMeasure pushed = DiscreteMeasure::empirical(delta.values());
  return risk + w2_squared(pushed, g_hat, cfg) / (2.0 * tau);
}

}  // namespace otdenoise
