#pragma once

#include <string>

#include <Eigen/Core>
#include "json.hpp"

#include "otdenoise/likelihood.hpp"
#include "otdenoise/measure.hpp"
#include "otdenoise/ot.hpp"
#include "otdenoise/posterior_mean.hpp"

namespace otdenoise {

enum class Extension { nearest_posterior_mean, monotone_1d_interp };

//! A denoising map tabulated on sample points.
//!
//! Off-sample queries are resolved by the extension rule: either transport
//! via the value at the nearest fitted posterior-mean atom (any dimension),
//! or monotone piecewise-linear interpolation in z (1-d only; requires the
//! tabulated values to be nondecreasing along sorted eval points).
class DenoiserMap {
public:
  DenoiserMap(Eigen::MatrixXd eval_points, Eigen::MatrixXd values,
              Extension extension, std::string provenance,
              Eigen::MatrixXd theta_bar_at_eval = {});

  int size() const { return static_cast<int>(eval_points_.rows()); }
  int obs_dim() const { return static_cast<int>(eval_points_.cols()); }
  int latent_dim() const { return static_cast<int>(values_.cols()); }
  const Eigen::MatrixXd& eval_points() const { return eval_points_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const Eigen::MatrixXd& theta_bar_at_eval() const { return theta_bar_; }
  Extension extension() const { return extension_; }
  const std::string& provenance() const { return provenance_; }

  Eigen::VectorXd value_row(int i) const { return values_.row(i).transpose(); }

  /// Value at the fitted atom whose posterior mean is closest to the given
  /// one (ties broken by the lowest index).
  Eigen::VectorXd value_at_theta_bar(const Eigen::VectorXd& theta_bar) const;

  /// Extension-rule evaluation at a fresh observation; theta_bar is used to
  /// locate the query under the nearest_posterior_mean rule.
  Eigen::VectorXd evaluate(const Eigen::VectorXd& z,
                           const PosteriorMeanEstimator& theta_bar) const;

  /// Monotone 1-d interpolation at z (monotone_1d_interp maps only).
  double interpolate_1d(double z) const;

  nlohmann::json to_json() const;
  static DenoiserMap from_json(const nlohmann::json& j);

private:
  Eigen::MatrixXd eval_points_;  // n x d
  Eigen::MatrixXd values_;       // n x m
  Eigen::MatrixXd theta_bar_;    // n x m or empty
  Extension extension_;
  std::string provenance_;
  std::vector<int> sorted_;  // eval order for 1-d interpolation
};

//! OT plug-in denoiser: transport the posterior-mean pushforward onto a
//! target prior and read off barycentric projections.
//!
//! Computes b_i = theta_bar(Z_i), solves OT between the uniform measure on
//! {b_i} and g_hat under the squared cost, and tabulates row-conditional
//! means on the sample.
DenoiserMap build_ot_denoiser(const Eigen::MatrixXd& sample,
                              const PosteriorMeanEstimator& theta_bar,
                              const DiscreteMeasure& g_hat, const OTConfig& cfg,
                              Extension extension = Extension::nearest_posterior_mean);

/// 1-d shortcut: empirical CDF of the posterior-mean values composed with
/// the quantile function of g_hat (cumulative-mass interval barycenters).
/// eval_points defaults to the theta_bar values when zs is empty.
DenoiserMap quantile_denoiser_1d(const Eigen::VectorXd& theta_bar_values,
                                 const DiscreteMeasure& g_hat,
                                 const Eigen::MatrixXd& zs = {});

/// Pointwise affine interpolation (2 tau/(1+2 tau)) bayes + (1/(1+2 tau)) ot.
/// AlignError unless both maps share eval points.
DenoiserMap interpolate_denoiser(const DenoiserMap& bayes, const DenoiserMap& ot,
                                 double tau);

//! Analytic normal-normal denoiser: delta*(z) = theta* + B(theta_bar(z) - theta*)
//! with B = A^{-1/2}(A^{1/2} Sigma* A^{1/2})^{1/2} A^{-1/2}.
class GaussianClosedFormDenoiser {
public:
  GaussianClosedFormDenoiser(Eigen::VectorXd theta_star, Eigen::MatrixXd sigma_star,
                             Eigen::MatrixXd sigma);

  Eigen::VectorXd theta_bar(const Eigen::VectorXd& z) const;
  Eigen::VectorXd delta_star(const Eigen::VectorXd& z) const;
  const Eigen::MatrixXd& transport_coefficient() const { return b_; }
  const GaussianPosterior& posterior() const { return posterior_; }

  DenoiserMap tabulate(const Eigen::MatrixXd& zs) const;
  DenoiserMap tabulate_bayes(const Eigen::MatrixXd& zs) const;

private:
  GaussianPosterior posterior_;
  Eigen::MatrixXd b_;
};

/// Empirical latent-penalty objective
/// (1/n) sum_i |delta(Z_i) - Theta_i|^2 + (1/(2 tau)) W2^2(delta # mu_n, g_hat).
double latent_penalty_objective(const DenoiserMap& delta, const JointSample& joint,
                                const DiscreteMeasure& g_hat, double tau,
                                const OTConfig& cfg);

}  // namespace otdenoise
