#pragma once

#include <Eigen/Core>

#include "otdenoise/likelihood.hpp"
#include "otdenoise/measure.hpp"

namespace otdenoise {

/// Exact posterior mean under a discrete prior:
/// sum_j theta_j w_j p(z|theta_j) / sum_j w_j p(z|theta_j).
/// DegenerateError when the marginal density vanishes at z.
Eigen::VectorXd posterior_mean_discrete(const LikelihoodModel& model,
                                        const DiscreteMeasure& prior,
                                        const Eigen::VectorXd& z);

//! Normal-normal closed form: Theta ~ N(theta*, Sigma*), Z|Theta ~ N(Theta, Sigma).
class GaussianPosterior {
public:
  /// MatrixError unless both covariances are symmetric positive definite.
  GaussianPosterior(Eigen::VectorXd theta_star, Eigen::MatrixXd sigma_star,
                    Eigen::MatrixXd sigma);

  /// Sigma*(Sigma*+Sigma)^{-1} z + Sigma(Sigma*+Sigma)^{-1} theta*.
  Eigen::VectorXd posterior_mean(const Eigen::VectorXd& z) const;

  /// Covariance A = Sigma*(Sigma*+Sigma)^{-1}Sigma* of the pushforward
  /// distribution of the posterior mean (which is N(theta*, A)).
  const Eigen::MatrixXd& pushforward_cov() const { return pushforward_cov_; }
  const Eigen::VectorXd& prior_mean() const { return theta_star_; }
  const Eigen::MatrixXd& prior_cov() const { return sigma_star_; }
  int dim() const { return static_cast<int>(theta_star_.size()); }

private:
  Eigen::VectorXd theta_star_;
  Eigen::MatrixXd sigma_star_;
  Eigen::MatrixXd shrink_;          // Sigma*(Sigma*+Sigma)^{-1}
  Eigen::VectorXd offset_;          // Sigma(Sigma*+Sigma)^{-1} theta*
  Eigen::MatrixXd pushforward_cov_;
};

//! Score-based posterior mean from samples only.
//!
//! Fits a Gaussian-kernel density estimate f_hat with analytic gradient and
//! returns del f_hat / f_hat - del h / h; gaussian_location models use the
//! equivalent z + sigma^2 del f_hat / f_hat form. Requires a model with
//! canonical exponential-family structure, T(z) = z and m = d.
class TweedieEstimator {
public:
  TweedieEstimator(Eigen::MatrixXd sample, LikelihoodModel model, double bandwidth);

  /// Plug-in rate scaling: n^{-1/(d+4)} times the averaged marginal std.
  static double default_bandwidth(const Eigen::MatrixXd& sample);

  /// LowDensityError when the KDE value falls below the 1e-12 floor.
  Eigen::VectorXd estimate(const Eigen::VectorXd& z) const;

  double kde_density(const Eigen::VectorXd& z) const;
  double bandwidth() const { return bandwidth_; }

  static constexpr double kDensityFloor = 1e-12;

private:
  Eigen::MatrixXd sample_;  // n x d
  LikelihoodModel model_;
  double bandwidth_;
  // log f_hat and the score del f_hat / f_hat in one pass.
  void kde_log_density_and_score(const Eigen::VectorXd& z, double* log_f,
                                 Eigen::VectorXd* score) const;
};

/// Pool-adjacent-violators projection onto nondecreasing sequences
/// (least squares).
Eigen::VectorXd isotonic_projection(const Eigen::VectorXd& values);

//! Uniform interface over the three posterior-mean routes.
class PosteriorMeanEstimator {
public:
  enum class Kind { discrete_exact, gaussian_closed_form, tweedie_kde };

  static PosteriorMeanEstimator discrete(LikelihoodModel model, DiscreteMeasure prior);
  static PosteriorMeanEstimator gaussian(Eigen::VectorXd theta_star,
                                         Eigen::MatrixXd sigma_star, Eigen::MatrixXd sigma);
  static PosteriorMeanEstimator tweedie(Eigen::MatrixXd sample, LikelihoodModel model,
                                        double bandwidth);

  Kind kind() const { return kind_; }
  Eigen::VectorXd operator()(const Eigen::VectorXd& z) const;
  /// Row-wise evaluation over a sample.
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& zs) const;

private:
  PosteriorMeanEstimator() = default;
  Kind kind_ = Kind::discrete_exact;
  std::shared_ptr<const LikelihoodModel> model_;
  std::shared_ptr<const DiscreteMeasure> prior_;
  std::shared_ptr<const GaussianPosterior> gaussian_;
  std::shared_ptr<const TweedieEstimator> tweedie_;
};

}  // namespace otdenoise
