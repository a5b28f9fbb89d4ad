#pragma once

#include <functional>
#include <memory>
#include <variant>

#include <Eigen/Core>

#include "otdenoise/measure.hpp"
#include "otdenoise/rng.hpp"

namespace otdenoise {

/// Parameter domain Omega: a box (possibly unbounded) or a half-line
/// [theta_min, inf) per coordinate.
struct ParamDomain {
  Eigen::VectorXd lower;  // -inf entries allowed
  Eigen::VectorXd upper;  // +inf entries allowed

  static ParamDomain unbounded(int dim);
  static ParamDomain half_line(double theta_min, int dim = 1);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;
};

//! A parametric likelihood family {p(.|theta)}.
//!
//! Built-in families: gaussian_location (N(theta, sigma^2 I_d), m = d),
//! gaussian_scale (theta^{-1} phi(z/theta), d = m = 1, theta > theta_min),
//! uniform_scale (Uniform[0, theta], score unsupported), and canonical
//! exponential families with T(z) = z supplied through descriptors.
class LikelihoodModel {
public:
  enum class Family { gaussian_location, gaussian_scale, uniform_scale, exp_family };

  /// Descriptors for a regular m-parameter canonical exponential family,
  /// density exp(theta . z - A(theta)) h(z).
  struct ExpFamilyDesc {
    int dim = 1;
    std::function<double(const Eigen::VectorXd&)> log_h;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_log_h;  // del h / h
    std::function<double(const Eigen::VectorXd&)> log_partition;        // A
    // Optional; needed only for sampling.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, SplitRng&)> sampler;
    ParamDomain domain;
  };

  static LikelihoodModel gaussian_location(int dim, double sigma);
  static LikelihoodModel gaussian_scale(double theta_min = 1e-3);
  static LikelihoodModel uniform_scale(double theta_min = 1e-3);
  static LikelihoodModel exp_family(ExpFamilyDesc desc);

  Family family() const { return family_; }
  int obs_dim() const { return obs_dim_; }
  int latent_dim() const { return latent_dim_; }
  const ParamDomain& domain() const { return domain_; }
  /// Noise scale of the gaussian_location family.
  double sigma() const;

  /// p(z | theta); DomainError when theta lies outside Omega.
  double density(const Eigen::VectorXd& z, const Eigen::VectorXd& theta) const;
  /// log p(z | theta), -inf where the density vanishes.
  double log_density(const Eigen::VectorXd& z, const Eigen::VectorXd& theta) const;

  bool has_score() const { return family_ != Family::uniform_scale; }
  /// Gradient of log p(z|theta) in theta; UnsupportedError for families
  /// that are not differentiable in theta.
  Eigen::VectorXd score_theta(const Eigen::VectorXd& z, const Eigen::VectorXd& theta) const;

  Eigen::VectorXd sample(const Eigen::VectorXd& theta, SplitRng& rng) const;

  /// True when Tweedie's identity applies directly: canonical exponential
  /// family with T(z) = z and m = d (gaussian_location qualifies).
  bool tweedie_compatible() const;
  /// del h / h at z (tweedie-compatible families only).
  Eigen::VectorXd grad_log_base(const Eigen::VectorXd& z) const;

private:
  LikelihoodModel() = default;

  Family family_ = Family::gaussian_location;
  int obs_dim_ = 1;
  int latent_dim_ = 1;
  double sigma_ = 1.0;
  ParamDomain domain_;
  std::shared_ptr<const ExpFamilyDesc> exp_;
};

struct GaussianPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

using Prior = std::variant<DiscreteMeasure, GaussianPrior>;

/// The generative pair (likelihood model, prior) plus a seed; the source of
/// every simulated data set in this project.
struct GenerativeSpec {
  LikelihoodModel model;
  Prior prior;
  std::uint64_t seed = 0;
};

struct JointSample {
  Eigen::MatrixXd thetas;  // n x m
  Eigen::MatrixXd zs;      // n x d
};

/// Draw n iid (Theta, Z) pairs; deterministic given spec.seed (a stream
/// offset lets callers derive independent replications from one spec).
JointSample sample_joint(const GenerativeSpec& spec, int n, std::uint64_t stream = 0);

/// f_G(z) = sum_j w_j p(z | theta_j) for a discrete prior.
double marginal_density(const LikelihoodModel& model, const DiscreteMeasure& prior,
                        const Eigen::VectorXd& z);
/// log f_G(z), computed by log-sum-exp.
double log_marginal_density(const LikelihoodModel& model, const DiscreteMeasure& prior,
                            const Eigen::VectorXd& z);

}  // namespace otdenoise
