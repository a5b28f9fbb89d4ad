#include "otdenoise/likelihood.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace otdenoise {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

ParamDomain ParamDomain::unbounded(int dim) {
  ParamDomain d;
  d.lower = Eigen::VectorXd::Constant(dim, -std::numeric_limits<double>::infinity());
  d.upper = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
  return d;
}

ParamDomain ParamDomain::half_line(double theta_min, int dim) {
  ParamDomain d;
  d.lower = Eigen::VectorXd::Constant(dim, theta_min);
  d.upper = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
  return d;
}

bool ParamDomain::contains(const Eigen::VectorXd& theta) const {
  if (theta.size() != lower.size()) return false;
  return (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
}

Eigen::VectorXd ParamDomain::project(const Eigen::VectorXd& theta) const {
  return theta.cwiseMax(lower).cwiseMin(upper);
}

LikelihoodModel LikelihoodModel::gaussian_location(int dim, double sigma) {
  if (sigma <= 0.0) throw InvariantError("gaussian_location requires sigma > 0");
  LikelihoodModel m;
  m.family_ = Family::gaussian_location;
  m.obs_dim_ = dim;
  m.latent_dim_ = dim;
  m.sigma_ = sigma;
  m.domain_ = ParamDomain::unbounded(dim);
  return m;
}

LikelihoodModel LikelihoodModel::gaussian_scale(double theta_min) {
  if (theta_min <= 0.0) throw InvariantError("gaussian_scale requires theta_min > 0");
  LikelihoodModel m;
  m.family_ = Family::gaussian_scale;
  m.obs_dim_ = 1;
  m.latent_dim_ = 1;
  m.domain_ = ParamDomain::half_line(theta_min);
  return m;
}

LikelihoodModel LikelihoodModel::uniform_scale(double theta_min) {
  if (theta_min <= 0.0) throw InvariantError("uniform_scale requires theta_min > 0");
  LikelihoodModel m;
  m.family_ = Family::uniform_scale;
  m.obs_dim_ = 1;
  m.latent_dim_ = 1;
  m.domain_ = ParamDomain::half_line(theta_min);
  return m;
}

LikelihoodModel LikelihoodModel::exp_family(ExpFamilyDesc desc) {
  if (!desc.log_h || !desc.log_partition)
    throw InvariantError("exp_family requires log_h and log_partition");
  LikelihoodModel m;
  m.family_ = Family::exp_family;
  m.obs_dim_ = desc.dim;
  m.latent_dim_ = desc.dim;
  if (desc.domain.dim() != desc.dim) desc.domain = ParamDomain::unbounded(desc.dim);
  m.domain_ = desc.domain;
  m.exp_ = std::make_shared<const ExpFamilyDesc>(std::move(desc));
  return m;
}

double LikelihoodModel::sigma() const {
  if (family_ != Family::gaussian_location)
    throw UnsupportedError("sigma() is defined for gaussian_location only");
  return sigma_;
}

double LikelihoodModel::log_density(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& theta) const {
  if (!domain_.contains(theta))
    throw DomainError("theta outside the parameter domain");
  if (z.size() != obs_dim_) throw DimError("observation has wrong dimension");
  switch (family_) {
    case Family::gaussian_location: {
      const double q = (z - theta).squaredNorm() / (sigma_ * sigma_);
      return -0.5 * (q + obs_dim_ * (kLog2Pi + 2.0 * std::log(sigma_)));
    }
    case Family::gaussian_scale: {
      const double t = theta[0];
      return -0.5 * (z[0] * z[0] / (t * t) + kLog2Pi) - std::log(t);
    }
    case Family::uniform_scale: {
      const double t = theta[0];
      return (z[0] >= 0.0 && z[0] <= t) ? -std::log(t) : kNegInf;
    }
    case Family::exp_family:
      return theta.dot(z) - exp_->log_partition(theta) + exp_->log_h(z);
  }
  throw Error("unknown family");
}

double LikelihoodModel::density(const Eigen::VectorXd& z,
                                const Eigen::VectorXd& theta) const {
  const double l = log_density(z, theta);
  return l == kNegInf ? 0.0 : std::exp(l);
}

Eigen::VectorXd LikelihoodModel::score_theta(const Eigen::VectorXd& z,
                                             const Eigen::VectorXd& theta) const {
  if (!has_score())
    throw UnsupportedError("score is undefined: density not differentiable in theta");
  if (!domain_.contains(theta))
    throw DomainError("theta outside the parameter domain");
  switch (family_) {
    case Family::gaussian_location:
      return (z - theta) / (sigma_ * sigma_);
    case Family::gaussian_scale: {
      const double t = theta[0];
      Eigen::VectorXd s(1);
      s[0] = -1.0 / t + z[0] * z[0] / (t * t * t);
      return s;
    }
    case Family::exp_family: {
      // del_theta log p = z - del A(theta), by central differences on A.
      const int m = latent_dim_;
      Eigen::VectorXd grad_a(m);
      const double h = 1e-6;
      for (int k = 0; k < m; ++k) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        grad_a[k] = (exp_->log_partition(tp) - exp_->log_partition(tm)) / (2.0 * h);
      }
      return z - grad_a;
    }
    default:
      throw UnsupportedError("score unsupported");
  }
}

Eigen::VectorXd LikelihoodModel::sample(const Eigen::VectorXd& theta, SplitRng& rng) const {
  if (!domain_.contains(theta))
    throw DomainError("theta outside the parameter domain");
  switch (family_) {
    case Family::gaussian_location:
      return theta + sigma_ * rng.normal_vec(obs_dim_);
    case Family::gaussian_scale: {
      Eigen::VectorXd z(1);
      z[0] = theta[0] * rng.normal();
      return z;
    }
    case Family::uniform_scale: {
      Eigen::VectorXd z(1);
      z[0] = theta[0] * rng.uniform();
      return z;
    }
    case Family::exp_family:
      if (!exp_->sampler)
        throw UnsupportedError("this exponential family has no sampler");
      return exp_->sampler(theta, rng);
  }
  throw Error("unknown family");
}

bool LikelihoodModel::tweedie_compatible() const {
  if (family_ == Family::gaussian_location) return true;
  return family_ == Family::exp_family && static_cast<bool>(exp_->grad_log_h);
}

Eigen::VectorXd LikelihoodModel::grad_log_base(const Eigen::VectorXd& z) const {
  if (family_ == Family::gaussian_location)
    return -z / (sigma_ * sigma_);
  if (family_ == Family::exp_family && exp_->grad_log_h) return exp_->grad_log_h(z);
  throw UnsupportedError("base density gradient unavailable for this family");
}

JointSample sample_joint(const GenerativeSpec& spec, int n, std::uint64_t stream) {
  if (n < 1) throw InvariantError("sample_joint requires n >= 1");
  const int m = spec.model.latent_dim();
  const int d = spec.model.obs_dim();
  JointSample out;
  out.thetas.resize(n, m);
  out.zs.resize(n, d);
  SplitRng rng(spec.seed, stream);

  if (const auto* discrete = std::get_if<DiscreteMeasure>(&spec.prior)) {
    if (discrete->dim() != m) throw DimError("prior atoms have wrong dimension");
    for (int j = 0; j < discrete->size(); ++j) {
      if (!spec.model.domain().contains(discrete->atom(j)))
        throw DomainError("prior atom " + std::to_string(j) + " outside Omega");
    }
    Eigen::VectorXd cum(discrete->size());
    double acc = 0.0;
    for (int j = 0; j < discrete->size(); ++j) {
      acc += discrete->weights()[j];
      cum[j] = acc;
    }
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      int j = 0;
      while (j + 1 < cum.size() && u > cum[j]) ++j;
      out.thetas.row(i) = discrete->atoms().row(j);
      out.zs.row(i) = spec.model.sample(discrete->atom(j), rng).transpose();
    }
  } else {
    const auto& gp = std::get<GaussianPrior>(spec.prior);
    if (gp.mean.size() != m) throw DimError("prior mean has wrong dimension");
    Eigen::LLT<Eigen::MatrixXd> llt(gp.cov);
    if (llt.info() != Eigen::Success)
      throw MatrixError("prior covariance is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd theta = gp.mean + chol * rng.normal_vec(m);
      out.thetas.row(i) = theta.transpose();
      out.zs.row(i) = spec.model.sample(theta, rng).transpose();
    }
  }
  return out;
}

double log_marginal_density(const LikelihoodModel& model, const DiscreteMeasure& prior,
                            const Eigen::VectorXd& z) {
  const int k = prior.size();
  Eigen::ArrayXd terms(k);
  for (int j = 0; j < k; ++j) {
    const double w = prior.weights()[j];
    terms[j] = w > 0.0 ? std::log(w) + model.log_density(z, prior.atom(j)) : kNegInf;
  }
  const double mx = terms.maxCoeff();
  if (mx == kNegInf) return kNegInf;
  return mx + std::log((terms - mx).exp().sum());
}

double marginal_density(const LikelihoodModel& model, const DiscreteMeasure& prior,
                        const Eigen::VectorXd& z) {
  const double l = log_marginal_density(model, prior, z);
  return l == kNegInf ? 0.0 : std::exp(l);
}

}  // namespace otdenoise
