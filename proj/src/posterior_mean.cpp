#include "otdenoise/posterior_mean.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>

namespace otdenoise {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_spd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw MatrixError(std::string(name) + " is not square");
  if (!m.isApprox(m.transpose(), 1e-10))
    throw MatrixError(std::string(name) + " is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw MatrixError(std::string(name) + " is not positive definite");
}
}  // namespace

Eigen::VectorXd posterior_mean_discrete(const LikelihoodModel& model,
                                        const DiscreteMeasure& prior,
                                        const Eigen::VectorXd& z) {
  const int k = prior.size();
  Eigen::ArrayXd log_terms(k);
  for (int j = 0; j < k; ++j) {
    const double w = prior.weights()[j];
    log_terms[j] = w > 0.0 ? std::log(w) + model.log_density(z, prior.atom(j)) : kNegInf;
  }
  const double mx = log_terms.maxCoeff();
  if (mx == kNegInf)
    throw DegenerateError("marginal density vanishes at the query point");
  const Eigen::ArrayXd rel = (log_terms - mx).exp();
  const double denom = rel.sum();
  Eigen::VectorXd num = Eigen::VectorXd::Zero(prior.dim());
  for (int j = 0; j < k; ++j) {
    if (rel[j] > 0.0) num += rel[j] * prior.atom(j);
  }
  return num / denom;
}

GaussianPosterior::GaussianPosterior(Eigen::VectorXd theta_star,
                                     Eigen::MatrixXd sigma_star, Eigen::MatrixXd sigma)
    : theta_star_(std::move(theta_star)), sigma_star_(std::move(sigma_star)) {
  require_spd(sigma_star_, "Sigma*");
  require_spd(sigma, "Sigma");
  if (sigma_star_.rows() != sigma.rows() || sigma_star_.rows() != theta_star_.size())
    throw DimError("normal-normal parameter dimensions disagree");
  const Eigen::MatrixXd total = sigma_star_ + sigma;
  const Eigen::MatrixXd total_inv = total.llt().solve(
      Eigen::MatrixXd::Identity(total.rows(), total.cols()));
  shrink_ = sigma_star_ * total_inv;
  offset_ = sigma * total_inv * theta_star_;
  pushforward_cov_ = sigma_star_ * total_inv * sigma_star_;
}

Eigen::VectorXd GaussianPosterior::posterior_mean(const Eigen::VectorXd& z) const {
  if (z.size() != theta_star_.size()) throw DimError("query has wrong dimension");
  return shrink_ * z + offset_;
}

TweedieEstimator::TweedieEstimator(Eigen::MatrixXd sample, LikelihoodModel model,
                                   double bandwidth)
    : sample_(std::move(sample)), model_(std::move(model)), bandwidth_(bandwidth) {
  if (!(bandwidth_ > 0.0)) throw InvariantError("bandwidth must be positive");
  if (sample_.rows() == 0) throw EmptySampleError("tweedie estimator needs samples");
  if (!model_.tweedie_compatible())
    throw UnsupportedError(
        "model does not admit the Tweedie form (need canonical family, T(z)=z, m=d)");
  if (sample_.cols() != model_.obs_dim())
    throw DimError("sample dimension does not match the model");
}

double TweedieEstimator::default_bandwidth(const Eigen::MatrixXd& sample) {
  const int n = static_cast<int>(sample.rows());
  const int d = static_cast<int>(sample.cols());
  if (n < 2) return 1.0;
  const Eigen::RowVectorXd mean = sample.colwise().mean();
  const Eigen::RowVectorXd var =
      (sample.rowwise() - mean).array().square().colwise().sum() / (n - 1);
  const double sd = std::sqrt(var.mean());
  return std::max(1e-12, sd * std::pow(static_cast<double>(n), -1.0 / (d + 4)));
}

void TweedieEstimator::kde_log_density_and_score(const Eigen::VectorXd& z, double* log_f,
                                                 Eigen::VectorXd* score) const {
  const int n = static_cast<int>(sample_.rows());
  const int d = static_cast<int>(sample_.cols());
  const double h2 = bandwidth_ * bandwidth_;
  Eigen::ArrayXd neg_half_dist =
      -0.5 * (sample_.rowwise() - z.transpose()).rowwise().squaredNorm().array() / h2;
  const double mx = neg_half_dist.maxCoeff();
  const Eigen::ArrayXd rel = (neg_half_dist - mx).exp();
  const double denom = rel.sum();
  const double norm_const =
      -std::log(static_cast<double>(n)) - 0.5 * d * std::log(2.0 * M_PI * h2);
  *log_f = mx + std::log(denom) + norm_const;
  if (score != nullptr) {
    // del f / f = sum_i softmax_i * (Z_i - z) / h^2
    *score = ((sample_.transpose() * rel.matrix()) / denom - z) / h2;
  }
}

double TweedieEstimator::kde_density(const Eigen::VectorXd& z) const {
  double log_f = 0.0;
  kde_log_density_and_score(z, &log_f, nullptr);
  return std::exp(log_f);
}

Eigen::VectorXd TweedieEstimator::estimate(const Eigen::VectorXd& z) const {
  if (z.size() != sample_.cols()) throw DimError("query has wrong dimension");
  double log_f = 0.0;
  Eigen::VectorXd score;
  kde_log_density_and_score(z, &log_f, &score);
  if (std::exp(log_f) < kDensityFloor)
    throw LowDensityError("KDE density below floor at the query point; widen the bandwidth");
  if (model_.family() == LikelihoodModel::Family::gaussian_location) {
    const double s2 = model_.sigma() * model_.sigma();
    return z + s2 * score;
  }
  return score - model_.grad_log_base(z);
}

Eigen::VectorXd isotonic_projection(const Eigen::VectorXd& values) {
  const int n = static_cast<int>(values.size());
  std::vector<double> level(static_cast<size_t>(n)), weight(static_cast<size_t>(n));
  std::vector<int> count(static_cast<size_t>(n));
  int blocks = 0;
  for (int i = 0; i < n; ++i) {
    level[blocks] = values[i];
    weight[blocks] = 1.0;
    count[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
      const double w = weight[blocks - 2] + weight[blocks - 1];
      level[blocks - 2] =
          (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / w;
      weight[blocks - 2] = w;
      count[blocks - 2] += count[blocks - 1];
      --blocks;
    }
  }
  Eigen::VectorXd out(n);
  int pos = 0;
  for (int b = 0; b < blocks; ++b)
    for (int r = 0; r < count[b]; ++r) out[pos++] = level[b];
  return out;
}

PosteriorMeanEstimator PosteriorMeanEstimator::discrete(LikelihoodModel model,
                                                        DiscreteMeasure prior) {
  PosteriorMeanEstimator e;
  e.kind_ = Kind::discrete_exact;
  e.model_ = std::make_shared<const LikelihoodModel>(std::move(model));
  e.prior_ = std::make_shared<const DiscreteMeasure>(std::move(prior));
  return e;
}

PosteriorMeanEstimator PosteriorMeanEstimator::gaussian(Eigen::VectorXd theta_star,
                                                        Eigen::MatrixXd sigma_star,
                                                        Eigen::MatrixXd sigma) {
  PosteriorMeanEstimator e;
  e.kind_ = Kind::gaussian_closed_form;
  e.gaussian_ = std::make_shared<const GaussianPosterior>(
      std::move(theta_star), std::move(sigma_star), std::move(sigma));
  return e;
}

PosteriorMeanEstimator PosteriorMeanEstimator::tweedie(Eigen::MatrixXd sample,
                                                       LikelihoodModel model,
                                                       double bandwidth) {
  PosteriorMeanEstimator e;
  e.kind_ = Kind::tweedie_kde;
  e.tweedie_ =
      std::make_shared<const TweedieEstimator>(std::move(sample), std::move(model), bandwidth);
  return e;
}

Eigen::VectorXd PosteriorMeanEstimator::operator()(const Eigen::VectorXd& z) const {
  switch (kind_) {
    case Kind::discrete_exact:
      return posterior_mean_discrete(*model_, *prior_, z);
    case Kind::gaussian_closed_form:
      return gaussian_->posterior_mean(z);
    case Kind::tweedie_kde:
      return tweedie_->estimate(z);
  }
  throw Error("unknown estimator kind");
}

Eigen::MatrixXd PosteriorMeanEstimator::evaluate_rows(const Eigen::MatrixXd& zs) const {
  Eigen::MatrixXd out;
  for (int i = 0; i < zs.rows(); ++i) {
    const Eigen::VectorXd v = (*this)(zs.row(i).transpose());
    if (i == 0) out.resize(zs.rows(), v.size());
    out.row(i) = v.transpose();
  }
  return out;
}

}  // namespace otdenoise
