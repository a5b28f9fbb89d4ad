#include "otdenoise/measure.hpp"

#include <cmath>

namespace otdenoise {

DiscreteMeasure::DiscreteMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.rows() == 0) throw EmptySampleError("measure has no atoms");
  if (atoms_.rows() != weights_.size())
    throw DimError("atom count does not match weight count");
  for (int i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0))
      throw InvariantError("negative or NaN weight at index " + std::to_string(i));
  }
  const double s = weights_.sum();
  if (std::abs(s - 1.0) > kWeightSumTol)
    throw InvariantError("weights sum to " + std::to_string(s) + ", not 1");
}

DiscreteMeasure DiscreteMeasure::empirical(const Eigen::MatrixXd& points) {
  if (points.rows() == 0) throw EmptySampleError("empirical measure of empty sample");
  const int n = static_cast<int>(points.rows());
  return DiscreteMeasure(points, Eigen::VectorXd::Constant(n, 1.0 / n));
}

DiscreteMeasure DiscreteMeasure::empirical(const std::vector<double>& points) {
  if (points.empty()) throw EmptySampleError("empirical measure of empty sample");
  Eigen::MatrixXd m(static_cast<int>(points.size()), 1);
  for (int i = 0; i < m.rows(); ++i) m(i, 0) = points[static_cast<size_t>(i)];
  return empirical(m);
}

DiscreteMeasure DiscreteMeasure::pushforward(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    int out_dim) const {
  Eigen::MatrixXd out(size(), out_dim);
  for (int i = 0; i < size(); ++i) {
    Eigen::VectorXd y = f(atom(i));
    if (y.size() != out_dim) throw DimError("pushforward image has wrong dimension");
    out.row(i) = y.transpose();
  }
  return DiscreteMeasure(out, weights_);
}

double DiscreteMeasure::second_moment() const {
  return (atoms_.rowwise().squaredNorm().array() * weights_.array()).sum();
}

nlohmann::json DiscreteMeasure::to_json() const {
  nlohmann::json atoms = nlohmann::json::array();
  for (int i = 0; i < size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < dim(); ++k) row.push_back(atoms_(i, k));
    atoms.push_back(std::move(row));
  }
  nlohmann::json weights = nlohmann::json::array();
  for (int i = 0; i < size(); ++i) weights.push_back(weights_[i]);
  return {{"dim", dim()}, {"atoms", atoms}, {"weights", weights}};
}

DiscreteMeasure DiscreteMeasure::from_json(const nlohmann::json& j) {
  const int dim = j.at("dim").get<int>();
  const auto& atoms = j.at("atoms");
  const auto& weights = j.at("weights");
  if (atoms.size() != weights.size())
    throw DimError("measure json: atoms/weights length mismatch");
  if (atoms.empty()) throw EmptySampleError("measure json: no atoms");
  Eigen::MatrixXd a(static_cast<int>(atoms.size()), dim);
  Eigen::VectorXd w(static_cast<int>(weights.size()));
  for (int i = 0; i < a.rows(); ++i) {
    const auto& row = atoms[static_cast<size_t>(i)];
    if (static_cast<int>(row.size()) != dim)
      throw DimError("measure json: atom dimension mismatch");
    for (int k = 0; k < dim; ++k) a(i, k) = row[static_cast<size_t>(k)].get<double>();
    w[i] = weights[static_cast<size_t>(i)].get<double>();
  }
  return DiscreteMeasure(a, w);
}

TransportPlan::TransportPlan(Eigen::MatrixXd matrix, DiscreteMeasure source,
                             DiscreteMeasure target, double cost_value,
                             std::optional<DualPotentials> duals,
                             const Eigen::MatrixXd* cost_matrix)
    : matrix_(std::move(matrix)),
      source_(std::move(source)),
      target_(std::move(target)),
      cost_value_(cost_value),
      duals_(std::move(duals)) {
  if (matrix_.rows() != source_.size() || matrix_.cols() != target_.size())
    throw DimError("plan matrix shape does not match marginals");
  if ((matrix_.array() < 0.0).any())
    throw InvariantError("plan has a negative entry");
  const double row_err = (matrix_.rowwise().sum() - source_.weights()).cwiseAbs().maxCoeff();
  const double col_err =
      (matrix_.colwise().sum().transpose() - target_.weights()).cwiseAbs().maxCoeff();
  if (row_err > kMarginalTol || col_err > kMarginalTol)
    throw InvariantError("plan marginals violated: row err " + std::to_string(row_err) +
                         ", col err " + std::to_string(col_err));
  if (duals_) {
    if (duals_->source.size() != source_.size() || duals_->target.size() != target_.size())
      throw DimError("dual potential lengths do not match marginals");
    if (cost_matrix != nullptr) {
      const double feas =
          ((duals_->source.replicate(1, target_.size()) +
            duals_->target.transpose().replicate(source_.size(), 1)) -
           *cost_matrix)
              .maxCoeff();
      if (feas > kDualFeasTol)
        throw InvariantError("dual potentials infeasible by " + std::to_string(feas));
    }
    if (duals_->kind == DualPotentials::Kind::exact) {
      const double dual_value = duals_->source.dot(source_.weights()) +
                                duals_->target.dot(target_.weights());
      if (std::abs(dual_value - cost_value_) > kDualityGapTol)
        throw InvariantError("strong duality violated: gap " +
                             std::to_string(dual_value - cost_value_));
    }
  }
}

nlohmann::json TransportPlan::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (int i = 0; i < matrix_.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < matrix_.cols(); ++j) row.push_back(matrix_(i, j));
    m.push_back(std::move(row));
  }
  nlohmann::json j = {{"source", source_.to_json()},
                      {"target", target_.to_json()},
                      {"matrix", m},
                      {"cost_value", cost_value_}};
  if (duals_) {
    nlohmann::json d;
    d["source"] = std::vector<double>(duals_->source.begin(), duals_->source.end());
    d["target"] = std::vector<double>(duals_->target.begin(), duals_->target.end());
    d["kind"] = duals_->kind == DualPotentials::Kind::exact ? "exact" : "regularized";
    j["duals"] = std::move(d);
  }
  return j;
}

}  // namespace otdenoise
