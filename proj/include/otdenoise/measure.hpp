#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Core>
#include "json.hpp"

#include "otdenoise/errors.hpp"

namespace otdenoise {

//! Finite discrete probability measure: weighted atoms in R^k.
//!
//! Atoms are stored one per row and never merged, so empirical measures keep
//! sample multiplicity and plan matrices index observations directly.
//! Immutable after construction; safe to share across threads.
class DiscreteMeasure {
public:
  /// Validates: nonempty, weights >= 0, weights sum to 1 within 1e-12.
  DiscreteMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights);

  /// Uniform weights 1/n on the given points (duplicates kept).
  static DiscreteMeasure empirical(const Eigen::MatrixXd& points);
  /// 1-d convenience overload.
  static DiscreteMeasure empirical(const std::vector<double>& points);

  int size() const { return static_cast<int>(atoms_.rows()); }
  int dim() const { return static_cast<int>(atoms_.cols()); }
  const Eigen::MatrixXd& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::VectorXd atom(int i) const { return atoms_.row(i).transpose(); }

  /// Images f(x_i) with unchanged weights; coincident images are not merged.
  DiscreteMeasure pushforward(
      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
      int out_dim) const;

  /// Sum of w_i |x_i|^2.
  double second_moment() const;

  nlohmann::json to_json() const;
  static DiscreteMeasure from_json(const nlohmann::json& j);

  static constexpr double kWeightSumTol = 1e-12;

private:
  Eigen::MatrixXd atoms_;    // n x k
  Eigen::VectorXd weights_;  // n
};

/// Dual potentials attached to a plan. Exact duals (from an LP vertex)
/// satisfy strong duality to 1e-7; regularized duals (entropic scaling
/// logs, source side c-transformed) are only feasible.
struct DualPotentials {
  enum class Kind { exact, regularized };
  Eigen::VectorXd source;
  Eigen::VectorXd target;
  Kind kind = Kind::exact;
};

//! Coupling between two discrete measures.
//!
//! Construction enforces the polytope membership: row sums equal source
//! weights and column sums equal target weights within 1e-9, entries >= 0.
//! When duals are attached they must be feasible (phi_i + psi_j <= c_ij +
//! 1e-9 for the cost matrix used to build the plan) and, for exact duals,
//! tight (strong duality within 1e-7).
class TransportPlan {
public:
  TransportPlan(Eigen::MatrixXd matrix, DiscreteMeasure source,
                DiscreteMeasure target, double cost_value,
                std::optional<DualPotentials> duals = std::nullopt,
                const Eigen::MatrixXd* cost_matrix = nullptr);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const DiscreteMeasure& source() const { return source_; }
  const DiscreteMeasure& target() const { return target_; }
  double cost_value() const { return cost_value_; }
  const std::optional<DualPotentials>& duals() const { return duals_; }

  nlohmann::json to_json() const;

  static constexpr double kMarginalTol = 1e-9;
  static constexpr double kDualFeasTol = 1e-9;
  static constexpr double kDualityGapTol = 1e-7;

private:
  Eigen::MatrixXd matrix_;  // n_source x n_target
  DiscreteMeasure source_;
  DiscreteMeasure target_;
  double cost_value_;
  std::optional<DualPotentials> duals_;
};

}  // namespace otdenoise
