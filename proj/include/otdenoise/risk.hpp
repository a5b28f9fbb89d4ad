#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "otdenoise/likelihood.hpp"

namespace otdenoise {

using DenoiserFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct RiskEstimate {
  double risk = 0.0;
  double std_error = 0.0;
  int n_rep = 0;
};

/// Monte Carlo risk E|delta(Z) - Theta|^2 over fresh joint draws; one
/// seeded stream per call so sweep cells are reproducible in parallel.
RiskEstimate mc_risk(const GenerativeSpec& spec, const DenoiserFn& denoiser, int n_rep,
                     std::uint64_t stream = 0);

/// 1-d normal-normal closed forms at sigma^2 = 1: Bayes risk tau^2/(1+tau^2),
/// OT-denoiser risk 2 tau^2 (1 - tau/sqrt(1+tau^2)), identity risk 1.
struct ClosedFormRisks {
  std::vector<double> tau2;
  std::vector<double> bayes;
  std::vector<double> ot_denoiser;
  std::vector<double> identity;
};

ClosedFormRisks closed_form_risks(const std::vector<double>& tau2_grid);

/// One line of a risk sweep table.
struct RiskRow {
  double sweep_value = 0.0;
  std::string estimator;
  double risk = 0.0;
  double std_error = 0.0;
  int n_rep = 0;
  std::optional<double> closed_form;
};

struct RiskReport {
  std::string sweep_parameter;
  std::vector<RiskRow> rows;

  /// CSV columns: sweep_value, estimator, risk, stderr, n_rep, closed_form
  /// (empty when unavailable).
  void write_csv(std::ostream& os) const;
};

}  // namespace otdenoise
