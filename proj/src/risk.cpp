#include "otdenoise/risk.hpp"

#include <cmath>
#include <cstdio>

namespace otdenoise {

RiskEstimate mc_risk(const GenerativeSpec& spec, const DenoiserFn& denoiser, int n_rep,
                     std::uint64_t stream) {
  if (n_rep < 2) throw InvariantError("mc_risk needs n_rep >= 2");
  const JointSample joint = sample_joint(spec, n_rep, stream);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n_rep; ++i) {
    const double loss =
        (denoiser(joint.zs.row(i).transpose()) - joint.thetas.row(i).transpose())
            .squaredNorm();
    sum += loss;
    sum_sq += loss * loss;
  }
  RiskEstimate est;
  est.n_rep = n_rep;
  est.risk = sum / n_rep;
  const double var = (sum_sq - sum * sum / n_rep) / (n_rep - 1);
  est.std_error = std::sqrt(std::max(0.0, var) / n_rep);
  return est;
}

ClosedFormRisks closed_form_risks(const std::vector<double>& tau2_grid) {
  ClosedFormRisks out;
  double prev = 0.0;
  bool first = true;
  for (const double t2 : tau2_grid) {
    if (!(t2 > 0.0)) throw InvariantError("tau^2 grid entries must be positive");
    if (!first && !(t2 > prev)) throw InvariantError("tau^2 grid must be strictly increasing");
    first = false;
    prev = t2;
    const double tau = std::sqrt(t2);
    out.tau2.push_back(t2);
    out.bayes.push_back(t2 / (1.0 + t2));
    out.ot_denoiser.push_back(2.0 * t2 * (1.0 - tau / std::sqrt(1.0 + t2)));
    out.identity.push_back(1.0);
  }
  return out;
}

void RiskReport::write_csv(std::ostream& os) const {
  os << "sweep_value,estimator,risk,stderr,n_rep,closed_form\n";
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
  };
  for (const RiskRow& r : rows) {
    os << num(r.sweep_value) << ',' << r.estimator << ',' << num(r.risk) << ','
       << num(r.std_error) << ',' << r.n_rep << ','
       << (r.closed_form ? num(*r.closed_form) : std::string()) << '\n';
  }
}

}  // namespace otdenoise
