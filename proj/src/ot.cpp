#include "otdenoise/ot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <vector>

namespace otdenoise {
namespace {

// ---------------------------------------------------------------------------
// Transportation simplex.
//
// Basis cells form a spanning tree on the bipartite node set
// {sources 0..n-1, targets n..n+m-1}. Start from the north-west-corner
// staircase, price with Dantzig's rule (Bland's rule after a degenerate
// streak), recompute duals by a tree walk each pivot.
// ---------------------------------------------------------------------------

struct SimplexResult {
  Eigen::MatrixXd plan;
  Eigen::VectorXd u;  // source potentials
  Eigen::VectorXd v;  // target potentials
  double cost = 0.0;
};

class TransportationSimplex {
public:
  TransportationSimplex(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                        const Eigen::MatrixXd& cost)
      : w_(supply), d_(demand), c_(cost),
        n_(static_cast<int>(supply.size())), m_(static_cast<int>(demand.size())) {}

  SimplexResult solve() {
    build_northwest_basis();
    const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
    // Dual potentials come from a tree walk, so their float noise grows
    // with the node count; the optimality tolerance must sit above it or
    // phantom negative reduced costs keep the pivot loop alive.
    const double noise = 8.0 * std::numeric_limits<double>::epsilon() * (n_ + m_) * scale;
    const double opt_tol = std::max(1e-11, noise);
    const long stall_limit = 4L * (n_ + m_);
    const long max_pivots = 2000L * (n_ + m_) + 100000L;
    long stalled = 0;

    Eigen::VectorXd u(n_), v(m_);
    for (long pivot_count = 0; pivot_count < max_pivots; ++pivot_count) {
      compute_duals(u, v);
      int ei = -1, ej = -1;
      if (stalled > stall_limit) {
        pick_entering_bland(u, v, opt_tol, &ei, &ej);
      } else {
        pick_entering_dantzig(u, v, opt_tol, &ei, &ej);
      }
      if (ei < 0) return finish(u, v);
      if (!pivot(ei, ej)) ++stalled; else stalled = 0;
    }
    throw Error("transportation simplex: pivot limit exceeded");
  }

private:
  struct Cell {
    int i, j;
    double flow;
  };

  void add_cell(int i, int j, double flow) {
    const int id = static_cast<int>(cells_.size());
    cells_.push_back({i, j, flow});
    adj_[i].push_back(id);
    adj_[n_ + j].push_back(id);
  }

  void build_northwest_basis() {
    cells_.clear();
    cells_.reserve(n_ + m_ - 1);
    adj_.assign(n_ + m_, {});
    Eigen::VectorXd rw = w_, rd = d_;
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(rw[i], rd[j]);
      add_cell(i, j, f);
      rw[i] -= f;
      rd[j] -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (i == n_ - 1) {
        ++j;
      } else if (j == m_ - 1 || rw[i] <= rd[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  // Tree walk from source node 0 with u[0] = 0.
  void compute_duals(Eigen::VectorXd& u, Eigen::VectorXd& v) const {
    visited_.assign(n_ + m_, false);
    u[0] = 0.0;
    visited_[0] = true;
    stack_.clear();
    stack_.push_back(0);
    while (!stack_.empty()) {
      const int node = stack_.back();
      stack_.pop_back();
      for (const int id : adj_[node]) {
        const Cell& cell = cells_[static_cast<size_t>(id)];
        const int other = (node < n_) ? n_ + cell.j : cell.i;
        if (visited_[other]) continue;
        visited_[other] = true;
        if (node < n_) {
          v[cell.j] = c_(cell.i, cell.j) - u[cell.i];
        } else {
          u[cell.i] = c_(cell.i, cell.j) - v[cell.j];
        }
        stack_.push_back(other);
      }
    }
  }

  void pick_entering_dantzig(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                             double tol, int* ei, int* ej) const {
    red_ = c_;
    red_.colwise() -= u;
    red_.rowwise() -= v.transpose();
    Eigen::Index r, s;
    const double best = red_.minCoeff(&r, &s);
    if (best < -tol) {
      *ei = static_cast<int>(r);
      *ej = static_cast<int>(s);
    } else {
      *ei = *ej = -1;
    }
  }

  void pick_entering_bland(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                           double tol, int* ei, int* ej) const {
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < m_; ++j) {
        if (c_(i, j) - u[i] - v[j] < -tol) {
          *ei = i;
          *ej = j;
          return;
        }
      }
    }
    *ei = *ej = -1;
  }

  // Insert (ei, ej), find the unique tree cycle, shift flow. Returns true
  // for a non-degenerate pivot.
  bool pivot(int ei, int ej) {
    // Path from source node ei to target node n_+ej through the tree.
    parent_cell_.assign(n_ + m_, -1);
    parent_node_.assign(n_ + m_, -1);
    visited_.assign(n_ + m_, false);
    visited_[ei] = true;
    std::queue<int> q;
    q.push(ei);
    while (!q.empty() && !visited_[n_ + ej]) {
      const int node = q.front();
      q.pop();
      for (const int id : adj_[node]) {
        const Cell& cell = cells_[static_cast<size_t>(id)];
        const int other = (node < n_) ? n_ + cell.j : cell.i;
        if (visited_[other]) continue;
        visited_[other] = true;
        parent_cell_[other] = id;
        parent_node_[other] = node;
        q.push(other);
      }
    }

    // Walk back: path cells alternate -,+,-,... starting at the cell
    // incident to the entering target node (the entering cell itself is +).
    path_.clear();
    for (int node = n_ + ej; node != ei; node = parent_node_[node])
      path_.push_back(parent_cell_[node]);
    // path_ is ordered target-side first; the cell adjacent to source ei is
    // last. Signs alternate starting with '-' at the cell sharing row ei.
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    long long leave_idx = -1;
    for (size_t k = 0; k < path_.size(); ++k) {
      // Cells at even positions from the ei end carry '-'.
      const size_t from_source_end = path_.size() - 1 - k;
      if (from_source_end % 2 == 0) {
        const Cell& cell = cells_[static_cast<size_t>(path_[k])];
        const long long idx = static_cast<long long>(cell.i) * m_ + cell.j;
        if (cell.flow < theta || (cell.flow == theta && idx < leave_idx)) {
          theta = cell.flow;
          leave = path_[k];
          leave_idx = idx;
        }
      }
    }

    for (size_t k = 0; k < path_.size(); ++k) {
      const size_t from_source_end = path_.size() - 1 - k;
      Cell& cell = cells_[static_cast<size_t>(path_[k])];
      cell.flow += (from_source_end % 2 == 0) ? -theta : theta;
    }

    // Replace the leaving cell by the entering one in place.
    Cell& lc = cells_[static_cast<size_t>(leave)];
    detach(leave, lc.i, n_ + lc.j);
    lc = {ei, ej, theta};
    adj_[ei].push_back(leave);
    adj_[n_ + ej].push_back(leave);
    return theta > 1e-15;
  }

  void detach(int id, int a, int b) {
    for (const int node : {a, b}) {
      auto& lst = adj_[node];
      lst.erase(std::find(lst.begin(), lst.end(), id));
    }
  }

  SimplexResult finish(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    SimplexResult res;
    res.plan = Eigen::MatrixXd::Zero(n_, m_);
    for (const Cell& cell : cells_) {
      if (cell.flow > 0.0) res.plan(cell.i, cell.j) += cell.flow;
    }
    res.cost = (res.plan.array() * c_.array()).sum();
    res.u = u;
    res.v = v;
    return res;
  }

  Eigen::VectorXd w_, d_;
  Eigen::MatrixXd c_;
  int n_, m_;
  std::vector<Cell> cells_;
  std::vector<std::vector<int>> adj_;
  mutable Eigen::MatrixXd red_;
  mutable std::vector<bool> visited_;
  mutable std::vector<int> stack_;
  std::vector<int> parent_cell_, parent_node_, path_;
};

// Round a nearly-feasible nonnegative matrix onto the transport polytope:
// scale rows down to the supplies, then columns, then spread the residual
// as a rank-one correction.
Eigen::MatrixXd round_to_polytope(Eigen::MatrixXd plan, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& d) {
  const int n = static_cast<int>(w.size());
  const int m = static_cast<int>(d.size());
  for (int i = 0; i < n; ++i) {
    const double r = plan.row(i).sum();
    if (r > w[i] && r > 0.0) plan.row(i) *= w[i] / r;
  }
  for (int j = 0; j < m; ++j) {
    const double csum = plan.col(j).sum();
    if (csum > d[j] && csum > 0.0) plan.col(j) *= d[j] / csum;
  }
  Eigen::VectorXd row_err = w - plan.rowwise().sum();
  Eigen::VectorXd col_err = d - plan.colwise().sum().transpose();
  const double total = row_err.sum();
  if (total > 1e-300) plan += row_err * col_err.transpose() / total;
  return plan;
}

double lse(const Eigen::ArrayXd& a) {
  const double mx = a.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((a - mx).exp().sum());
}

TransportPlan sinkhorn_solve(const DiscreteMeasure& source, const DiscreteMeasure& target,
                             const Eigen::MatrixXd& cost, const OTConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw InvariantError("sinkhorn requires epsilon > 0");
  const int n = source.size();
  const int m = target.size();
  const double eps = cfg.epsilon;
  const Eigen::ArrayXd log_w = source.weights().array().log();
  const Eigen::ArrayXd log_d = target.weights().array().log();

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);

  auto plan_log = [&](Eigen::MatrixXd& out) {
    // log pi_ij = log w_i + log d_j + (f_i + g_j - c_ij)/eps
    out = (-cost / eps).eval();
    out.colwise() += (f / eps + log_w.matrix()).eval();
    out.rowwise() += (g / eps + log_d.matrix()).transpose().eval();
  };

  bool converged = false;
  for (int it = 0; it < cfg.max_iters; ++it) {
    for (int i = 0; i < n; ++i)
      f[i] = -eps * lse(log_d + (g.array() - cost.row(i).transpose().array()) / eps);
    for (int j = 0; j < m; ++j)
      g[j] = -eps * lse(log_w + (f.array() - cost.col(j).array()) / eps);
    if ((it & 7) != 7 && it + 1 != cfg.max_iters) continue;
    Eigen::MatrixXd lp;
    plan_log(lp);
    const Eigen::MatrixXd pi = lp.array().exp();
    const double viol = (pi.rowwise().sum() - source.weights()).cwiseAbs().sum() +
                        (pi.colwise().sum().transpose() - target.weights()).cwiseAbs().sum();
    if (viol <= cfg.tolerance) {
      converged = true;
      break;
    }
  }

  Eigen::MatrixXd lp;
  plan_log(lp);
  Eigen::MatrixXd pi = round_to_polytope(lp.array().exp(), source.weights(), target.weights());
  const double cost_value = (pi.array() * cost.array()).sum();

  // Feasible duals: keep the target scaling potential, c-transform the
  // source side.
  DualPotentials duals;
  duals.kind = DualPotentials::Kind::regularized;
  duals.target = g;
  duals.source.resize(n);
  for (int i = 0; i < n; ++i)
    duals.source[i] = (cost.row(i).transpose() - g).minCoeff();
  const double shift = duals.source[0];
  duals.source.array() -= shift;
  duals.target.array() += shift;

  TransportPlan plan(std::move(pi), source, target, cost_value, std::move(duals), &cost);
  if (!converged)
    throw ConvergeError("sinkhorn did not reach marginal tolerance " +
                            std::to_string(cfg.tolerance) + " in " +
                            std::to_string(cfg.max_iters) + " iterations",
                        std::move(plan));
  return plan;
}

void check_cost(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite() || (cost.array() < 0.0).any())
    throw InvariantError("cost matrix must be finite and nonnegative");
}

}  // namespace

Eigen::MatrixXd squared_cost_matrix(const DiscreteMeasure& source,
                                    const DiscreteMeasure& target) {
  if (source.dim() != target.dim())
    throw DimError("cost matrix: dimension mismatch between marginals");
  const int n = source.size();
  const int m = target.size();
  Eigen::MatrixXd c(n, m);
  for (int i = 0; i < n; ++i)
    c.row(i) = (target.atoms().rowwise() - source.atoms().row(i)).rowwise().squaredNorm();
  return c;
}

TransportPlan solve_ot(const DiscreteMeasure& source, const DiscreteMeasure& target,
                       const Eigen::MatrixXd& cost, const OTConfig& cfg) {
  if (cost.rows() != source.size() || cost.cols() != target.size())
    throw DimError("cost matrix shape does not match marginals");
  check_cost(cost);
  if (!(cfg.tolerance > 0.0) || cfg.tolerance > 1e-2)
    throw InvariantError("OTConfig.tolerance must lie in (0, 1e-2]");

  switch (cfg.method) {
    case OTMethod::monotone_1d:
      return solve_monotone_1d(source, target);
    case OTMethod::sinkhorn:
      return sinkhorn_solve(source, target, cost, cfg);
    case OTMethod::exact_lp: {
      TransportationSimplex simplex(source.weights(), target.weights(), cost);
      SimplexResult res = simplex.solve();
      // Tighten the source potential by a c-transform: feasibility becomes
      // exact regardless of cost scale, and at an optimal basis the change
      // is bounded by the pivot tolerance.
      Eigen::VectorXd phi =
          (cost - res.v.transpose().replicate(source.size(), 1)).rowwise().minCoeff();
      DualPotentials duals;
      const double gap = std::abs(phi.dot(source.weights()) +
                                  res.v.dot(target.weights()) - res.cost);
      duals.kind = gap <= 0.5 * TransportPlan::kDualityGapTol
                       ? DualPotentials::Kind::exact
                       : DualPotentials::Kind::regularized;
      const double shift = phi[0];
      duals.source = phi.array() - shift;
      duals.target = res.v.array() + shift;
      return TransportPlan(std::move(res.plan), source, target, res.cost,
                           std::move(duals), &cost);
    }
  }
  throw Error("unknown OT method");
}

TransportPlan solve_ot(const DiscreteMeasure& source, const DiscreteMeasure& target,
                       const CostFn& cost, const OTConfig& cfg) {
  Eigen::MatrixXd c(source.size(), target.size());
  for (int i = 0; i < source.size(); ++i)
    for (int j = 0; j < target.size(); ++j) c(i, j) = cost(source.atom(i), target.atom(j));
  return solve_ot(source, target, c, cfg);
}

double w2_squared(const DiscreteMeasure& source, const DiscreteMeasure& target,
                  const OTConfig& cfg) {
  return solve_ot(source, target, squared_cost_matrix(source, target), cfg).cost_value();
}

TransportPlan solve_monotone_1d(const DiscreteMeasure& source,
                                const DiscreteMeasure& target) {
  if (source.dim() != 1 || target.dim() != 1)
    throw DimError("monotone coupling requires 1-d marginals");
  const int n = source.size();
  const int m = target.size();

  std::vector<int> si(static_cast<size_t>(n)), tj(static_cast<size_t>(m));
  std::iota(si.begin(), si.end(), 0);
  std::iota(tj.begin(), tj.end(), 0);
  std::stable_sort(si.begin(), si.end(), [&](int a, int b) {
    return source.atoms()(a, 0) < source.atoms()(b, 0);
  });
  std::stable_sort(tj.begin(), tj.end(), [&](int a, int b) {
    return target.atoms()(a, 0) < target.atoms()(b, 0);
  });

  Eigen::MatrixXd plan = Eigen::MatrixXd::Zero(n, m);
  int a = 0, b = 0;
  double rw = source.weights()[si[0]];
  double rd = target.weights()[tj[0]];
  while (true) {
    const double f = std::min(rw, rd);
    plan(si[static_cast<size_t>(a)], tj[static_cast<size_t>(b)]) += f;
    rw -= f;
    rd -= f;
    if (a == n - 1 && b == m - 1) break;
    if (rw <= rd && a < n - 1) {
      rw = source.weights()[si[static_cast<size_t>(++a)]];
    } else if (b < m - 1) {
      rd = target.weights()[tj[static_cast<size_t>(++b)]];
    } else {
      rw = source.weights()[si[static_cast<size_t>(++a)]];
    }
  }

  double cost = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (plan(i, j) > 0.0) {
        const double diff = source.atoms()(i, 0) - target.atoms()(j, 0);
        cost += plan(i, j) * diff * diff;
      }
  return TransportPlan(std::move(plan), source, target, cost);
}

Eigen::MatrixXd barycentric_projection(const TransportPlan& plan) {
  const Eigen::MatrixXd& pi = plan.matrix();
  const int n = static_cast<int>(pi.rows());
  Eigen::MatrixXd out(n, plan.target().dim());
  for (int i = 0; i < n; ++i) {
    const double mass = pi.row(i).sum();
    if (mass <= 0.0)
      throw ZeroRowError("cannot condition on zero-mass source row " + std::to_string(i));
    out.row(i) = (pi.row(i) * plan.target().atoms()) / mass;
  }
  return out;
}

std::function<double(const Eigen::VectorXd&)> c_transform_extend(
    const Eigen::VectorXd& potential, const DiscreteMeasure& target,
    const CostFn& cost) {
  if (potential.size() != target.size())
    throw DimError("potential length does not match target atom count");
  return [potential, target, cost](const Eigen::VectorXd& x) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < target.size(); ++j)
      best = std::min(best, cost(x, target.atom(j)) - potential[j]);
    return best;
  };
}

}  // namespace otdenoise
