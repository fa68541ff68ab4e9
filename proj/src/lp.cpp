#include "robustam/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robustam/errors.hpp"

namespace robustam::lp {

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

int LinearProgram::add_variable(double cost, double lower, double upper, std::string name) {
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  names_.push_back(std::move(name));
  return static_cast<int>(cost_.size()) - 1;
}

int LinearProgram::add_row(std::vector<Term> terms, RowType type, double rhs, std::string name) {
  rows_.push_back(Row{std::move(terms), type, rhs, std::move(name)});
  return static_cast<int>(rows_.size()) - 1;
}

void LinearProgram::validate() const {
  const int n = num_variables();
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(cost_[j])) throw InvalidArgument("lp: non-finite cost on " + names_[j]);
    if (std::isnan(lower_[j]) || std::isnan(upper_[j]) || lower_[j] == kInf || upper_[j] == -kInf)
      throw InvalidArgument("lp: bad bounds on variable " + std::to_string(j));
  }
  for (const auto& r : rows_) {
    if (!std::isfinite(r.rhs)) throw InvalidArgument("lp: non-finite rhs in row " + r.name);
    for (const auto& t : r.terms) {
      if (t.var < 0 || t.var >= n) throw InvalidArgument("lp: row " + r.name + " references bad variable");
      if (!std::isfinite(t.coef)) throw InvalidArgument("lp: non-finite coefficient in row " + r.name);
    }
  }
}

namespace {

using Column = std::vector<std::pair<int, double>>;

// x_j = shift + sign * col (or col - col2 for free variables).
struct VarMap {
  enum Kind { shifted, flipped, split } kind;
  int col = -1;
  int col2 = -1;
  double shift = 0.0;
};

struct RowMap {
  int std_row = -1;  // -1: row was empty and dropped
  double factor = 1.0;  // std_row = factor * original row (scaling and negation)
};

struct StandardForm {
  int m = 0;
  std::vector<Column> cols;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<char> artificial;
  std::vector<int> initial_basis;
  std::vector<VarMap> vars;
  std::vector<RowMap> rows;
  bool trivially_infeasible = false;

  int add_col(double cost, bool art = false) {
    cols.emplace_back();
    c.push_back(cost);
    artificial.push_back(art ? 1 : 0);
    return static_cast<int>(cols.size()) - 1;
  }
};

StandardForm to_standard(const LinearProgram& lp, double feas_tol) {
  StandardForm sf;
  const int n = lp.num_variables();
  const double sense = lp.sense() == Sense::maximize ? -1.0 : 1.0;

  struct PendingRow {
    std::vector<std::pair<int, double>> coef;
    RowType type;
    double rhs;
    int original;  // -1 for bound rows
  };
  std::vector<PendingRow> pending;

  sf.vars.resize(n);
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower()[j], hi = lp.upper()[j], cj = sense * lp.costs()[j];
    VarMap& vm = sf.vars[j];
    if (std::isfinite(lo)) {
      vm.kind = VarMap::shifted;
      vm.shift = lo;
      vm.col = sf.add_col(cj);
      if (std::isfinite(hi)) {
        if (hi < lo - feas_tol) sf.trivially_infeasible = true;
        pending.push_back({{{vm.col, 1.0}}, RowType::less_equal, std::max(hi - lo, 0.0), -1});
      }
    } else if (std::isfinite(hi)) {
      vm.kind = VarMap::flipped;
      vm.shift = hi;
      vm.col = sf.add_col(-cj);
    } else {
      vm.kind = VarMap::split;
      vm.col = sf.add_col(cj);
      vm.col2 = sf.add_col(-cj);
    }
  }

  sf.rows.resize(lp.num_rows());
  for (int i = 0; i < lp.num_rows(); ++i) {
    const Row& row = lp.rows()[i];
    PendingRow pr{{}, row.type, row.rhs, i};
    for (const Term& t : row.terms) {
      if (t.coef == 0.0) continue;
      const VarMap& vm = sf.vars[t.var];
      switch (vm.kind) {
        case VarMap::shifted:
          pr.coef.emplace_back(vm.col, t.coef);
          pr.rhs -= t.coef * vm.shift;
          break;
        case VarMap::flipped:
          pr.coef.emplace_back(vm.col, -t.coef);
          pr.rhs -= t.coef * vm.shift;
          break;
        case VarMap::split:
          pr.coef.emplace_back(vm.col, t.coef);
          pr.coef.emplace_back(vm.col2, -t.coef);
          break;
      }
    }
    // Merge duplicate entries.
    std::sort(pr.coef.begin(), pr.coef.end());
    std::vector<std::pair<int, double>> merged;
    for (const auto& e : pr.coef) {
      if (!merged.empty() && merged.back().first == e.first) merged.back().second += e.second;
      else merged.push_back(e);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(), [](const auto& e) { return e.second == 0.0; }),
                 merged.end());
    pr.coef = std::move(merged);
    pending.push_back(std::move(pr));
  }

  for (auto& pr : pending) {
    if (pr.coef.empty()) {
      const bool ok = (pr.type == RowType::less_equal && pr.rhs >= -feas_tol) ||
                      (pr.type == RowType::greater_equal && pr.rhs <= feas_tol) ||
                      (pr.type == RowType::equal && std::abs(pr.rhs) <= feas_tol);
      if (!ok) sf.trivially_infeasible = true;
      continue;
    }
    double scale = 0.0;
    for (const auto& e : pr.coef) scale = std::max(scale, std::abs(e.second));
    double factor = 1.0 / scale;
    double rhs = pr.rhs * factor;
    double slack_sign = 0.0;
    if (pr.type == RowType::less_equal) slack_sign = 1.0;
    if (pr.type == RowType::greater_equal) slack_sign = -1.0;
    if (rhs < 0.0) {
      factor = -factor;
      rhs = -rhs;
      slack_sign = -slack_sign;
    }
    const int r = sf.m++;
    for (const auto& e : pr.coef) sf.cols[e.first].emplace_back(r, e.second * factor);
    sf.b.push_back(rhs);
    int basic = -1;
    if (slack_sign != 0.0) {
      const int s = sf.add_col(0.0);
      sf.cols[s].emplace_back(r, slack_sign);
      if (slack_sign > 0.0) basic = s;
    }
    if (basic < 0) {
      const int a = sf.add_col(0.0, true);
      sf.cols[a].emplace_back(r, 1.0);
      basic = a;
    }
    sf.initial_basis.push_back(basic);
    if (pr.original >= 0) sf.rows[pr.original] = RowMap{r, factor};
  }
  return sf;
}

class RevisedSimplex {
 public:
  RevisedSimplex(const StandardForm& sf, const Options& opt)
      : sf_(sf), opt_(opt), m_(sf.m), n_(static_cast<int>(sf.cols.size())) {
    basis_ = sf.initial_basis;
    position_.assign(n_, -1);
    for (int i = 0; i < m_; ++i) position_[basis_[i]] = i;
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    xb_ = Eigen::Map<const Eigen::VectorXd>(sf.b.data(), m_);
  }

  // Minimises `cost` over the columns with allowed[j] != 0.
  Status run(const std::vector<double>& cost, std::vector<char>& allowed, bool forbid_leaving_reentry,
             long& iterations, long max_iterations) {
    int degenerate_run = 0;
    bool bland = false;
    int since_refactor = 0;
    int cleanup_rounds = 0;
    Eigen::VectorXd cb(m_), alpha(m_), y(m_);
    while (true) {
      if (iterations >= max_iterations) return Status::numerical_failure;
      if (since_refactor >= opt_.refactor_every) {
        if (!refactor()) return Status::numerical_failure;
        since_refactor = 0;
      }
      for (int i = 0; i < m_; ++i) cb(i) = cost[basis_[i]];
      y.noalias() = binv_.transpose() * cb;

      int entering = -1;
      double best = -opt_.optimality_tol;
      for (int j = 0; j < n_; ++j) {
        if (position_[j] >= 0 || !allowed[j]) continue;
        double d = cost[j];
        for (const auto& [r, v] : sf_.cols[j]) d -= y(r) * v;
        if (d < best) {
          best = d;
          entering = j;
          if (bland) break;
        }
      }
      if (entering < 0) {
        // Candidate optimum: refresh the factorisation and re-check once.
        if (since_refactor == 0 || cleanup_rounds >= 3) return Status::optimal;
        if (!refactor()) return Status::numerical_failure;
        since_refactor = 0;
        ++cleanup_rounds;
        continue;
      }

      alpha.setZero();
      for (const auto& [r, v] : sf_.cols[entering]) alpha.noalias() += v * binv_.col(r);

      int leave = -1;
      if (bland) {
        double best_ratio = kInf;
        for (int i = 0; i < m_; ++i) {
          if (alpha(i) <= opt_.pivot_tol) continue;
          const double ratio = std::max(xb_(i), 0.0) / alpha(i);
          if (ratio < best_ratio - 1e-12 ||
              (ratio <= best_ratio + 1e-12 && leave >= 0 && basis_[i] < basis_[leave])) {
            if (ratio < best_ratio) best_ratio = ratio;
            leave = i;
          }
        }
      } else {
        double theta_max = kInf;
        for (int i = 0; i < m_; ++i) {
          if (alpha(i) <= opt_.pivot_tol) continue;
          theta_max = std::min(theta_max, (std::max(xb_(i), 0.0) + opt_.feasibility_tol) / alpha(i));
        }
        double best_alpha = 0.0;
        for (int i = 0; i < m_; ++i) {
          if (alpha(i) <= opt_.pivot_tol) continue;
          if (std::max(xb_(i), 0.0) / alpha(i) <= theta_max && alpha(i) > best_alpha) {
            best_alpha = alpha(i);
            leave = i;
          }
        }
      }
      if (leave < 0) return Status::unbounded;

      const double theta = std::max(xb_(leave), 0.0) / alpha(leave);
      xb_.noalias() -= theta * alpha;
      xb_(leave) = theta;
      for (int i = 0; i < m_; ++i)
        if (xb_(i) < 0.0 && xb_(i) > -opt_.feasibility_tol) xb_(i) = 0.0;

      const Eigen::RowVectorXd pivot_row = binv_.row(leave) / alpha(leave);
      alpha(leave) -= 1.0;
      binv_.noalias() -= alpha * pivot_row;

      const int leaving_col = basis_[leave];
      position_[leaving_col] = -1;
      if (forbid_leaving_reentry && sf_.artificial[leaving_col]) allowed[leaving_col] = 0;
      basis_[leave] = entering;
      position_[entering] = leave;
      ++iterations;
      ++since_refactor;

      if (theta * std::abs(best) <= 1e-13) {
        if (++degenerate_run >= opt_.degenerate_switch) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }
  }

  bool refactor() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (const auto& [r, v] : sf_.cols[basis_[i]]) B(r, i) = v;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    binv_ = lu.inverse();
    if (!binv_.allFinite()) return false;
    const Eigen::Map<const Eigen::VectorXd> b(sf_.b.data(), m_);
    xb_.noalias() = binv_ * b;
    for (int i = 0; i < m_; ++i)
      if (xb_(i) < 0.0 && xb_(i) > -opt_.feasibility_tol) xb_(i) = 0.0;
    return true;
  }

  // Pivots basic artificial variables out where possible (after phase 1).
  void drive_out_artificials(long& iterations) {
    Eigen::VectorXd alpha(m_);
    for (int i = 0; i < m_; ++i) {
      if (!sf_.artificial[basis_[i]]) continue;
      int entering = -1;
      double best = opt_.pivot_tol * 10.0;
      for (int j = 0; j < n_; ++j) {
        if (position_[j] >= 0 || sf_.artificial[j]) continue;
        double a = 0.0;
        for (const auto& [r, v] : sf_.cols[j]) a += binv_(i, r) * v;
        if (std::abs(a) > best) {
          best = std::abs(a);
          entering = j;
        }
      }
      if (entering < 0) continue;  // redundant row
      alpha.setZero();
      for (const auto& [r, v] : sf_.cols[entering]) alpha.noalias() += v * binv_.col(r);
      const double theta = xb_(i) / alpha(i);
      xb_.noalias() -= theta * alpha;
      xb_(i) = theta;
      const Eigen::RowVectorXd pivot_row = binv_.row(i) / alpha(i);
      alpha(i) -= 1.0;
      binv_.noalias() -= alpha * pivot_row;
      position_[basis_[i]] = -1;
      basis_[i] = entering;
      position_[entering] = i;
      ++iterations;
    }
  }

  double artificial_sum() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      if (sf_.artificial[basis_[i]]) s += std::max(xb_(i), 0.0);
    return s;
  }

  std::vector<double> primal() const {
    std::vector<double> x(n_, 0.0);
    for (int i = 0; i < m_; ++i) x[basis_[i]] = std::max(xb_(i), 0.0);
    return x;
  }

  std::vector<double> duals(const std::vector<double>& cost) const {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb(i) = cost[basis_[i]];
    Eigen::VectorXd y = binv_.transpose() * cb;
    return std::vector<double>(y.data(), y.data() + m_);
  }

 private:
  const StandardForm& sf_;
  const Options& opt_;
  int m_, n_;
  std::vector<int> basis_;
  std::vector<int> position_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
};

}  // namespace

void certify(const LinearProgram& lp, Solution& sol) {
  const int n = lp.num_variables();
  const double sense = lp.sense() == Sense::maximize ? -1.0 : 1.0;
  double primal_res = 0.0;
  double objective = 0.0;
  for (int j = 0; j < n; ++j) {
    const double xj = sol.x[j];
    objective += lp.costs()[j] * xj;
    primal_res = std::max(primal_res, lp.lower()[j] - xj);
    primal_res = std::max(primal_res, xj - lp.upper()[j]);
  }
  // Reduced costs of the minimisation form: d = sense*c - A^T (sense*y).
  std::vector<double> reduced(n);
  for (int j = 0; j < n; ++j) reduced[j] = sense * lp.costs()[j];
  double dual_res = 0.0;
  double dual_obj = 0.0;
  for (int i = 0; i < lp.num_rows(); ++i) {
    const Row& row = lp.rows()[i];
    double ax = 0.0, scale = 1.0;
    for (const Term& t : row.terms) {
      ax += t.coef * sol.x[t.var];
      scale = std::max(scale, std::abs(t.coef));
    }
    double viol = 0.0;
    if (row.type == RowType::less_equal) viol = ax - row.rhs;
    if (row.type == RowType::greater_equal) viol = row.rhs - ax;
    if (row.type == RowType::equal) viol = std::abs(ax - row.rhs);
    primal_res = std::max(primal_res, viol / scale);

    const double y = sense * sol.duals[i];
    if (row.type == RowType::less_equal) dual_res = std::max(dual_res, y);
    if (row.type == RowType::greater_equal) dual_res = std::max(dual_res, -y);
    dual_obj += y * row.rhs;
    for (const Term& t : row.terms) reduced[t.var] -= y * t.coef;
  }
  for (int j = 0; j < n; ++j) {
    const double d = reduced[j], lo = lp.lower()[j], hi = lp.upper()[j];
    if (d > 0.0) {
      if (std::isfinite(lo)) dual_obj += d * lo;
      else dual_res = std::max(dual_res, d);
    } else if (d < 0.0) {
      if (std::isfinite(hi)) dual_obj += d * hi;
      else dual_res = std::max(dual_res, -d);
    }
  }
  sol.objective = objective;
  sol.primal_residual = std::max(primal_res, 0.0);
  sol.dual_residual = dual_res;
  sol.duality_gap = std::abs(sense * objective - dual_obj) / std::max(1.0, std::abs(objective));
}

namespace {

Solution solve_once(const LinearProgram& lp, const Options& opt) {
  Solution sol;
  const StandardForm sf = to_standard(lp, opt.feasibility_tol);
  if (sf.trivially_infeasible) {
    sol.status = Status::infeasible;
    return sol;
  }
  const int n_std = static_cast<int>(sf.cols.size());
  const long max_iter = opt.max_iterations > 0 ? opt.max_iterations : std::max<long>(20000, 50L * (sf.m + n_std));

  RevisedSimplex simplex(sf, opt);
  long iterations = 0;

  bool need_phase1 = false;
  for (int j : sf.initial_basis) need_phase1 = need_phase1 || sf.artificial[j];
  if (need_phase1) {
    std::vector<double> phase1_cost(n_std, 0.0);
    for (int j = 0; j < n_std; ++j)
      if (sf.artificial[j]) phase1_cost[j] = 1.0;
    std::vector<char> allowed(n_std, 1);
    const Status s1 = simplex.run(phase1_cost, allowed, true, iterations, max_iter);
    if (s1 == Status::numerical_failure) {
      sol.status = s1;
      sol.iterations = iterations;
      return sol;
    }
    double bnorm = 1.0;
    for (double v : sf.b) bnorm = std::max(bnorm, std::abs(v));
    if (simplex.artificial_sum() > 10.0 * opt.feasibility_tol * bnorm) {
      sol.status = Status::infeasible;
      sol.iterations = iterations;
      return sol;
    }
    simplex.drive_out_artificials(iterations);
  }

  std::vector<char> allowed(n_std, 1);
  for (int j = 0; j < n_std; ++j)
    if (sf.artificial[j]) allowed[j] = 0;
  const Status s2 = simplex.run(sf.c, allowed, false, iterations, max_iter);
  sol.iterations = iterations;
  if (s2 != Status::optimal) {
    sol.status = s2;
    return sol;
  }

  const std::vector<double> xs = simplex.primal();
  const std::vector<double> ys = simplex.duals(sf.c);
  const int n = lp.num_variables();
  sol.x.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const VarMap& vm = sf.vars[j];
    switch (vm.kind) {
      case VarMap::shifted: sol.x[j] = vm.shift + xs[vm.col]; break;
      case VarMap::flipped: sol.x[j] = vm.shift - xs[vm.col]; break;
      case VarMap::split: sol.x[j] = xs[vm.col] - xs[vm.col2]; break;
    }
  }
  const double sense = lp.sense() == Sense::maximize ? -1.0 : 1.0;
  sol.duals.assign(lp.num_rows(), 0.0);
  for (int i = 0; i < lp.num_rows(); ++i) {
    const RowMap& rm = sf.rows[i];
    if (rm.std_row >= 0) sol.duals[i] = sense * ys[rm.std_row] * rm.factor;
  }
  certify(lp, sol);
  sol.status = Status::optimal;
  return sol;
}

}  // namespace

Solution solve(const LinearProgram& lp, const Options& opt) {
  lp.validate();
  Solution sol = solve_once(lp, opt);
  // A basis that went singular under product-form updates: start over with
  // pickier pivots and fresher factorisations.
  Options careful = opt;
  for (int attempt = 0; attempt < 2 && sol.status == Status::numerical_failure; ++attempt) {
    careful.pivot_tol = std::max(careful.pivot_tol * 100.0, 1e-7);
    careful.refactor_every = std::max(8, careful.refactor_every / 4);
    sol = solve_once(lp, careful);
  }
  return sol;
}

}  // namespace robustam::lp
