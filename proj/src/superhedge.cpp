#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "internal.hpp"
#include "robustam/errors.hpp"
#include "robustam/solvers.hpp"

namespace robustam {

std::vector<char> chargeable_paths(const ModelClass& model, const SolverOptions& opt) {
  const ScenarioTree& tree = *model.tree;
  const int n = tree.num_paths();
  const lp::LinearProgram base = detail::build_base_lp(model, Vec(n, 0.0));
  std::vector<char> charged(n, 0), decided(n, 0);
  const int batch = std::max(1, worker_count());
  int next = 0;
  while (true) {
    std::vector<int> todo;
    for (; next < n && static_cast<int>(todo.size()) < batch; ++next)
      if (!decided[next]) todo.push_back(next);
    if (todo.empty()) break;
    std::vector<lp::Solution> sols(todo.size());
    parallel_for(static_cast<int>(todo.size()), opt.exec, [&](int i) {
      lp::LinearProgram prog = base;
      prog.set_cost(todo[i], 1.0);
      sols[i] = lp::solve(prog, opt.lp);
    });
    for (std::size_t i = 0; i < todo.size(); ++i) {
      const lp::Solution& s = sols[i];
      if (s.status == lp::Status::infeasible)
        throw InfeasibleClassError("chargeable paths: the model class admits no measure");
      if (!s.optimal()) throw NumericalError("chargeable paths: solver failed");
      decided[todo[i]] = 1;
      if (s.objective >= opt.support_mass) charged[todo[i]] = 1;
      for (int p = 0; p < n; ++p)
        if (s.x[p] >= 1e-9) charged[p] = decided[p] = 1;
    }
  }
  return charged;
}

namespace {

struct Key {
  int node, stopped_at, coord;
  bool operator<(const Key& o) const {
    return std::tie(node, stopped_at, coord) < std::tie(o.node, o.stopped_at, o.coord);
  }
};

// Exact LP dual of the enlarged primal restricted to the support paths.
class HedgeProgram {
 public:
  HedgeProgram(const ModelClass& model, const HedgeOptions& hopt)
      : model_(model), tree_(*model.tree), space_(tree_, model.theta_dates), hopt_(hopt) {}

  DualResult solve(const Vec& f, const std::vector<int>& support, const lp::Options& opt) {
    if (static_cast<int>(f.size()) != space_.size()) throw InvalidArgument("hedge: payoff size mismatch");
    x_ = prog_.add_variable(1.0, -lp::kInf, lp::kInf, "x");
    for (int j = 0; j < model_.g.count(); ++j) h_.push_back(prog_.add_variable(0.0, -lp::kInf, lp::kInf, "h"));
    const int T = tree_.terminal();
    for (int p : support) {
      for (int k = 0; k < space_.num_theta(); ++k) {
        const int th = model_.theta_dates[k];
        std::vector<lp::Term> row{{x_, 1.0}};
        for (int t = 0; t < T; ++t) {
          const int v = tree_.path_node(p, t);
          const Vec& a = tree_.value(p, t);
          const Vec& b = tree_.value(p, t + 1);
          const bool alive = th > t;
          if (alive || hopt_.continuation)
            for (int i = 0; i < tree_.dim(); ++i)
              if (b[i] != a[i]) row.push_back({position(alive ? -1 : k, v, i), b[i] - a[i]});
          if (!hopt_.band_multipliers) continue;
          const int status = model_.conditioning == Conditioning::base || alive ? -1 : th;
          for (int i = 0; i < model_.priced_dim; ++i) {
            const double d2 = (b[i] - a[i]) * (b[i] - a[i]);
            const double lo = model_.band.lo[v][i], hi = model_.band.hi[v][i];
            if (detail::finite_upper(hi) && detail::band_gap(d2, hi) != 0.0)
              row.push_back({upper(v, status, i), detail::band_gap(d2, hi)});
            if (lo > 0.0 && detail::band_gap(d2, lo) != 0.0) row.push_back({lower(v, status, i), -detail::band_gap(d2, lo)});
          }
        }
        for (int j = 0; j < model_.g.count(); ++j)
          if (model_.g.payoff[p][j] != 0.0) row.push_back({h_[j], model_.g.payoff[p][j]});
        prog_.add_row(std::move(row), lp::RowType::greater_equal, f[space_.element(k, p)], "dominate");
      }
    }
    DualResult out;
    out.lp = lp::solve(prog_, opt);
    if (out.lp.status == lp::Status::unbounded)
      throw InfeasibleClassError("hedge: dual unbounded, the model class admits no measure");
    if (!out.lp.optimal())
      throw NumericalError(std::string("hedge: solver returned ") + lp::to_string(out.lp.status));
    out.value = out.lp.objective;
    extract(out, support);
    return out;
  }

 private:
  int position(int k, int v, int i) {
    auto [it, fresh] = pos_.try_emplace(std::make_tuple(k, v, i), 0);
    if (fresh) it->second = prog_.add_variable(0.0, -lp::kInf, lp::kInf, "q");
    return it->second;
  }
  int upper(int v, int s, int i) { return multiplier(hi_, Key{v, s, i}); }
  int lower(int v, int s, int i) { return multiplier(lo_, Key{v, s, i}); }
  int multiplier(std::map<Key, int>& m, const Key& key) {
    auto [it, fresh] = m.try_emplace(key, 0);
    if (fresh) it->second = prog_.add_variable(0.0, 0.0, lp::kInf, "band");
    return it->second;
  }

  void extract(DualResult& out, const std::vector<int>& support) const {
    const Vec& s = out.lp.x;
    HedgePlan& plan = out.plan;
    plan.x = s[x_];
    plan.q.assign(tree_.num_nodes(), Vec(tree_.dim(), 0.0));
    plan.q_tilde.assign(space_.num_theta(), std::vector<Vec>(tree_.num_nodes(), Vec(tree_.dim(), 0.0)));
    for (const auto& [key, var] : pos_) {
      const auto [k, v, i] = key;
      (k < 0 ? plan.q[v] : plan.q_tilde[k][v])[i] = s[var];
    }
    for (int var : h_) plan.h.push_back(s[var]);
    std::map<Key, BandMultiplier> mult;
    auto touch = [&](const Key& key) -> BandMultiplier& {
      auto [it, fresh] = mult.try_emplace(key, BandMultiplier{key.node, key.stopped_at, key.coord, 0.0, 0.0});
      return it->second;
    };
    for (const auto& [key, var] : hi_) touch(key).upper = s[var];
    for (const auto& [key, var] : lo_) touch(key).lower = s[var];
    for (const auto& [key, m] : mult) plan.multipliers.push_back(m);
    plan.support = support;
  }

  const ModelClass& model_;
  const ScenarioTree& tree_;
  EnlargedSpace space_;
  HedgeOptions hopt_;
  lp::LinearProgram prog_{lp::Sense::minimize};
  int x_ = -1;
  std::vector<int> h_;
  std::map<std::tuple<int, int, int>, int> pos_;
  std::map<Key, int> hi_, lo_;
};

}  // namespace

DualResult dual_superhedge_american(const ModelClass& model, const AmericanPayoff& z, const HedgeOptions& hopt,
                                    const SolverOptions& opt) {
  model.validate();
  const std::vector<char> charged = chargeable_paths(model, opt);
  std::vector<int> support;
  for (int p = 0; p < model.tree->num_paths(); ++p)
    if (charged[p]) support.push_back(p);
  return HedgeProgram(model, hopt).solve(stopped_payoff(model, z), support, opt.lp);
}

DualResult dual_superhedge_european(const ModelClass& model, const Vec& f, const SolverOptions& opt) {
  model.validate();
  std::vector<int> support(model.tree->num_paths());
  for (int p = 0; p < model.tree->num_paths(); ++p) support[p] = p;
  return HedgeProgram(model, HedgeOptions{}).solve(f, support, opt.lp);
}

double hedge_shortfall(const ModelClass& model, const Vec& f, const HedgePlan& plan) {
  const ScenarioTree& tree = *model.tree;
  const EnlargedSpace space(tree, model.theta_dates);
  if (static_cast<int>(f.size()) != space.size()) throw InvalidArgument("hedge_shortfall: payoff size mismatch");
  std::map<std::tuple<int, int, int>, const BandMultiplier*> mult;
  for (const auto& m : plan.multipliers) mult[{m.node, m.stopped_at, m.coord}] = &m;
  std::vector<int> support = plan.support;
  if (support.empty())
    for (int p = 0; p < tree.num_paths(); ++p) support.push_back(p);
  const int T = tree.terminal();
  double worst = std::numeric_limits<double>::infinity();
  for (int p : support) {
    for (int k = 0; k < space.num_theta(); ++k) {
      const int th = model.theta_dates[k];
      double value = plan.x;
      for (int t = 0; t < T; ++t) {
        const int v = tree.path_node(p, t);
        const Vec& a = tree.value(p, t);
        const Vec& b = tree.value(p, t + 1);
        const bool alive = th > t;
        const Vec& q = alive ? plan.q[v] : plan.q_tilde[k][v];
        for (int i = 0; i < tree.dim(); ++i) value += q[i] * (b[i] - a[i]);
        const int status = model.conditioning == Conditioning::base || alive ? -1 : th;
        for (int i = 0; i < model.priced_dim; ++i) {
          const auto it = mult.find({v, status, i});
          if (it == mult.end()) continue;
          const double d2 = (b[i] - a[i]) * (b[i] - a[i]);
          if (detail::finite_upper(model.band.hi[v][i]))
            value += it->second->upper * detail::band_gap(d2, model.band.hi[v][i]);
          if (model.band.lo[v][i] > 0.0) value -= it->second->lower * detail::band_gap(d2, model.band.lo[v][i]);
        }
      }
      for (int j = 0; j < model.g.count() && j < static_cast<int>(plan.h.size()); ++j)
        value += plan.h[j] * model.g.payoff[p][j];
      worst = std::min(worst, value - f[space.element(k, p)]);
    }
  }
  return worst;
}

}  // namespace robustam
