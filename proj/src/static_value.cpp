#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "internal.hpp"
#include "robustam/errors.hpp"
#include "robustam/solvers.hpp"

namespace robustam {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec rule_cost(const ScenarioTree& tree, const AmericanPayoff& z, const StoppingRule& rule) {
  Vec c(tree.num_paths());
  for (int p = 0; p < tree.num_paths(); ++p) c[p] = z.at(tree, p, rule.stop_date(tree, p));
  return c;
}

double solve_rule(lp::LinearProgram prog, const ScenarioTree& tree, const AmericanPayoff& z, const StoppingRule& rule,
                  PathMeasure* best, const lp::Options& opt) {
  const Vec c = rule_cost(tree, z, rule);
  for (int p = 0; p < tree.num_paths(); ++p) prog.set_cost(p, c[p]);
  const lp::Solution sol = lp::solve(prog, opt);
  if (sol.status == lp::Status::infeasible) return kNegInf;
  if (!sol.optimal()) throw NumericalError(std::string("rule value: solver returned ") + lp::to_string(sol.status));
  if (best) {
    best->w = sol.x;
    for (double& x : best->w) x = std::max(0.0, x);
  }
  return sol.objective;
}

bool is_theta(const std::vector<int>& theta, int t) { return std::binary_search(theta.begin(), theta.end(), t); }

}  // namespace

double rule_value(const ModelClass& model, const AmericanPayoff& z, const StoppingRule& rule, PathMeasure* best,
                  const lp::Options& opt) {
  const ScenarioTree& tree = *model.tree;
  if (!rule.adapted_to(tree)) throw InvalidArgument("rule_value: rule does not match the tree");
  return solve_rule(detail::build_base_lp(model, Vec(tree.num_paths(), 0.0)), tree, z, rule, best, opt);
}

StoppingRule snell_rule(const ScenarioTree& tree, const std::vector<int>& theta_dates, const PathMeasure& p,
                        const AmericanPayoff& z, double* value) {
  StoppingRule rule = stop_at_last(tree);
  Vec mass(tree.num_nodes(), 0.0), v(tree.num_nodes(), 0.0);
  for (int n = tree.num_nodes() - 1; n >= 0; --n) {
    const auto& node = tree.node(n);
    if (node.children.empty()) {
      mass[n] = p.w[node.first_path];
      v[n] = z.value[n];
      continue;
    }
    double cont = 0.0;
    for (int c : node.children) {
      mass[n] += mass[c];
      cont += mass[c] * v[c];
    }
    cont = mass[n] > 0.0 ? cont / mass[n] : kNegInf;
    if (is_theta(theta_dates, node.date) && z.value[n] >= cont) {
      rule.stop[n] = 1;
      v[n] = z.value[n];
    } else {
      v[n] = mass[n] > 0.0 ? cont : z.value[n];
    }
  }
  if (value) *value = v[tree.root()];
  return rule;
}

StaticResult alternating_ascent(const ModelClass& model, const AmericanPayoff& z, int max_rounds,
                                const SolverOptions& opt) {
  const ScenarioTree& tree = *model.tree;
  const lp::LinearProgram base = detail::build_base_lp(model, Vec(tree.num_paths(), 0.0));
  StaticResult out;
  out.enumerated = false;
  out.rule = stop_at_last(tree);
  out.value = solve_rule(base, tree, z, out.rule, &out.p, opt.lp);
  if (out.value == kNegInf) throw InfeasibleClassError("alternating ascent: the model class admits no measure");
  for (int round = 0; round < max_rounds; ++round) {
    ++out.nodes_examined;
    const StoppingRule next = snell_rule(tree, model.theta_dates, out.p, z);
    PathMeasure p;
    const double v = solve_rule(base, tree, z, next, &p, opt.lp);
    if (v <= out.value + 1e-12) break;
    out.value = v;
    out.rule = next;
    out.p = std::move(p);
  }
  out.rule_count = count_rules(tree, model.theta_dates);
  return out;
}

namespace {

struct BranchNode {
  std::vector<signed char> fix;  // per tree node: -1 free, 0 continue, 1 stop
  double bound;
  EnlargedMeasure mu;
};

struct BoundOrder {
  bool operator()(const BranchNode& a, const BranchNode& b) const { return a.bound < b.bound; }
};

class BranchAndBound {
 public:
  BranchAndBound(const ModelClass& model, const AmericanPayoff& z, std::size_t cap, const SolverOptions& opt)
      : model_(model),
        tree_(*model.tree),
        space_(tree_, model.theta_dates),
        z_(z),
        cap_(cap),
        opt_(opt),
        f_(stopped_payoff(model, z)),
        base_lp_(detail::build_base_lp(model, Vec(tree_.num_paths(), 0.0))) {}

  StaticResult run() {
    StaticResult best;
    best.value = kNegInf;
    best.enumerated = false;
    BranchNode root{std::vector<signed char>(tree_.num_nodes(), -1), 0.0, {}};
    if (!relax(root)) throw InfeasibleClassError("static value: the model class admits no measure");
    seed_incumbent(root.mu, best);
    std::priority_queue<BranchNode, std::vector<BranchNode>, BoundOrder> open;
    open.push(std::move(root));
    std::size_t nodes = 0;
    while (!open.empty()) {
      BranchNode node = open.top();
      open.pop();
      if (node.bound <= best.value + 1e-9) continue;
      if (++nodes > cap_)
        throw CapExceededError("static value: branch-and-bound exceeded " + std::to_string(cap_) + " nodes", nodes);
      const int a = most_mixed(node);
      if (a < 0) {
        // The relaxation optimum is rule-shaped: its rule is optimal here.
        const StoppingRule rule = rule_from(node);
        consider(rule, best);
        continue;
      }
      for (signed char choice : {static_cast<signed char>(1), static_cast<signed char>(0)}) {
        BranchNode child{node.fix, 0.0, {}};
        child.fix[a] = choice;
        if (relax(child) && child.bound > best.value + 1e-9) open.push(std::move(child));
      }
    }
    best.nodes_examined = nodes;
    best.rule_count = count_rules(tree_, model_.theta_dates);
    return best;
  }

 private:
  // Enlarged relaxation with the fixings as dropped columns.
  bool relax(BranchNode& node) {
    std::vector<char> allowed(space_.size(), 1);
    for (int v = 0; v < tree_.num_nodes(); ++v) {
      if (node.fix[v] < 0) continue;
      const auto& n = tree_.node(v);
      for (int k = 0; k < space_.num_theta(); ++k) {
        const int th = model_.theta_dates[k];
        const bool drop = node.fix[v] == 1 ? th > n.date : th == n.date;
        if (!drop) continue;
        for (int p = n.first_path; p < n.last_path; ++p) allowed[space_.element(k, p)] = 0;
      }
    }
    detail::EnlargedLp elp = detail::build_enlarged_lp(model_, f_, &allowed);
    const lp::Solution sol = lp::solve(elp.prog, opt_.lp);
    if (sol.status == lp::Status::infeasible) return false;
    if (!sol.optimal()) throw NumericalError("static value: relaxation failed");
    node.bound = sol.objective;
    node.mu = EnlargedMeasure{model_.theta_dates, tree_.num_paths(), Vec(space_.size(), 0.0)};
    for (std::size_t j = 0; j < elp.element.size(); ++j) node.mu.w[elp.element[j]] = std::max(0.0, sol.x[j]);
    return true;
  }

  // Masses of (stopped now, continuing) at node v.
  std::pair<double, double> split(const EnlargedMeasure& mu, int v) const {
    const auto& n = tree_.node(v);
    double now = 0.0, later = 0.0;
    for (int k = 0; k < space_.num_theta(); ++k) {
      const int th = model_.theta_dates[k];
      if (th < n.date) continue;
      for (int p = n.first_path; p < n.last_path; ++p) (th == n.date ? now : later) += mu.at(k, p);
    }
    return {now, later};
  }

  // Free exercise node reachable through continue-fixings with the largest
  // mixed mass, or -1 when none is mixed.
  int most_mixed(const BranchNode& node) const {
    int best = -1;
    double best_mix = 1e-9;
    std::vector<int> stack{tree_.root()};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      const auto& n = tree_.node(v);
      if (n.children.empty() || node.fix[v] == 1) continue;
      if (node.fix[v] < 0 && is_theta(model_.theta_dates, n.date)) {
        const auto [now, later] = split(node.mu, v);
        const double mix = std::min(now, later);
        if (mix > best_mix) {
          best_mix = mix;
          best = v;
        }
      }
      for (int c : n.children) stack.push_back(c);
    }
    return best;
  }

  StoppingRule rule_from(const BranchNode& node) const {
    StoppingRule rule = stop_at_last(tree_);
    for (int v = 0; v < tree_.num_nodes(); ++v) {
      const auto& n = tree_.node(v);
      if (n.children.empty()) continue;
      if (node.fix[v] >= 0) {
        rule.stop[v] = node.fix[v];
      } else if (is_theta(model_.theta_dates, n.date)) {
        const auto [now, later] = split(node.mu, v);
        rule.stop[v] = now > later ? 1 : 0;
      }
    }
    return rule;
  }

  void consider(const StoppingRule& rule, StaticResult& best) {
    PathMeasure p;
    const double v = solve_rule(base_lp_, tree_, z_, rule, &p, opt_.lp);
    if (v > best.value) {
      best.value = v;
      best.rule = rule;
      best.p = std::move(p);
    }
  }

  // Incumbents from the randomized rule hidden in the relaxation optimum and
  // from optimal stopping under its marginal.
  void seed_incumbent(const EnlargedMeasure& mu, StaticResult& best) {
    consider(snell_rule(tree_, model_.theta_dates, mu.marginal(), z_), best);
    const ExtractedPair pair = extract_pair(tree_, mu);
    std::vector<double> levels = change_points(pair.a);
    if (levels.size() > 64) {
      std::vector<double> thin;
      for (std::size_t i = 0; i < 64; ++i) thin.push_back(levels[i * levels.size() / 64]);
      thin.push_back(1.0);
      levels = thin;
    }
    for (double r : levels) consider(tau_r(tree_, pair.a, r), best);
  }

  const ModelClass& model_;
  const ScenarioTree& tree_;
  EnlargedSpace space_;
  const AmericanPayoff& z_;
  std::size_t cap_;
  const SolverOptions& opt_;
  Vec f_;
  lp::LinearProgram base_lp_;
};

}  // namespace

StaticResult static_info_value(const ModelClass& model, const AmericanPayoff& z, std::size_t rule_cap,
                               const SolverOptions& opt) {
  model.validate();
  const ScenarioTree& tree = *model.tree;
  if (static_cast<int>(z.value.size()) != tree.num_nodes()) throw InvalidArgument("payoff does not match the tree");
  const std::size_t count = count_rules(tree, model.theta_dates);
  if (count > rule_cap) return BranchAndBound(model, z, rule_cap, opt).run();

  const std::vector<StoppingRule> rules = enumerate_rules(tree, model.theta_dates, rule_cap);
  const lp::LinearProgram base = detail::build_base_lp(model, Vec(tree.num_paths(), 0.0));
  Vec values(rules.size());
  parallel_for(static_cast<int>(rules.size()), opt.exec,
               [&](int i) { values[i] = solve_rule(base, tree, z, rules[i], nullptr, opt.lp); });
  const auto it = std::max_element(values.begin(), values.end());
  if (*it == kNegInf) throw InfeasibleClassError("static value: the model class admits no measure");
  StaticResult out;
  out.rule = rules[it - values.begin()];
  out.value = solve_rule(base, tree, z, out.rule, &out.p, opt.lp);
  out.rule_count = count;
  out.nodes_examined = rules.size();
  out.enumerated = true;
  return out;
}

}  // namespace robustam
