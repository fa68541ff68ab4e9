#include <algorithm>
#include <cmath>

#include "robustam/errors.hpp"
#include "robustam/solvers.hpp"

namespace robustam {

void add_lift_levels(const ScenarioTree& tree, const PathMeasure& p, const StaticOptions& g, YSpec& y) {
  if (g.empty()) return;
  const auto prices = conditional_option_prices(tree, p, g);
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v)
    if (prices[v]) y.add_atom_level(v, *prices[v]);
}

void add_lift_levels(const ScenarioTree& tree, const EnlargedMeasure& mu, const StaticOptions& g, YSpec& y) {
  if (g.empty()) return;
  const int m = g.count();
  const int K = static_cast<int>(mu.theta_dates.size());
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    const auto& n = tree.node(v);
    // Status -1 collects every theta after the node's date.
    auto level = [&](auto in_status) {
      double mass = 0.0;
      Vec num(m, 0.0);
      for (int k = 0; k < K; ++k) {
        if (!in_status(mu.theta_dates[k])) continue;
        for (int p = n.first_path; p < n.last_path; ++p) {
          const double w = mu.at(k, p);
          mass += w;
          for (int i = 0; i < m; ++i) num[i] += w * g.payoff[p][i];
        }
      }
      if (mass <= 0.0) return;
      for (double& x : num) x /= mass;
      y.add_atom_level(v, num);
    };
    level([&](int th) { return th > n.date; });
    for (int th0 : mu.theta_dates)
      if (th0 <= n.date) level([&](int th) { return th == th0; });
  }
}

LiftedValue lifted_american_value(const ModelClass& base, const AmericanPayoff& z, const YSpec& y_spec,
                                  const SolverOptions& opt) {
  LiftedValue out;
  out.joint = build_joint_lattice(base, y_spec);
  const ModelClass jm = joint_model(out.joint, base);
  const AmericanPayoff jz = joint_payoff(out.joint, z);
  out.lifted_primal = robust_dpp(jm, jz, opt).value;
  out.primal = primal_enlarged(jm, jz, opt);
  out.enlarged_primal = out.primal.value;
  return out;
}

void inequality_chain(const ChainInstance& inst, ValueReport& out) {
  if (!inst.model) throw InvalidArgument("inequality chain: no model");
  const ModelClass& model = *inst.model;
  model.validate();
  const ScenarioTree& tree = *model.tree;
  out.eps = inst.eps;
  out.slack = inst.slack;

  const PrimalResult enlarged = primal_enlarged(model, inst.z, inst.solver);
  out.enlarged_calibrated = enlarged.value;
  out.completed.push_back("enlarged_calibrated");

  const StaticResult st = static_info_value(model, inst.z, inst.rule_cap, inst.solver);
  out.static_primal = st.value;
  out.static_enumerated = st.enumerated;
  out.rule_count = st.rule_count;
  out.completed.push_back("static_primal");

  out.pi_A = dual_superhedge_american(model, inst.z, {}, inst.solver).value;
  out.completed.push_back("pi_A");

  YSpec y = inst.y_spec;
  if (y.date_levels.empty() && y.atom_levels.empty()) y = empty_y_spec(tree);
  if (inst.auto_levels) {
    add_lift_levels(tree, st.p, model.g, y);
    add_lift_levels(tree, enlarged.measure, model.g, y);
  }
  const LiftedValue lv = lifted_american_value(model, inst.z, y, inst.solver);
  out.lifted_primal = lv.lifted_primal;
  out.enlarged_primal = lv.enlarged_primal;
  out.joint_paths = lv.joint.tree.num_paths();
  out.gap = out.lifted_primal - out.static_primal;
  out.completed.push_back("lifted_primal");

  const ModelClass jm = joint_model(lv.joint, model);
  out.pi_hat = dual_superhedge_american(jm, joint_payoff(lv.joint, inst.z), {}, inst.solver).value;
  out.completed.push_back("pi_hat");

  const PathMeasure restricted = restrict(lv.joint, lv.primal.measure.marginal(), tree.num_paths());
  out.expected_terminal = expect_terminal(tree, restricted, inst.z);
  out.eps_corrected = (1.0 - inst.eps) * out.lifted_primal + inst.eps * out.expected_terminal;
  out.completed.push_back("eps_corrected");

  const double s = inst.slack;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) out.breaches.push_back(what);
  };
  check(out.static_primal <= out.lifted_primal + s, "static value exceeds the lifted value");
  check(std::abs(out.lifted_primal - out.enlarged_primal) <= s, "lifted recursion and enlarged LP disagree");
  check(out.lifted_primal <= out.pi_hat + s, "lifted value exceeds the lifted superhedging price");
  check(out.pi_hat <= out.pi_A + s, "lifted superhedging price exceeds the American superhedging price");
  check(std::abs(out.pi_A - out.enlarged_calibrated) <= s, "American duality gap");
  out.ordering_ok = out.breaches.empty();
  out.ends_coincide = std::abs(out.pi_A - out.lifted_primal) <= s;
}

ValueReport inequality_chain(const ChainInstance& inst) {
  ValueReport out;
  inequality_chain(inst, out);
  return out;
}

}  // namespace robustam
