#include <algorithm>
#include <cmath>

#include "internal.hpp"
#include "robustam/errors.hpp"
#include "robustam/solvers.hpp"

namespace robustam {

namespace detail {

namespace {

void add_band_rows(lp::LinearProgram& prog, const ScenarioTree& tree, const ModelClass& model, int v,
                   const std::vector<std::pair<int, int>>& members /* (var, path) */) {
  const int t = tree.node(v).date;
  for (int i = 0; i < model.priced_dim; ++i) {
    const double lo = model.band.lo[v][i], hi = model.band.hi[v][i];
    std::vector<double> sq;
    for (const auto& [var, p] : members) {
      const double d = tree.value(p, t + 1)[i] - tree.value(p, t)[i];
      sq.push_back(d * d);
    }
    // A side is skipped when no member can violate it.
    if (finite_upper(hi) && std::any_of(sq.begin(), sq.end(), [hi](double s) { return band_gap(s, hi) > 0.0; })) {
      std::vector<lp::Term> row;
      for (std::size_t j = 0; j < members.size(); ++j)
        if (const double c = band_gap(sq[j], hi); c != 0.0) row.push_back({members[j].first, c});
      prog.add_row(row, lp::RowType::less_equal, 0.0, "band_hi");
    }
    if (lo > 0.0 && std::any_of(sq.begin(), sq.end(), [lo](double s) { return band_gap(s, lo) < 0.0; })) {
      std::vector<lp::Term> row;
      for (std::size_t j = 0; j < members.size(); ++j)
        if (const double c = band_gap(sq[j], lo); c != 0.0) row.push_back({members[j].first, c});
      prog.add_row(row, lp::RowType::greater_equal, 0.0, "band_lo");
    }
  }
}

void add_martingale_rows(lp::LinearProgram& prog, const ScenarioTree& tree, int v,
                         const std::vector<std::pair<int, int>>& members) {
  const int t = tree.node(v).date;
  for (int i = 0; i < tree.dim(); ++i) {
    std::vector<lp::Term> row;
    for (const auto& [var, p] : members) {
      const double d = increment(tree.value(p, t)[i], tree.value(p, t + 1)[i]);
      if (d != 0.0) row.push_back({var, d});
    }
    if (!row.empty()) prog.add_row(row, lp::RowType::equal, 0.0, "martingale");
  }
}

}  // namespace

EnlargedLp build_enlarged_lp(const ModelClass& model, const Vec& f, const std::vector<char>* allowed) {
  model.validate();
  const ScenarioTree& tree = *model.tree;
  const EnlargedSpace space(tree, model.theta_dates);
  if (static_cast<int>(f.size()) != space.size()) throw InvalidArgument("enlarged LP: payoff size mismatch");
  EnlargedLp out;
  std::vector<int> var_of(space.size(), -1);
  for (int e = 0; e < space.size(); ++e) {
    if (allowed && !(*allowed)[e]) continue;
    var_of[e] = out.prog.add_variable(f[e]);
    out.element.push_back(e);
  }
  std::vector<lp::Term> mass;
  for (int j = 0; j < static_cast<int>(out.element.size()); ++j) mass.push_back({j, 1.0});
  out.prog.add_row(mass, lp::RowType::equal, 1.0, "mass");

  const int K = space.num_theta();
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    const auto& n = tree.node(v);
    const int t = n.date;
    std::vector<std::pair<int, int>> all;
    auto collect = [&](int k, std::vector<std::pair<int, int>>& into) {
      for (int p = n.first_path; p < n.last_path; ++p) {
        const int var = var_of[space.element(k, p)];
        if (var >= 0) into.emplace_back(var, p);
      }
    };
    std::vector<std::pair<int, int>> alive;
    for (int k = 0; k < K; ++k)
      if (model.theta_dates[k] > t) collect(k, alive);
    add_martingale_rows(out.prog, tree, v, alive);
    if (model.conditioning == Conditioning::enlarged) add_band_rows(out.prog, tree, model, v, alive);
    all = alive;
    for (int k = 0; k < K && model.theta_dates[k] <= t; ++k) {
      std::vector<std::pair<int, int>> stopped;
      collect(k, stopped);
      if (stopped.empty()) continue;
      add_martingale_rows(out.prog, tree, v, stopped);
      if (model.conditioning == Conditioning::enlarged) add_band_rows(out.prog, tree, model, v, stopped);
      all.insert(all.end(), stopped.begin(), stopped.end());
    }
    if (model.conditioning == Conditioning::base) add_band_rows(out.prog, tree, model, v, all);
  }
  for (int j = 0; j < model.g.count(); ++j) {
    std::vector<lp::Term> row;
    for (int var = 0; var < static_cast<int>(out.element.size()); ++var) {
      const double gv = model.g.payoff[space.path_of(out.element[var])][j];
      if (gv != 0.0) row.push_back({var, gv});
    }
    out.prog.add_row(row, lp::RowType::equal, 0.0, "calibration");
  }
  return out;
}

lp::LinearProgram build_base_lp(const ModelClass& model, const Vec& cost) {
  model.validate();
  const ScenarioTree& tree = *model.tree;
  if (static_cast<int>(cost.size()) != tree.num_paths()) throw InvalidArgument("base LP: cost size mismatch");
  lp::LinearProgram prog(lp::Sense::maximize);
  for (int p = 0; p < tree.num_paths(); ++p) prog.add_variable(cost[p]);
  std::vector<lp::Term> mass;
  for (int p = 0; p < tree.num_paths(); ++p) mass.push_back({p, 1.0});
  prog.add_row(mass, lp::RowType::equal, 1.0, "mass");
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    const auto& n = tree.node(v);
    std::vector<std::pair<int, int>> members;
    for (int p = n.first_path; p < n.last_path; ++p) members.emplace_back(p, p);
    add_martingale_rows(prog, tree, v, members);
    add_band_rows(prog, tree, model, v, members);
  }
  for (int j = 0; j < model.g.count(); ++j) {
    std::vector<lp::Term> row;
    for (int p = 0; p < tree.num_paths(); ++p)
      if (model.g.payoff[p][j] != 0.0) row.push_back({p, model.g.payoff[p][j]});
    prog.add_row(row, lp::RowType::equal, 0.0, "calibration");
  }
  return prog;
}

}  // namespace detail

Vec stopped_payoff(const ModelClass& model, const AmericanPayoff& z) {
  const ScenarioTree& tree = *model.tree;
  if (static_cast<int>(z.value.size()) != tree.num_nodes()) throw InvalidArgument("payoff does not match the tree");
  const EnlargedSpace space(tree, model.theta_dates);
  Vec f(space.size());
  for (int e = 0; e < space.size(); ++e) f[e] = z.value[tree.path_node(space.path_of(e), space.theta_of(e))];
  return f;
}

PrimalResult primal_enlarged(const ModelClass& model, const Vec& f, const SolverOptions& opt) {
  detail::EnlargedLp elp = detail::build_enlarged_lp(model, f);
  PrimalResult out;
  out.lp = lp::solve(elp.prog, opt.lp);
  if (out.lp.status == lp::Status::infeasible)
    throw InfeasibleClassError("enlarged primal: the model class admits no measure");
  if (!out.lp.optimal())
    throw NumericalError(std::string("enlarged primal: solver returned ") + lp::to_string(out.lp.status));
  out.value = out.lp.objective;
  out.measure.theta_dates = model.theta_dates;
  out.measure.num_paths = model.tree->num_paths();
  out.measure.w.assign(f.size(), 0.0);
  // Round-off mass would make conditional checks on its atoms meaningless.
  for (std::size_t j = 0; j < elp.element.size(); ++j)
    if (out.lp.x[j] > opt.support_mass) out.measure.w[elp.element[j]] = out.lp.x[j];
  return out;
}

PrimalResult primal_enlarged(const ModelClass& model, const AmericanPayoff& z, const SolverOptions& opt) {
  return primal_enlarged(model, stopped_payoff(model, z), opt);
}

DppResult robust_dpp(const ModelClass& model, const AmericanPayoff& z, const SolverOptions& opt) {
  model.validate();
  if (!model.g.empty()) throw InvalidArgument("robust_dpp: the recursion is only valid without static options");
  const ScenarioTree& tree = *model.tree;
  if (static_cast<int>(z.value.size()) != tree.num_nodes()) throw InvalidArgument("payoff does not match the tree");
  DppResult out;
  out.node_value.assign(tree.num_nodes(), 0.0);
  out.kernel.assign(tree.num_nodes(), {});
  out.stop.assign(tree.num_nodes(), 0);
  const int T = tree.terminal();
  for (int v = tree.date_begin(T); v < tree.date_end(T); ++v) {
    out.node_value[v] = z.value[v];
    out.stop[v] = 1;
  }
  for (int t = T - 1; t >= 0; --t) {
    const bool exercisable = std::binary_search(model.theta_dates.begin(), model.theta_dates.end(), t);
    const int begin = tree.date_begin(t);
    parallel_for(tree.date_end(t) - begin, opt.exec, [&](int i) {
      const int v = begin + i;
      const auto& n = tree.node(v);
      Vec obj;
      for (int c : n.children) obj.push_back(out.node_value[c]);
      const lp::LinearProgram prog = detail::kernel_program(detail::child_increments(tree, v), model.priced_dim,
                                                            &model.band.lo[v], &model.band.hi[v], obj,
                                                            lp::Sense::maximize);
      const lp::Solution sol = lp::solve(prog, opt.lp);
      if (sol.status == lp::Status::infeasible)
        throw InfeasibleClassError("robust_dpp: no band-feasible martingale kernel at node " + std::to_string(v) +
                                   " (date " + std::to_string(t) + ")");
      if (!sol.optimal()) throw NumericalError("robust_dpp: inner LP failed at node " + std::to_string(v));
      out.kernel[v] = sol.x;
      const double cont = sol.objective;
      if (exercisable && z.value[v] >= cont) {
        out.node_value[v] = z.value[v];
        out.stop[v] = 1;
      } else {
        out.node_value[v] = cont;
      }
    });
  }
  out.value = out.node_value[tree.root()];
  return out;
}

}  // namespace robustam
