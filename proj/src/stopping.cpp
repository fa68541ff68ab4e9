#include "robustam/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robustam/errors.hpp"

namespace robustam {

namespace {

constexpr double kAbsorbed = 1e-14;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t sat_mul(std::size_t a, std::size_t b) {
  if (a == 0 || b == 0) return 0;
  return a > std::numeric_limits<std::size_t>::max() / b ? std::numeric_limits<std::size_t>::max() : a * b;
}

bool is_theta(const std::vector<int>& theta, int t) { return std::binary_search(theta.begin(), theta.end(), t); }

Vec node_mass(const ScenarioTree& tree, const Vec& w) {
  Vec m(tree.num_nodes(), 0.0);
  for (int v = tree.num_nodes() - 1; v >= 0; --v) {
    const auto& n = tree.node(v);
    if (n.children.empty()) m[v] = w[n.first_path];
    for (int c : n.children) m[v] += m[c];
  }
  return m;
}

}  // namespace

int StoppingRule::stop_date(const ScenarioTree& tree, int path) const {
  for (int t = 0; t < tree.terminal(); ++t)
    if (stop[tree.path_node(path, t)]) return t;
  return tree.terminal();
}

StoppingRule stop_at_last(const ScenarioTree& tree) {
  StoppingRule r;
  r.stop.assign(tree.num_nodes(), 0);
  for (int v = tree.date_begin(tree.terminal()); v < tree.num_nodes(); ++v) r.stop[v] = 1;
  return r;
}

std::size_t count_rules(const ScenarioTree& tree, const std::vector<int>& theta_dates) {
  std::vector<std::size_t> f(tree.num_nodes(), 1);
  for (int v = tree.num_nodes() - 1; v >= 0; --v) {
    const auto& n = tree.node(v);
    if (n.children.empty()) continue;
    std::size_t prod = 1;
    for (int c : n.children) prod = sat_mul(prod, f[c]);
    if (is_theta(theta_dates, n.date))
      prod = prod == std::numeric_limits<std::size_t>::max() ? prod : prod + 1;
    f[v] = prod;
  }
  return f[tree.root()];
}

std::vector<StoppingRule> enumerate_rules(const ScenarioTree& tree, const std::vector<int>& theta_dates,
                                          std::size_t cap) {
  const std::size_t n = count_rules(tree, theta_dates);
  if (n > cap)
    throw CapExceededError("rule enumeration: " + std::to_string(n) + " rules exceed the cap of " + std::to_string(cap),
                           n);
  std::vector<StoppingRule> out;
  out.reserve(n);
  StoppingRule cur = stop_at_last(tree);
  // Depth-first over a frontier of undecided nodes.
  std::vector<int> frontier{tree.root()};
  auto rec = [&](auto&& self, std::size_t pos) -> void {
    if (pos == frontier.size()) {
      out.push_back(cur);
      return;
    }
    const int v = frontier[pos];
    const auto& node = tree.node(v);
    if (node.children.empty()) {
      self(self, pos + 1);
      return;
    }
    if (is_theta(theta_dates, node.date)) {
      cur.stop[v] = 1;
      self(self, pos + 1);
      cur.stop[v] = 0;
    }
    const std::size_t before = frontier.size();
    frontier.insert(frontier.end(), node.children.begin(), node.children.end());
    self(self, pos + 1);
    frontier.resize(before);
  };
  rec(rec, 0);
  return out;
}

EnlargedMeasure rule_to_enlarged(const ScenarioTree& tree, const std::vector<int>& theta_dates, const PathMeasure& p,
                                 const StoppingRule& rule) {
  if (!rule.adapted_to(tree)) throw InvalidArgument("rule_to_enlarged: rule does not match the tree");
  EnlargedMeasure mu{theta_dates, tree.num_paths(), Vec(theta_dates.size() * tree.num_paths(), 0.0)};
  for (int i = 0; i < tree.num_paths(); ++i) {
    const int t = rule.stop_date(tree, i);
    const auto it = std::lower_bound(theta_dates.begin(), theta_dates.end(), t);
    if (it == theta_dates.end() || *it != t) throw InvalidArgument("rule_to_enlarged: rule stops outside the exercise dates");
    mu.w[(it - theta_dates.begin()) * tree.num_paths() + i] = p.w[i];
  }
  return mu;
}

PathTable disintegrate(const ScenarioTree& tree, const EnlargedMeasure& mu) {
  const PathMeasure marg = mu.marginal();
  PathTable r(tree.num_paths(), Vec(tree.num_dates(), kNaN));
  for (int i = 0; i < tree.num_paths(); ++i) {
    if (marg.w[i] <= 0.0) continue;
    double cum = 0.0;
    std::size_t k = 0;
    for (int s = 0; s <= tree.terminal(); ++s) {
      while (k < mu.theta_dates.size() && mu.theta_dates[k] <= s) cum += mu.at(static_cast<int>(k++), i);
      r[i][s] = std::min(1.0, cum / marg.w[i]);
    }
    r[i][tree.terminal()] = 1.0;
  }
  return r;
}

Vec optional_projection(const ScenarioTree& tree, const PathTable& r, const PathMeasure& mu_omega) {
  Vec out(tree.num_nodes(), kNaN);
  for (int v = 0; v < tree.num_nodes(); ++v) {
    const auto& n = tree.node(v);
    double mass = 0.0, acc = 0.0;
    for (int p = n.first_path; p < n.last_path; ++p) {
      if (mu_omega.w[p] <= 0.0) continue;
      mass += mu_omega.w[p];
      acc += mu_omega.w[p] * r[p][n.date];
    }
    if (mass > 0.0) out[v] = acc / mass;
  }
  return out;
}

double RandomizedStoppingTime::increment(const ScenarioTree& tree, int path, int t) const {
  return t == 0 ? at(tree, path, 0) : at(tree, path, t) - at(tree, path, t - 1);
}

RandomizedStoppingTime indicator(const ScenarioTree& tree, const StoppingRule& rule) {
  RandomizedStoppingTime a{Vec(tree.num_nodes(), 0.0)};
  for (int v = 0; v < tree.num_nodes(); ++v) {
    const auto& n = tree.node(v);
    const double parent = n.parent >= 0 ? a.a[n.parent] : 0.0;
    a.a[v] = (parent == 1.0 || rule.stop[v] || n.children.empty()) ? 1.0 : 0.0;
  }
  return a;
}

void azema_survival(const ScenarioTree& tree, const EnlargedMeasure& mu, AzemaData& out) {
  const int n = tree.num_nodes();
  std::vector<Vec> by_theta;
  for (std::size_t k = 0; k < mu.theta_dates.size(); ++k)
    by_theta.push_back(node_mass(tree, Vec(mu.w.begin() + k * mu.num_paths, mu.w.begin() + (k + 1) * mu.num_paths)));
  out.survival.assign(n, kNaN);
  out.pre_stop.assign(n, kNaN);
  for (int v = 0; v < n; ++v) {
    const int t = tree.node(v).date;
    double total = 0.0, after = 0.0, from = 0.0;
    for (std::size_t k = 0; k < mu.theta_dates.size(); ++k) {
      total += by_theta[k][v];
      if (mu.theta_dates[k] > t) after += by_theta[k][v];
      if (mu.theta_dates[k] >= t) from += by_theta[k][v];
    }
    if (total <= 0.0) continue;
    out.survival[v] = after / total;
    out.pre_stop[v] = from / total;
  }
}

void multiplicative_decompose(const ScenarioTree& tree, const PathMeasure& mu_omega, AzemaData& data,
                              bool allow_absorption) {
  const int n = tree.num_nodes();
  const int T = tree.terminal();
  const Vec mass = node_mass(tree, mu_omega.w);
  data.m.assign(n, 1.0);
  data.a.assign(n, 0.0);
  data.absorbed = false;
  for (int v = 0; v < n; ++v) {
    const auto& node = tree.node(v);
    const int par = node.parent;
    if (par < 0) {
      data.m[v] = 1.0;
    } else if (mass[v] <= 0.0) {
      data.m[v] = data.m[par];
    } else if (data.survival[par] <= kAbsorbed) {
      if (!allow_absorption)
        throw EpsilonModificationRequired("Azema supermartingale vanishes before the last date at node " +
                                          std::to_string(par) + "; epsilon-modify the measure first");
      data.absorbed = true;
      data.m[v] = data.m[par];
      data.a[v] = 1.0;
      continue;
    } else {
      data.m[v] = data.m[par] * data.pre_stop[v] / data.survival[par];
    }
    const double prev = par >= 0 ? data.a[par] : 0.0;
    if (node.date == T || (par >= 0 && data.a[par] >= 1.0)) {
      data.a[v] = 1.0;
    } else if (mass[v] <= 0.0) {
      data.a[v] = prev;
    } else if (data.m[v] <= 0.0) {
      data.a[v] = 1.0;
    } else {
      data.a[v] = std::clamp(1.0 - data.survival[v] / data.m[v], prev, 1.0);
    }
  }
  data.density.assign(tree.num_paths(), 0.0);
  for (int i = 0; i < tree.num_paths(); ++i) data.density[i] = data.m[tree.leaf(i)];
}

AzemaData azema(const ScenarioTree& tree, const EnlargedMeasure& mu, bool allow_absorption) {
  AzemaData d;
  const PathMeasure marg = mu.marginal();
  d.r = disintegrate(tree, mu);
  d.projected = optional_projection(tree, d.r, marg);
  azema_survival(tree, mu, d);
  multiplicative_decompose(tree, marg, d, allow_absorption);
  return d;
}

namespace {

ExtractedPair finish(const ScenarioTree& tree, const EnlargedMeasure& source, AzemaData data) {
  ExtractedPair out;
  const PathMeasure marg = source.marginal();
  out.p.w.assign(tree.num_paths(), 0.0);
  for (int i = 0; i < tree.num_paths(); ++i) out.p.w[i] = data.density[i] * marg.w[i];
  out.a.a = data.a;
  out.azema = std::move(data);
  out.source = source;
  return out;
}

}  // namespace

ExtractedPair extract_pair(const ScenarioTree& tree, const EnlargedMeasure& mu, double eps_floor) {
  mu.validate(tree, 1e-9);
  if (!(eps_floor >= 0.0 && eps_floor < 1.0)) throw InvalidArgument("extract_pair: eps_floor must lie in [0, 1)");
  if (mu.theta_dates.back() != tree.terminal()) throw InvalidArgument("extract_pair: stop dates must include the last date");
  const double level = epsilon_level(mu, tree);
  if (level > 0.0 && level >= eps_floor) return finish(tree, mu, azema(tree, mu, false));

  // Exact route: accept the absorbed decomposition when it keeps P equivalent.
  AzemaData exact = azema(tree, mu, true);
  const PathMeasure marg = mu.marginal();
  bool equivalent = true;
  for (int i = 0; i < tree.num_paths(); ++i)
    if ((marg.w[i] > 0.0) != (exact.density[i] * marg.w[i] > 0.0)) equivalent = false;
  if (equivalent) return finish(tree, mu, std::move(exact));
  if (eps_floor == 0.0)
    throw EpsilonModificationRequired("extract_pair: survival hits zero before the last date and no modification is allowed");

  const EnlargedMeasure modified = epsilon_modify(mu, eps_floor);
  ExtractedPair out = finish(tree, modified, azema(tree, modified, false));
  out.eps_applied = true;
  out.eps = eps_floor;
  return out;
}

StoppingRule tau_r(const ScenarioTree& tree, const RandomizedStoppingTime& a, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("tau_r: r must lie in (0, 1]");
  StoppingRule rule = stop_at_last(tree);
  for (int v = 0; v < tree.num_nodes(); ++v)
    if (a.a[v] >= r - 1e-13) rule.stop[v] = 1;
  return rule;
}

std::vector<double> change_points(const RandomizedStoppingTime& a) {
  std::vector<double> levels;
  for (double x : a.a)
    if (x > 1e-13 && std::isfinite(x)) levels.push_back(std::min(x, 1.0));
  levels.push_back(1.0);
  std::sort(levels.begin(), levels.end());
  std::vector<double> out;
  for (double x : levels)
    if (out.empty() || x - out.back() > 1e-13) out.push_back(x);
  return out;
}

double layer_cake_value(const ScenarioTree& tree, const PathMeasure& p, const RandomizedStoppingTime& a,
                        const AmericanPayoff& z) {
  double prev = 0.0, total = 0.0;
  for (double r : change_points(a)) {
    const StoppingRule rule = tau_r(tree, a, r);
    double e = 0.0;
    for (int i = 0; i < tree.num_paths(); ++i) e += p.w[i] * z.at(tree, i, rule.stop_date(tree, i));
    total += (r - prev) * e;
    prev = r;
  }
  return total;
}

double integrated_value(const ScenarioTree& tree, const PathMeasure& p, const RandomizedStoppingTime& a,
                        const AmericanPayoff& z) {
  double total = 0.0;
  for (int i = 0; i < tree.num_paths(); ++i) {
    double s = 0.0;
    for (int t = 0; t <= tree.terminal(); ++t) s += z.at(tree, i, t) * a.increment(tree, i, t);
    total += p.w[i] * s;
  }
  return total;
}

bool is_adapted(const ScenarioTree& tree, const PathTable& psi) {
  if (static_cast<int>(psi.size()) != tree.num_paths()) return false;
  for (int v = 0; v < tree.num_nodes(); ++v) {
    const auto& n = tree.node(v);
    for (int p = n.first_path + 1; p < n.last_path; ++p)
      if (psi[p][n.date] != psi[n.first_path][n.date]) return false;
  }
  return true;
}

double reconstruction_gap(const ScenarioTree& tree, const EnlargedMeasure& mu, const PathMeasure& p,
                          const RandomizedStoppingTime& a, const PathTable& psi) {
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t k = 0; k < mu.theta_dates.size(); ++k)
    for (int i = 0; i < mu.num_paths; ++i) lhs += mu.at(static_cast<int>(k), i) * psi[i][mu.theta_dates[k]];
  for (int i = 0; i < tree.num_paths(); ++i) {
    double s = 0.0;
    for (int t = 0; t <= tree.terminal(); ++t) s += psi[i][t] * a.increment(tree, i, t);
    rhs += p.w[i] * s;
  }
  return std::abs(lhs - rhs);
}

double verify_reconstruction(const ScenarioTree& tree, const EnlargedMeasure& mu, const PathMeasure& p,
                             const RandomizedStoppingTime& a, const std::vector<PathTable>& psi_samples) {
  double worst = 0.0;
  for (const PathTable& psi : psi_samples) {
    if (!is_adapted(tree, psi))
      throw NonAdaptedError("verify_reconstruction: test process is not adapted (it looks into the future)");
    worst = std::max(worst, reconstruction_gap(tree, mu, p, a, psi));
  }
  return worst;
}

PreservationReport verify_martingale_preservation(const EnlargedMeasure& mu, const ModelClass& model,
                                                  const ExtractedPair& pair, double tol) {
  const ScenarioTree& tree = *model.tree;
  PreservationReport rep;
  rep.martingale = validate_martingale(tree, pair.p, tol);
  rep.constraints = check_constraints(pair.p, model.without_options(), tol);
  const PathMeasure marg = mu.marginal();
  for (int i = 0; i < tree.num_paths(); ++i)
    if ((marg.w[i] > 0.0) != (pair.p.w[i] > 0.0)) rep.equivalent = false;

  for (double r : change_points(pair.a)) {
    if (r >= 1.0) continue;
    const StoppingRule rule = tau_r(tree, pair.a, r);
    std::vector<int> stop(tree.num_paths());
    for (int i = 0; i < tree.num_paths(); ++i) stop[i] = rule.stop_date(tree, i);
    for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
      const auto& n = tree.node(v);
      for (int k = 0; k < tree.dim(); ++k) {
        double c = 0.0;
        for (int i = n.first_path; i < n.last_path; ++i)
          if (stop[i] > n.date) c += pair.p.w[i] * (tree.value(i, stop[i])[k] - n.value[k]);
        rep.max_stopped_increment = std::max(rep.max_stopped_increment, std::abs(c));
      }
    }
  }
  return rep;
}

}  // namespace robustam
