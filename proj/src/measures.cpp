#include "robustam/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robustam/errors.hpp"

namespace robustam {

namespace {

// Mass of every node under a path weight vector.
Vec node_mass(const ScenarioTree& tree, const double* w) {
  Vec m(tree.num_nodes(), 0.0);
  for (int v = tree.num_nodes() - 1; v >= 0; --v) {
    const auto& n = tree.node(v);
    if (n.children.empty()) {
      m[v] = w[n.first_path];
    } else {
      for (int c : n.children) m[v] += m[c];
    }
  }
  return m;
}

// Per theta index k, node masses of mu restricted to theta = theta_dates[k].
std::vector<Vec> node_mass_by_theta(const ScenarioTree& tree, const EnlargedMeasure& mu) {
  std::vector<Vec> out;
  for (std::size_t k = 0; k < mu.theta_dates.size(); ++k)
    out.push_back(node_mass(tree, mu.w.data() + k * mu.num_paths));
  return out;
}

// Masses of the enlarged atom (node, status) and of its children, where the
// status is alive at the node's date t (theta > t) or stopped at u <= t.
void status_masses(const ScenarioTree& tree, const EnlargedMeasure& mu, const std::vector<Vec>& by_theta, int v,
                   int stopped_at, double& mass, Vec& child_mass) {
  const int t = tree.node(v).date;
  const auto& ch = tree.node(v).children;
  mass = 0.0;
  child_mass.assign(ch.size(), 0.0);
  for (std::size_t k = 0; k < mu.theta_dates.size(); ++k) {
    const int th = mu.theta_dates[k];
    const bool member = stopped_at < 0 ? th > t : th == stopped_at;
    if (!member) continue;
    mass += by_theta[k][v];
    for (std::size_t i = 0; i < ch.size(); ++i) child_mass[i] += by_theta[k][ch[i]];
  }
}

void check_kernel(const ScenarioTree& tree, int v, int stopped_at, double mass, const Vec& child_mass, double tol,
                  std::vector<MartingaleViolation>& out) {
  if (mass <= 0.0) return;
  const auto& n = tree.node(v);
  for (int k = 0; k < tree.dim(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n.children.size(); ++i)
      s += child_mass[i] * (tree.node(n.children[i]).value[k] - n.value[k]);
    if (std::abs(s) > tol * mass) out.push_back({n.date, v, stopped_at, k, s / mass});
  }
}

Vec second_moment(const ScenarioTree& tree, int v, double mass, const Vec& child_mass) {
  const auto& n = tree.node(v);
  Vec out(tree.dim(), 0.0);
  for (int k = 0; k < tree.dim(); ++k) {
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      const double d = tree.node(n.children[i]).value[k] - n.value[k];
      out[k] += child_mass[i] * d * d;
    }
    out[k] /= mass;
  }
  return out;
}

void band_check(const ModelClass& model, int v, int stopped_at, const Vec& var, double tol, ConstraintReport& rep) {
  for (int k = 0; k < model.priced_dim; ++k) {
    const double lo = model.band.lo[v][k], hi = model.band.hi[v][k];
    if (var[k] < lo - tol || var[k] > hi + tol) {
      rep.variance_ok = false;
      rep.variance.push_back({v, stopped_at, k, var[k], lo, hi});
    }
  }
}

}  // namespace

double PathMeasure::mass() const {
  double s = 0.0, c = 0.0;
  for (double x : w) {  // Neumaier
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

void PathMeasure::validate(int num_paths, double tol) const {
  if (static_cast<int>(w.size()) != num_paths) throw InvalidArgument("path measure: size mismatch");
  for (double x : w)
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("path measure: negative or non-finite weight");
  if (std::abs(mass() - 1.0) > tol) throw InvalidArgument("path measure: weights do not sum to 1");
}

double EnlargedMeasure::mass() const { return PathMeasure{w}.mass(); }

void EnlargedMeasure::validate(const ScenarioTree& tree, double tol) const {
  if (num_paths != tree.num_paths()) throw InvalidArgument("enlarged measure: path count mismatch");
  if (w.size() != theta_dates.size() * static_cast<std::size_t>(num_paths))
    throw InvalidArgument("enlarged measure: size mismatch");
  for (std::size_t k = 0; k < theta_dates.size(); ++k) {
    if (theta_dates[k] < 0 || theta_dates[k] > tree.terminal() || (k && theta_dates[k] <= theta_dates[k - 1]))
      throw InvalidArgument("enlarged measure: bad stop dates");
  }
  PathMeasure{w}.validate(static_cast<int>(w.size()), tol);
}

PathMeasure EnlargedMeasure::marginal() const {
  PathMeasure p{Vec(num_paths, 0.0)};
  for (std::size_t k = 0; k < theta_dates.size(); ++k)
    for (int i = 0; i < num_paths; ++i) p.w[i] += w[k * num_paths + i];
  return p;
}

std::vector<MartingaleViolation> validate_martingale(const ScenarioTree& tree, const PathMeasure& p, double tol) {
  if (static_cast<int>(p.w.size()) != tree.num_paths()) throw InvalidArgument("validate_martingale: size mismatch");
  const Vec m = node_mass(tree, p.w.data());
  std::vector<MartingaleViolation> out;
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    Vec cm;
    for (int c : tree.node(v).children) cm.push_back(m[c]);
    check_kernel(tree, v, -1, m[v], cm, tol, out);
  }
  return out;
}

std::vector<MartingaleViolation> validate_martingale(const ScenarioTree& tree, const EnlargedMeasure& mu, double tol) {
  mu.validate(tree, 1e-9);
  const auto by_theta = node_mass_by_theta(tree, mu);
  std::vector<MartingaleViolation> out;
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    const int t = tree.node(v).date;
    double mass;
    Vec cm;
    status_masses(tree, mu, by_theta, v, -1, mass, cm);
    check_kernel(tree, v, -1, mass, cm, tol, out);
    for (int u : mu.theta_dates) {
      if (u > t) break;
      status_masses(tree, mu, by_theta, v, u, mass, cm);
      check_kernel(tree, v, u, mass, cm, tol, out);
    }
  }
  return out;
}

std::optional<Vec> conditional_variance(const ScenarioTree& tree, const PathMeasure& p, int node) {
  if (node < 0 || node >= tree.num_nodes()) throw InvalidArgument("conditional_variance: bad node");
  if (tree.node(node).children.empty()) return std::nullopt;
  const Vec m = node_mass(tree, p.w.data());
  if (m[node] <= 0.0) return std::nullopt;
  Vec cm;
  for (int c : tree.node(node).children) cm.push_back(m[c]);
  return second_moment(tree, node, m[node], cm);
}

std::optional<Vec> conditional_variance(const ScenarioTree& tree, const EnlargedMeasure& mu, int node,
                                        int stopped_at) {
  if (node < 0 || node >= tree.num_nodes()) throw InvalidArgument("conditional_variance: bad node");
  if (tree.node(node).children.empty()) return std::nullopt;
  const auto by_theta = node_mass_by_theta(tree, mu);
  double mass;
  Vec cm;
  status_masses(tree, mu, by_theta, node, stopped_at, mass, cm);
  if (mass <= 0.0) return std::nullopt;
  return second_moment(tree, node, mass, cm);
}

Vec expect_options(const PathMeasure& p, const StaticOptions& g) {
  Vec e(g.count(), 0.0);
  for (std::size_t i = 0; i < p.w.size(); ++i)
    for (int k = 0; k < g.count(); ++k) e[k] += p.w[i] * g.payoff[i][k];
  return e;
}

ConstraintReport check_constraints(const PathMeasure& p, const ModelClass& model, double tol) {
  const ScenarioTree& tree = *model.tree;
  ConstraintReport rep;
  rep.martingale = validate_martingale(tree, p, tol);
  rep.martingale_ok = rep.martingale.empty();
  const Vec m = node_mass(tree, p.w.data());
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    if (m[v] <= 0.0) continue;
    Vec cm;
    for (int c : tree.node(v).children) cm.push_back(m[c]);
    band_check(model, v, -1, second_moment(tree, v, m[v], cm), tol, rep);
  }
  if (!model.g.empty()) {
    rep.calibration = expect_options(p, model.g);
    for (double e : rep.calibration)
      if (std::abs(e) > tol) rep.calibrated_ok = false;
  }
  return rep;
}

ConstraintReport check_constraints(const EnlargedMeasure& mu, const ModelClass& model, double tol) {
  const ScenarioTree& tree = *model.tree;
  ConstraintReport rep;
  rep.martingale = validate_martingale(tree, mu, tol);
  rep.martingale_ok = rep.martingale.empty();
  if (model.conditioning == Conditioning::base) {
    const PathMeasure p = mu.marginal();
    const Vec m = node_mass(tree, p.w.data());
    for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
      if (m[v] <= 0.0) continue;
      Vec cm;
      for (int c : tree.node(v).children) cm.push_back(m[c]);
      band_check(model, v, -1, second_moment(tree, v, m[v], cm), tol, rep);
    }
  } else {
    const auto by_theta = node_mass_by_theta(tree, mu);
    for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
      const int t = tree.node(v).date;
      std::vector<int> statuses{-1};
      for (int u : mu.theta_dates)
        if (u <= t) statuses.push_back(u);
      for (int s : statuses) {
        double mass;
        Vec cm;
        status_masses(tree, mu, by_theta, v, s, mass, cm);
        if (mass <= 0.0) continue;
        band_check(model, v, s, second_moment(tree, v, mass, cm), tol, rep);
      }
    }
  }
  if (!model.g.empty()) {
    rep.calibration = expect_options(mu.marginal(), model.g);
    for (double e : rep.calibration)
      if (std::abs(e) > tol) rep.calibrated_ok = false;
  }
  return rep;
}

EnlargedMeasure epsilon_modify(const EnlargedMeasure& mu, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("epsilon_modify: eps must lie in (0, 1)");
  if (mu.theta_dates.empty()) throw InvalidArgument("epsilon_modify: empty measure");
  const std::size_t kT = mu.theta_dates.size() - 1;
  const PathMeasure marg = mu.marginal();
  EnlargedMeasure out = mu;
  for (double& x : out.w) x *= (1.0 - eps);
  for (int i = 0; i < mu.num_paths; ++i) out.w[kT * mu.num_paths + i] += eps * marg.w[i];
  return out;
}

double epsilon_level(const EnlargedMeasure& mu, const ScenarioTree& tree) {
  if (mu.theta_dates.back() != tree.terminal()) return 0.0;
  const std::size_t kT = mu.theta_dates.size() - 1;
  const PathMeasure marg = mu.marginal();
  double eps = 1.0;
  for (int i = 0; i < mu.num_paths; ++i)
    if (marg.w[i] > 0.0) eps = std::min(eps, mu.w[kT * mu.num_paths + i] / marg.w[i]);
  return eps;
}

std::vector<std::optional<Vec>> conditional_option_prices(const ScenarioTree& tree, const PathMeasure& p,
                                                          const StaticOptions& g) {
  const int m = g.count();
  std::vector<Vec> num(tree.num_nodes(), Vec(m, 0.0));
  const Vec mass = node_mass(tree, p.w.data());
  for (int v = tree.num_nodes() - 1; v >= 0; --v) {
    const auto& n = tree.node(v);
    if (n.children.empty()) {
      for (int k = 0; k < m; ++k) num[v][k] = p.w[n.first_path] * g.payoff[n.first_path][k];
    } else {
      for (int c : n.children)
        for (int k = 0; k < m; ++k) num[v][k] += num[c][k];
    }
  }
  std::vector<std::optional<Vec>> out(tree.num_nodes());
  for (int v = 0; v < tree.num_nodes(); ++v) {
    if (mass[v] <= 0.0) continue;
    Vec y(m);
    for (int k = 0; k < m; ++k) y[k] = num[v][k] / mass[v];
    out[v] = y;
  }
  return out;
}

LiftedMeasure lift_mixture(const ScenarioTree& tree, const std::vector<std::pair<double, PathMeasure>>& components,
                           const StaticOptions& g, double pre_date, double tol) {
  const int m = g.count();
  if (!g.empty() && static_cast<int>(g.payoff.size()) != tree.num_paths())
    throw InvalidArgument("lift: option table does not match the paths");
  double total = 0.0;
  Vec mean(m, 0.0);
  for (const auto& [lambda, p] : components) {
    if (lambda < 0.0) throw InvalidArgument("lift: negative mixture weight");
    p.validate(tree.num_paths(), 1e-9);
    total += lambda;
    const Vec e = expect_options(p, g);
    for (int k = 0; k < m; ++k) mean[k] += lambda * e[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("lift: mixture weights must sum to 1");
  for (int k = 0; k < m; ++k)
    if (std::abs(mean[k]) > tol)
      throw InvalidArgument("lift: measure is not calibrated (E[g_" + std::to_string(k) +
                            "] = " + std::to_string(mean[k]) + ")");
  if (!(pre_date < tree.dates()[0])) throw InvalidArgument("lift: pre-date must precede the first date");

  std::vector<double> dates{pre_date};
  dates.insert(dates.end(), tree.dates().begin(), tree.dates().end());
  const int d = tree.dim();
  ScenarioTree::Builder builder(dates, d + m);
  struct Info {
    int base_node;
    std::vector<int> kids;
    Vec value;
  };
  std::vector<Info> info;
  std::vector<double> leaf_weight;
  Vec root_value = tree.node(tree.root()).value;
  root_value.resize(d + m, 0.0);
  builder.add_root(root_value);
  info.push_back({tree.root(), {}, root_value});
  leaf_weight.push_back(0.0);

  for (const auto& [lambda, p] : components) {
    if (lambda == 0.0) continue;
    const auto prices = conditional_option_prices(tree, p, g);
    for (int path = 0; path < tree.num_paths(); ++path) {
      if (p.w[path] <= 0.0) continue;
      int cur = 0;
      for (int t = 0; t <= tree.terminal(); ++t) {
        const int bn = tree.path_node(path, t);
        Vec v = tree.node(bn).value;
        const Vec& y = *prices[bn];
        v.insert(v.end(), y.begin(), y.end());
        int next = -1;
        for (int c : info[cur].kids) {
          bool same = info[c].base_node == bn;
          for (int k = 0; same && k < d + m; ++k) same = std::abs(info[c].value[k] - v[k]) <= 1e-12;
          if (same) next = c;
        }
        if (next < 0) {
          next = builder.add_child(cur, v);
          info[cur].kids.push_back(next);
          info.push_back({bn, {}, v});
          leaf_weight.push_back(0.0);
        }
        cur = next;
      }
      leaf_weight[cur] += lambda * p.w[path];
    }
  }
  LiftedMeasure out;
  std::vector<int> new_ids;
  out.joint.tree = std::move(builder).build(&new_ids);
  out.joint.x_dim = d;
  out.joint.y_dim = m;
  out.joint.base_node.assign(out.joint.tree.num_nodes(), -1);
  out.p.w.assign(out.joint.tree.num_paths(), 0.0);
  for (std::size_t i = 0; i < info.size(); ++i) {
    const int v = new_ids[i];
    out.joint.base_node[v] = info[i].base_node;
    if (info[i].kids.empty() && i > 0) out.p.w[out.joint.tree.node(v).first_path] = leaf_weight[i];
  }
  out.joint.base_path.resize(out.joint.tree.num_paths());
  std::vector<char> covered(tree.num_paths(), 0);
  for (int p = 0; p < out.joint.tree.num_paths(); ++p) {
    out.joint.base_path[p] = tree.node(out.joint.base_node[out.joint.tree.leaf(p)]).first_path;
    covered[out.joint.base_path[p]] = 1;
  }
  out.joint.base_paths_covered = static_cast<int>(std::count(covered.begin(), covered.end(), 1));
  return out;
}

LiftedMeasure lift_measure(const ScenarioTree& tree, const PathMeasure& p, const StaticOptions& g, double pre_date,
                           double tol) {
  return lift_mixture(tree, {{1.0, p}}, g, pre_date, tol);
}

PathMeasure restrict(const JointLattice& joint, const PathMeasure& joint_p, int base_paths) {
  PathMeasure out{Vec(base_paths, 0.0)};
  for (std::size_t i = 0; i < joint_p.w.size(); ++i) out.w[joint.base_path[i]] += joint_p.w[i];
  return out;
}

PathMeasure restrict(const LiftedMeasure& lifted, int base_paths) { return restrict(lifted.joint, lifted.p, base_paths); }

double expect_terminal(const ScenarioTree& tree, const PathMeasure& p, const AmericanPayoff& z) {
  double s = 0.0;
  for (int i = 0; i < tree.num_paths(); ++i) s += p.w[i] * z.value[tree.leaf(i)];
  return s;
}

double expect_stopped(const ScenarioTree& tree, const EnlargedMeasure& mu, const AmericanPayoff& z) {
  double s = 0.0;
  for (std::size_t k = 0; k < mu.theta_dates.size(); ++k)
    for (int i = 0; i < mu.num_paths; ++i) s += mu.w[k * mu.num_paths + i] * z.value[tree.path_node(i, mu.theta_dates[k])];
  return s;
}

}  // namespace robustam
