#include "robustam/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "internal.hpp"
#include "robustam/errors.hpp"

namespace robustam {

namespace detail {

lp::LinearProgram kernel_program(const std::vector<Vec>& increments, int priced_dim, const Vec* lo, const Vec* hi,
                                 const Vec& objective, lp::Sense sense) {
  lp::LinearProgram prog(sense);
  const int n = static_cast<int>(increments.size());
  for (int c = 0; c < n; ++c) prog.add_variable(objective.empty() ? 0.0 : objective[c]);
  std::vector<lp::Term> sum;
  for (int c = 0; c < n; ++c) sum.push_back({c, 1.0});
  prog.add_row(sum, lp::RowType::equal, 1.0, "mass");
  const int D = n ? static_cast<int>(increments[0].size()) : 0;
  for (int k = 0; k < D; ++k) {
    std::vector<lp::Term> row;
    for (int c = 0; c < n; ++c)
      if (increments[c][k] != 0.0) row.push_back({c, increments[c][k]});
    prog.add_row(row, lp::RowType::equal, 0.0, "mean");
  }
  if (lo && hi) {
    for (int k = 0; k < priced_dim; ++k) {
      std::vector<lp::Term> row;
      for (int c = 0; c < n; ++c) {
        const double sq = increments[c][k] * increments[c][k];
        if (sq != 0.0) row.push_back({c, sq});
      }
      if (finite_upper((*hi)[k])) prog.add_row(row, lp::RowType::less_equal, (*hi)[k], "band_hi");
      if ((*lo)[k] > 0.0) prog.add_row(row, lp::RowType::greater_equal, (*lo)[k], "band_lo");
    }
  }
  return prog;
}

std::vector<Vec> child_increments(const ScenarioTree& tree, int node) {
  const auto& n = tree.node(node);
  std::vector<Vec> out;
  for (int c : n.children) {
    Vec d(tree.dim());
    for (int k = 0; k < tree.dim(); ++k) d[k] = increment(n.value[k], tree.node(c).value[k]);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace detail

VolatilityBand VolatilityBand::uniform(const ScenarioTree& tree, int priced_dim, double lo, double hi) {
  return from_function(tree, priced_dim, [&](int, int) { return std::make_pair(lo, hi); });
}

VolatilityBand VolatilityBand::from_function(const ScenarioTree& tree, int priced_dim,
                                             const std::function<std::pair<double, double>(int, int)>& f) {
  VolatilityBand b;
  b.lo.assign(tree.num_nodes(), Vec(priced_dim, 0.0));
  b.hi.assign(tree.num_nodes(), Vec(priced_dim, lp::kInf));
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    for (int k = 0; k < priced_dim; ++k) {
      const auto [lo, hi] = f(v, k);
      if (!(lo >= 0.0) || !(hi >= lo)) throw InvalidArgument("volatility band: need 0 <= lo <= hi");
      b.lo[v][k] = lo;
      b.hi[v][k] = hi;
    }
  }
  return b;
}

VolatilityBand VolatilityBand::widened(double dlo, double dhi) const {
  VolatilityBand b = *this;
  for (auto& v : b.lo)
    for (double& x : v) x = std::max(0.0, x - dlo);
  for (auto& v : b.hi)
    for (double& x : v) x += dhi;
  return b;
}

bool VolatilityBand::vacuous(int node, int coord) const {
  return lo[node][coord] <= 0.0 && !detail::finite_upper(hi[node][coord]);
}

AmericanPayoff AmericanPayoff::from_function(const ScenarioTree& tree, const std::function<double(int)>& f) {
  AmericanPayoff z;
  z.value.resize(tree.num_nodes());
  for (int v = 0; v < tree.num_nodes(); ++v) {
    z.value[v] = f(v);
    if (!std::isfinite(z.value[v])) throw InvalidArgument("payoff: non-finite value");
  }
  z.lower_bound = *std::min_element(z.value.begin(), z.value.end());
  return z;
}

AmericanPayoff AmericanPayoff::european(const ScenarioTree& tree) const {
  AmericanPayoff z = *this;
  const double sentinel = lower_bound - 1.0;
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) z.value[v] = sentinel;
  z.lower_bound = sentinel;
  return z;
}

void ModelClass::validate() const {
  if (!tree) throw InvalidArgument("model class: no tree");
  if (priced_dim < 0 || priced_dim > tree->dim()) throw InvalidArgument("model class: bad priced dimension");
  if (static_cast<int>(band.lo.size()) != tree->num_nodes() || static_cast<int>(band.hi.size()) != tree->num_nodes())
    throw InvalidArgument("model class: band size does not match the tree");
  if (!g.empty() && static_cast<int>(g.payoff.size()) != tree->num_paths())
    throw InvalidArgument("model class: static option table does not match the paths");
  for (const Vec& row : g.payoff)
    if (static_cast<int>(row.size()) != g.count()) throw InvalidArgument("model class: ragged option table");
  if (theta_dates.empty() || theta_dates.back() != tree->terminal())
    throw InvalidArgument("model class: exercise dates must end at the last date");
  for (std::size_t i = 1; i < theta_dates.size(); ++i)
    if (theta_dates[i] <= theta_dates[i - 1]) throw InvalidArgument("model class: exercise dates must increase");
}

ModelClass ModelClass::without_options() const {
  ModelClass m = *this;
  m.g = {};
  return m;
}

ModelClass make_model(const ScenarioTree& tree, VolatilityBand band, StaticOptions g) {
  ModelClass m;
  m.tree = &tree;
  m.priced_dim = tree.dim();
  m.band = std::move(band);
  if (!m.band.lo.empty()) m.priced_dim = static_cast<int>(m.band.lo[0].size());
  m.g = std::move(g);
  m.theta_dates = all_dates(tree);
  m.validate();
  return m;
}

void YSpec::add_date_level(int t, const Vec& y) {
  if (t < 0 || t >= static_cast<int>(date_levels.size())) throw InvalidArgument("y spec: date out of range");
  date_levels[t].push_back(y);
}

void YSpec::add_atom_level(int node, const Vec& y) {
  if (node < 0 || node >= static_cast<int>(atom_levels.size())) throw InvalidArgument("y spec: node out of range");
  atom_levels[node].push_back(y);
}

YSpec empty_y_spec(const ScenarioTree& base) {
  YSpec y;
  y.date_levels.resize(base.num_dates());
  y.atom_levels.resize(base.num_nodes());
  return y;
}

namespace {

bool close(const Vec& a, const Vec& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

void add_unique(std::vector<Vec>& levels, const Vec& y, double tol) {
  for (const Vec& l : levels)
    if (close(l, y, tol)) return;
  levels.push_back(y);
}

class JointBuilder {
 public:
  JointBuilder(const ModelClass& base, const YSpec& spec, double tol)
      : base_(base), tree_(*base.tree), spec_(spec), tol_(tol), m_(base.g.count()) {
    reach_.assign(tree_.num_paths(), -1);
  }

  struct Cand {
    int base_node;
    Vec y;
    std::vector<int> kids;
  };

  // Returns the candidate index, or -1 when the node is not viable. j is
  // the joint date (0 = pre-date).
  int explore(int j, int b, const Vec& y) {
    const int T = tree_.terminal();
    if (j == T + 1) return push(j, b, y, {});
    std::vector<std::pair<int, Vec>> options;  // (base child, y level)
    if (j == 0) {
      std::vector<Vec> levels{y};
      for (const Vec& l : spec_.date_levels[0]) add_unique(levels, l, tol_);
      for (const Vec& l : spec_.atom_levels[b]) add_unique(levels, l, tol_);
      for (const Vec& l : levels) options.emplace_back(b, l);
    } else {
      for (int c : tree_.node(b).children) {
        const int tc = tree_.node(c).date;
        if (tc == T) {
          const int path = tree_.node(c).first_path;
          options.emplace_back(c, m_ ? base_.g.payoff[path] : Vec{});
          continue;
        }
        std::vector<Vec> levels{y};
        for (const Vec& l : spec_.date_levels[tc]) add_unique(levels, l, tol_);
        for (const Vec& l : spec_.atom_levels[c]) add_unique(levels, l, tol_);
        for (const Vec& l : levels) options.emplace_back(c, l);
      }
    }
    std::vector<int> kids;
    std::vector<Vec> incs;
    const Vec& xb = tree_.node(b).value;
    for (const auto& [c, yc] : options) {
      const int k = explore(j + 1, c, yc);
      if (k < 0) continue;
      kids.push_back(k);
      Vec d;
      const Vec& xc = tree_.node(c).value;
      for (int i = 0; i < tree_.dim(); ++i) d.push_back(detail::increment(xb[i], xc[i]));
      for (int i = 0; i < m_; ++i) d.push_back(detail::increment(y[i], yc[i]));
      incs.push_back(std::move(d));
    }
    if (kids.empty() || !viable(j, b, incs)) return -1;
    return push(j, b, y, std::move(kids));
  }

  bool viable(int j, int b, const std::vector<Vec>& incs) const {
    const bool banded = j > 0;
    const lp::LinearProgram prog = detail::kernel_program(incs, base_.priced_dim, banded ? &base_.band.lo[b] : nullptr,
                                                          banded ? &base_.band.hi[b] : nullptr, {}, lp::Sense::minimize);
    return lp::solve(prog).optimal();
  }

  int push(int j, int b, const Vec& y, std::vector<int> kids) {
    for (int p = tree_.node(b).first_path; p < tree_.node(b).last_path; ++p) reach_[p] = std::max(reach_[p], j);
    pool_.push_back({b, y, std::move(kids)});
    return static_cast<int>(pool_.size()) - 1;
  }

  std::vector<Cand> pool_;
  std::vector<int> reach_;  // per base path: latest joint date with a viable node

 private:
  const ModelClass& base_;
  const ScenarioTree& tree_;
  const YSpec& spec_;
  double tol_;
  int m_;
};

}  // namespace

JointLattice build_joint_lattice(const ModelClass& base, const YSpec& y_spec, const JointOptions& opt) {
  base.validate();
  const ScenarioTree& tree = *base.tree;
  if (static_cast<int>(y_spec.date_levels.size()) != tree.num_dates() ||
      static_cast<int>(y_spec.atom_levels.size()) != tree.num_nodes())
    throw InvalidArgument("y spec does not match the base tree");
  const int m = base.g.count();
  for (const auto& ls : y_spec.date_levels)
    for (const Vec& l : ls)
      if (static_cast<int>(l.size()) != m) throw InvalidArgument("y spec: level dimension differs from option count");
  for (const auto& ls : y_spec.atom_levels)
    for (const Vec& l : ls)
      if (static_cast<int>(l.size()) != m) throw InvalidArgument("y spec: level dimension differs from option count");

  JointBuilder jb(base, y_spec, opt.level_tol);
  const int root = jb.explore(0, tree.root(), Vec(m, 0.0));
  if (root < 0) {
    // Name the first base path along which viable joint nodes stop earliest.
    const auto it = std::min_element(jb.reach_.begin(), jb.reach_.end());
    const int path = static_cast<int>(it - jb.reach_.begin());
    throw PinInfeasibleError("dynamic lift: option prices starting at 0 cannot reach the pinned payoff on base path " +
                                 std::to_string(path) + " (offered levels too poor or options not calibrated)",
                             path);
  }

  std::vector<double> dates;
  dates.push_back(opt.pre_date ? *opt.pre_date : tree.dates()[0] - 0.25 * (tree.dates()[1] - tree.dates()[0]));
  for (double d : tree.dates()) dates.push_back(d);
  if (!(dates[0] < dates[1])) throw InvalidArgument("dynamic lift: pre-date must precede the first date");

  const int D = tree.dim() + m;
  ScenarioTree::Builder builder(dates, D);
  std::vector<int> builder_base;  // builder node -> base node
  auto joint_value = [&](const JointBuilder::Cand& c) {
    Vec v = tree.node(c.base_node).value;
    v.insert(v.end(), c.y.begin(), c.y.end());
    return v;
  };
  struct Frame {
    int cand;
    int parent;
  };
  std::vector<Frame> stack{{root, -1}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const auto& c = jb.pool_[f.cand];
    const int id = f.parent < 0 ? builder.add_root(joint_value(c)) : builder.add_child(f.parent, joint_value(c));
    if (static_cast<int>(builder_base.size()) <= id) builder_base.resize(id + 1);
    builder_base[id] = c.base_node;
    for (auto it = c.kids.rbegin(); it != c.kids.rend(); ++it) stack.push_back({*it, id});
  }
  JointLattice out;
  std::vector<int> new_ids;
  out.tree = std::move(builder).build(&new_ids);
  out.x_dim = tree.dim();
  out.y_dim = m;
  out.base_node.assign(out.tree.num_nodes(), -1);
  for (std::size_t i = 0; i < builder_base.size(); ++i) out.base_node[new_ids[i]] = builder_base[i];
  out.base_path.resize(out.tree.num_paths());
  std::vector<char> covered(tree.num_paths(), 0);
  for (int p = 0; p < out.tree.num_paths(); ++p) {
    out.base_path[p] = tree.node(out.base_node[out.tree.leaf(p)]).first_path;
    covered[out.base_path[p]] = 1;
  }
  out.base_paths_covered = static_cast<int>(std::count(covered.begin(), covered.end(), 1));
  return out;
}

ModelClass joint_model(const JointLattice& joint, const ModelClass& base) {
  ModelClass m;
  m.tree = &joint.tree;
  m.priced_dim = base.priced_dim;
  m.conditioning = base.conditioning;
  m.band.lo.assign(joint.tree.num_nodes(), Vec(base.priced_dim, 0.0));
  m.band.hi.assign(joint.tree.num_nodes(), Vec(base.priced_dim, lp::kInf));
  for (int v = 0; v < joint.tree.num_nodes(); ++v) {
    const int t = joint.tree.node(v).date;
    if (t == 0 || t == joint.tree.terminal()) continue;
    m.band.lo[v] = base.band.lo[joint.base_node[v]];
    m.band.hi[v] = base.band.hi[joint.base_node[v]];
  }
  if (!base.theta_dates.empty() && base.theta_dates.front() == 0) m.theta_dates.push_back(0);
  for (int t : base.theta_dates) m.theta_dates.push_back(t + 1);
  m.validate();
  return m;
}

AmericanPayoff joint_payoff(const JointLattice& joint, const AmericanPayoff& z) {
  AmericanPayoff out;
  out.value.resize(joint.tree.num_nodes());
  for (int v = 0; v < joint.tree.num_nodes(); ++v) out.value[v] = z.value[joint.base_node[v]];
  out.lower_bound = z.lower_bound;
  return out;
}

}  // namespace robustam
