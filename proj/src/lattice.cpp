#include "robustam/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robustam/errors.hpp"

namespace robustam {

namespace {

constexpr double kValueTol = 1e-12;

bool same_value(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > kValueTol * std::max(1.0, std::abs(a[i]))) return false;
  return true;
}

bool less_value(const Vec& a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > kValueTol * std::max(1.0, std::abs(a[i]))) return a[i] < b[i];
  }
  return false;
}

std::size_t saturating_add(std::size_t a, std::size_t b) {
  return a > std::numeric_limits<std::size_t>::max() - b ? std::numeric_limits<std::size_t>::max() : a + b;
}

}  // namespace

void TimeGrid::validate() const {
  if (dates.size() < 2) throw InvalidArgument("time grid needs at least 2 dates");
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (!(dates[i] > dates[i - 1])) throw InvalidArgument("time grid dates must be strictly increasing");
  if (pre_date && !(*pre_date < dates.front()))
    throw InvalidArgument("pre_date must lie strictly before the first date");
}

std::size_t Lattice::count_paths() const {
  std::vector<std::size_t> count(nodes_.back().size(), 1);
  for (int t = terminal() - 1; t >= 0; --t) {
    std::vector<std::size_t> next(nodes_[t].size(), 0);
    for (std::size_t i = 0; i < nodes_[t].size(); ++i)
      for (int c : nodes_[t][i].children) next[i] = saturating_add(next[i], count[c]);
    count = std::move(next);
  }
  return count.at(0);
}

Lattice Lattice::from_nodes(TimeGrid grid, std::vector<std::vector<Node>> nodes, std::size_t max_paths) {
  grid.validate();
  if (nodes.size() != grid.dates.size()) throw InvalidArgument("lattice: one node layer per date required");
  if (nodes[0].size() != 1) throw InvalidArgument("lattice: exactly one root node required");
  Lattice lat;
  lat.grid_ = std::move(grid);
  lat.dim_ = static_cast<int>(nodes[0][0].value.size());
  if (lat.dim_ < 1) throw InvalidArgument("lattice: empty root value");
  lat.max_paths_ = max_paths;
  const int T = lat.grid_.terminal();
  std::vector<std::vector<char>> reached(nodes.size());
  for (int t = 0; t <= T; ++t) reached[t].assign(nodes[t].size(), 0);
  reached[0][0] = 1;
  for (int t = 0; t <= T; ++t) {
    for (std::size_t i = 0; i < nodes[t].size(); ++i) {
      const Node& n = nodes[t][i];
      if (static_cast<int>(n.value.size()) != lat.dim_) throw InvalidArgument("lattice: inconsistent node dimension");
      for (double v : n.value)
        if (!std::isfinite(v)) throw InvalidArgument("lattice: non-finite node value");
      if (!reached[t][i]) throw InvalidArgument("lattice: unreachable node at date " + std::to_string(t));
      if (t == T) {
        if (!n.children.empty()) throw InvalidArgument("lattice: terminal node with children");
        continue;
      }
      if (n.children.empty()) throw InvalidArgument("lattice: non-terminal node without children");
      for (int c : n.children) {
        if (c < 0 || c >= static_cast<int>(nodes[t + 1].size())) throw InvalidArgument("lattice: bad child index");
        reached[t + 1][c] = 1;
      }
      if (n.children.size() == 1 && !same_value(nodes[t + 1][n.children[0]].value, n.value))
        throw InvalidArgument("lattice: a single child must be a self-child (constant step)");
    }
  }
  lat.nodes_ = std::move(nodes);
  return lat;
}

Lattice build_lattice(const LatticeSpec& spec) {
  spec.grid.validate();
  const int T = spec.grid.terminal();
  if (static_cast<int>(spec.steps.size()) != T)
    throw InvalidArgument("lattice spec: need one step spec per step (" + std::to_string(T) + ")");
  if (spec.x0.empty()) throw InvalidArgument("lattice spec: empty x0");
  const std::size_t d = spec.x0.size();

  std::vector<std::vector<Lattice::Node>> layers(T + 1);
  layers[0].push_back({spec.x0, {}});
  for (int t = 0; t < T; ++t) {
    const StepSpec& step = spec.steps[t];
    std::vector<Vec> values;
    std::vector<std::vector<Vec>> child_values(layers[t].size());
    for (std::size_t i = 0; i < layers[t].size(); ++i) {
      const Vec& x = layers[t][i].value;
      const std::vector<Vec>* incs = &step.increments;
      for (const auto& [at, alt] : step.overrides)
        if (same_value(at, x)) incs = &alt;
      std::vector<Vec> zero_only{Vec(d, 0.0)};
      if (spec.absorb_above && *std::max_element(x.begin(), x.end()) >= *spec.absorb_above) incs = &zero_only;
      if (incs->empty()) throw InvalidArgument("lattice spec: empty branching at step " + std::to_string(t));
      for (const Vec& inc : *incs) {
        if (inc.size() != d) throw InvalidArgument("lattice spec: increment dimension mismatch");
        Vec y(d);
        for (std::size_t k = 0; k < d; ++k) y[k] = x[k] + inc[k];
        child_values[i].push_back(y);
        values.push_back(y);
      }
    }
    std::sort(values.begin(), values.end(), less_value);
    values.erase(std::unique(values.begin(), values.end(), same_value), values.end());
    for (const Vec& v : values) layers[t + 1].push_back({v, {}});
    for (std::size_t i = 0; i < layers[t].size(); ++i) {
      auto& ch = layers[t][i].children;
      for (const Vec& y : child_values[i]) {
        auto it = std::lower_bound(values.begin(), values.end(), y, less_value);
        const int idx = static_cast<int>(it - values.begin());
        if (std::find(ch.begin(), ch.end(), idx) == ch.end()) ch.push_back(idx);
      }
      std::sort(ch.begin(), ch.end());
    }
  }
  Lattice lat = Lattice::from_nodes(spec.grid, std::move(layers), spec.max_paths);
  const std::size_t n = lat.count_paths();
  if (n > spec.max_paths)
    throw CapExceededError("lattice has " + std::to_string(n) + " paths, above the cap of " +
                               std::to_string(spec.max_paths),
                           n);
  return lat;
}

ScenarioTree::Builder::Builder(std::vector<double> dates, int dim) : dates_(std::move(dates)), dim_(dim) {}

int ScenarioTree::Builder::add_root(Vec value) {
  if (!nodes_.empty()) throw InvalidArgument("tree builder: root already set");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return 0;
}

int ScenarioTree::Builder::add_child(int parent, Vec value) {
  if (parent < 0 || parent >= static_cast<int>(nodes_.size())) throw InvalidArgument("tree builder: bad parent");
  Node n;
  n.date = nodes_[parent].date + 1;
  if (n.date >= static_cast<int>(dates_.size())) throw InvalidArgument("tree builder: node beyond the last date");
  n.parent = parent;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  nodes_[parent].children.push_back(id);
  return id;
}

ScenarioTree ScenarioTree::Builder::build(std::vector<int>* new_ids) && {
  if (nodes_.empty()) throw InvalidArgument("tree builder: no root");
  const int T = static_cast<int>(dates_.size()) - 1;
  for (const Node& n : nodes_) {
    if (static_cast<int>(n.value.size()) != dim_) throw InvalidArgument("tree builder: value dimension mismatch");
    if (n.children.empty() && n.date != T) throw InvalidArgument("tree builder: leaf before the last date");
  }
  // Depth-first order fixes path ids; nodes are then grouped by date keeping
  // that order, so each date's nodes have increasing path ranges.
  std::vector<int> dfs_order;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    dfs_order.push_back(v);
    const auto& ch = nodes_[v].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  std::vector<std::vector<int>> by_date(T + 1);
  for (int v : dfs_order) by_date[nodes_[v].date].push_back(v);
  std::vector<int> new_id(nodes_.size(), -1);
  ScenarioTree tree;
  tree.dates_ = std::move(dates_);
  tree.dim_ = dim_;
  tree.date_offset_.push_back(0);
  for (int t = 0; t <= T; ++t) {
    for (int v : by_date[t]) {
      new_id[v] = static_cast<int>(tree.nodes_.size());
      tree.nodes_.push_back(nodes_[v]);
    }
    tree.date_offset_.push_back(static_cast<int>(tree.nodes_.size()));
  }
  for (Node& n : tree.nodes_) {
    if (n.parent >= 0) n.parent = new_id[n.parent];
    for (int& c : n.children) c = new_id[c];
  }
  if (new_ids) *new_ids = new_id;
  // Path ranges bottom-up.
  int next_path = 0;
  for (int v = tree.date_offset_[T]; v < tree.date_offset_[T + 1]; ++v) {
    tree.nodes_[v].first_path = next_path;
    tree.nodes_[v].last_path = ++next_path;
  }
  for (int v = tree.date_offset_[T] - 1; v >= 0; --v) {
    Node& n = tree.nodes_[v];
    n.first_path = tree.nodes_[n.children.front()].first_path;
    n.last_path = tree.nodes_[n.children.back()].last_path;
  }
  tree.num_paths_ = next_path;
  tree.path_nodes_.assign(static_cast<std::size_t>(next_path) * (T + 1), -1);
  for (int v = 0; v < tree.num_nodes(); ++v) {
    const Node& n = tree.nodes_[v];
    for (int p = n.first_path; p < n.last_path; ++p)
      tree.path_nodes_[static_cast<std::size_t>(p) * (T + 1) + n.date] = v;
  }
  return tree;
}

ScenarioTree ScenarioTree::from_lattice(const Lattice& lattice) {
  const std::size_t n = lattice.count_paths();
  if (n > lattice.max_paths())
    throw CapExceededError("path enumeration: " + std::to_string(n) + " paths exceed the cap", n);
  Builder b(lattice.grid().dates, lattice.dim());
  const int T = lattice.terminal();
  struct Frame {
    int tree_node;
    int t;
    int lat_node;
  };
  std::vector<Frame> stack{{b.add_root(lattice.node(0, 0).value), 0, 0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.t == T) continue;
    for (int c : lattice.node(f.t, f.lat_node).children) {
      const int id = b.add_child(f.tree_node, lattice.node(f.t + 1, c).value);
      stack.push_back({id, f.t + 1, c});
    }
  }
  return std::move(b).build();
}

std::vector<Path> ScenarioTree::paths() const {
  std::vector<Path> out(num_paths_);
  for (int p = 0; p < num_paths_; ++p) {
    out[p].id = p;
    for (int t = 0; t <= terminal(); ++t) out[p].values.push_back(value(p, t));
  }
  return out;
}

std::vector<FiltrationAtom> ScenarioTree::atoms(int t) const {
  if (t < 0 || t > terminal()) throw InvalidArgument("atoms: date index out of range");
  std::vector<FiltrationAtom> out;
  for (int v = date_begin(t); v < date_end(t); ++v) {
    FiltrationAtom a{t, v, {}};
    for (int p = nodes_[v].first_path; p < nodes_[v].last_path; ++p) a.paths.push_back(p);
    out.push_back(std::move(a));
  }
  return out;
}

EnlargedSpace::EnlargedSpace(const ScenarioTree& tree, std::vector<int> theta_dates)
    : tree_(&tree), theta_(std::move(theta_dates)) {
  if (theta_.empty()) throw InvalidArgument("enlarged space: no stop dates");
  std::sort(theta_.begin(), theta_.end());
  theta_.erase(std::unique(theta_.begin(), theta_.end()), theta_.end());
  if (theta_.front() < 0 || theta_.back() > tree.terminal()) throw InvalidArgument("enlarged space: bad stop date");
  if (theta_.back() != tree.terminal()) throw InvalidArgument("enlarged space: stop dates must include the terminal date");
}

int EnlargedSpace::theta_index(int t) const {
  auto it = std::lower_bound(theta_.begin(), theta_.end(), t);
  return (it != theta_.end() && *it == t) ? static_cast<int>(it - theta_.begin()) : -1;
}

std::vector<EnlargedSpace::Atom> EnlargedSpace::atoms(int t) const {
  if (t < 0 || t > tree_->terminal()) throw InvalidArgument("enlarged atoms: date index out of range");
  std::vector<Atom> out;
  for (int v = tree_->date_begin(t); v < tree_->date_end(t); ++v) {
    const auto& n = tree_->node(v);
    Atom alive{t, v, -1, {}};
    std::vector<Atom> stopped;
    for (int k = 0; k < num_theta(); ++k) {
      if (theta_[k] <= t) {
        Atom s{t, v, theta_[k], {}};
        for (int p = n.first_path; p < n.last_path; ++p) s.elements.push_back(element(k, p));
        stopped.push_back(std::move(s));
      } else {
        for (int p = n.first_path; p < n.last_path; ++p) alive.elements.push_back(element(k, p));
      }
    }
    if (!alive.elements.empty()) out.push_back(std::move(alive));
    for (auto& s : stopped) out.push_back(std::move(s));
  }
  return out;
}

std::vector<int> all_dates(const ScenarioTree& tree) {
  std::vector<int> out(tree.num_dates());
  for (int t = 0; t < tree.num_dates(); ++t) out[t] = t;
  return out;
}

}  // namespace robustam
