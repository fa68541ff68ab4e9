#pragma once

// Scenario lattices, their non-recombining path trees, filtration atoms and
// the enlarged (stop index, path) space.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace robustam {

using Vec = std::vector<double>;

struct TimeGrid {
  std::vector<double> dates;
  std::optional<double> pre_date;

  void validate() const;
  int terminal() const { return static_cast<int>(dates.size()) - 1; }
};

// One-step branching: default increments, optionally replaced for nodes
// sitting at a specific value.
struct StepSpec {
  std::vector<Vec> increments;
  std::vector<std::pair<Vec, std::vector<Vec>>> overrides;
};

struct LatticeSpec {
  TimeGrid grid;
  Vec x0;
  std::vector<StepSpec> steps;  // one per step, size T
  // Nodes with any coordinate at or above this level only keep a self-child.
  std::optional<double> absorb_above;
  std::size_t max_paths = 100000;
};

// Recombining value graph.
class Lattice {
 public:
  struct Node {
    Vec value;
    std::vector<int> children;  // indices into the next date
  };

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  int terminal() const { return grid_.terminal(); }
  const std::vector<Node>& nodes(int t) const { return nodes_.at(t); }
  const Node& node(int t, int i) const { return nodes_.at(t).at(i); }
  std::size_t max_paths() const { return max_paths_; }

  // Exact count of root-to-terminal paths (saturates at SIZE_MAX).
  std::size_t count_paths() const;

  // Constructs from explicit per-date nodes; validates structure.
  static Lattice from_nodes(TimeGrid grid, std::vector<std::vector<Node>> nodes, std::size_t max_paths);

 private:
  TimeGrid grid_;
  int dim_ = 0;
  std::vector<std::vector<Node>> nodes_;
  std::size_t max_paths_ = 100000;
};

Lattice build_lattice(const LatticeSpec& spec);

struct Path {
  int id;
  std::vector<Vec> values;
};

struct FiltrationAtom {
  int date;
  int node;  // tree node id
  std::vector<int> paths;
};

// Explicit prefix tree. Nodes at date t are the filtration atoms at t; the
// member paths of every node form a contiguous id range.
class ScenarioTree {
 public:
  struct Node {
    int date = 0;
    int parent = -1;
    std::vector<int> children;
    Vec value;
    int first_path = 0;
    int last_path = 0;  // exclusive
  };

  class Builder {
   public:
    Builder(std::vector<double> dates, int dim);
    int add_root(Vec value);
    int add_child(int parent, Vec value);
    // Renumbers nodes date by date in depth-first order. Every leaf must sit
    // at the last date. new_ids receives the map from builder ids.
    ScenarioTree build(std::vector<int>* new_ids = nullptr) &&;

   private:
    std::vector<double> dates_;
    int dim_;
    std::vector<Node> nodes_;
  };

  static ScenarioTree from_lattice(const Lattice& lattice);

  const std::vector<double>& dates() const { return dates_; }
  int terminal() const { return static_cast<int>(dates_.size()) - 1; }
  int num_dates() const { return static_cast<int>(dates_.size()); }
  int dim() const { return dim_; }
  int num_paths() const { return num_paths_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[id]; }
  int root() const { return 0; }

  // Node ids at date t form the range [date_begin(t), date_begin(t+1)).
  int date_begin(int t) const { return date_offset_.at(t); }
  int date_end(int t) const { return date_offset_.at(t + 1); }
  int path_node(int path, int t) const { return path_nodes_[static_cast<std::size_t>(path) * dates_.size() + t]; }
  const Vec& value(int path, int t) const { return nodes_[path_node(path, t)].value; }
  int leaf(int path) const { return path_node(path, terminal()); }

  std::vector<Path> paths() const;
  std::vector<FiltrationAtom> atoms(int t) const;

 private:
  std::vector<double> dates_;
  int dim_ = 0;
  int num_paths_ = 0;
  std::vector<Node> nodes_;
  std::vector<int> date_offset_;
  std::vector<int> path_nodes_;
};

inline std::vector<Path> enumerate_paths(const ScenarioTree& tree) { return tree.paths(); }
inline std::vector<FiltrationAtom> atoms(const ScenarioTree& tree, int t) { return tree.atoms(t); }

// Enlarged space Theta x Omega over a subset of date indices. Element
// k * num_paths + path stands for (theta = theta_dates[k], path).
class EnlargedSpace {
 public:
  struct Atom {
    int date;
    int node;
    int stopped_at;  // -1: not yet stopped
    std::vector<int> elements;
  };

  EnlargedSpace(const ScenarioTree& tree, std::vector<int> theta_dates);

  const ScenarioTree& tree() const { return *tree_; }
  const std::vector<int>& theta_dates() const { return theta_; }
  int num_theta() const { return static_cast<int>(theta_.size()); }
  int size() const { return num_theta() * tree_->num_paths(); }
  int element(int k, int path) const { return k * tree_->num_paths() + path; }
  int theta_of(int element) const { return theta_[element / tree_->num_paths()]; }
  int path_of(int element) const { return element % tree_->num_paths(); }
  // Index of date t inside theta_dates, or -1.
  int theta_index(int t) const;

  std::vector<Atom> atoms(int t) const;

 private:
  const ScenarioTree* tree_;
  std::vector<int> theta_;
};

std::vector<int> all_dates(const ScenarioTree& tree);

}  // namespace robustam
