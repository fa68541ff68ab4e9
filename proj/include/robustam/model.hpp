#pragma once

// Model classes on a scenario tree: volatility bands, static options, the
// American payoff, and the joint (X, Y) lattice of the dynamic lift.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robustam/lattice.hpp"

namespace robustam {

// Closed interval per tree node (non-terminal) and per priced coordinate on
// the one-step conditional second moment of the increment.
struct VolatilityBand {
  std::vector<Vec> lo, hi;  // indexed by tree node id

  static VolatilityBand uniform(const ScenarioTree& tree, int priced_dim, double lo, double hi);
  static VolatilityBand from_function(const ScenarioTree& tree, int priced_dim,
                                      const std::function<std::pair<double, double>(int node, int coord)>& f);
  // Widens every interval by the given amounts (lo - dlo, hi + dhi).
  VolatilityBand widened(double dlo, double dhi) const;
  bool vacuous(int node, int coord) const;
};

// Statically traded options, already shifted by their prices. payoff[path][i].
struct StaticOptions {
  std::vector<std::string> labels;
  std::vector<Vec> payoff;

  int count() const { return static_cast<int>(labels.size()); }
  bool empty() const { return labels.empty(); }
};

// Z per tree node, i.e. a function of the stopped path.
struct AmericanPayoff {
  Vec value;
  double lower_bound = 0.0;

  static AmericanPayoff from_function(const ScenarioTree& tree, const std::function<double(int node)>& f);
  // Exercise forbidden before the last date: earlier values are replaced by
  // (lower bound - 1).
  AmericanPayoff european(const ScenarioTree& tree) const;
  double at(const ScenarioTree& tree, int path, int t) const { return value[tree.path_node(path, t)]; }
};

enum class Conditioning { enlarged, base };

struct ModelClass {
  const ScenarioTree* tree = nullptr;
  int priced_dim = 1;  // band applies to the first priced_dim coordinates
  VolatilityBand band;
  StaticOptions g;
  std::vector<int> theta_dates;  // exercise dates, must contain the last date
  Conditioning conditioning = Conditioning::enlarged;

  void validate() const;
  ModelClass without_options() const;
};

ModelClass make_model(const ScenarioTree& tree, VolatilityBand band, StaticOptions g = {});

// Option-price levels offered to Y. Dates are base date indices.
struct YSpec {
  std::vector<std::vector<Vec>> date_levels;          // [base date] -> levels
  std::vector<std::vector<Vec>> atom_levels;          // [base node] -> levels

  void add_date_level(int t, const Vec& y);
  void add_atom_level(int node, const Vec& y);
};

YSpec empty_y_spec(const ScenarioTree& base);

struct JointLattice {
  ScenarioTree tree;           // coordinates (X, Y); date 0 is the pre-date
  std::vector<int> base_node;  // joint node -> base node (the pre node maps to the root)
  std::vector<int> base_path;  // joint path -> base path
  int x_dim = 0;
  int y_dim = 0;
  int base_paths_covered = 0;
};

struct JointOptions {
  // Time stamp of the pre-date; defaults to one quarter step before the first date.
  std::optional<double> pre_date;
  double level_tol = 1e-12;
};

// Y starts at 0 on the pre-date, moves on the offered levels (or stays) and
// is pinned to g at the last date. Joint nodes from which no band-feasible
// martingale continuation exists are pruned. Throws PinInfeasibleError if
// the root itself is not viable.
JointLattice build_joint_lattice(const ModelClass& base, const YSpec& y_spec, const JointOptions& opt = {});

// Model class on the joint lattice: martingale in all coordinates, band on
// X inherited from the base atoms, no band on the pre-step. Exercise dates
// are the base ones shifted by one, plus the pre-date when the first date is
// an exercise date.
ModelClass joint_model(const JointLattice& joint, const ModelClass& base);

// Z on the joint lattice, ignoring Y; the pre-date value is Z at the root.
AmericanPayoff joint_payoff(const JointLattice& joint, const AmericanPayoff& z);

}  // namespace robustam
