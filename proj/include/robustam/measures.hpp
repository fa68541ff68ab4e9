#pragma once

// Measures on paths and on the enlarged space, constraint checks,
// epsilon-modification and the dynamic lift.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robustam/lattice.hpp"
#include "robustam/model.hpp"

namespace robustam {

struct PathMeasure {
  Vec w;  // per path id

  double mass() const;
  void validate(int num_paths, double tol = 1e-12) const;
};

// Weights on (theta_dates[k], path) pairs, stored at k * num_paths + path.
struct EnlargedMeasure {
  std::vector<int> theta_dates;
  int num_paths = 0;
  Vec w;

  double at(int k, int path) const { return w[static_cast<std::size_t>(k) * num_paths + path]; }
  double mass() const;
  void validate(const ScenarioTree& tree, double tol = 1e-12) const;
  // Omega-marginal.
  PathMeasure marginal() const;
};

struct MartingaleViolation {
  int date;
  int node;
  int stopped_at;  // -1 for base atoms or alive enlarged atoms
  int coord;
  double drift;  // conditional mean increment
};

std::vector<MartingaleViolation> validate_martingale(const ScenarioTree& tree, const PathMeasure& p,
                                                     double tol = 1e-9);
std::vector<MartingaleViolation> validate_martingale(const ScenarioTree& tree, const EnlargedMeasure& mu,
                                                     double tol = 1e-9);

// One-step conditional second moment of the increment per coordinate;
// nullopt on a zero-mass or terminal atom.
std::optional<Vec> conditional_variance(const ScenarioTree& tree, const PathMeasure& p, int node);
std::optional<Vec> conditional_variance(const ScenarioTree& tree, const EnlargedMeasure& mu, int node,
                                        int stopped_at);

struct ConstraintReport {
  bool martingale_ok = true;
  bool variance_ok = true;
  bool calibrated_ok = true;
  std::vector<MartingaleViolation> martingale;
  struct VarianceIssue {
    int node;
    int stopped_at;
    int coord;
    double variance, lo, hi;
  };
  std::vector<VarianceIssue> variance;
  Vec calibration;  // E[g_i]

  bool ok() const { return martingale_ok && variance_ok && calibrated_ok; }
};

ConstraintReport check_constraints(const PathMeasure& p, const ModelClass& model, double tol = 1e-9);
// Band conditioning follows model.conditioning.
ConstraintReport check_constraints(const EnlargedMeasure& mu, const ModelClass& model, double tol = 1e-9);

// (1 - eps) mu + eps (delta_T x mu^Omega).
EnlargedMeasure epsilon_modify(const EnlargedMeasure& mu, double eps);

// Largest eps such that mu(theta = T, w) >= eps mu^Omega(w) for all w.
double epsilon_level(const EnlargedMeasure& mu, const ScenarioTree& tree);

struct LiftedMeasure {
  JointLattice joint;
  PathMeasure p;  // on joint paths
};

// Mixture components are revealed at the first date: on the component
// (weight_i, P_i) the option price is Y_t = E^{P_i}[g | F_t], and Y = 0 on
// the pre-date. The mixture must be calibrated.
LiftedMeasure lift_mixture(const ScenarioTree& tree, const std::vector<std::pair<double, PathMeasure>>& components,
                           const StaticOptions& g, double pre_date = -1.0, double tol = 1e-9);
LiftedMeasure lift_measure(const ScenarioTree& tree, const PathMeasure& p, const StaticOptions& g,
                           double pre_date = -1.0, double tol = 1e-9);

PathMeasure restrict(const LiftedMeasure& lifted, int base_paths);
PathMeasure restrict(const JointLattice& joint, const PathMeasure& joint_p, int base_paths);
inline PathMeasure restrict(const EnlargedMeasure& mu) { return mu.marginal(); }

// Expectation helpers.
double expect_terminal(const ScenarioTree& tree, const PathMeasure& p, const AmericanPayoff& z);
double expect_stopped(const ScenarioTree& tree, const EnlargedMeasure& mu, const AmericanPayoff& z);
Vec expect_options(const PathMeasure& p, const StaticOptions& g);

// Per-node conditional expectations E^P[g | node] (nullopt where P(node) = 0).
std::vector<std::optional<Vec>> conditional_option_prices(const ScenarioTree& tree, const PathMeasure& p,
                                                          const StaticOptions& g);

}  // namespace robustam
