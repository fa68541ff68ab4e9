#pragma once

// Pure stopping rules, randomized stopping times and their extraction from
// enlarged-space measures.

#include <cstddef>
#include <vector>

#include "robustam/measures.hpp"

namespace robustam {

// stop[node] for every tree node; the first stop along a path wins, and the
// last date always stops.
struct StoppingRule {
  std::vector<char> stop;

  int stop_date(const ScenarioTree& tree, int path) const;
  bool adapted_to(const ScenarioTree& tree) const { return static_cast<int>(stop.size()) == tree.num_nodes(); }
};

StoppingRule stop_at_last(const ScenarioTree& tree);

// Number of distinct pure rules that stop only on exercise dates (saturating).
std::size_t count_rules(const ScenarioTree& tree, const std::vector<int>& theta_dates);

// Throws CapExceededError (with the count) when count_rules > cap.
std::vector<StoppingRule> enumerate_rules(const ScenarioTree& tree, const std::vector<int>& theta_dates,
                                          std::size_t cap);

EnlargedMeasure rule_to_enlarged(const ScenarioTree& tree, const std::vector<int>& theta_dates,
                                 const PathMeasure& p, const StoppingRule& rule);

// Cumulative stopping profile per (path, date): R[path][s] = mu(theta <= s | path).
// Rows of null paths are NaN.
using PathTable = std::vector<Vec>;
PathTable disintegrate(const ScenarioTree& tree, const EnlargedMeasure& mu);

// Per node: the mass-weighted average over the node's paths of R at the
// node's date. NaN on zero-mass nodes.
Vec optional_projection(const ScenarioTree& tree, const PathTable& r, const PathMeasure& mu_omega);

// A per tree node: nondecreasing along paths, 1 at the last date.
struct RandomizedStoppingTime {
  Vec a;

  double at(const ScenarioTree& tree, int path, int t) const { return a[tree.path_node(path, t)]; }
  double increment(const ScenarioTree& tree, int path, int t) const;
};

RandomizedStoppingTime indicator(const ScenarioTree& tree, const StoppingRule& rule);

struct AzemaData {
  PathTable r;
  Vec projected;  // optional projection of R per node
  Vec survival;   // S = mu(theta > t | F_t) per node
  Vec pre_stop;   // U = mu(theta >= t | F_t) per node
  Vec m;          // martingale factor per node
  Vec a;          // increasing factor per node
  Vec density;    // M_T per path
  bool absorbed = false;  // S reached 0 before the last date somewhere
};

// Survival S and pre-stop survival U per node from mu.
void azema_survival(const ScenarioTree& tree, const EnlargedMeasure& mu, AzemaData& out);

// S = M (1 - A) with M a mu^Omega-martingale and A increasing. With
// allow_absorption false, S = 0 before the last date on a charged node
// throws EpsilonModificationRequired.
void multiplicative_decompose(const ScenarioTree& tree, const PathMeasure& mu_omega, AzemaData& data,
                              bool allow_absorption);

AzemaData azema(const ScenarioTree& tree, const EnlargedMeasure& mu, bool allow_absorption);

struct ExtractedPair {
  PathMeasure p;
  RandomizedStoppingTime a;
  AzemaData azema;
  bool eps_applied = false;
  double eps = 0.0;       // modification applied (0 when none)
  EnlargedMeasure source;  // the measure actually decomposed
};

// Direct decomposition when mu puts at least eps_floor of the path mass on
// the last date; otherwise the absorbed decomposition if it keeps P
// equivalent to the marginal; otherwise mu is epsilon-modified at eps_floor.
// eps_floor = 0 forbids the modification (EpsilonModificationRequired).
ExtractedPair extract_pair(const ScenarioTree& tree, const EnlargedMeasure& mu, double eps_floor = 1e-6);

// tau_r = first date with A >= r.
StoppingRule tau_r(const ScenarioTree& tree, const RandomizedStoppingTime& a, double r);

// Distinct levels of A in (0, 1], sorted.
std::vector<double> change_points(const RandomizedStoppingTime& a);

// sum over change points of (r_j - r_{j-1}) E^P[Z_{tau_{r_j}}].
double layer_cake_value(const ScenarioTree& tree, const PathMeasure& p, const RandomizedStoppingTime& a,
                        const AmericanPayoff& z);
// E^P[sum_t Z_t dA_t].
double integrated_value(const ScenarioTree& tree, const PathMeasure& p, const RandomizedStoppingTime& a,
                        const AmericanPayoff& z);

// psi given per (path, date). Throws NonAdaptedError unless psi is constant
// on every atom.
double verify_reconstruction(const ScenarioTree& tree, const EnlargedMeasure& mu, const PathMeasure& p,
                             const RandomizedStoppingTime& a, const std::vector<PathTable>& psi_samples);
// |mu(psi_theta) - E^P sum_t psi_t dA_t| without the adaptedness check.
double reconstruction_gap(const ScenarioTree& tree, const EnlargedMeasure& mu, const PathMeasure& p,
                          const RandomizedStoppingTime& a, const PathTable& psi);
bool is_adapted(const ScenarioTree& tree, const PathTable& psi);

struct PreservationReport {
  std::vector<MartingaleViolation> martingale;
  ConstraintReport constraints;
  double max_stopped_increment = 0.0;  // max |E^P[1_G 1{tau_r > s}(X_{tau_r} - X_s)]|
  bool equivalent = true;              // same null paths as mu^Omega

  bool ok(double tol) const { return martingale.empty() && constraints.martingale_ok && constraints.variance_ok &&
                                     max_stopped_increment <= tol && equivalent; }
};

PreservationReport verify_martingale_preservation(const EnlargedMeasure& mu, const ModelClass& model,
                                                  const ExtractedPair& pair, double tol = 1e-9);

}  // namespace robustam
