#pragma once

// Pricing and superhedging solvers on scenario trees.

#include <cstddef>
#include <string>
#include <vector>

#include "robustam/lp.hpp"
#include "robustam/measures.hpp"
#include "robustam/model.hpp"
#include "robustam/parallel.hpp"
#include "robustam/stopping.hpp"

namespace robustam {

struct SolverOptions {
  lp::Options lp;
  Exec exec = Exec::parallel;
  double support_mass = 1e-12;  // a path is chargeable above this mass
};

// ---- primal side ----------------------------------------------------------

struct PrimalResult {
  double value = 0.0;
  EnlargedMeasure measure;
  lp::Solution lp;
};

// sup of E[f(theta, path)] over enlarged martingale measures in the band
// (calibrated when the model carries options). f is given per enlarged
// element.
PrimalResult primal_enlarged(const ModelClass& model, const Vec& f, const SolverOptions& opt = {});
PrimalResult primal_enlarged(const ModelClass& model, const AmericanPayoff& z, const SolverOptions& opt = {});

// Payoff Z evaluated on enlarged elements: Z(theta, path stopped at theta).
Vec stopped_payoff(const ModelClass& model, const AmericanPayoff& z);

struct DppResult {
  double value = 0.0;
  Vec node_value;                // per tree node
  std::vector<Vec> kernel;       // optimal one-step child weights per node
  std::vector<char> stop;        // exercise is optimal at the node
};

// Backward recursion with a small LP per node. Requires a model without
// static options. Throws InfeasibleClassError when some node admits no
// band-feasible martingale kernel.
DppResult robust_dpp(const ModelClass& model, const AmericanPayoff& z, const SolverOptions& opt = {});

struct StaticResult {
  double value = 0.0;
  StoppingRule rule;
  PathMeasure p;
  std::size_t rule_count = 0;     // count_rules on the instance
  std::size_t nodes_examined = 0; // rules enumerated or branch-and-bound nodes
  bool enumerated = true;
};

// sup over P in the calibrated base class for a fixed pure rule.
// Returns -infinity when the class is empty.
double rule_value(const ModelClass& model, const AmericanPayoff& z, const StoppingRule& rule,
                  PathMeasure* best = nullptr, const lp::Options& opt = {});

// max over pure rules of rule_value. Enumerates when the rule count is at
// most rule_cap, otherwise runs branch-and-bound on the enlarged relaxation
// with at most rule_cap nodes.
StaticResult static_info_value(const ModelClass& model, const AmericanPayoff& z, std::size_t rule_cap = 20000,
                               const SolverOptions& opt = {});

// Alternating ascent over (rule, measure); a lower bound used as cross-check.
StaticResult alternating_ascent(const ModelClass& model, const AmericanPayoff& z, int max_rounds = 50,
                                const SolverOptions& opt = {});

// Optimal stopping for a fixed path measure (Snell envelope).
StoppingRule snell_rule(const ScenarioTree& tree, const std::vector<int>& theta_dates, const PathMeasure& p,
                        const AmericanPayoff& z, double* value = nullptr);

// ---- dual side ------------------------------------------------------------

struct BandMultiplier {
  int node;
  int stopped_at;  // -1: before exercise
  int coord;
  double upper;    // multiplies (dX^2 - hi)
  double lower;    // multiplies (lo - dX^2)
};

struct HedgePlan {
  double x = 0.0;
  std::vector<Vec> q;                     // [node] before exercise
  std::vector<std::vector<Vec>> q_tilde;  // [theta index][node] after exercise at that date
  Vec h;                                  // static positions
  std::vector<BandMultiplier> multipliers;
  std::vector<int> support;               // paths the plan is required to dominate on
};

struct HedgeOptions {
  bool band_multipliers = true;  // false: strict pathwise variant
  bool continuation = true;      // false: q_tilde forced to 0
};

struct DualResult {
  double value = 0.0;
  HedgePlan plan;
  lp::Solution lp;
};

// Paths charged by some measure of the (calibrated) base class. Shares LP
// solutions across paths.
std::vector<char> chargeable_paths(const ModelClass& model, const SolverOptions& opt = {});

DualResult dual_superhedge_american(const ModelClass& model, const AmericanPayoff& z, const HedgeOptions& hopt = {},
                                    const SolverOptions& opt = {});
// Exact dual of primal_enlarged over all paths.
DualResult dual_superhedge_european(const ModelClass& model, const Vec& f, const SolverOptions& opt = {});

// Smallest margin (hedge - payoff) over the plan's support rows; >= 0 iff
// the plan superhedges there.
double hedge_shortfall(const ModelClass& model, const Vec& f, const HedgePlan& plan);

// ---- dynamic lift and the inequality chain ---------------------------------

struct LiftedValue {
  double lifted_primal = 0.0;    // robust DPP on the joint lattice
  double enlarged_primal = 0.0;  // enlarged LP on the joint lattice
  JointLattice joint;
  PrimalResult primal;
};

LiftedValue lifted_american_value(const ModelClass& base, const AmericanPayoff& z, const YSpec& y_spec,
                                  const SolverOptions& opt = {});

// Levels of Y met by lifting a calibrated P and an enlarged measure.
void add_lift_levels(const ScenarioTree& tree, const PathMeasure& p, const StaticOptions& g, YSpec& y);
void add_lift_levels(const ScenarioTree& tree, const EnlargedMeasure& mu, const StaticOptions& g, YSpec& y);

struct ChainInstance {
  const ModelClass* model = nullptr;
  AmericanPayoff z;
  YSpec y_spec;
  bool auto_levels = true;
  double eps = 0.0;  // reported epsilon correction of the lifted value
  std::size_t rule_cap = 20000;
  double slack = 1e-7;
  SolverOptions solver;
};

struct ValueReport {
  double pi_A = 0.0;
  double pi_hat = 0.0;
  double lifted_primal = 0.0;
  double enlarged_primal = 0.0;
  double static_primal = 0.0;
  double enlarged_calibrated = 0.0;  // primal of pi_A
  double gap = 0.0;                  // lifted - static
  double eps = 0.0;
  double expected_terminal = 0.0;    // E[Z_T] under the lifted optimizer
  double eps_corrected = 0.0;        // (1 - eps) lifted + eps E[Z_T]
  double slack = 1e-7;
  bool ordering_ok = false;
  bool ends_coincide = false;
  bool static_enumerated = true;
  std::size_t rule_count = 0;
  int joint_paths = 0;
  std::vector<std::string> completed;  // components that finished
  std::vector<std::string> breaches;
};

// Runs every component; on failure `out` keeps what finished and the error
// propagates.
void inequality_chain(const ChainInstance& inst, ValueReport& out);
ValueReport inequality_chain(const ChainInstance& inst);

}  // namespace robustam
