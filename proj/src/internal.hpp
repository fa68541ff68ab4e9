#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "robustam/lattice.hpp"
#include "robustam/lp.hpp"
#include "robustam/model.hpp"

namespace robustam::detail {

// One-step kernel over children with the given increments: weights sum to
// one, zero mean increment in every coordinate, second moment of the first
// priced_dim coordinates inside [lo, hi] (skipped when lo/hi are null or
// the side is vacuous). Objective: sense * sum_c obj[c] p_c.
lp::LinearProgram kernel_program(const std::vector<Vec>& increments, int priced_dim, const Vec* lo, const Vec* hi,
                                 const Vec& objective, lp::Sense sense);

std::vector<Vec> child_increments(const ScenarioTree& tree, int node);

// Enlarged LP over the allowed elements (all when allowed is null):
// maximise sum f_e w_e over band-feasible enlarged martingale measures,
// calibrated when the model carries options.
struct EnlargedLp {
  lp::LinearProgram prog{lp::Sense::maximize};
  std::vector<int> element;  // variable -> enlarged element
};
EnlargedLp build_enlarged_lp(const ModelClass& model, const Vec& f, const std::vector<char>* allowed = nullptr);

// Base-space LP over path weights: maximise sum cost_p w_p over the
// (calibrated) band-feasible martingale measures.
lp::LinearProgram build_base_lp(const ModelClass& model, const Vec& cost);

inline bool finite_upper(double hi) { return hi < lp::kInf; }

// b - a, snapped to 0 when it is rounding noise on values of unit scale.
// Rows whose coefficients are all such noise would otherwise be rescaled into
// spurious constraints.
inline double increment(double a, double b) {
  const double d = b - a;
  return std::abs(d) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}) ? 0.0 : d;
}

// sq - bound, snapped to 0 within relative rounding so that a move of
// exactly the band size does not turn a homogeneous band row infeasible.
inline double band_gap(double sq, double bound) {
  const double d = sq - bound;
  return std::abs(d) <= 1e-12 * std::max(std::abs(sq), std::abs(bound)) ? 0.0 : d;
}

}  // namespace robustam::detail
