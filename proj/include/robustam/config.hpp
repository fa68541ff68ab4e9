#pragma once

// Scenario configuration ("robustam.scenario/1"): lattice, band, payoff,
// static options, option-price levels for the lift, solver settings and the
// pathwise experiment.
//
// Units: band variances are per step unless "units" is "per_time", in which
// case they are multiplied by the step length.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "robustam/lattice_io.hpp"
#include "robustam/model.hpp"
#include "robustam/pathwise.hpp"
#include "robustam/solvers.hpp"

namespace robustam {

inline constexpr const char* kScenarioSchema = "robustam.scenario/1";

struct IntegrateSpec {
  int level = 14;
  std::vector<int> levels;  // convergence table rows; default 4..level
  int seeds = 20;
  double sigma = 0.2;
  double x0 = 1.0;
  std::string path = "diffusion";  // diffusion | linear | constant
  std::string integrand = "x";     // x | one | piecewise
  bool strict = false;
};

IntegrateSpec integrate_spec_of(const Json& section);

struct Scenario {
  Json config;  // effective configuration (defaults filled in)
  std::unique_ptr<Lattice> lattice;
  std::unique_ptr<ScenarioTree> tree;
  ModelClass model;
  AmericanPayoff z;
  bool european = false;
  YSpec y;
  bool auto_levels = true;
  std::optional<double> pre_date;
  double eps = 0.0;
  std::size_t rule_cap = 20000;
  double slack = 1e-7;
  SolverOptions solver;
  std::uint64_t seed = 0;
  IntegrateSpec integrate;
};

// Throws SchemaError on malformed or inconsistent input.
Scenario build_scenario(const Json& config);

// Built-in gap demonstration: constant path plus a binomial tail after the
// mid date, a call struck at the start value sold at 0.05, and a payoff
// peaking at the first quarter.
Json gap_demo_config();

// FNV-1a over the compact dump.
std::uint64_t config_hash(const Json& config);
std::string hex(std::uint64_t h);

}  // namespace robustam
