// Command-line front end: price, hedge, gap-demo, decompose, integrate, chain.

#include <iostream>

#include "CLI11.hpp"
#include "robustam/commands.hpp"
#include "robustam/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Robust American option pricing and superhedging on scenario lattices"};
  app.require_subcommand(1);
  robustam::CommandOptions opt;
  std::string config, out_dir = opt.out_dir;
  std::uint64_t seed = 0;
  double eps = 0.0, tol = 0.0;
  std::size_t rule_cap = 0;

  const char* names[][2] = {
      {"price", "Worst-case value over the model class (enlarged LP, recursion when no options)"},
      {"hedge", "Superhedging price and strategy tables"},
      {"gap-demo", "Built-in example with a strict pricing-hedging gap"},
      {"decompose", "Randomized stopping time and measure change of an enlarged measure file"},
      {"integrate", "Pathwise integration and quadratic variation experiments"},
      {"chain", "All values of the pricing-hedging chain on a scenario"},
  };
  for (const auto& [name, help] : names) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Scenario configuration (or enlarged measure file for decompose)");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--eps", eps, "Epsilon correction, or modification floor for decompose");
    sub->add_flag("--strict-integration", opt.strict_integration, "Zero non-convergent integrals");
    sub->add_option("--rule-cap", rule_cap, "Largest rule count enumerated exhaustively");
    sub->add_option("--tol", tol, "Solver tolerance");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(robustam::ExitCode::schema);
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--config")) opt.config_path = config;
  opt.out_dir = out_dir;
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--eps")) opt.eps = eps;
  if (sub->count("--rule-cap")) opt.rule_cap = rule_cap;
  if (sub->count("--tol")) opt.tol = tol;
  return robustam::run(sub->get_name(), opt, std::cout, std::cerr);
}
