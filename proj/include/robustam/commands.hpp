#pragma once

// Subcommands of the command-line tool. Each returns a report; run()
// loads input, applies flag overrides, writes the output directory and maps
// errors to exit codes.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "robustam/config.hpp"
#include "robustam/report.hpp"

namespace robustam {

struct CommandOptions {
  std::optional<std::string> config_path;
  std::string out_dir = "robustam-out";
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;
  bool strict_integration = false;
  std::optional<std::size_t> rule_cap;
  std::optional<double> tol;
};

// Flag values folded into a scenario config.
Json apply_overrides(Json config, const CommandOptions& opt);

RunReport cmd_price(const Json& config);
RunReport cmd_hedge(const Json& config);
RunReport cmd_chain(const Json& config);
// `overrides` is merged (JSON merge patch) over the built-in gap configuration.
RunReport cmd_gap_demo(const Json& overrides = Json::object());
// eps_floor overrides the file's setting.
RunReport cmd_decompose(const Json& measure_file, std::optional<double> eps_floor = std::nullopt);
RunReport cmd_integrate(const Json& config, bool strict = false);

// Returns the process exit code.
int run(const std::string& command, const CommandOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace robustam
