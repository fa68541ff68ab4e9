#pragma once

// Run reports ("robustam.report/1") and CSV tables.

#include <string>
#include <utility>
#include <vector>

#include "robustam/errors.hpp"
#include "robustam/lattice_io.hpp"
#include "robustam/solvers.hpp"
#include "robustam/pathwise.hpp"

namespace robustam {

inline constexpr const char* kReportSchema = "robustam.report/1";
inline constexpr const char* kVersion = "0.1.0";

struct RunReport {
  std::string command;
  Json body = Json::object();  // results; everything except timing is reproducible
  ExitCode code = ExitCode::ok;
  std::vector<std::pair<std::string, std::string>> tables;  // file name -> CSV text
  double seconds = 0.0;

  // Full document with schema, version, config hash and timing.
  Json document(const Json& config) const;
};

class Csv {
 public:
  explicit Csv(std::vector<std::string> header);
  Csv& row(const std::vector<std::string>& cells);
  std::string text() const;

 private:
  std::string out_;
};

// Shortest round-trip decimal form.
std::string fmt(double x);

Json to_json(const ValueReport& r);
Json certificate(const lp::Solution& s);

std::string strategy_csv(const ScenarioTree& tree, const std::vector<int>& theta_dates, const HedgePlan& plan);
std::string multiplier_csv(const HedgePlan& plan);
std::string azema_csv(const ScenarioTree& tree, const AzemaData& d);
std::string measure_csv(const EnlargedMeasure& mu);

// Writes report.json and the tables into dir (created if missing).
void write_report(const RunReport& r, const Json& config, const std::string& dir);

}  // namespace robustam
