#include "robustam/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>

#include "robustam/config.hpp"

namespace robustam {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Csv::Csv(std::vector<std::string> header) { row(header); }

Csv& Csv::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ += ',';
    out_ += cells[i];
  }
  out_ += '\n';
  return *this;
}

std::string Csv::text() const { return out_; }

Json RunReport::document(const Json& config) const {
  Json j;
  j["schema"] = kReportSchema;
  j["version"] = kVersion;
  j["command"] = command;
  j["config_hash"] = hex(config_hash(config));
  j["exit_code"] = static_cast<int>(code);
  j["result"] = body;
  j["timing"] = {{"seconds", seconds}};
  return j;
}

Json to_json(const ValueReport& r) {
  return {{"pi_A", r.pi_A},
          {"pi_hat", r.pi_hat},
          {"lifted_primal", r.lifted_primal},
          {"enlarged_primal", r.enlarged_primal},
          {"static_primal", r.static_primal},
          {"enlarged_calibrated", r.enlarged_calibrated},
          {"gap", r.gap},
          {"eps", r.eps},
          {"expected_terminal", r.expected_terminal},
          {"eps_corrected", r.eps_corrected},
          {"slack", r.slack},
          {"ordering_ok", r.ordering_ok},
          {"ends_coincide", r.ends_coincide},
          {"static_enumerated", r.static_enumerated},
          {"rule_count", r.rule_count},
          {"joint_paths", r.joint_paths},
          {"completed", r.completed},
          {"breaches", r.breaches}};
}

Json certificate(const lp::Solution& s) {
  return {{"status", lp::to_string(s.status)},
          {"objective", s.objective},
          {"primal_residual", s.primal_residual},
          {"dual_residual", s.dual_residual},
          {"duality_gap", s.duality_gap},
          {"iterations", s.iterations}};
}

std::string strategy_csv(const ScenarioTree& tree, const std::vector<int>& theta_dates, const HedgePlan& plan) {
  std::vector<std::string> head{"node", "date", "stopped_at"};
  for (int i = 0; i < tree.dim(); ++i) head.push_back("x" + std::to_string(i));
  for (int i = 0; i < tree.dim(); ++i) head.push_back("q" + std::to_string(i));
  Csv csv(head);
  auto emit = [&](int v, int stopped, const Vec& q) {
    bool any = stopped < 0;
    for (double x : q) any = any || x != 0.0;
    if (!any) return;
    std::vector<std::string> r{std::to_string(v), std::to_string(tree.node(v).date), std::to_string(stopped)};
    for (double x : tree.node(v).value) r.push_back(fmt(x));
    for (double x : q) r.push_back(fmt(x));
    csv.row(r);
  };
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) {
    emit(v, -1, plan.q[v]);
    for (std::size_t k = 0; k < plan.q_tilde.size(); ++k)
      if (theta_dates[k] <= tree.node(v).date) emit(v, theta_dates[k], plan.q_tilde[k][v]);
  }
  return csv.text();
}

std::string multiplier_csv(const HedgePlan& plan) {
  Csv csv({"node", "stopped_at", "coord", "upper", "lower"});
  for (const auto& m : plan.multipliers)
    csv.row({std::to_string(m.node), std::to_string(m.stopped_at), std::to_string(m.coord), fmt(m.upper), fmt(m.lower)});
  return csv.text();
}

std::string azema_csv(const ScenarioTree& tree, const AzemaData& d) {
  Csv csv({"node", "date", "projected", "survival", "pre_stop", "m", "a"});
  for (int v = 0; v < tree.num_nodes(); ++v)
    csv.row({std::to_string(v), std::to_string(tree.node(v).date), fmt(d.projected[v]), fmt(d.survival[v]),
             fmt(d.pre_stop[v]), fmt(d.m[v]), fmt(d.a[v])});
  return csv.text();
}

std::string measure_csv(const EnlargedMeasure& mu) {
  Csv csv({"theta", "path", "weight"});
  for (std::size_t k = 0; k < mu.theta_dates.size(); ++k)
    for (int p = 0; p < mu.num_paths; ++p)
      if (mu.at(static_cast<int>(k), p) > 0.0)
        csv.row({std::to_string(mu.theta_dates[k]), std::to_string(p), fmt(mu.at(static_cast<int>(k), p))});
  return csv.text();
}

void write_report(const RunReport& r, const Json& config, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  write_text_file((base / "report.json").string(), dump(r.document(config)));
  for (const auto& [name, text] : r.tables) write_text_file((base / name).string(), text);
}

}  // namespace robustam
