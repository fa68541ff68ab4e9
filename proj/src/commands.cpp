#include "robustam/commands.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "robustam/errors.hpp"
#include "robustam/stopping.hpp"

namespace robustam {

Json apply_overrides(Json config, const CommandOptions& opt) {
  if (!config.is_object()) throw SchemaError("configuration must be a JSON object");
  if (opt.seed) config["seed"] = *opt.seed;
  if (opt.eps) config["solver"]["eps"] = *opt.eps;
  if (opt.rule_cap) config["solver"]["rule_cap"] = *opt.rule_cap;
  if (opt.tol) config["solver"]["tol"] = *opt.tol;
  if (opt.strict_integration) config["integrate"]["strict"] = true;
  return config;
}

namespace {

Json weights_json(const EnlargedMeasure& mu) {
  Json out = Json::array();
  for (std::size_t k = 0; k < mu.theta_dates.size(); ++k)
    for (int p = 0; p < mu.num_paths; ++p)
      if (mu.at(static_cast<int>(k), p) > 1e-15)
        out.push_back({{"theta", mu.theta_dates[k]}, {"path", p}, {"w", mu.at(static_cast<int>(k), p)}});
  return out;
}

}  // namespace

RunReport cmd_price(const Json& config) {
  const Scenario s = build_scenario(config);
  RunReport r;
  r.command = "price";
  const PrimalResult primal = primal_enlarged(s.model, s.z, s.solver);
  r.body["value"] = primal.value;
  r.body["european"] = s.european;
  r.body["paths"] = s.tree->num_paths();
  r.body["certificate"] = certificate(primal.lp);
  r.body["measure"] = weights_json(primal.measure);
  r.tables.emplace_back("measure.csv", measure_csv(primal.measure));
  if (s.model.g.empty()) {
    const DppResult dpp = robust_dpp(s.model, s.z, s.solver);
    r.body["dpp_value"] = dpp.value;
    const bool agree = std::abs(dpp.value - primal.value) <= s.slack;
    r.body["dpp_agrees"] = agree;
    if (!agree) r.code = ExitCode::failure;
  }
  return r;
}

RunReport cmd_hedge(const Json& config) {
  const Scenario s = build_scenario(config);
  RunReport r;
  r.command = "hedge";
  const DualResult dual = dual_superhedge_american(s.model, s.z, {}, s.solver);
  const double shortfall = hedge_shortfall(s.model, stopped_payoff(s.model, s.z), dual.plan);
  r.body["value"] = dual.value;
  r.body["x"] = dual.plan.x;
  r.body["h"] = dual.plan.h;
  r.body["option_labels"] = s.model.g.labels;
  r.body["support"] = dual.plan.support;
  r.body["shortfall"] = shortfall;
  r.body["certificate"] = certificate(dual.lp);
  r.tables.emplace_back("strategy.csv", strategy_csv(*s.tree, s.model.theta_dates, dual.plan));
  r.tables.emplace_back("multipliers.csv", multiplier_csv(dual.plan));
  if (shortfall < -s.slack) r.code = ExitCode::failure;
  return r;
}

RunReport cmd_chain(const Json& config) {
  const Scenario s = build_scenario(config);
  RunReport r;
  r.command = "chain";
  ChainInstance inst;
  inst.model = &s.model;
  inst.z = s.z;
  inst.y_spec = s.y;
  inst.auto_levels = s.auto_levels;
  inst.eps = s.eps;
  inst.rule_cap = s.rule_cap;
  inst.slack = s.slack;
  inst.solver = s.solver;
  ValueReport v;
  try {
    inequality_chain(inst, v);
  } catch (const Error& e) {
    r.body["values"] = to_json(v);
    r.body["error"] = e.what();
    r.code = e.code();
    return r;
  }
  r.body["values"] = to_json(v);
  r.body["paths"] = s.tree->num_paths();
  if (!v.ordering_ok) r.code = ExitCode::failure;
  return r;
}

RunReport cmd_gap_demo(const Json& overrides) {
  Json config = gap_demo_config();
  config.merge_patch(overrides);
  RunReport r = cmd_chain(config);
  r.command = "gap-demo";
  return r;
}

RunReport cmd_decompose(const Json& file, std::optional<double> eps_floor) {
  const MeasureFile f = measure_file_from_json(file);
  const ScenarioTree tree = ScenarioTree::from_lattice(f.lattice);
  const double floor = eps_floor ? *eps_floor : f.eps_floor ? *f.eps_floor : 1e-6;
  RunReport r;
  r.command = "decompose";
  const ExtractedPair pair = extract_pair(tree, f.mu, floor);
  r.body["eps_applied"] = pair.eps_applied;
  r.body["eps"] = pair.eps;
  r.body["absorbed"] = pair.azema.absorbed;
  r.body["p"] = pair.p.w;
  r.body["a"] = pair.a.a;
  r.tables.emplace_back("azema.csv", azema_csv(tree, pair.azema));

  const ModelClass model = make_model(tree, VolatilityBand::uniform(tree, tree.dim(), 0.0, lp::kInf));
  const PreservationReport pres = verify_martingale_preservation(pair.source, model, pair);
  r.body["martingale_ok"] = pres.ok(1e-9);
  r.body["max_stopped_increment"] = pres.max_stopped_increment;
  r.body["equivalent"] = pres.equivalent;

  Json tests = Json::array();
  double worst = 0.0;
  bool unexpected = !pres.ok(1e-9);
  for (const PsiTest& t : f.tests) {
    const bool adapted = is_adapted(tree, t.psi);
    const double gap = reconstruction_gap(tree, pair.source, pair.p, pair.a, t.psi);
    Json row = {{"name", t.name}, {"adapted", adapted}, {"gap", gap}, {"expect_adapted", t.expect_adapted}};
    if (adapted) {
      worst = std::max(worst, verify_reconstruction(tree, pair.source, pair.p, pair.a, {t.psi}));
      row["verdict"] = gap <= 1e-10 ? "ok" : "identity violated";
      if (gap > 1e-10 || !t.expect_adapted) unexpected = true;
    } else {
      row["verdict"] = gap > 1e-10 ? "expected failure: not adapted" : "not adapted, identity holds by chance";
      if (t.expect_adapted) unexpected = true;
    }
    tests.push_back(std::move(row));
  }
  r.body["tests"] = std::move(tests);
  r.body["max_reconstruction_error"] = worst;
  if (unexpected) r.code = ExitCode::failure;
  return r;
}

RunReport cmd_integrate(const Json& config, bool strict) {
  expect_schema(config, kScenarioSchema);
  IntegrateSpec spec = integrate_spec_of(config.value("integrate", Json::object()));
  spec.strict = spec.strict || strict;
  const std::uint64_t seed0 = config.value("seed", std::uint64_t{0});
  std::vector<int> levels = spec.levels;
  if (levels.empty())
    for (int l = std::min(4, spec.level); l <= spec.level; ++l) levels.push_back(l);

  auto make_path = [&](std::uint64_t seed) {
    if (spec.path == "linear") return sample_function([&](double t) { return Vec{spec.x0 + t}; }, spec.level);
    const double sigma = spec.path == "constant" ? 0.0 : spec.sigma;
    return sample_diffusion(seed, [sigma](const PathPrefix&) { return sigma; }, spec.level, {spec.x0});
  };
  IntegrandSpec q;
  q.name = spec.integrand;
  if (spec.integrand == "x") {
    q.q = [](const PathPrefix& pre) { return pre.current(); };
  } else if (spec.integrand == "one") {
    q.q = [](const PathPrefix& pre) { return Vec(pre.current().size(), 1.0); };
  } else {
    // Frozen at the last quarter date: piecewise constant and adapted.
    q.q = [](const PathPrefix& pre) {
      const int stride = pre.level() >= 2 ? 1 << (pre.level() - 2) : 1;
      return pre.value(pre.index() / stride * stride);
    };
  }
  IntegrationOptions iopt;
  iopt.strict = spec.strict;

  struct Row {
    double distance = 0.0, convergent = 0.0, exact_identity = 0.0, limit_residual = 0.0, telescoping = 0.0,
           qv_terminal = 0.0;
  };
  std::vector<Row> rows(levels.size());
  Json beta_trace = Json::array();
  std::string beta_csv;
  double exact_worst = 0.0;
  for (int s = 0; s < spec.seeds; ++s) {
    const SampledPath path = make_path(seed0 + static_cast<std::uint64_t>(s));
    const int n = 1 << spec.level;
    double fine_qv = 0.0;
    for (int k = 0; k < n; ++k) {
      const double d = path.values[k + 1][0] - path.values[k][0];
      fine_qv += d * d;
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const int l = levels[i];
      const IntegralResult res = karandikar_integral(q, path, l, iopt);
      Row& row = rows[i];
      row.distance += res.distances.empty() ? 0.0 : res.distances.back().second;
      row.convergent += res.convergent ? 1.0 : 0.0;
      const double exact = ito_identity_residual(path, l);
      row.exact_identity = std::max(row.exact_identity, exact);
      exact_worst = std::max(exact_worst, exact);
      const double x0 = path.values.front()[0], x1 = path.values.back()[0];
      const int m = 1 << l;
      double tele = 0.0;
      if (spec.integrand == "one")
        for (int k = 0; k <= m; ++k) tele = std::max(tele, std::abs(res.integral[k] - (path.at(l, k)[0] - x0)));
      row.telescoping = std::max(row.telescoping, tele);
      if (spec.integrand == "x" && !res.zeroed)
        row.limit_residual += std::abs(2.0 * res.integral[m] - (x1 * x1 - x0 * x0 - fine_qv));
      double qv = 0.0;
      for (int k = 0; k < m; ++k) {
        const double d = path.at(l, k + 1)[0] - path.at(l, k)[0];
        qv += d * d;
      }
      row.qv_terminal += qv;
    }
    if (s == 0) {
      const QVResult qv = quadratic_variation(path, spec.level, iopt);
      Csv csv({"t", "beta"});
      for (const auto& [t, b] : qv.beta) csv.row({fmt(t), fmt(b)});
      beta_csv = csv.text();
      for (const auto& [t, b] : qv.beta) beta_trace.push_back({t, b});
    }
  }
  Csv table({"level", "mean_sup_distance", "convergent_fraction", "max_exact_identity_residual", "mean_limit_residual",
             "max_telescoping_residual", "mean_qv_terminal"});
  Json jrows = Json::array();
  const double ns = spec.seeds;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Row& row = rows[i];
    table.row({std::to_string(levels[i]), fmt(row.distance / ns), fmt(row.convergent / ns), fmt(row.exact_identity),
               fmt(row.limit_residual / ns), fmt(row.telescoping), fmt(row.qv_terminal / ns)});
    jrows.push_back({{"level", levels[i]},
                     {"mean_sup_distance", row.distance / ns},
                     {"convergent_fraction", row.convergent / ns},
                     {"max_exact_identity_residual", row.exact_identity},
                     {"mean_limit_residual", row.limit_residual / ns},
                     {"max_telescoping_residual", row.telescoping},
                     {"mean_qv_terminal", row.qv_terminal / ns}});
  }
  RunReport r;
  r.command = "integrate";
  r.body["path"] = spec.path;
  r.body["integrand"] = spec.integrand;
  r.body["sigma"] = spec.sigma;
  r.body["seeds"] = spec.seeds;
  r.body["level"] = spec.level;
  r.body["strict"] = spec.strict;
  r.body["convergence"] = std::move(jrows);
  r.body["beta"] = std::move(beta_trace);
  r.body["max_exact_identity_residual"] = exact_worst;
  r.tables.emplace_back("convergence.csv", table.text());
  r.tables.emplace_back("beta.csv", beta_csv);
  if (exact_worst > 1e-12) r.code = ExitCode::failure;
  return r;
}

namespace {

void summarize(const RunReport& r, std::ostream& out) {
  out << r.command << ": exit " << static_cast<int>(r.code) << "\n";
  const Json& b = r.body;
  auto show = [&](const Json& obj, const char* key) {
    if (obj.contains(key)) out << "  " << key << " = " << obj[key].dump() << "\n";
  };
  for (const char* key : {"value", "dpp_value", "x", "shortfall", "max_reconstruction_error",
                          "max_exact_identity_residual", "error"})
    show(b, key);
  if (b.contains("values"))
    for (const char* key : {"static_primal", "lifted_primal", "pi_hat", "pi_A", "gap", "eps_corrected", "breaches"})
      show(b["values"], key);
}

}  // namespace

int run(const std::string& command, const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  Json config = Json::object();
  try {
    const bool needs_config = command != "gap-demo";
    if (opt.config_path) {
      config = read_json_file(*opt.config_path);
    } else if (needs_config) {
      throw SchemaError(command + " needs --config");
    }
    RunReport r;
    Json effective;
    if (command == "decompose") {
      effective = config;
      r = cmd_decompose(config, opt.eps);
    } else if (command == "gap-demo") {
      Json patch = apply_overrides(config, opt);
      effective = gap_demo_config();
      effective.merge_patch(patch);
      r = cmd_gap_demo(patch);
    } else {
      effective = apply_overrides(config, opt);
      if (command == "price") {
        r = cmd_price(effective);
      } else if (command == "hedge") {
        r = cmd_hedge(effective);
      } else if (command == "chain") {
        r = cmd_chain(effective);
      } else if (command == "integrate") {
        r = cmd_integrate(effective, opt.strict_integration);
      } else {
        throw InvalidArgument("unknown command " + command);
      }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_report(r, effective, opt.out_dir);
    summarize(r, out);
    return static_cast<int>(r.code);
  } catch (const Error& e) {
    err << "robustam " << command << ": " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "robustam " << command << ": " << e.what() << "\n";
    return static_cast<int>(ExitCode::failure);
  }
}

}  // namespace robustam
