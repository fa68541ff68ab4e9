#include "robustam/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "robustam/errors.hpp"

namespace robustam {

namespace {

double num(const Json& j, const char* key, double def) {
  if (!j.contains(key) || j[key].is_null()) return def;
  if (!j[key].is_number()) throw SchemaError(std::string("field ") + key + " must be a number");
  return j[key].get<double>();
}

// A number or an array of numbers.
Vec vec_of(const Json& j) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw SchemaError("expected a number or an array of numbers");
  Vec out;
  for (const Json& x : j) {
    if (!x.is_number()) throw SchemaError("expected a number");
    out.push_back(x.get<double>());
  }
  return out;
}

// Array of vectors; plain numbers are one-dimensional vectors.
std::vector<Vec> vecs_of(const Json& j) {
  if (!j.is_array()) throw SchemaError("expected an array");
  std::vector<Vec> out;
  for (const Json& x : j) out.push_back(vec_of(x));
  return out;
}

StepSpec step_of(const Json& j) {
  StepSpec s;
  if (!j.contains("increments")) throw SchemaError("lattice step without increments");
  s.increments = vecs_of(j["increments"]);
  if (j.contains("overrides"))
    for (const Json& o : j["overrides"]) {
      if (!o.contains("at") || !o.contains("increments")) throw SchemaError("step override needs at and increments");
      s.overrides.emplace_back(vec_of(o["at"]), vecs_of(o["increments"]));
    }
  return s;
}

LatticeSpec lattice_of(const Json& j) {
  LatticeSpec spec;
  if (!j.contains("dates") || !j.contains("x0")) throw SchemaError("lattice needs dates and x0");
  spec.grid.dates = vec_of(j["dates"]);
  if (j.contains("pre_date") && !j["pre_date"].is_null()) spec.grid.pre_date = j["pre_date"].get<double>();
  spec.x0 = vec_of(j["x0"]);
  const int T = static_cast<int>(spec.grid.dates.size()) - 1;
  if (j.contains("steps")) {
    for (const Json& s : j["steps"]) spec.steps.push_back(step_of(s));
  } else if (j.contains("step")) {
    spec.steps.assign(std::max(T, 0), step_of(j["step"]));
  } else {
    throw SchemaError("lattice needs steps or step");
  }
  if (static_cast<int>(spec.steps.size()) != T) throw SchemaError("lattice: one step per date gap required");
  if (j.contains("absorb_above") && !j["absorb_above"].is_null()) spec.absorb_above = j["absorb_above"].get<double>();
  if (j.contains("max_paths")) spec.max_paths = j["max_paths"].get<std::size_t>();
  return spec;
}

VolatilityBand band_of(const Json& j, const ScenarioTree& tree, int priced_dim) {
  const double lo = num(j, "lo", 0.0);
  const double hi = num(j, "hi", lp::kInf);
  const std::string units = j.value("units", "per_step");
  if (units != "per_step" && units != "per_time") throw SchemaError("band units must be per_step or per_time");
  struct Override {
    int date;
    double lo, hi;
  };
  std::vector<Override> overrides;
  if (j.contains("overrides"))
    for (const Json& o : j["overrides"])
      overrides.push_back({o.at("date").get<int>(), num(o, "lo", lo), num(o, "hi", hi)});
  return VolatilityBand::from_function(tree, priced_dim, [&](int v, int) {
    const int t = tree.node(v).date;
    double l = lo, h = hi;
    for (const Override& o : overrides)
      if (o.date == t) l = o.lo, h = o.hi;
    if (units == "per_time") {
      const double dt = tree.dates()[t + 1] - tree.dates()[t];
      l *= dt;
      h *= dt;
    }
    return std::make_pair(l, h);
  });
}

double capped_call(double x, double k, double cap) { return std::min(std::max(x - k, 0.0), cap); }

AmericanPayoff payoff_of(const Json& j, const ScenarioTree& tree) {
  const std::string type = j.value("type", "");
  const int coord = j.value("coord", 0);
  if (coord < 0 || coord >= tree.dim()) throw SchemaError("payoff coordinate out of range");
  const double k = num(j, "strike", 0.0);
  const double cap = num(j, "cap", lp::kInf);
  std::function<double(int)> f;
  if (type == "constant") {
    const double c = num(j, "value", 0.0);
    f = [c](int) { return c; };
  } else if (type == "call") {
    f = [&, k, cap, coord](int v) { return capped_call(tree.node(v).value[coord], k, cap); };
  } else if (type == "put") {
    f = [&, k, cap, coord](int v) { return std::min(std::max(k - tree.node(v).value[coord], 0.0), cap); };
  } else if (type == "forward") {
    f = [&, k, coord](int v) { return tree.node(v).value[coord] - k; };
  } else if (type == "tent") {
    const double height = num(j, "height", 0.0), center = num(j, "center", 0.0);
    const double slope = num(j, "slope", 0.0), until = num(j, "until", lp::kInf);
    const bool with_call = j.contains("strike");
    f = [&, height, center, slope, until, with_call, k, cap, coord](int v) {
      const double t = tree.dates()[tree.node(v).date];
      double z = t <= until + 1e-12 ? height - slope * std::abs(t - center) : 0.0;
      if (with_call) z += capped_call(tree.node(v).value[coord], k, cap);
      return z;
    };
  } else if (type == "table") {
    if (!j.contains("values")) throw SchemaError("table payoff needs values");
    const std::vector<Vec> table = vecs_of(j["values"]);
    if (static_cast<int>(table.size()) != tree.num_dates()) throw SchemaError("table payoff: one row per date");
    for (int t = 0; t < tree.num_dates(); ++t)
      if (static_cast<int>(table[t].size()) != tree.date_end(t) - tree.date_begin(t))
        throw SchemaError("table payoff: one value per atom at date " + std::to_string(t));
    f = [&tree, table](int v) { return table[tree.node(v).date][v - tree.date_begin(tree.node(v).date)]; };
  } else {
    throw SchemaError("unknown payoff type '" + type + "'");
  }
  try {
    return AmericanPayoff::from_function(tree, f);
  } catch (const InvalidArgument& e) {
    throw SchemaError(e.what());
  }
}

StaticOptions options_of(const Json& j, const ScenarioTree& tree) {
  StaticOptions g;
  if (!j.is_array()) throw SchemaError("options must be an array");
  g.payoff.assign(tree.num_paths(), {});
  for (const Json& o : j) {
    const std::string type = o.value("type", "");
    const int coord = o.value("coord", 0);
    if (coord < 0 || coord >= tree.dim()) throw SchemaError("option coordinate out of range");
    const double k = num(o, "strike", 0.0), price = num(o, "price", 0.0);
    std::vector<std::pair<double, double>> table;
    if (type == "table") {
      for (const Vec& row : vecs_of(o.at("values"))) {
        if (row.size() != 2) throw SchemaError("option table rows are [terminal value, payoff]");
        table.emplace_back(row[0], row[1]);
      }
    } else if (type != "call" && type != "put" && type != "forward") {
      throw SchemaError("unknown option type '" + type + "'");
    }
    std::string label = o.value("label", "");
    if (label.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s K=%g", type.c_str(), k);
      label = buf;
    }
    g.labels.push_back(label);
    for (int p = 0; p < tree.num_paths(); ++p) {
      const double x = tree.value(p, tree.terminal())[coord];
      double v = 0.0;
      if (type == "call") {
        v = std::max(x - k, 0.0);
      } else if (type == "put") {
        v = std::max(k - x, 0.0);
      } else if (type == "forward") {
        v = x - k;
      } else {
        const auto it = std::find_if(table.begin(), table.end(),
                                     [x](const auto& r) { return std::abs(r.first - x) <= 1e-9 * std::max(1.0, std::abs(x)); });
        if (it == table.end()) throw SchemaError("option table has no row for terminal value " + std::to_string(x));
        v = it->second;
      }
      g.payoff[p].push_back(v - price);
    }
  }
  if (g.labels.empty()) g.payoff.clear();
  return g;
}

void y_levels_of(const Json& j, Scenario& s) {
  s.auto_levels = j.value("auto", true);
  if (!j.contains("dates")) return;
  for (const Json& d : j["dates"]) {
    const int t = d.at("date").get<int>();
    for (const Json& l : d.at("levels")) {
      const Vec y = vec_of(l);
      if (static_cast<int>(y.size()) != s.model.g.count())
        throw SchemaError("y level dimension must equal the number of options");
      try {
        s.y.add_date_level(t, y);
      } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
      }
    }
  }
}

}  // namespace

IntegrateSpec integrate_spec_of(const Json& in) {
  IntegrateSpec spec;
  try {
    spec.level = in.value("level", spec.level);
    if (in.contains("levels")) spec.levels = in["levels"].get<std::vector<int>>();
    spec.seeds = in.value("seeds", spec.seeds);
    spec.sigma = num(in, "sigma", spec.sigma);
    spec.x0 = num(in, "x0", spec.x0);
    spec.path = in.value("path", spec.path);
    spec.integrand = in.value("integrand", spec.integrand);
    spec.strict = in.value("strict", spec.strict);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("integrate: ") + e.what());
  }
  if (spec.level < 1 || spec.level > kMaxLevel) throw SchemaError("integrate level out of range");
  for (int l : spec.levels)
    if (l < 1 || l > spec.level) throw SchemaError("integrate levels must lie in [1, level]");
  if (spec.seeds < 1) throw SchemaError("integrate needs at least one seed");
  if (spec.path != "diffusion" && spec.path != "linear" && spec.path != "constant")
    throw SchemaError("integrate path must be diffusion, linear or constant");
  if (spec.integrand != "x" && spec.integrand != "one" && spec.integrand != "piecewise")
    throw SchemaError("integrand must be x, one or piecewise");
  return spec;
}

Scenario build_scenario(const Json& config) {
  expect_schema(config, kScenarioSchema);
  Scenario s;
  s.config = config;
  try {
    if (!config.contains("lattice")) throw SchemaError("scenario needs a lattice");
    const LatticeSpec spec = lattice_of(config["lattice"]);
    s.pre_date = spec.grid.pre_date;
    try {
      s.lattice = std::make_unique<Lattice>(build_lattice(spec));
    } catch (const InvalidArgument& e) {
      throw SchemaError(std::string("lattice: ") + e.what());
    }
    s.tree = std::make_unique<ScenarioTree>(ScenarioTree::from_lattice(*s.lattice));
    const ScenarioTree& tree = *s.tree;

    const Json band = config.value("band", Json::object());
    const int priced_dim = band.value("priced_dim", tree.dim());
    if (priced_dim < 0 || priced_dim > tree.dim()) throw SchemaError("band priced_dim out of range");
    s.model.tree = &tree;
    s.model.priced_dim = priced_dim;
    s.model.band = band_of(band, tree, priced_dim);
    if (config.contains("options")) s.model.g = options_of(config["options"], tree);

    if (!config.contains("payoff")) throw SchemaError("scenario needs a payoff");
    const Json& pay = config["payoff"];
    s.z = payoff_of(pay, tree);
    const std::string exercise = pay.value("exercise", "american");
    if (exercise == "european") {
      s.european = true;
      s.model.theta_dates = {tree.terminal()};
    } else if (exercise == "american") {
      if (pay.contains("exercise_dates")) {
        s.model.theta_dates = pay["exercise_dates"].get<std::vector<int>>();
        s.model.theta_dates.push_back(tree.terminal());
        std::sort(s.model.theta_dates.begin(), s.model.theta_dates.end());
        s.model.theta_dates.erase(std::unique(s.model.theta_dates.begin(), s.model.theta_dates.end()),
                                  s.model.theta_dates.end());
        for (int t : s.model.theta_dates)
          if (t < 0 || t > tree.terminal()) throw SchemaError("exercise date out of range");
      } else {
        s.model.theta_dates = all_dates(tree);
      }
    } else {
      throw SchemaError("exercise must be american or european");
    }

    const Json solver = config.value("solver", Json::object());
    const std::string cond = solver.value("conditioning", "enlarged");
    if (cond == "base") {
      s.model.conditioning = Conditioning::base;
    } else if (cond != "enlarged") {
      throw SchemaError("conditioning must be enlarged or base");
    }
    const double tol = num(solver, "tol", 1e-9);
    s.solver.lp.feasibility_tol = tol;
    s.solver.lp.optimality_tol = tol;
    s.rule_cap = solver.value("rule_cap", std::size_t{20000});
    s.eps = num(solver, "eps", 0.0);
    s.slack = num(solver, "slack", 1e-7);
    if (solver.value("exec", "parallel") == "serial") s.solver.exec = Exec::serial;
    s.model.validate();

    s.y = empty_y_spec(tree);
    if (config.contains("y_levels")) y_levels_of(config["y_levels"], s);

    s.seed = config.value("seed", std::uint64_t{0});
    if (config.contains("integrate")) s.integrate = integrate_spec_of(config["integrate"]);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("scenario: ") + e.what());
  }
  return s;
}

Json gap_demo_config() {
  const double p = 0.05, u = 0.2;
  Json flat = {{"increments", {0.0}}};
  Json wide = {{"increments", {-u, 0.0, u}}};
  Json tail = {{"increments", {-u, u}}, {"overrides", {{{"at", 1.0}, {"increments", {0.0}}}}}};
  return {
      {"schema", kScenarioSchema},
      {"lattice",
       {{"dates", {0.0, 0.25, 0.5, 0.75, 1.0}},
        {"pre_date", -0.0625},
        {"x0", {1.0}},
        {"steps", {flat, flat, wide, tail}},
        {"absorb_above", 100.0}}},
      {"band", {{"lo", 0.0}, {"hi", 1.0}, {"units", "per_step"}}},
      {"payoff",
       {{"type", "tent"},
        {"height", 1.5 * p},
        {"center", 0.25},
        {"slope", 6.0 * p},
        {"until", 0.5},
        {"strike", 1.0},
        {"cap", 100.0},
        {"exercise", "american"}}},
      {"options", {{{"type", "call"}, {"strike", 1.0}, {"price", p}, {"label", "call K=1"}}}},
      {"y_levels", {{"auto", true}, {"dates", {{{"date", 0}, {"levels", {{p}, {-p}}}}}}}},
      {"solver", {{"tol", 1e-9}, {"rule_cap", 20000}, {"eps", 0.0}, {"slack", 1e-7}}},
      {"seed", 0},
  };
}

std::uint64_t config_hash(const Json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace robustam
