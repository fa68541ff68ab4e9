#include "robustam/lattice_io.hpp"

#include <algorithm>
#include <fstream>

#include "robustam/errors.hpp"

namespace robustam {

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

void expect_schema(const Json& j, const std::string& schema) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string())
    throw SchemaError("missing schema tag, expected " + schema);
  if (j["schema"].get<std::string>() != schema)
    throw SchemaError("schema " + j["schema"].get<std::string>() + " where " + schema + " was expected");
}

namespace {

// nlohmann type errors become schema errors.
template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

Json lattice_to_json(const Lattice& lattice) {
  Json j;
  j["schema"] = kLatticeSchema;
  j["dates"] = lattice.grid().dates;
  if (lattice.grid().pre_date) j["pre_date"] = *lattice.grid().pre_date;
  j["dim"] = lattice.dim();
  j["max_paths"] = lattice.max_paths();
  Json layers = Json::array();
  for (int t = 0; t <= lattice.terminal(); ++t) {
    Json layer = Json::array();
    for (const auto& n : lattice.nodes(t)) layer.push_back({{"value", n.value}, {"children", n.children}});
    layers.push_back(std::move(layer));
  }
  j["nodes"] = std::move(layers);
  return j;
}

Lattice lattice_from_json(const Json& j) {
  expect_schema(j, kLatticeSchema);
  return guarded("lattice", [&] {
    TimeGrid grid;
    grid.dates = j.at("dates").get<std::vector<double>>();
    if (j.contains("pre_date")) grid.pre_date = j["pre_date"].get<double>();
    std::vector<std::vector<Lattice::Node>> nodes;
    for (const Json& layer : j.at("nodes")) {
      std::vector<Lattice::Node> out;
      for (const Json& n : layer)
        out.push_back({n.at("value").get<Vec>(), n.at("children").get<std::vector<int>>()});
      nodes.push_back(std::move(out));
    }
    const std::size_t cap = j.value("max_paths", std::size_t{100000});
    try {
      Lattice lat = Lattice::from_nodes(std::move(grid), std::move(nodes), cap);
      if (j.contains("dim") && j["dim"].get<int>() != lat.dim()) throw SchemaError("lattice: dim field disagrees");
      return lat;
    } catch (const InvalidArgument& e) {
      throw SchemaError(e.what());
    }
  });
}

void save_lattice(const Lattice& lattice, const std::string& path) { write_text_file(path, dump(lattice_to_json(lattice))); }

Lattice load_lattice(const std::string& path) { return lattice_from_json(read_json_file(path)); }

Json measure_file_to_json(const MeasureFile& f) {
  Json j;
  j["schema"] = kMeasureSchema;
  j["lattice"] = lattice_to_json(f.lattice);
  j["theta_dates"] = f.mu.theta_dates;
  Json w = Json::array();
  for (std::size_t k = 0; k < f.mu.theta_dates.size(); ++k)
    for (int p = 0; p < f.mu.num_paths; ++p)
      if (f.mu.at(static_cast<int>(k), p) != 0.0)
        w.push_back({{"theta", f.mu.theta_dates[k]}, {"path", p}, {"w", f.mu.at(static_cast<int>(k), p)}});
  j["weights"] = std::move(w);
  if (f.eps_floor) j["eps_floor"] = *f.eps_floor;
  Json tests = Json::array();
  for (const PsiTest& t : f.tests) tests.push_back({{"name", t.name}, {"psi", t.psi}, {"expect_adapted", t.expect_adapted}});
  j["tests"] = std::move(tests);
  return j;
}

MeasureFile measure_file_from_json(const Json& j) {
  expect_schema(j, kMeasureSchema);
  if (!j.contains("lattice")) throw SchemaError("enlarged measure: missing lattice");
  MeasureFile f{lattice_from_json(j.at("lattice")), {}, std::nullopt, {}};
  const ScenarioTree tree = ScenarioTree::from_lattice(f.lattice);
  guarded("enlarged measure", [&] {
    f.mu.theta_dates = j.at("theta_dates").get<std::vector<int>>();
    f.mu.num_paths = tree.num_paths();
    f.mu.w.assign(f.mu.theta_dates.size() * tree.num_paths(), 0.0);
    for (const Json& e : j.at("weights")) {
      const int th = e.at("theta").get<int>(), p = e.at("path").get<int>();
      const auto it = std::find(f.mu.theta_dates.begin(), f.mu.theta_dates.end(), th);
      if (it == f.mu.theta_dates.end()) throw SchemaError("weight on a stop date outside theta_dates");
      if (p < 0 || p >= tree.num_paths()) throw SchemaError("weight on an unknown path");
      f.mu.w[static_cast<std::size_t>(it - f.mu.theta_dates.begin()) * tree.num_paths() + p] += e.at("w").get<double>();
    }
    if (j.contains("eps_floor")) f.eps_floor = j["eps_floor"].get<double>();
    if (j.contains("tests"))
      for (const Json& t : j["tests"]) {
        PsiTest test{t.at("name").get<std::string>(), t.at("psi").get<PathTable>(), t.value("expect_adapted", true)};
        if (static_cast<int>(test.psi.size()) != tree.num_paths())
          throw SchemaError("test process " + test.name + ": one row per path required");
        for (const Vec& row : test.psi)
          if (static_cast<int>(row.size()) != tree.num_dates())
            throw SchemaError("test process " + test.name + ": one entry per date required");
        f.tests.push_back(std::move(test));
      }
    return 0;
  });
  try {
    f.mu.validate(tree, 1e-9);
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("enlarged measure: ") + e.what());
  }
  return f;
}

}  // namespace robustam
