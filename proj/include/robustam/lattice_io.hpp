#pragma once

// Structured-text (JSON) persistence of lattices and enlarged measures.
// Node and path ids are stable across save and load.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "robustam/lattice.hpp"
#include "robustam/measures.hpp"
#include "robustam/stopping.hpp"

namespace robustam {

using Json = nlohmann::json;

inline constexpr const char* kLatticeSchema = "robustam.lattice/1";
inline constexpr const char* kMeasureSchema = "robustam.enlarged_measure/1";

// Two-space indented dump with a trailing newline.
std::string dump(const Json& j);
// Throws SchemaError when the file is missing or not JSON.
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Throws SchemaError when `j` lacks `key` or `schema` differs.
void expect_schema(const Json& j, const std::string& schema);

Json lattice_to_json(const Lattice& lattice);
Lattice lattice_from_json(const Json& j);
void save_lattice(const Lattice& lattice, const std::string& path);
Lattice load_lattice(const std::string& path);

// A test process psi[path][date] for the reconstruction identity.
struct PsiTest {
  std::string name;
  PathTable psi;
  bool expect_adapted = true;
};

struct MeasureFile {
  Lattice lattice;
  EnlargedMeasure mu;  // paths numbered as in ScenarioTree::from_lattice
  // Absent: library default. 0: no modification allowed.
  std::optional<double> eps_floor;
  std::vector<PsiTest> tests;
};

Json measure_file_to_json(const MeasureFile& f);
MeasureFile measure_file_from_json(const Json& j);

}  // namespace robustam
