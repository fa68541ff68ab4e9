#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "instances.hpp"
#include "robustam/config.hpp"
#include "robustam/errors.hpp"
#include "robustam/lattice.hpp"
#include "robustam/lattice_io.hpp"
#include "robustam/model.hpp"
#include "robustam/solvers.hpp"

using namespace robustam;

namespace {

LatticeSpec one_step(Vec incs) {
  LatticeSpec s;
  s.grid.dates = {0.0, 1.0};
  s.x0 = {1.0};
  StepSpec st;
  for (double d : incs) st.increments.push_back({d});
  s.steps = {st};
  return s;
}

LatticeSpec binomial(int steps, double u) {
  LatticeSpec s;
  for (int t = 0; t <= steps; ++t) s.grid.dates.push_back(t);
  s.x0 = {1.0};
  s.steps.assign(steps, StepSpec{{{-u}, {u}}, {}});
  return s;
}

ScenarioTree gap_tree() { return ScenarioTree::from_lattice(*build_scenario(gap_demo_config()).lattice); }

// Option-price levels of the two measures behind the gap: the constant path
// alone and the fair binomial tail.
void add_gap_levels(const Scenario& sc, YSpec& y) {
  const auto& tree = *sc.tree;
  PathMeasure flat{Vec(tree.num_paths(), 0.0)}, tail{Vec(tree.num_paths(), 0.25)};
  for (int p = 0; p < tree.num_paths(); ++p)
    if (tree.value(p, tree.terminal())[0] == 1.0 && tree.value(p, tree.terminal() - 1)[0] == 1.0) {
      flat.w[p] = 1.0;
      tail.w[p] = 0.0;
    }
  add_lift_levels(tree, flat, sc.model.g, y);
  add_lift_levels(tree, tail, sc.model.g, y);
}

}  // namespace

TEST(Lattice, OneStepTrinomialHasThreePaths) {
  const auto lat = build_lattice(one_step({-0.2, 0.0, 0.2}));
  EXPECT_EQ(lat.count_paths(), 3u);
  EXPECT_EQ(ScenarioTree::from_lattice(lat).num_paths(), 3);
}

TEST(Lattice, RecombiningBinomialCountsPathsAndNodes) {
  const auto lat = build_lattice(binomial(2, 0.1));
  EXPECT_EQ(lat.nodes(2).size(), 3u);
  EXPECT_EQ(lat.count_paths(), 4u);
  const auto tree = ScenarioTree::from_lattice(lat);
  EXPECT_EQ(tree.num_paths(), 4);
  // The explicit tree does not recombine.
  EXPECT_EQ(tree.date_end(2) - tree.date_begin(2), 4);
}

TEST(Lattice, GapDemoHasFivePaths) {
  const auto tree = gap_tree();
  EXPECT_EQ(tree.num_paths(), 5);
  // One constant path, four tail paths.
  int constant = 0;
  for (const auto& p : tree.paths()) {
    bool flat = true;
    for (const auto& v : p.values) flat = flat && v[0] == 1.0;
    constant += flat;
  }
  EXPECT_EQ(constant, 1);
}

TEST(Lattice, SingleNodeChainHasOnePath) {
  LatticeSpec s;
  s.grid.dates = {0.0, 0.5, 1.0};
  s.x0 = {2.0};
  s.steps.assign(2, StepSpec{{{0.0}}, {}});
  const auto tree = ScenarioTree::from_lattice(build_lattice(s));
  EXPECT_EQ(tree.num_paths(), 1);
  EXPECT_EQ(tree.paths()[0].values.size(), 3u);
}

TEST(Lattice, BinaryNonRecombiningDepthThree) {
  ScenarioTree::Builder b({0, 1, 2, 3}, 1);
  std::vector<int> frontier{b.add_root({0.0})};
  for (int t = 0; t < 3; ++t) {
    std::vector<int> next;
    for (int id : frontier) {
      next.push_back(b.add_child(id, {t + 1.0}));
      next.push_back(b.add_child(id, {-(t + 1.0)}));
    }
    frontier = next;
  }
  const auto tree = std::move(b).build();
  EXPECT_EQ(tree.num_paths(), 8);
  const auto paths = tree.paths();
  for (int i = 0; i < 8; ++i) EXPECT_EQ(paths[i].id, i);
}

TEST(Lattice, RejectsBadSpecs) {
  auto s = one_step({-0.1, 0.1});
  s.grid.dates = {0.0, 0.0};
  EXPECT_THROW(build_lattice(s), InvalidArgument);
  EXPECT_THROW(build_lattice(one_step({})), InvalidArgument);
  auto big = binomial(12, 0.1);
  big.max_paths = 1000;
  EXPECT_THROW(ScenarioTree::from_lattice(build_lattice(big)), CapExceededError);
  auto pre = one_step({-0.1, 0.1});
  pre.grid.pre_date = 0.5;
  EXPECT_THROW(build_lattice(pre), InvalidArgument);
}

TEST(Lattice, AtomsAtEndsAndMidDate) {
  const auto tree = gap_tree();
  EXPECT_EQ(tree.atoms(0).size(), 1u);
  EXPECT_EQ(tree.atoms(0)[0].paths.size(), 5u);
  EXPECT_EQ(static_cast<int>(tree.atoms(tree.terminal()).size()), tree.num_paths());
  // Dates 0, 1/4 and 1/2 share one atom: every path sits at 1 until the mid date.
  EXPECT_EQ(tree.atoms(2).size(), 1u);
  EXPECT_THROW(tree.atoms(tree.terminal() + 1), InvalidArgument);
}

TEST(Lattice, AtomsPartitionAndRefine) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const auto owner_tree = testing_support::random_tree(rng, 3, 3);
    const auto& tree = *owner_tree;
    std::vector<int> prev_owner;
    for (int t = 0; t <= tree.terminal(); ++t) {
      std::vector<int> owner(tree.num_paths(), -1);
      const auto atoms = tree.atoms(t);
      for (std::size_t a = 0; a < atoms.size(); ++a)
        for (int p : atoms[a].paths) {
          EXPECT_EQ(owner[p], -1) << "path in two atoms";
          owner[p] = static_cast<int>(a);
        }
      for (int o : owner) EXPECT_GE(o, 0);
      if (t > 0)
        for (int p = 0; p < tree.num_paths(); ++p)
          for (int q = 0; q < tree.num_paths(); ++q)
            if (owner[p] == owner[q]) EXPECT_EQ(prev_owner[p], prev_owner[q]);
      prev_owner = owner;
    }
  }
}

TEST(Lattice, EnlargedCounts) {
  LatticeSpec s;
  s.grid.dates = {0.0, 1.0};
  s.x0 = {1.0};
  s.steps = {StepSpec{{{0.0}}, {}}};
  const auto single = ScenarioTree::from_lattice(build_lattice(s));
  EXPECT_EQ(EnlargedSpace(single, {0, 1}).size(), 2);
  const auto tree = ScenarioTree::from_lattice(build_lattice(binomial(3, 0.1)));
  EXPECT_EQ(EnlargedSpace(tree, all_dates(tree)).size(), tree.num_paths() * 4);
  EXPECT_THROW(EnlargedSpace(tree, {0, 1}), InvalidArgument);
}

TEST(Lattice, EnlargedAtomsSeparateStopStatus) {
  const auto tree = ScenarioTree::from_lattice(build_lattice(binomial(2, 0.1)));
  const EnlargedSpace space(tree, all_dates(tree));
  for (int t = 0; t <= tree.terminal(); ++t) {
    std::vector<int> owner(space.size(), -1);
    const auto atoms = space.atoms(t);
    for (std::size_t a = 0; a < atoms.size(); ++a)
      for (int e : atoms[a].elements) {
        EXPECT_EQ(owner[e], -1);
        owner[e] = static_cast<int>(a);
        const int theta = space.theta_of(e);
        if (theta <= t) EXPECT_EQ(atoms[a].stopped_at, theta);
        else EXPECT_EQ(atoms[a].stopped_at, -1);
      }
    for (int p = 0; p < tree.num_paths(); ++p)
      EXPECT_NE(owner[space.element(0, p)], owner[space.element(tree.terminal(), p)]);
  }
}

TEST(Lattice, StopStatusIsMonotone) {
  const auto tree = ScenarioTree::from_lattice(build_lattice(binomial(3, 0.1)));
  const EnlargedSpace space(tree, {1, 3});
  std::vector<int> status(space.size(), -1);
  for (int t = 0; t <= tree.terminal(); ++t)
    for (const auto& a : space.atoms(t))
      for (int e : a.elements) {
        if (status[e] >= 0) EXPECT_EQ(a.stopped_at, status[e]);
        status[e] = a.stopped_at;
      }
}

TEST(Lattice, SerializationIsDeterministicAndRoundTrips) {
  const auto lat = build_lattice(binomial(3, 0.125));
  const std::string a = dump(lattice_to_json(lat));
  EXPECT_EQ(a, dump(lattice_to_json(build_lattice(binomial(3, 0.125)))));
  const auto dir = std::filesystem::temp_directory_path() / "robustam_lattice_test";
  std::filesystem::create_directories(dir);
  const auto file = (dir / "lat.json").string();
  save_lattice(lat, file);
  const auto back = load_lattice(file);
  EXPECT_EQ(dump(lattice_to_json(back)), a);
  const auto t1 = ScenarioTree::from_lattice(lat), t2 = ScenarioTree::from_lattice(back);
  ASSERT_EQ(t1.num_paths(), t2.num_paths());
  for (int p = 0; p < t1.num_paths(); ++p)
    for (int t = 0; t <= t1.terminal(); ++t) EXPECT_EQ(t1.value(p, t), t2.value(p, t));
  std::filesystem::remove_all(dir);
}

TEST(Lattice, LoadRejectsWrongSchema) {
  Json j = lattice_to_json(build_lattice(binomial(1, 0.1)));
  j["schema"] = "something/else";
  EXPECT_THROW(lattice_from_json(j), SchemaError);
}

TEST(JointLattice, ZeroOptionKeepsYAtZero) {
  const auto tree = ScenarioTree::from_lattice(build_lattice(binomial(2, 0.1)));
  StaticOptions g;
  g.labels = {"zero"};
  g.payoff.assign(tree.num_paths(), Vec{0.0});
  const auto model = make_model(tree, VolatilityBand::uniform(tree, 1, 0.0, lp::kInf), g);
  const auto joint = build_joint_lattice(model, empty_y_spec(tree));
  EXPECT_EQ(joint.tree.num_paths(), tree.num_paths());
  for (int v = 0; v < joint.tree.num_nodes(); ++v) EXPECT_EQ(joint.tree.node(v).value[1], 0.0);
  EXPECT_EQ(joint.tree.dates().size(), tree.dates().size() + 1);
}

TEST(JointLattice, PinFromZeroOnSinglePathIsInfeasible) {
  LatticeSpec s;
  s.grid.dates = {0.0, 1.0};
  s.x0 = {1.0};
  s.steps = {StepSpec{{{0.0}}, {}}};
  const auto tree = ScenarioTree::from_lattice(build_lattice(s));
  StaticOptions g;
  g.labels = {"c"};
  g.payoff = {{0.3}};
  const auto model = make_model(tree, VolatilityBand::uniform(tree, 1, 0.0, lp::kInf), g);
  try {
    build_joint_lattice(model, empty_y_spec(tree));
    FAIL() << "expected PinInfeasibleError";
  } catch (const PinInfeasibleError& e) {
    EXPECT_EQ(e.x_path(), 0u);
  }
}

TEST(JointLattice, GapDemoYBranchesAtFirstDate) {
  const auto sc = build_scenario(gap_demo_config());
  auto y = sc.y;
  add_gap_levels(sc, y);
  const auto joint = build_joint_lattice(sc.model, y);
  // Joint date 1 is base date 0; Y there takes the offered levels only.
  std::set<double> ys;
  for (int v = joint.tree.date_begin(1); v < joint.tree.date_end(1); ++v) ys.insert(joint.tree.node(v).value[1]);
  EXPECT_TRUE(ys.count(0.05));
  EXPECT_TRUE(ys.count(-0.05));
  // Terminal Y equals the shifted call on every joint path.
  for (int p = 0; p < joint.tree.num_paths(); ++p) {
    const auto& v = joint.tree.value(p, joint.tree.terminal());
    EXPECT_DOUBLE_EQ(v[1], sc.model.g.payoff[joint.base_path[p]][0]);
  }
  // Pre-date: X at its start value and Y = 0.
  EXPECT_EQ(joint.tree.node(0).value, (Vec{1.0, 0.0}));
}
