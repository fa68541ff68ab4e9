#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "instances.hpp"
#include "robustam/config.hpp"
#include "robustam/errors.hpp"
#include "robustam/measures.hpp"
#include "robustam/stopping.hpp"

using namespace robustam;

namespace {

ScenarioTree one_step_tree(const Vec& incs) {
  ScenarioTree::Builder b({0.0, 1.0}, 1);
  const int r = b.add_root({1.0});
  for (double d : incs) b.add_child(r, {1.0 + d});
  return std::move(b).build();
}

// Gap example measures: the constant path alone, and the fair binomial tail.
struct GapMeasures {
  Scenario sc;
  int constant = -1;
  PathMeasure flat, tail, mixture;
};

GapMeasures gap_measures() {
  GapMeasures g{build_scenario(gap_demo_config())};
  const auto& tree = *g.sc.tree;
  const int n = tree.num_paths();
  for (int p = 0; p < n; ++p)
    if (tree.value(p, tree.terminal())[0] == 1.0 && tree.value(p, tree.terminal() - 1)[0] == 1.0) g.constant = p;
  g.flat.w.assign(n, 0.0);
  g.flat.w[g.constant] = 1.0;
  g.tail.w.assign(n, 0.25);
  g.tail.w[g.constant] = 0.0;
  g.mixture.w.resize(n);
  for (int p = 0; p < n; ++p) g.mixture.w[p] = 0.5 * g.flat.w[p] + 0.5 * g.tail.w[p];
  return g;
}

EnlargedMeasure dirac_theta(const ScenarioTree& tree, const std::vector<int>& theta, int k, const PathMeasure& p) {
  EnlargedMeasure mu;
  mu.theta_dates = theta;
  mu.num_paths = tree.num_paths();
  mu.w.assign(theta.size() * tree.num_paths(), 0.0);
  for (int q = 0; q < tree.num_paths(); ++q) mu.w[k * tree.num_paths() + q] = p.w[q];
  return mu;
}

}  // namespace

TEST(Measures, SymmetricUniformIsMartingale) {
  const auto tree = one_step_tree({-0.1, 0.1});
  EXPECT_TRUE(validate_martingale(tree, PathMeasure{{0.5, 0.5}}).empty());
}

TEST(Measures, UpPathMassViolatesAtRoot) {
  const auto tree = one_step_tree({-0.1, 0.1});
  const auto v = validate_martingale(tree, PathMeasure{{0.0, 1.0}});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].node, tree.root());
  EXPECT_NEAR(v[0].drift, 0.1, 1e-15);
}

TEST(Measures, GapMixtureIsMartingale) {
  const auto g = gap_measures();
  EXPECT_TRUE(validate_martingale(*g.sc.tree, g.mixture).empty());
  EXPECT_TRUE(validate_martingale(*g.sc.tree, g.flat).empty());
  EXPECT_TRUE(validate_martingale(*g.sc.tree, g.tail).empty());
}

TEST(Measures, ConditionalVarianceExamples) {
  const auto pm = one_step_tree({-0.2, 0.2});
  EXPECT_NEAR((*conditional_variance(pm, PathMeasure{{0.5, 0.5}}, 0))[0], 0.04, 1e-15);
  const auto tri = one_step_tree({-0.1, 0.0, 0.1});
  EXPECT_NEAR((*conditional_variance(tri, PathMeasure{{0.0, 1.0, 0.0}}, 0))[0], 0.0, 0.0);
  EXPECT_NEAR((*conditional_variance(tri, PathMeasure{{0.3, 0.4, 0.3}}, 0))[0], 0.006, 1e-15);
  EXPECT_FALSE(conditional_variance(tri, PathMeasure{{0.3, 0.4, 0.3}}, 1).has_value());
}

TEST(Measures, ConstraintChecks) {
  const auto pm = one_step_tree({-0.2, 0.2});
  const auto m = make_model(pm, VolatilityBand::uniform(pm, 1, 0.04, 0.04));
  EXPECT_TRUE(check_constraints(PathMeasure{{0.5, 0.5}}, m).ok());

  const auto tri = one_step_tree({-0.1, 0.0, 0.1});
  const auto band = make_model(tri, VolatilityBand::uniform(tri, 1, 0.005, 0.02));
  const auto r = check_constraints(PathMeasure{{0.0, 1.0, 0.0}}, band);
  EXPECT_FALSE(r.variance_ok);
  EXPECT_TRUE(r.martingale_ok);
  ASSERT_EQ(r.variance.size(), 1u);
  EXPECT_EQ(r.variance[0].variance, 0.0);

  const auto g = gap_measures();
  const auto cr = check_constraints(g.mixture, g.sc.model);
  EXPECT_TRUE(cr.calibrated_ok);
  EXPECT_NEAR(cr.calibration[0], 0.0, 1e-15);
  EXPECT_FALSE(check_constraints(g.flat, g.sc.model).calibrated_ok);
}

TEST(Measures, BandWideningNeverBreaksMembership) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 30; ++k) {
    auto in = testing_support::random_instance(rng, {});
    ASSERT_TRUE(check_constraints(in.witness, in.model).ok());
    auto wide = in.model;
    wide.band = in.model.band.widened(0.001, 0.01);
    EXPECT_TRUE(check_constraints(in.witness, wide).ok());
  }
}

TEST(Measures, EpsilonModifyExamples) {
  const auto tree = one_step_tree({-0.1, 0.1});
  const PathMeasure p{{0.5, 0.5}};
  const auto at_t = dirac_theta(tree, {0, 1}, 1, p);
  EXPECT_EQ(epsilon_modify(at_t, 0.3).w, at_t.w);
  const auto at0 = dirac_theta(tree, {0, 1}, 0, p);
  const auto half = epsilon_modify(at0, 0.5);
  EXPECT_EQ(half.w, (Vec{0.25, 0.25, 0.25, 0.25}));
  EXPECT_NEAR(epsilon_level(half, tree), 0.5, 1e-15);
  EXPECT_THROW(epsilon_modify(at0, 0.0), InvalidArgument);
  EXPECT_THROW(epsilon_modify(at0, 1.0), InvalidArgument);
}

TEST(Measures, EpsilonModifyKeepsMarginalMassAndMembership) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    auto in = testing_support::random_instance(rng, {});
    const auto mu = testing_support::random_enlarged(rng, *in.tree, all_dates(*in.tree));
    const double eps = testing_support::uniform(rng, 0.01, 0.99);
    const auto me = epsilon_modify(mu, eps);
    const auto a = mu.marginal(), b = me.marginal();
    for (int p = 0; p < in.tree->num_paths(); ++p) EXPECT_NEAR(a.w[p], b.w[p], 1e-12);
    EXPECT_NEAR(me.mass(), 1.0, 1e-12);
    EXPECT_GE(epsilon_level(me, *in.tree), eps - 1e-12);
    EXPECT_TRUE(validate_martingale(*in.tree, mu).empty());
    EXPECT_TRUE(validate_martingale(*in.tree, me).empty());
    // Payoff linearity.
    const double lhs = expect_stopped(*in.tree, me, in.z);
    const double rhs = (1 - eps) * expect_stopped(*in.tree, mu, in.z) + eps * expect_terminal(*in.tree, a, in.z);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Measures, LiftOfZeroOptionIsFlat) {
  const auto tree = one_step_tree({-0.1, 0.1});
  StaticOptions g;
  g.labels = {"zero"};
  g.payoff = {{0.0}, {0.0}};
  const auto lifted = lift_measure(tree, PathMeasure{{0.5, 0.5}}, g);
  for (int v = 0; v < lifted.joint.tree.num_nodes(); ++v) EXPECT_EQ(lifted.joint.tree.node(v).value[1], 0.0);
  const auto back = restrict(lifted, tree.num_paths());
  EXPECT_EQ(back.w, (Vec{0.5, 0.5}));
}

TEST(Measures, LiftOneStepCall) {
  const double u = 0.2;
  const auto tree = one_step_tree({-u, u});
  StaticOptions g;
  g.labels = {"call"};
  g.payoff = {{-u / 2}, {u - u / 2}};
  const auto lifted = lift_measure(tree, PathMeasure{{0.5, 0.5}}, g);
  const auto& jt = lifted.joint.tree;
  // Pre-date and first date carry Y = 0; the last date carries the payoff.
  EXPECT_EQ(jt.node(0).value[1], 0.0);
  for (int v = jt.date_begin(1); v < jt.date_end(1); ++v) EXPECT_EQ(jt.node(v).value[1], 0.0);
  std::set<double> last;
  for (int v = jt.date_begin(2); v < jt.date_end(2); ++v) last.insert(jt.node(v).value[1]);
  EXPECT_EQ(last, (std::set<double>{-u / 2, u / 2}));
  EXPECT_TRUE(validate_martingale(jt, lifted.p, 1e-9).empty());
}

TEST(Measures, LiftGapMixture) {
  const auto g = gap_measures();
  const auto& tree = *g.sc.tree;
  const auto lifted = lift_mixture(tree, {{0.5, g.flat}, {0.5, g.tail}}, g.sc.model.g);
  const auto& jt = lifted.joint.tree;
  EXPECT_TRUE(validate_martingale(jt, lifted.p, 1e-9).empty());
  std::map<double, double> mass;
  // Levels carry rounding from the payoff arithmetic; bucket them.
  for (int p = 0; p < jt.num_paths(); ++p) mass[std::round(jt.value(p, 1)[1] * 1e9) / 1e9] += lifted.p.w[p];
  ASSERT_EQ(mass.size(), 2u);
  EXPECT_NEAR(mass[-0.05], 0.5, 1e-15);
  EXPECT_NEAR(mass[0.05], 0.5, 1e-15);
  const auto back = restrict(lifted, tree.num_paths());
  for (int p = 0; p < tree.num_paths(); ++p) EXPECT_NEAR(back.w[p], g.mixture.w[p], 1e-15);
  EXPECT_THROW(lift_measure(tree, g.flat, g.sc.model.g), InvalidArgument);
}

TEST(Measures, RestrictDiracTheta) {
  const auto tree = one_step_tree({-0.1, 0.0, 0.1});
  const PathMeasure p{{0.25, 0.5, 0.25}};
  EXPECT_EQ(restrict(dirac_theta(tree, {0, 1}, 0, p)).w, p.w);
  EXPECT_EQ(restrict(dirac_theta(tree, {0, 1}, 1, p)).w, p.w);
}

TEST(Measures, RandomLiftsAreMartingalesAndRestrictBack) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    testing_support::Shape s;
    s.options = 2;
    auto in = testing_support::random_instance(rng, s);
    const auto lifted = lift_measure(*in.tree, in.witness, in.model.g);
    EXPECT_TRUE(validate_martingale(lifted.joint.tree, lifted.p, 1e-9).empty());
    EXPECT_NEAR(lifted.p.mass(), 1.0, 1e-12);
    const auto back = restrict(lifted, in.tree->num_paths());
    for (int p = 0; p < in.tree->num_paths(); ++p) EXPECT_NEAR(back.w[p], in.witness.w[p], 1e-12);
    const auto cr = check_constraints(back, in.model);
    EXPECT_TRUE(cr.martingale_ok && cr.calibrated_ok);
  }
}
