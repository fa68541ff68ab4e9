// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned here.
// Exit status is the number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "instances.hpp"
#include "oracles.hpp"
#include "robustam/commands.hpp"
#include "robustam/config.hpp"
#include "robustam/solvers.hpp"
#include "robustam/stopping.hpp"

using namespace robustam;
using testing_support::Instance;
using testing_support::Shape;

namespace {

constexpr double kGapTol = 1e-7;
constexpr double kGapSeconds = 10.0;
constexpr int kAgreementInstances = 200;
constexpr double kAgreementTol = 1e-7;
constexpr double kAgreementSeconds = 300.0;
constexpr double kDualityRelTol = 1e-8;
constexpr int kPipelineMeasures = 200;
constexpr int kPsiPerMeasure = 100;
constexpr double kReconstructionTol = 1e-10;
constexpr double kMartingaleTol = 1e-9;
constexpr double kRoundTripTol = 1e-12;
constexpr int kChainInstances = 50;
constexpr double kChainSlack = 1e-7;
constexpr double kWitnessGap = 1e-3;
constexpr int kContinuationInstances = 50;
constexpr double kContinuationTol = 1e-7;
constexpr int kEpsPairs = 50;
constexpr double kLinearityTol = 1e-12;
constexpr int kMonotonePairs = 50;
constexpr double kMonotoneTol = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

PathTable random_adapted(std::mt19937_64& rng, const ScenarioTree& tree) {
  Vec by_node(tree.num_nodes());
  for (double& x : by_node) x = testing_support::uniform(rng, -1.0, 1.0);
  PathTable psi(tree.num_paths(), Vec(tree.num_dates()));
  for (int p = 0; p < tree.num_paths(); ++p)
    for (int t = 0; t <= tree.terminal(); ++t) psi[p][t] = by_node[tree.path_node(p, t)];
  return psi;
}

StoppingRule random_rule(std::mt19937_64& rng, const ScenarioTree& tree) {
  StoppingRule r = stop_at_last(tree);
  for (int v = 0; v < tree.date_begin(tree.terminal()); ++v) r.stop[v] = testing_support::pick(rng, 0, 2) == 0;
  return r;
}

Outcome gap_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport r = cmd_gap_demo();
  const double secs = seconds_since(t0);
  const Json& v = r.body["values"];
  const double st = v["static_primal"].get<double>(), lifted = v["lifted_primal"].get<double>();
  const Scenario sc = build_scenario(gap_demo_config());
  const double brute_static =
      oracle::static_value(*sc.tree, sc.model.band, 1, sc.model.g.payoff, sc.z.value, sc.model.theta_dates);
  const double closed_lifted = oracle::gap_demo().lifted_value;
  const double p = 0.05;
  Outcome o;
  o.pass = std::abs(st - brute_static) <= kGapTol && std::abs(st - 1.5 * p) <= kGapTol &&
           std::abs(lifted - closed_lifted) <= kGapTol && std::abs(lifted - 1.75 * p) <= kGapTol &&
           secs < kGapSeconds && r.code == ExitCode::ok;
  o.detail = format("static %.9f (oracle %.9f), lifted %.9f (oracle %.9f)", st, brute_static, lifted, closed_lifted) +
             format(", %.2fs", secs);
  return o;
}

struct AgreementStats {
  Outcome values, duality;
};

AgreementStats agreement_and_duality() {
  std::mt19937_64 rng(20261017);
  double worst = 0.0, worst_oracle = 0.0, worst_dual = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t max_rules = 0;
  for (int k = 0; k < kAgreementInstances; ++k) {
    Shape s;
    s.max_depth = 4;
    s.max_branch = 3;
    s.all_exercise = k % 3 != 0;
    Instance in = testing_support::random_instance(rng, s);
    const double primal = primal_enlarged(in.model, in.z).value;
    const double dpp = robust_dpp(in.model, in.z).value;
    const StaticResult st = static_info_value(in.model, in.z);
    max_rules = std::max(max_rules, st.rule_count);
    worst = std::max({worst, std::abs(primal - dpp), std::abs(st.value - dpp), std::abs(primal - st.value)});
    const double ref = oracle::dpp(*in.tree, in.model.band, 1, in.z.value, in.model.theta_dates);
    worst_oracle = std::max(worst_oracle, std::abs(dpp - ref));
    const double dual = dual_superhedge_european(in.model, stopped_payoff(in.model, in.z)).value;
    worst_dual = std::max(worst_dual, rel(dual, primal));
  }
  const double secs = seconds_since(t0);
  AgreementStats out;
  out.values.pass = worst <= kAgreementTol && worst_oracle <= kAgreementTol && secs < kAgreementSeconds;
  out.values.detail = format("max spread %.2e, vs oracle %.2e, largest rule count %.0f, %.1fs", worst, worst_oracle,
                             static_cast<double>(max_rules), secs);
  out.duality.pass = worst_dual <= kDualityRelTol;
  out.duality.detail = format("max relative primal-dual difference %.2e", worst_dual);
  return out;
}

Outcome reconstruction_pipeline() {
  std::mt19937_64 rng(31);
  double worst_rec = 0.0, worst_rt = 0.0;
  int martingale_failures = 0, modified = 0;
  for (int k = 0; k < kPipelineMeasures; ++k) {
    Instance in = testing_support::random_instance(rng, {});
    const ScenarioTree& tree = *in.tree;
    const EnlargedMeasure mu = testing_support::random_enlarged(rng, tree, all_dates(tree));
    const EnlargedMeasure me = epsilon_modify(mu, testing_support::uniform(rng, 0.01, 0.5));
    const ExtractedPair pair = extract_pair(tree, me);
    modified += pair.eps_applied;
    std::vector<PathTable> psi;
    for (int j = 0; j < kPsiPerMeasure; ++j) psi.push_back(random_adapted(rng, tree));
    worst_rec = std::max(worst_rec, verify_reconstruction(tree, pair.source, pair.p, pair.a, psi));
    if (!validate_martingale(tree, pair.p, kMartingaleTol).empty()) ++martingale_failures;

    const StoppingRule rule = random_rule(rng, tree);
    const ExtractedPair back = extract_pair(tree, rule_to_enlarged(tree, all_dates(tree), in.witness, rule));
    const RandomizedStoppingTime ind = indicator(tree, rule);
    for (int p = 0; p < tree.num_paths(); ++p) worst_rt = std::max(worst_rt, std::abs(back.p.w[p] - in.witness.w[p]));
    for (int v = 0; v < tree.num_nodes(); ++v) {
      double mass = 0.0;
      for (int p = tree.node(v).first_path; p < tree.node(v).last_path; ++p) mass += in.witness.w[p];
      if (mass > 0.0) worst_rt = std::max(worst_rt, std::abs(back.a.a[v] - ind.a[v]));
    }
  }
  Outcome o;
  o.pass = worst_rec <= kReconstructionTol && martingale_failures == 0 && worst_rt <= kRoundTripTol;
  o.detail = format("reconstruction %.2e, martingale failures %.0f, rule round trip %.2e, re-modified %.0f",
                    worst_rec, martingale_failures, worst_rt, modified);
  return o;
}

Outcome chain_ordering() {
  std::mt19937_64 rng(41);
  int broken = 0;
  double worst = 0.0, best_gap = 0.0;
  for (int k = 0; k < kChainInstances; ++k) {
    Shape s;
    s.max_depth = 2 + k % 2;
    s.max_branch = 3;
    s.options = 1 + k % 2;
    Instance in = testing_support::random_instance(rng, s);
    ChainInstance ci;
    ci.model = &in.model;
    ci.z = in.z;
    ci.y_spec = empty_y_spec(*in.tree);
    ci.slack = kChainSlack;
    const ValueReport r = inequality_chain(ci);
    const double viol = std::max({r.pi_hat - r.pi_A, r.lifted_primal - r.pi_hat, r.static_primal - r.lifted_primal});
    worst = std::max(worst, viol);
    broken += !r.ordering_ok || viol > kChainSlack;
    best_gap = std::max(best_gap, r.lifted_primal - r.static_primal);
  }
  const Json demo = cmd_gap_demo().body["values"];
  const double demo_gap = demo["lifted_primal"].get<double>() - demo["static_primal"].get<double>();
  Outcome o;
  o.pass = broken == 0 && std::max(best_gap, demo_gap) > kWitnessGap;
  o.detail = format("ordering breaches %.0f, worst excess %.2e, largest random gap %.2e, gap-demo gap %.2e", broken,
                    worst, best_gap, demo_gap);
  return o;
}

Outcome continuation_irrelevant() {
  std::mt19937_64 rng(51);
  double worst = 0.0;
  for (int k = 0; k < kContinuationInstances; ++k) {
    Shape s;
    s.all_exercise = k % 2 == 0;
    Instance in = testing_support::random_instance(rng, s);
    const double with = dual_superhedge_american(in.model, in.z).value;
    HedgeOptions h;
    h.continuation = false;
    const double without = dual_superhedge_american(in.model, in.z, h).value;
    worst = std::max(worst, std::abs(with - without));
  }
  Outcome o;
  o.pass = worst <= kContinuationTol;
  o.detail = format("max value change with continuation forced to zero %.2e", worst);
  return o;
}

Outcome pathwise_suite() {
  auto sigma = [](double s) { return [s](const PathPrefix&) { return s; }; };
  double ito = 0.0, tele = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SampledPath path = sample_diffusion(seed, sigma(0.2), 14, {1.0});
    const IntegrandSpec one{[](const PathPrefix& p) { return Vec(p.current().size(), 1.0); }, 1.0, "one"};
    for (int l = 0; l <= 14; ++l) {
      ito = std::max(ito, ito_identity_residual(path, l));
      const IntegralResult r = karandikar_integral(one, path, l);
      for (int j = 0; j <= (1 << l); ++j)
        tele = std::max(tele, std::abs(r.integral[j] - (path.at(l, j)[0] - path.at(l, 0)[0])));
    }
  }
  const double s = 0.3;
  double mean = 0.0;
  for (int seed = 0; seed < 100; ++seed)
    mean += quadratic_variation(sample_diffusion(5000 + seed, sigma(s), 16, {1.0}), 16).at(1 << 16) / 100.0;
  const SampledPath smooth = sample_function([](double t) { return Vec{std::sin(3.0 * t)}; }, 16);
  const double beta = beta_limsup(quadratic_variation(smooth, 16), 0.5);
  Outcome o;
  o.pass = ito <= 1e-12 && tele == 0.0 && std::abs(mean - s * s) <= 0.05 * s * s && std::abs(beta) <= 1e-3;
  o.detail = format("Ito residual %.2e, telescoping %.2e, mean QV %.5f vs %.5f", ito, tele, mean, s * s) +
             format(", smooth beta %.2e", beta);
  return o;
}

Outcome eps_linearity() {
  std::mt19937_64 rng(61);
  double worst = 0.0;
  for (int k = 0; k < kEpsPairs; ++k) {
    Instance in = testing_support::random_instance(rng, {});
    const EnlargedMeasure mu = testing_support::random_enlarged(rng, *in.tree, all_dates(*in.tree));
    const double eps = testing_support::uniform(rng, 0.001, 0.999);
    const EnlargedMeasure me = epsilon_modify(mu, eps);
    const double lhs = expect_stopped(*in.tree, me, in.z);
    const double rhs =
        (1 - eps) * expect_stopped(*in.tree, mu, in.z) + eps * expect_terminal(*in.tree, mu.marginal(), in.z);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  Outcome o;
  o.pass = worst <= kLinearityTol;
  o.detail = format("max linearity residual %.2e", worst);
  return o;
}

Outcome monotonicity() {
  std::mt19937_64 rng(71);
  int band_fail = 0, payoff_fail = 0, option_fail = 0;
  for (int k = 0; k < kMonotonePairs; ++k) {
    Shape s;
    s.max_depth = 2 + k % 2;
    s.options = 2;
    Instance in = testing_support::random_instance(rng, s);
    const double base = primal_enlarged(in.model, in.z).value;

    ModelClass wide = in.model;
    wide.band = in.model.band.widened(testing_support::uniform(rng, 0.0, 0.002), testing_support::uniform(rng, 0.0, 0.02));
    band_fail += primal_enlarged(wide, in.z).value < base - kMonotoneTol;

    AmericanPayoff bigger = in.z;
    for (double& v : bigger.value) v += testing_support::uniform(rng, 0.0, 0.1);
    payoff_fail += primal_enlarged(in.model, bigger).value < base - kMonotoneTol;
    payoff_fail += static_info_value(in.model, bigger).value < static_info_value(in.model, in.z).value - kMonotoneTol;

    // More traded options: fewer calibrated measures, cheaper hedges.
    ModelClass fewer = in.model;
    fewer.g.labels.resize(1);
    for (auto& row : fewer.g.payoff) row.resize(1);
    option_fail += base > primal_enlarged(fewer, in.z).value + kMonotoneTol;
    option_fail += dual_superhedge_american(in.model, in.z).value >
                   dual_superhedge_american(fewer, in.z).value + kMonotoneTol;
  }
  Outcome o;
  o.pass = band_fail == 0 && payoff_fail == 0 && option_fail == 0;
  o.detail = format("failures: band %.0f, payoff %.0f, options %.0f", band_fail, payoff_fail, option_fail);
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  report(1, "gap reproduction", gap_reproduction);
  AgreementStats th;
  bool th_ran = false;
  auto agreement = [&] {
    if (!th_ran) th = agreement_and_duality();
    th_ran = true;
  };
  report(2, "enlarged LP = recursion = static value", [&] { agreement(); return th.values; });
  report(3, "enlarged primal = European dual", [&] { agreement(); return th.duality; });
  report(4, "randomized stopping extraction pipeline", reconstruction_pipeline);
  report(5, "pricing-hedging chain ordering", chain_ordering);
  report(6, "no continuation hedge without options", continuation_irrelevant);
  report(7, "pathwise integration suite", pathwise_suite);
  report(8, "epsilon-modification linearity", eps_linearity);
  report(9, "monotonicity battery", monotonicity);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed;
}
