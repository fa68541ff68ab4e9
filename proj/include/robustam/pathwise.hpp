#pragma once

// Dyadic Riemann-sum integration, quadratic variation and diffusion
// characteristic estimates on sampled high-resolution paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "robustam/lattice.hpp"

namespace robustam {

inline constexpr int kDefaultLevel = 14;
inline constexpr int kMaxLevel = 22;

// Values on the dyadic grid of [0, 1] with 2^level steps. The level-l view
// is the subsequence at stride 2^(level - l).
struct SampledPath {
  int level = 0;
  std::vector<Vec> values;
  std::uint64_t seed = 0;
  std::string generator;

  int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
  const Vec& at(int l, int j) const { return values[static_cast<std::size_t>(j) << (level - l)]; }
  SampledPath coarsen(int l) const;
  void validate() const;
};

// What an integrand may look at: the path observed on the level-l mesh up
// to the current grid index.
class PathPrefix {
 public:
  PathPrefix(const SampledPath& path, int level, int index) : path_(&path), level_(level), index_(index) {}
  int level() const { return level_; }
  int index() const { return index_; }
  double time() const { return std::ldexp(static_cast<double>(index_), -level_); }
  const Vec& current() const { return path_->at(level_, index_); }
  // Throws NonAdaptedError for j beyond the current index.
  const Vec& value(int j) const;

 private:
  const SampledPath* path_;
  int level_;
  int index_;
};

struct IntegrandSpec {
  std::function<Vec(const PathPrefix&)> q;  // row vector, one entry per coordinate
  double bound = std::numeric_limits<double>::infinity();
  std::string name;
};

struct IntegrationOptions {
  bool strict = false;      // zero the result when the Cauchy check fails
  int history = 3;          // ratios checked
  double ratio = 0.9;       // required shrink factor per level
  double floor = 1e-12;     // distances below this count as converged
};

struct IntegralResult {
  int level = 0;
  Vec integral;  // per grid point of `level`
  std::vector<std::pair<int, double>> distances;  // (l, sup distance between levels l and l-1)
  bool convergent = true;
  bool zeroed = false;
  double q_sup = 0.0;  // largest |q| met
  bool bound_ok = true;
};

// Left-point sums sum_k q(t_k) (X_{t_{k+1}} - X_{t_k}) on the mesh 2^-level,
// compensated summation.
IntegralResult karandikar_integral(const IntegrandSpec& q, const SampledPath& path, int level,
                                   const IntegrationOptions& opt = {});

// Plain left sums at one level, no diagnostics.
Vec riemann_sums(const IntegrandSpec& q, const SampledPath& path, int level);

struct QVResult {
  int level = 0;
  int dim = 0;
  std::vector<Vec> qv;  // per grid point, d x d row-major
  std::vector<std::pair<int, double>> distances;
  bool convergent = true;
  bool zeroed = false;
  std::vector<std::pair<double, double>> beta;  // (t, estimate of entry (0,0))

  double at(int index, int i = 0, int j = 0) const { return qv[index][static_cast<std::size_t>(i) * dim + j]; }
  double time(int index) const { return std::ldexp(static_cast<double>(index), -level); }
};

// <X>_t = X_t X_t' - X_0 X_0' - int (X dX' + dX X'), each integral a left
// sum. beta is filled at the points of the coarsest window level.
QVResult quadratic_variation(const SampledPath& path, int level, const IntegrationOptions& opt = {});

// max over n in [n_lo, n_hi] of (<X>_t - <X>_{t - 2^-n}) 2^n for entry (i, j).
double beta_limsup(const QVResult& qv, double t, int n_lo, int n_hi, int i = 0, int j = 0);
// Window n in {level - 6, ..., level}.
double beta_limsup(const QVResult& qv, double t);

// Per-step standard deviation sigma(t, prefix) 2^{-level/2}, independent
// Gaussian draws per coordinate, generated at `level`.
using SigmaFn = std::function<double(const PathPrefix&)>;
SampledPath sample_diffusion(std::uint64_t seed, const SigmaFn& sigma, int level = kDefaultLevel, Vec x0 = {0.0});

// Path from a function of time on the grid.
SampledPath sample_function(const std::function<Vec(double)>& f, int level = kDefaultLevel);

// X_T^2 - X_0^2 - 2 sum X dX - sum (dX)^2 per coordinate, largest absolute value.
double ito_identity_residual(const SampledPath& path, int level);

}  // namespace robustam
