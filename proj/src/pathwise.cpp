#include "robustam/pathwise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "robustam/errors.hpp"

namespace robustam {

namespace {

// Neumaier compensated running sum.
struct Compensated {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

void check_level(const SampledPath& path, int level) {
  if (level < 0) throw InvalidArgument("pathwise: negative level");
  if (level > path.level)
    throw InvalidArgument("pathwise: level " + std::to_string(level) + " exceeds the path resolution " +
                          std::to_string(path.level));
}

double sup_distance(const Vec& fine, const Vec& coarse) {
  double d = 0.0;
  for (std::size_t k = 0; k < coarse.size(); ++k) d = std::max(d, std::abs(fine[2 * k] - coarse[k]));
  return d;
}

// Cauchy check over the last opt.history ratios of the distance sequence.
bool cauchy(const std::vector<std::pair<int, double>>& dist, const IntegrationOptions& opt) {
  for (std::size_t i = 1; i < dist.size(); ++i) {
    const double prev = dist[i - 1].second, cur = dist[i].second;
    if (cur <= opt.floor) continue;
    if (cur > opt.ratio * prev) return false;
  }
  return true;
}

int first_checked_level(int level, const IntegrationOptions& opt) { return std::max(1, level - opt.history); }

}  // namespace

SampledPath SampledPath::coarsen(int l) const {
  check_level(*this, l);
  SampledPath out;
  out.level = l;
  out.seed = seed;
  out.generator = generator;
  const int n = 1 << l;
  for (int j = 0; j <= n; ++j) out.values.push_back(at(l, j));
  return out;
}

void SampledPath::validate() const {
  if (level < 0 || level > kMaxLevel) throw InvalidArgument("sampled path: level out of range");
  if (values.size() != (std::size_t{1} << level) + 1) throw InvalidArgument("sampled path: wrong number of points");
  for (const Vec& v : values) {
    if (v.size() != values[0].size()) throw InvalidArgument("sampled path: ragged values");
    for (double x : v)
      if (!std::isfinite(x)) throw InvalidArgument("sampled path: non-finite value");
  }
}

const Vec& PathPrefix::value(int j) const {
  if (j > index_) throw NonAdaptedError("integrand looked ahead of the current time");
  return path_->at(level_, j);
}

Vec riemann_sums(const IntegrandSpec& q, const SampledPath& path, int level) {
  check_level(path, level);
  const int n = 1 << level;
  const int d = path.dim();
  Vec out(n + 1, 0.0);
  Compensated acc;
  for (int k = 0; k < n; ++k) {
    const Vec qk = q.q(PathPrefix(path, level, k));
    if (static_cast<int>(qk.size()) != d) throw InvalidArgument("integrand dimension differs from the path");
    const Vec& a = path.at(level, k);
    const Vec& b = path.at(level, k + 1);
    for (int i = 0; i < d; ++i) acc.add(qk[i] * (b[i] - a[i]));
    out[k + 1] = acc.value();
  }
  return out;
}

IntegralResult karandikar_integral(const IntegrandSpec& q, const SampledPath& path, int level,
                                   const IntegrationOptions& opt) {
  check_level(path, level);
  IntegralResult out;
  out.level = level;
  const int first = first_checked_level(level, opt);
  Vec coarse = level >= 1 ? riemann_sums(q, path, first - 1) : Vec{};
  for (int l = first; l <= level; ++l) {
    Vec fine = riemann_sums(q, path, l);
    out.distances.emplace_back(l, sup_distance(fine, coarse));
    coarse = std::move(fine);
  }
  out.integral = level >= 1 ? std::move(coarse) : riemann_sums(q, path, 0);
  // Bound diagnostics on the finest mesh.
  const int n = 1 << level;
  for (int k = 0; k < n; ++k)
    for (double x : q.q(PathPrefix(path, level, k))) out.q_sup = std::max(out.q_sup, std::abs(x));
  out.bound_ok = out.q_sup <= q.bound;
  out.convergent = cauchy(out.distances, opt);
  if (!out.convergent && opt.strict) {
    std::fill(out.integral.begin(), out.integral.end(), 0.0);
    out.zeroed = true;
  }
  return out;
}

namespace {

std::vector<Vec> qv_at(const SampledPath& path, int level) {
  const int d = path.dim();
  const int n = 1 << level;
  std::vector<Vec> out(n + 1, Vec(static_cast<std::size_t>(d) * d, 0.0));
  // int X^i dX^j for every (i, j)
  std::vector<Vec> integ(static_cast<std::size_t>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      IntegrandSpec q{[i, j, d](const PathPrefix& pre) {
                        Vec r(d, 0.0);
                        r[j] = pre.current()[i];
                        return r;
                      },
                      std::numeric_limits<double>::infinity(), "x"};
      integ[static_cast<std::size_t>(i) * d + j] = riemann_sums(q, path, level);
    }
  const Vec& x0 = path.at(level, 0);
  for (int k = 0; k <= n; ++k) {
    const Vec& x = path.at(level, k);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out[k][i * d + j] = (x[i] * x[j] - x0[i] * x0[j]) - integ[i * d + j][k] - integ[j * d + i][k];
  }
  return out;
}

double sup_distance(const std::vector<Vec>& fine, const std::vector<Vec>& coarse) {
  double s = 0.0;
  for (std::size_t k = 0; k < coarse.size(); ++k)
    for (std::size_t e = 0; e < coarse[k].size(); ++e) s = std::max(s, std::abs(fine[2 * k][e] - coarse[k][e]));
  return s;
}

}  // namespace

QVResult quadratic_variation(const SampledPath& path, int level, const IntegrationOptions& opt) {
  check_level(path, level);
  QVResult out;
  out.level = level;
  out.dim = path.dim();
  if (level >= 1) {
    const int first = first_checked_level(level, opt);
    std::vector<Vec> coarse = qv_at(path, first - 1);
    for (int l = first; l <= level; ++l) {
      std::vector<Vec> fine = qv_at(path, l);
      out.distances.emplace_back(l, sup_distance(fine, coarse));
      coarse = std::move(fine);
    }
    out.qv = std::move(coarse);
  } else {
    out.qv = qv_at(path, 0);
  }
  out.convergent = cauchy(out.distances, opt);
  if (!out.convergent && opt.strict) {
    for (Vec& m : out.qv) std::fill(m.begin(), m.end(), 0.0);
    out.zeroed = true;
  }
  const int n_lo = std::max(0, level - 6);
  for (int k = 1; k <= (1 << n_lo); ++k) {
    const double t = std::ldexp(static_cast<double>(k), -n_lo);
    out.beta.emplace_back(t, beta_limsup(out, t, n_lo, level));
  }
  return out;
}

double beta_limsup(const QVResult& qv, double t, int n_lo, int n_hi, int i, int j) {
  if (n_lo < 0 || n_hi > qv.level || n_lo > n_hi) throw InvalidArgument("beta: bad window");
  if (i < 0 || j < 0 || i >= qv.dim || j >= qv.dim) throw InvalidArgument("beta: bad entry");
  const double scaled = std::ldexp(t, qv.level);
  const long idx = std::lround(scaled);
  if (std::abs(scaled - static_cast<double>(idx)) > 1e-9 || idx < 0 || idx > (1L << qv.level))
    throw InvalidArgument("beta: t is not a grid point");
  if (idx < (1L << (qv.level - n_lo))) throw InvalidArgument("beta: t too small for the window");
  double best = -std::numeric_limits<double>::infinity();
  for (int n = n_lo; n <= n_hi; ++n) {
    const long lag = 1L << (qv.level - n);
    best = std::max(best, std::ldexp(qv.at(idx, i, j) - qv.at(idx - lag, i, j), n));
  }
  return best;
}

double beta_limsup(const QVResult& qv, double t) { return beta_limsup(qv, t, std::max(0, qv.level - 6), qv.level); }

SampledPath sample_diffusion(std::uint64_t seed, const SigmaFn& sigma, int level, Vec x0) {
  if (level < 0 || level > kMaxLevel) throw InvalidArgument("sample_diffusion: level out of range");
  if (x0.empty()) throw InvalidArgument("sample_diffusion: empty start value");
  SampledPath out;
  out.level = level;
  out.seed = seed;
  out.generator = "gaussian-mt19937_64";
  const int n = 1 << level;
  out.values.reserve(n + 1);
  out.values.push_back(std::move(x0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double scale = std::ldexp(1.0, -level);
  const double root = std::sqrt(scale);
  for (int k = 0; k < n; ++k) {
    const double s = sigma(PathPrefix(out, level, k));
    if (!std::isfinite(s)) throw InvalidArgument("sample_diffusion: non-finite sigma");
    Vec next = out.values.back();
    for (double& x : next) x += s * root * normal(rng);
    out.values.push_back(std::move(next));
  }
  return out;
}

SampledPath sample_function(const std::function<Vec(double)>& f, int level) {
  if (level < 0 || level > kMaxLevel) throw InvalidArgument("sample_function: level out of range");
  SampledPath out;
  out.level = level;
  out.generator = "function";
  for (int k = 0; k <= (1 << level); ++k) out.values.push_back(f(std::ldexp(static_cast<double>(k), -level)));
  out.validate();
  return out;
}

double ito_identity_residual(const SampledPath& path, int level) {
  check_level(path, level);
  const int n = 1 << level;
  double worst = 0.0;
  for (int i = 0; i < path.dim(); ++i) {
    Compensated left, squares;
    for (int k = 0; k < n; ++k) {
      const double a = path.at(level, k)[i], b = path.at(level, k + 1)[i];
      left.add(a * (b - a));
      squares.add((b - a) * (b - a));
    }
    const double x0 = path.at(level, 0)[i], xT = path.at(level, n)[i];
    Compensated r;
    r.add(xT * xT);
    r.add(-x0 * x0);
    r.add(-2.0 * left.value());
    r.add(-squares.value());
    worst = std::max(worst, std::abs(r.value()));
  }
  return worst;
}

}  // namespace robustam
