#include "robustam/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace robustam {

int worker_count() {
  if (const char* env = std::getenv("ROBUSTAM_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

namespace detail {
void omp_for(int n, void (*body)(void*, int), void* ctx) {
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
  for (int i = 0; i < n; ++i) body(ctx, i);
}
}  // namespace detail

std::vector<lp::Solution> solve_batch(const std::vector<lp::LinearProgram>& lps, Exec exec, const lp::Options& opt) {
  std::vector<lp::Solution> out(lps.size());
  parallel_for(static_cast<int>(lps.size()), exec, [&](int i) { out[i] = lp::solve(lps[i], opt); });
  return out;
}

}  // namespace robustam
