#pragma once

// OpenMP work loops. Every parallel kernel also runs with Exec::serial,
// which is the reference path used by the tests and the benchmark.

#include <exception>
#include <mutex>
#include <vector>

#include "robustam/lp.hpp"

namespace robustam {

enum class Exec { serial, parallel };

// Worker count: ROBUSTAM_WORKERS if set and positive, else the OpenMP default.
int worker_count();

namespace detail {
void omp_for(int n, void (*body)(void*, int), void* ctx);
}

// Runs f(i) for i in [0, n); the first exception thrown by any iteration is
// rethrown after the loop.
template <class F>
void parallel_for(int n, Exec exec, F&& f) {
  if (exec == Exec::serial || n < 2) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  struct Ctx {
    F* f;
    std::exception_ptr err;
    std::mutex mu;
  } ctx{&f, nullptr, {}};
  detail::omp_for(
      n,
      [](void* p, int i) {
        auto* c = static_cast<Ctx*>(p);
        try {
          (*c->f)(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(c->mu);
          if (!c->err) c->err = std::current_exception();
        }
      },
      &ctx);
  if (ctx.err) std::rethrow_exception(ctx.err);
}

std::vector<lp::Solution> solve_batch(const std::vector<lp::LinearProgram>& lps, Exec exec,
                                      const lp::Options& opt = {});

}  // namespace robustam
