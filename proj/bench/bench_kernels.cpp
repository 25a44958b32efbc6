// Timing comparison of the serial reference kernels against the OpenMP paths.
// The two must agree bit-for-bit; this target reports how much the parallel
// loops buy on the current machine.

#include <chrono>
#include <cstdio>

#include "fmmlab/distribution.hpp"
#include "fmmlab/traversal.hpp"

using namespace fmmlab;
using namespace fmmlab::core;

namespace {

double time_once(auto&& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-24s %10.3f ms %10.3f ms %8.2fx  %s\n", name, serial * 1e3, parallel * 1e3,
              serial / parallel, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = argc > 1 ? static_cast<std::size_t>(std::atol(argv[1])) : 20000;
  auto ps = space::generate({space::DistKind::SphereSurface, n, 1});
  std::printf("n = %zu sphere-surface particles\n", n);
  std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  {
    Particles a = ps, b = ps;
    double ts = time_once([&] { direct_sum(a, Parallel::Serial); });
    double tp = time_once([&] { direct_sum(b, Parallel::OpenMP); });
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same = same && a[i].phi == b[i].phi;
    row("direct_sum", ts, tp, same);
  }
  {
    TraversalConfig cfg{0.4, 64, 4};
    Tree base = build_tree(ps, bounding_box(ps), cfg);
    upward_pass(base, cfg);
    Tree a = base, b = base;
    double ts = time_once([&] { evaluate(a, cfg, Parallel::Serial); });
    double tp = time_once([&] { evaluate(b, cfg, Parallel::OpenMP); });
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same = same && a.particles[i].phi == b.particles[i].phi;
    row("fmm evaluate", ts, tp, same);
  }
  {
    TraversalConfig cfg{0.4, 64, 6};
    Tree base = build_tree(ps, bounding_box(ps), cfg);
    upward_pass(base, cfg);
    Tree a = base, b = base;
    double ts = time_once([&] { evaluate(a, cfg, Parallel::Serial); });
    double tp = time_once([&] { evaluate(b, cfg, Parallel::OpenMP); });
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) same = same && a.particles[i].phi == b.particles[i].phi;
    row("fmm evaluate p=6", ts, tp, same);
  }
  return 0;
}
