// Benchmarks the two concurrency-sensitive kernels against their serial
// twins and checks that both paths produce identical results:
//   - Monte Carlo replay (per-trial parallelism, explicit serial switch);
//   - adversary corner scan (thread count forced to 1 vs the default).
//
// Usage: bench_kernels [trials] [hours] [seed]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "plantsched/ddccg.hpp"
#include "plantsched/scenario.hpp"

#ifdef PLANTSCHED_HAVE_OPENMP
#include <omp.h>
#endif

namespace f = plantsched::factory;
namespace cg = plantsched::ddccg;
namespace sc = plantsched::scenario;

namespace {

double best_ms_of3(const std::function<void()>& body) {
    double best = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        const auto t1 = std::chrono::steady_clock::now();
        const double ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (rep == 0 || ms < best) best = ms;
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const long trials = argc > 1 ? std::atol(argv[1]) : 20000;
    const int hours = argc > 2 ? std::atoi(argv[2]) : 6;
    const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 7;

#ifdef PLANTSCHED_HAVE_OPENMP
    const int max_threads = omp_get_max_threads();
#else
    const int max_threads = 1;
    std::printf("built without OpenMP: both columns run the serial path\n");
#endif

    sc::SyntheticConfig cfg;
    cfg.workshops = 2;
    cfg.options_per_workshop = 2;
    cfg.horizon = hours;
    cfg.seed = seed;
    const auto inst = sc::gen_synthetic(cfg);
    auto um = inst.uncertainty;
    um.yields = {};  // keep the planted schedule feasible on every draw
    const sc::CoSchedule co{inst.planted, {}};

    std::printf("instance: workshops 2, options/workshop 2, horizon %d, "
                "threads %d\n\n", hours, max_threads);
    std::printf("%-22s %12s %12s %9s  %s\n", "kernel", "serial ms",
                "parallel ms", "speedup", "identical");

    {
        sc::McOptions ser;
        ser.parallel = false;
        sc::McOptions par;
        par.parallel = true;
        sc::McSummary a, b;
        const double t_ser = best_ms_of3(
            [&] { a = sc::monte_carlo_eval(inst.graph, um, co, trials, seed, ser); });
        const double t_par = best_ms_of3(
            [&] { b = sc::monte_carlo_eval(inst.graph, um, co, trials, seed, par); });
        std::printf("%-22s %12.2f %12.2f %8.2fx  %s\n",
                    ("mc_replay(" + std::to_string(trials) + ")").c_str(),
                    t_ser, t_par, t_ser / t_par,
                    a.to_text() == b.to_text() ? "yes" : "NO");
        if (a.to_text() != b.to_text()) return 1;
    }

    {
        auto ctx = cg::build_master(inst.graph, um);
        cg::SpResult a, b;
#ifdef PLANTSCHED_HAVE_OPENMP
        omp_set_num_threads(1);
#endif
        const double t_ser = best_ms_of3(
            [&] { a = cg::solve_sp_oracle(ctx, inst.planted); });
#ifdef PLANTSCHED_HAVE_OPENMP
        omp_set_num_threads(max_threads);
#endif
        const double t_par = best_ms_of3(
            [&] { b = cg::solve_sp_oracle(ctx, inst.planted); });
        const bool same = a.value == b.value && a.worst_u == b.worst_u &&
                          a.corners_evaluated == b.corners_evaluated;
        std::printf("%-22s %12.2f %12.2f %8.2fx  %s\n",
                    ("sp_corner_scan(" +
                     std::to_string(a.corners_evaluated) + ")").c_str(),
                    t_ser, t_par, t_ser / t_par, same ? "yes" : "NO");
        if (!same) return 1;
    }
    return 0;
}
