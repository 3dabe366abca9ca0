#pragma once

// Work-sharing helpers with a serial reference path. Callers write results
// into disjoint per-index slots, so the parallel and serial paths produce
// identical bytes; reductions go through pairwise_sum, whose summation tree
// is fixed by the data length and independent of thread count.

#include <cstddef>
#include <vector>

#if defined(PLANTSCHED_HAVE_OPENMP)
#include <omp.h>
#endif

namespace plantsched {

template <class F>
inline void serial_for(std::size_t n, F&& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

// fn(i) for i in [0, n); runs under OpenMP when available and `parallel`
// is true, otherwise falls back to serial_for.
template <class F>
inline void parallel_for(std::size_t n, F&& fn, bool parallel = true) {
#if defined(PLANTSCHED_HAVE_OPENMP)
    if (parallel && n > 1) {
        const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < nn; ++i) fn(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)parallel;
#endif
    serial_for(n, fn);
}

inline int max_threads() {
#if defined(PLANTSCHED_HAVE_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace detail {
inline double pairwise_sum_range(const double* v, std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += v[i];
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum_range(v, lo, mid) + pairwise_sum_range(v, mid, hi);
}
}  // namespace detail

inline double pairwise_sum(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return detail::pairwise_sum_range(v.data(), 0, v.size());
}

}  // namespace plantsched
