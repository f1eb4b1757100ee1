#pragma once

#include <cstdlib>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace openess {

/// Worker-pool bound: OPENESS_THREADS if set, otherwise the OpenMP default.
inline int thread_count() {
    if (const char* env = std::getenv("OPENESS_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void apply_thread_env() {
#ifdef _OPENMP
    omp_set_num_threads(thread_count());
#endif
}

/// Sums fn(i) for i in [0, n) with a result that does not depend on the
/// thread count: fixed-size blocks are summed independently and the block
/// partials are combined in index order.
template <typename Fn>
double deterministic_sum(std::size_t n, Fn&& fn, std::size_t block = 4096) {
    if (n == 0) return 0.0;
    const std::size_t nblocks = (n + block - 1) / block;
    std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
    for (long long bi = 0; bi < static_cast<long long>(nblocks); ++bi) {
        const std::size_t lo = static_cast<std::size_t>(bi) * block;
        const std::size_t hi = lo + block < n ? lo + block : n;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += fn(i);
        partial[static_cast<std::size_t>(bi)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace openess
