#pragma once

#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cim {

/// Environment variable consulted for the default worker count.
inline constexpr const char *kThreadsEnvVar = "CIM_THREADS";

/// Resolve the worker count: explicit request > CIM_THREADS > hardware concurrency.
inline int resolve_thread_count(int requested = 0) {
    if (requested > 0) {
        return requested;
    }
    if (const char *env = std::getenv(kThreadsEnvVar)) {
        const int value = std::atoi(env);
        if (value > 0) {
            return value;
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline void set_thread_count(int threads) {
#ifdef _OPENMP
    omp_set_num_threads(resolve_thread_count(threads));
#else
    (void)threads;
#endif
}

/// Runs body(i) for i in [0, n). Iterations must only write to state owned by index i;
/// under that contract results are identical for any thread count.
template <class Body>
void parallel_for(std::size_t n, Body &&body) {
#ifdef _OPENMP
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) {
        body(static_cast<std::size_t>(i));
    }
#else
    for (std::size_t i = 0; i < n; ++i) {
        body(i);
    }
#endif
}

/// Fixed-order pairwise summation. The association tree depends only on the length.
template <class T>
T pairwise_sum(std::span<const T> values) {
    const std::size_t n = values.size();
    if (n == 0) {
        return T{};
    }
    if (n <= 8) {
        T acc = values[0];
        for (std::size_t i = 1; i < n; ++i) {
            acc += values[i];
        }
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

template <class Container>
auto pairwise_sum(const Container &c) {
    using T = typename Container::value_type;
    return pairwise_sum(std::span<const T>(c.data(), c.size()));
}

}  // namespace cim
