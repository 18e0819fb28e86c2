#pragma once

#include <cstddef>
#include <span>
#include <thread>
#include <vector>

namespace hjbqvi {

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
// the result is bitwise identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Pairwise summation with a fixed tree shape. The result depends only on the
// contents of xs, never on how the values were produced or scheduled.
inline double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = xs[0];
        for (std::size_t i = 1; i < n; ++i) s += xs[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_mean(std::span<const double> xs) {
    return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

} // namespace hjbqvi
