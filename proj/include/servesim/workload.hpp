#pragma once

#include <cstdint>
#include <vector>

#include "servesim/rng.hpp"

namespace servesim {

// Poisson arrival times in milliseconds. Gaps are exponential draws divided
// by the rate, so two workloads built from the same seed at different rates
// consume identical uniforms: arrivals at 2*lambda are exactly the arrivals
// at lambda halved. The goodput bisection leans on that scaling to keep its
// feasibility oracle monotone in practice.
inline std::vector<double> generate_arrivals(double rate_per_s, int n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, kSaltArrivals));
    std::vector<double> arrivals;
    arrivals.reserve(static_cast<std::size_t>(n));
    double t_ms = 0.0;
    for (int i = 0; i < n; ++i) {
        t_ms += rng.exponential(rate_per_s) * 1e3;
        arrivals.push_back(t_ms);
    }
    return arrivals;
}

} // namespace servesim
