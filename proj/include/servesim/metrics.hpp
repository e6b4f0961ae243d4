#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace servesim {

// Nearest-rank percentile on a sorted copy: the smallest element with at
// least p*n observations at or below it. p in (0, 1].
inline double percentile(std::vector<double> values, double p) {
    if (values.empty())
        throw std::invalid_argument("percentile of empty sample");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n));
    if (rank < 1)
        rank = 1;
    return values[rank - 1];
}

struct LatencySummary {
    double mean = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    double p99 = 0.0;
};

inline LatencySummary summarize(const std::vector<double>& values) {
    LatencySummary s;
    double total = 0.0;
    for (double v : values)
        total += v;
    s.mean = total / static_cast<double>(values.size());
    s.p50 = percentile(values, 0.50);
    s.p90 = percentile(values, 0.90);
    s.p99 = percentile(values, 0.99);
    return s;
}

// Per-request latency samples for one simulated run, id-ordered, in ms.
struct RunMetrics {
    std::vector<double> ttft;
    std::vector<double> tpot;
};

} // namespace servesim
