#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "servesim/metrics.hpp"
#include "servesim/roofline.hpp"
#include "servesim/rng.hpp"
#include "servesim/workload.hpp"

namespace servesim {

// Prefill stage: FIFO admission over instances. An idle instance grabs up to
// bmax requests that have already arrived, runs them as one batch, and the
// whole batch finishes together. Instance scan order is reshuffled each pass
// so ties between idle instances don't systematically favour low indices.
// When no instance can make progress the clock jumps to the earliest moment
// one could: some instance free and the head request arrived.
inline std::vector<double> simulate_prefill_stage(const CostModel& cost,
                                                  const std::vector<double>& arrivals,
                                                  int instances, int bmax,
                                                  std::int64_t prompt_tokens, int tp,
                                                  std::uint64_t seed) {
    const std::size_t n = arrivals.size();
    std::vector<double> done(n, std::numeric_limits<double>::infinity());
    std::vector<double> idle(instances, 0.0);
    Rng rng(derive_seed(seed, kSaltPrefillShuffle));
    std::vector<int> order(instances);
    std::iota(order.begin(), order.end(), 0);

    std::size_t head = 0;
    double now = 0.0;
    while (head < n) {
        bool progressed = false;
        rng.shuffle(order);
        for (int i : order) {
            if (head >= n)
                break;
            if (idle[i] > now)
                continue;
            int k = 0;
            while (k < bmax && head + k < n && arrivals[head + k] <= now)
                ++k;
            if (k == 0)
                continue;
            const double batch_ms = cost.estimate_ms(k, prompt_tokens, 1, tp, Phase::Prefill);
            const double departs = now + batch_ms;
            for (std::size_t r = head; r < head + k; ++r)
                done[r] = departs;
            head += k;
            idle[i] = departs;
            progressed = true;
        }
        if (head < n && !progressed) {
            const double ready = *std::min_element(idle.begin(), idle.end());
            now = std::max(ready, arrivals[head]);
        }
    }
    return done;
}

// Decode stage: each instance owns bmax slots, each slot holds one request
// for its whole generation. Requests enter in ready order (prefill finish,
// then id); a request takes the lowest-index idle slot of the first willing
// instance. The decode time is estimated at the pseudo batch implied by how
// many slots are busy across the whole stage at admission.
inline std::vector<double> simulate_decode_stage(const CostModel& cost,
                                                 const std::vector<double>& ready,
                                                 int instances, int bmax,
                                                 std::int64_t prompt_tokens,
                                                 std::int64_t output_tokens, int tp,
                                                 double tau_b, std::uint64_t seed) {
    const std::size_t n = ready.size();
    std::vector<std::size_t> queue(n);
    std::iota(queue.begin(), queue.end(), std::size_t{0});
    std::stable_sort(queue.begin(), queue.end(),
                     [&](std::size_t a, std::size_t b) { return ready[a] < ready[b]; });

    std::vector<double> done(n, std::numeric_limits<double>::infinity());
    std::vector<std::vector<double>> slots(instances, std::vector<double>(bmax, 0.0));
    Rng rng(derive_seed(seed, kSaltDecodeShuffle));
    std::vector<int> order(instances);
    std::iota(order.begin(), order.end(), 0);

    std::size_t pos = 0;
    double now = 0.0;
    while (pos < n) {
        bool progressed = false;
        rng.shuffle(order);
        for (int i : order) {
            if (pos >= n)
                break;
            const std::size_t rid = queue[pos];
            if (ready[rid] > now)
                break;
            int free_slot = -1;
            for (int j = 0; j < bmax; ++j) {
                if (slots[i][j] <= now) {
                    free_slot = j;
                    break;
                }
            }
            if (free_slot < 0)
                continue;
            int busy = 0;
            for (const auto& inst : slots)
                for (double w : inst)
                    if (w > now)
                        ++busy;
            const int b = pseudo_batch(busy, tau_b);
            const double gen_ms =
                cost.estimate_ms(b, prompt_tokens, output_tokens, tp, Phase::Decode);
            done[rid] = now + gen_ms;
            slots[i][free_slot] = now + gen_ms;
            ++pos;
            progressed = true;
        }
        if (pos < n && !progressed) {
            double earliest = std::numeric_limits<double>::infinity();
            for (const auto& inst : slots)
                for (double w : inst)
                    earliest = std::min(earliest, w);
            now = std::max(earliest, ready[queue[pos]]);
        }
    }
    return done;
}

struct DisaggParams {
    int prefill_instances = 1;
    int decode_instances = 1;
    int tp = 1;
    std::int64_t prompt_tokens = 0;
    std::int64_t output_tokens = 0;
    BatchingSpec batching;
};

inline RunMetrics simulate_disagg(const CostModel& cost, const DisaggParams& p,
                                  const std::vector<double>& arrivals,
                                  std::uint64_t seed) {
    const std::size_t n = arrivals.size();
    const std::vector<double> d1 =
        simulate_prefill_stage(cost, arrivals, p.prefill_instances,
                               p.batching.prefill_max_batch, p.prompt_tokens, p.tp, seed);
    const std::vector<double> d2 =
        simulate_decode_stage(cost, d1, p.decode_instances, p.batching.decode_max_batch,
                              p.prompt_tokens, p.output_tokens, p.tp,
                              p.batching.tau_b, seed);
    RunMetrics m;
    m.ttft.resize(n);
    m.tpot.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        m.ttft[r] = d1[r] - arrivals[r];
        m.tpot[r] = (d2[r] - d1[r]) / static_cast<double>(p.output_tokens);
    }
    return m;
}

} // namespace servesim
