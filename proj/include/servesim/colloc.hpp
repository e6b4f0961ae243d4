#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "servesim/metrics.hpp"
#include "servesim/roofline.hpp"
#include "servesim/rng.hpp"

namespace servesim {

struct CollocParams {
    int instances = 1;
    int tp = 1;
    std::int64_t prompt_tokens = 0;
    std::int64_t output_tokens = 0;
    BatchingSpec batching;
};

// Collocated serving: every instance handles both phases. Admitting a
// prefill batch on an instance suspends its decode work for the batch
// duration; suspension is bookkeeping (a status flip plus a scheduled
// resume), the decode slots keep their completion times. Events are
// processed one per iteration at the earliest actionable time, ties broken
// resume > prefill > decode so instances come back to decode duty before
// new work lands on them.
class CollocSimulator {
public:
    CollocSimulator(const CostModel& cost, const CollocParams& p,
                    const std::vector<double>& arrivals, std::uint64_t seed)
        : cost_(cost), p_(p), arrivals_(arrivals),
          rng_(derive_seed(seed, kSaltCollocShuffle)),
          status_(p.instances, Status::Decode), wip_(p.instances, 0.0),
          slots_(p.instances, std::vector<double>(p.batching.decode_max_batch, 0.0)),
          d1_(arrivals.size(), 0.0), d2_(arrivals.size(), 0.0),
          order_(p.instances) {
        std::iota(order_.begin(), order_.end(), 0);
    }

    RunMetrics run() {
        const std::size_t n = arrivals_.size();
        while (head_ < n || !queue_.empty() || !resume_.empty()) {
            const double tr = next_resume();
            const double tp = next_prefill();
            const double td = next_decode();
            const double tmin = std::min({tr, tp, td});
            now_ = std::max(now_, tmin);
            if (tr == tmin) {
                finish_resume(tr);
                continue;
            }
            rng_.shuffle(order_);
            if (tp == tmin)
                admit_prefill();
            else
                admit_decode();
        }
        RunMetrics m;
        m.ttft.resize(n);
        m.tpot.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            m.ttft[r] = d1_[r] - arrivals_[r];
            m.tpot[r] = (d2_[r] - d1_[r]) / static_cast<double>(p_.output_tokens);
        }
        return m;
    }

private:
    enum class Status { Decode, Prefill };

    static constexpr double kInf = std::numeric_limits<double>::infinity();

    double next_resume() const {
        double t = kInf;
        for (const auto& [i, when] : resume_)
            t = std::min(t, when);
        return t;
    }
    double next_prefill() const {
        return head_ < arrivals_.size() ? std::max(arrivals_[head_], now_) : kInf;
    }
    double next_decode() const {
        return queue_.empty() ? kInf : std::max(queue_.front().first, now_);
    }

    void finish_resume(double when) {
        // Lowest instance index among those due, so ties resolve the same
        // way every run.
        for (auto it = resume_.begin(); it != resume_.end(); ++it) {
            if (it->second == when) {
                status_[it->first] = Status::Decode;
                resume_.erase(it);
                return;
            }
        }
        throw std::logic_error("resume event vanished");
    }

    void admit_prefill() {
        int chosen = -1;
        for (int i : order_) {
            if (status_[i] == Status::Decode || wip_[i] <= now_) {
                chosen = i;
                break;
            }
        }
        if (chosen < 0) {
            std::vector<double> cands{next_resume(), next_decode()};
            cands.insert(cands.end(), wip_.begin(), wip_.end());
            advance_past(cands);
            return;
        }
        const std::size_t n = arrivals_.size();
        int k = 0;
        while (k < p_.batching.prefill_max_batch && head_ + k < n &&
               arrivals_[head_ + k] <= now_)
            ++k;
        const double batch_ms =
            cost_.estimate_ms(k, p_.prompt_tokens, 1, p_.tp, Phase::Prefill);
        const double departs = now_ + batch_ms;
        if (status_[chosen] == Status::Decode) {
            status_[chosen] = Status::Prefill;
            resume_[chosen] = departs;
        } else {
            // Back-to-back prefill: push the pending resume out by this
            // batch's duration.
            const auto it = resume_.find(chosen);
            resume_[chosen] = (it != resume_.end() ? it->second : now_) + batch_ms;
        }
        wip_[chosen] = departs;
        for (std::size_t r = head_; r < head_ + k; ++r) {
            d1_[r] = departs;
            queue_.emplace_back(departs, r);
        }
        head_ += k;
        std::sort(queue_.begin(), queue_.end());
    }

    void admit_decode() {
        const std::size_t rid = queue_.front().second;
        int chosen = -1;
        for (int i : order_) {
            bool ok = false;
            for (double w : slots_[i]) {
                if (w <= now_) {
                    ok = true;
                    break;
                }
            }
            if (status_[i] == Status::Prefill)
                ok = ok && wip_[i] <= now_;
            if (ok) {
                chosen = i;
                break;
            }
        }
        if (chosen < 0) {
            std::vector<double> cands{next_resume(), next_prefill()};
            for (int i = 0; i < p_.instances; ++i) {
                cands.insert(cands.end(), slots_[i].begin(), slots_[i].end());
                cands.push_back(wip_[i]);
            }
            advance_past(cands);
            return;
        }
        int slot = -1;
        for (int j = 0; j < p_.batching.decode_max_batch; ++j) {
            if (slots_[chosen][j] <= now_) {
                slot = j;
                break;
            }
        }
        int busy = 0;
        for (const auto& inst : slots_)
            for (double w : inst)
                if (w > now_)
                    ++busy;
        const int b = pseudo_batch(busy, p_.batching.tau_b);
        const double gen_ms =
            cost_.estimate_ms(b, p_.prompt_tokens, p_.output_tokens, p_.tp, Phase::Decode);
        slots_[chosen][slot] = now_ + gen_ms;
        d2_[rid] = now_ + gen_ms;
        queue_.erase(queue_.begin());
    }

    // Jump to the earliest candidate strictly past now. Progress is
    // guaranteed as long as some pending completion exists; anything else
    // is a scheduler bug, not a reachable state.
    void advance_past(const std::vector<double>& cands) {
        double best = kInf;
        for (double c : cands)
            if (c > now_)
                best = std::min(best, c);
        if (!std::isfinite(best))
            throw std::logic_error("collocation scheduler stalled");
        now_ = best;
    }

    const CostModel& cost_;
    CollocParams p_;
    std::vector<double> arrivals_;
    Rng rng_;

    std::vector<Status> status_;
    std::vector<double> wip_;
    std::vector<std::vector<double>> slots_;
    std::map<int, double> resume_;
    std::vector<std::pair<double, std::size_t>> queue_;
    std::vector<double> d1_, d2_;
    std::vector<int> order_;
    std::size_t head_ = 0;
    double now_ = 0.0;
};

inline RunMetrics simulate_colloc(const CostModel& cost, const CollocParams& p,
                                  const std::vector<double>& arrivals,
                                  std::uint64_t seed) {
    return CollocSimulator(cost, p, arrivals, seed).run();
}

} // namespace servesim
