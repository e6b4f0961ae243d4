#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <vector>

#include "servesim/config.hpp"

namespace servesim {

// A candidate deployment: collocation ("3m": three instances serving both
// phases) or disaggregation ("2p1d": two prefill instances feeding one
// decode instance), with one tensor-parallel size across all roles.
struct ServingStrategy {
    enum class Arch { Collocation, Disaggregation };

    Arch arch = Arch::Collocation;
    int collocated = 1;
    int prefill_instances = 0;
    int decode_instances = 0;
    int tp = 1;

    std::string arch_name() const {
        if (arch == Arch::Collocation)
            return std::to_string(collocated) + "m";
        return std::to_string(prefill_instances) + "p" +
               std::to_string(decode_instances) + "d";
    }

    int instances_total() const {
        return arch == Arch::Collocation ? collocated
                                         : prefill_instances + decode_instances;
    }

    int accelerators() const { return instances_total() * tp; }
};

// Parses "3m" / "2p1d". Counts must be >= 1; tp is set by the caller.
inline ServingStrategy parse_arch(const std::string& text) {
    const auto fail = [&]() -> ServingStrategy {
        throw ConfigError("bad arch '" + text + "': expected forms like 2m or 1p1d");
    };
    std::size_t pos = 0;
    const auto read_count = [&]() -> int {
        std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
            ++pos;
        if (pos == start)
            fail();
        const long v = std::stol(text.substr(start, pos - start));
        if (v < 1 || v > 1'000'000)
            fail();
        return static_cast<int>(v);
    };

    ServingStrategy s;
    const int first = read_count();
    if (pos < text.size() && text[pos] == 'm') {
        ++pos;
        if (pos != text.size())
            fail();
        s.arch = ServingStrategy::Arch::Collocation;
        s.collocated = first;
        return s;
    }
    if (pos < text.size() && text[pos] == 'p') {
        ++pos;
        const int second = read_count();
        if (pos >= text.size() || text[pos] != 'd')
            fail();
        ++pos;
        if (pos != text.size())
            fail();
        s.arch = ServingStrategy::Arch::Disaggregation;
        s.prefill_instances = first;
        s.decode_instances = second;
        return s;
    }
    return fail();
}

// Full search space: every collocation size, every disaggregation split
// that fits the instance budget, crossed with every tensor-parallel size.
inline std::vector<ServingStrategy> enumerate_strategies(const SearchSpec& search) {
    if (search.tp_sizes.empty())
        throw ConfigError("search.tp_sizes must not be empty");
    std::vector<ServingStrategy> out;
    for (int tp : search.tp_sizes) {
        for (int m = 1; m <= search.max_instances; ++m) {
            ServingStrategy s;
            s.arch = ServingStrategy::Arch::Collocation;
            s.collocated = m;
            s.tp = tp;
            out.push_back(s);
        }
        for (int y = 1; y + 1 <= search.max_instances; ++y) {
            for (int z = 1; y + z <= search.max_instances; ++z) {
                ServingStrategy s;
                s.arch = ServingStrategy::Arch::Disaggregation;
                s.prefill_instances = y;
                s.decode_instances = z;
                s.tp = tp;
                out.push_back(s);
            }
        }
    }
    return out;
}

} // namespace servesim
