#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "servesim/rng.hpp"
#include "servesim/workload.hpp"

using namespace servesim;

TEST_CASE("same seed reproduces the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i)
        REQUIRE(a.next() == b.next());
}

TEST_CASE("different seeds and derived streams diverge") {
    Rng a(42), b(43);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        equal += a.next() == b.next();
    CHECK(equal == 0);

    CHECK(derive_seed(1, kSaltArrivals) != derive_seed(1, kSaltPrefillShuffle));
    CHECK(derive_seed(1, kSaltArrivals) != derive_seed(2, kSaltArrivals));
}

TEST_CASE("uniform lies in [0,1)") {
    Rng r(7);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("exponential has the right mean") {
    Rng r(11);
    const double rate = 3.5;
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.exponential(rate);
        REQUIRE(x >= 0.0);
        sum += x;
    }
    CHECK(sum / n == Catch::Approx(1.0 / rate).epsilon(0.01));
}

TEST_CASE("below produces bounded values and hits all residues") {
    Rng r(5);
    std::vector<int> seen(10, 0);
    for (int i = 0; i < 10000; ++i) {
        const auto v = r.below(10);
        REQUIRE(v < 10);
        ++seen[v];
    }
    CHECK(*std::min_element(seen.begin(), seen.end()) > 0);
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    Rng a(123), b(123);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::sort(v.begin(), v.end());
    std::vector<int> expect(50);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(v == expect);
}

TEST_CASE("arrivals are strictly increasing and length n") {
    const auto a = generate_arrivals(3.5, 1000, 1);
    REQUIRE(a.size() == 1000);
    for (std::size_t i = 1; i < a.size(); ++i)
        REQUIRE(a[i] > a[i - 1]);
    CHECK(a.front() > 0.0);
}

TEST_CASE("arrival times scale inversely with rate for a fixed seed") {
    // Same seed draws the same uniforms, so each gap scales by the rate
    // ratio; rates only stretch the clock, they never reorder events.
    const auto slow = generate_arrivals(1.0, 500, 9);
    const auto fast = generate_arrivals(4.0, 500, 9);
    for (std::size_t i = 0; i < slow.size(); ++i)
        REQUIRE(fast[i] == Catch::Approx(slow[i] / 4.0).epsilon(1e-12));
}

TEST_CASE("arrivals average the configured rate") {
    const double rate = 2.0;
    const auto a = generate_arrivals(rate, 100000, 3);
    const double mean_gap_ms = a.back() / static_cast<double>(a.size());
    CHECK(mean_gap_ms == Catch::Approx(1e3 / rate).epsilon(0.01));
}
