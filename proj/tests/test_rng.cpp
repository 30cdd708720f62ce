#include "sxr/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using sxr::RngStream;

TEST_CASE("rng: identical seed and ids reproduce the sequence exactly") {
    RngStream a(42, {3, 7, 11});
    RngStream b(42, {3, 7, 11});
    for (int i = 0; i < 256; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: changing any stream id changes the sequence") {
    RngStream base(42, {3, 7, 11});
    std::vector<std::uint64_t> ref;
    for (int i = 0; i < 64; ++i) ref.push_back(base.next_u64());

    for (RngStream other : {RngStream(43, {3, 7, 11}), RngStream(42, {4, 7, 11}),
                            RngStream(42, {3, 8, 11}), RngStream(42, {3, 7, 12})}) {
        bool any_diff = false;
        for (int i = 0; i < 64; ++i) any_diff |= other.next_u64() != ref[static_cast<std::size_t>(i)];
        CHECK(any_diff);
    }
}

TEST_CASE("rng: next_unit stays in [0,1) and matches its sample mean/variance") {
    RngStream r(7);
    const int n = 40000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double u = r.next_unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    // DERIVED: U(0,1) has mean 1/2, var 1/12; 5-sigma CLT bands for n = 40000
    CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("rng: uniform respects bounds and uniform_int covers all residues") {
    RngStream r(1234, {1});
    for (int i = 0; i < 1000; ++i) {
        double x = r.uniform(-2.5, 4.0);
        CHECK(x >= -2.5);
        CHECK(x < 4.0);
    }
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        std::uint64_t k = r.uniform_int(7);
        REQUIRE(k < 7);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("rng: gaussian draws have Irwin-Hall moments and hard bounds") {
    RngStream r(99, {0});
    const int n = 40000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double g = r.next_gauss();
        // Irwin-Hall(12) - 6 is bounded to [-6, 6] by construction
        REQUIRE(std::abs(g) <= 6.0);
        sum += g;
        sum2 += g * g;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    // DERIVED: sum of 12 U(0,1) minus 6 has mean 0 and variance exactly 1
    CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng: next_bool frequency tracks p") {
    RngStream r(5, {2, 2});
    const int n = 40000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += r.next_bool(0.3) ? 1 : 0;
    double f = static_cast<double>(hits) / n;
    // DERIVED: Bernoulli(0.3) 5-sigma band
    CHECK(std::abs(f - 0.3) < 5.0 * std::sqrt(0.3 * 0.7 / n));
}
