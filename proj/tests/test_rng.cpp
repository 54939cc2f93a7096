#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "labcvar/rng.hpp"

using labcvar::Rng;

TEST_CASE("same seed reproduces the exact stream, different seeds diverge") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const std::uint64_t x = a.next_u64();
        all_equal = all_equal && (x == b.next_u64());
        any_diff = any_diff || (x != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform stays in range and covers it") {
    Rng rng(1);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);

    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("normal has roughly standard moments") {
    Rng rng(9);
    const int n = 50000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("bounded is unbiased across small moduli") {
    Rng rng(5);
    const std::size_t m = 7;
    std::vector<int> hist(m, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const std::size_t v = rng.bounded(m);
        REQUIRE(v < m);
        ++hist[v];
    }
    for (int h : hist) {
        CHECK(h > n / static_cast<int>(m) - 600);
        CHECK(h < n / static_cast<int>(m) + 600);
    }
}

TEST_CASE("shuffle is a permutation and depends on the seed") {
    std::vector<int> base(100);
    std::iota(base.begin(), base.end(), 0);

    std::vector<int> s1 = base, s2 = base, s3 = base;
    Rng r1(11), r2(11), r3(12);
    r1.shuffle(s1);
    r2.shuffle(s2);
    r3.shuffle(s3);
    CHECK(s1 == s2);
    CHECK(s1 != s3);
    CHECK(s1 != base);

    std::vector<int> sorted = s1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == base);
}

TEST_CASE("seed mixing separates sub-streams of the same base seed") {
    const std::uint64_t s0 = labcvar::mix_seed(123, 0);
    const std::uint64_t s1 = labcvar::mix_seed(123, 1);
    const std::uint64_t s2 = labcvar::mix_seed(124, 0);
    CHECK(s0 != s1);
    CHECK(s0 != s2);
    CHECK(labcvar::mix_seed(123, 0) == s0); // pure function
}
