#include <doctest.h>

#include <cmath>
#include <set>

#include "grif/rng.hpp"

using grif::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed gives identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("child streams differ from each other and the parent") {
    Rng root(7);
    Rng c0 = root.child(0), c1 = root.child(1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (c0.next_u64() == c1.next_u64()) ++same;
    CHECK(same == 0);
    // child() is const on the parent: derivation does not consume draws.
    Rng c0_again = root.child(0);
    Rng c0_ref = Rng(7).child(0);
    CHECK(c0_again.next_u64() == c0_ref.next_u64());
}

TEST_CASE("uniform mean obeys the law of large numbers") {
    Rng rng(123);
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += rng.uniform();
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("normal draws have roughly unit variance") {
    Rng rng(5);
    double sum = 0, sq = 0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("permutation is a bijection") {
    Rng rng(9);
    const auto p = rng.permutation(257);
    std::set<uint32_t> seen(p.begin(), p.end());
    CHECK(seen.size() == 257);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 256);
}

TEST_CASE("below stays in range and covers small domains") {
    Rng rng(11);
    std::set<uint64_t> seen;
    for (int i = 0; i < 200; ++i) seen.insert(rng.below(5));
    CHECK(seen.size() == 5);
    CHECK(*seen.rbegin() == 4);
    CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
}

}  // TEST_SUITE
