#include <cmath>
#include <set>

#include "doctest.h"
#include "rcrbm/rng.hpp"

using namespace rcrbm;

TEST_CASE("derive_seed separates components and indices") {
    std::set<std::uint64_t> seen;
    for (const char* name : {"a", "b", "crbm", "folds"})
        for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(42, name, i));
    CHECK(seen.size() == 200);
    CHECK(derive_seed(42, "x", 3) == derive_seed(42, "x", 3));
    CHECK(derive_seed(42, "x") != derive_seed(43, "x"));
}

TEST_CASE("Rng streams are reproducible") {
    Rng a(9), b(9);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("Rng draws have the expected moments") {
    Rng rng(1);
    double su = 0, sn = 0, sn2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(sn / n) < 0.03);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("below stays in range and shuffle is a permutation") {
    Rng rng(2);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits[rng.below(7)];
    for (int h : hits) CHECK(h > 800);

    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    rng.shuffle(v.begin(), v.end());
    std::set<int> s(v.begin(), v.end());
    CHECK(s.size() == 50);
}
