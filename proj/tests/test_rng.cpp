#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "pbql/rng.hpp"

using namespace pbql;

TEST_CASE("uniform01 stays in [0,1) and is deterministic per seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(a);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(u == uniform01(b));
    }
}

TEST_CASE("bernoulli respects degenerate probabilities") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        REQUIRE(bernoulli(rng, 1.0) == 1);
        REQUIRE(bernoulli(rng, 0.0) == 0);
    }
}

TEST_CASE("categorical covers the support and handles rounding shortfall") {
    Rng rng(3);
    const std::vector<double> probs{0.2, 0.5, 0.3};
    std::vector<int> counts(3, 0);
    for (int i = 0; i < 30000; ++i) ++counts[categorical(rng, probs)];
    for (int k = 0; k < 3; ++k) {
        const double freq = counts[k] / 30000.0;
        REQUIRE(std::abs(freq - probs[k]) < 0.02);
    }

    // a vector that sums slightly below one still yields a valid index
    const std::vector<double> shy{0.3, 0.3, 0.3999999};
    for (int i = 0; i < 1000; ++i) {
        const int k = categorical(rng, shy);
        REQUIRE(k >= 0);
        REQUIRE(k <= 2);
    }

    REQUIRE_THROWS_AS(categorical(rng, std::span<const double>{}), DomainError);
}

TEST_CASE("derive_seed separates streams, labels, and indices") {
    const std::uint64_t master = 123456;
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 100; ++i) {
        seen.insert(derive_seed(master, "gen", i));
        seen.insert(derive_seed(master, "eval", i));
    }
    REQUIRE(seen.size() == 200);

    REQUIRE(derive_seed(master, "gen", 5) == derive_seed(master, "gen", 5));
    REQUIRE(derive_seed(master, "gen", 5) != derive_seed(master + 1, "gen", 5));
}

TEST_CASE("fnv1a64 matches the published test vectors") {
    REQUIRE(fnv1a64("") == 0xcbf29ce484222325ULL);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    REQUIRE(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
