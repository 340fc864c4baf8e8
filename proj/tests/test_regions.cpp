#include <numeric>

#include "doctest.h"
#include "lesiongrade/error.hpp"
#include "lesiongrade/regions.hpp"
#include "oracles.hpp"

using namespace lesiongrade;

TEST_CASE("all background") {
    LesionMask m(16, 16, LesionClass::EX);
    auto rs = extract_regions(m);
    CHECK(rs.regions.empty());
    CHECK(rs.lesion_class == LesionClass::EX);
    CHECK(count_regions(rs) == 0);
}

TEST_CASE("two corner blocks") {
    LesionMask m(5, 5, LesionClass::MA);
    for (std::size_t r : {0, 1})
        for (std::size_t c : {0, 1}) m.set(r, c, true);
    for (std::size_t r : {3, 4})
        for (std::size_t c : {3, 4}) m.set(r, c, true);
    auto rs = extract_regions(m);
    REQUIRE(count_regions(rs) == 2);
    CHECK(rs.regions[0].size == 4);
    CHECK(rs.regions[1].size == 4);
    CHECK(rs.regions[0].bbox == BoundingBox{0, 0, 1, 1});
    CHECK(rs.regions[1].bbox == BoundingBox{3, 3, 4, 4});
    CHECK(rs.regions[1].seed == Pixel{3, 3});
}

TEST_CASE("diagonal touch merges") {
    LesionMask m(3, 3, LesionClass::MA);
    m.set(0, 2, true);
    m.set(1, 1, true);
    m.set(2, 0, true);
    auto rs = extract_regions(m);
    REQUIRE(rs.regions.size() == 1);
    CHECK(rs.regions[0].size == 3);
    CHECK(rs.regions[0].seed == Pixel{0, 2});
    CHECK(rs.regions[0].bbox == BoundingBox{0, 0, 2, 2});
}

TEST_CASE("U shape needs label merging") {
    // Two arms meet only on the last row.
    LesionMask m(5, 3, LesionClass::MA, {1, 0, 0, 0, 1,  //
                                         1, 0, 0, 0, 1,  //
                                         1, 1, 1, 1, 1});
    auto rs = extract_regions(m);
    REQUIRE(rs.regions.size() == 1);
    CHECK(rs.regions[0].size == 9);
}

TEST_CASE("every 4x4 mask agrees with flood fill") {
    for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
        std::vector<std::uint8_t> px(16);
        for (int i = 0; i < 16; ++i) px[i] = (bits >> i) & 1u;
        LesionMask m(4, 4, LesionClass::MA, px);
        const auto got = oracle::sorted_sizes(extract_regions(m));
        const auto want = oracle::flood_fill_sizes(m);
        if (got != want) {
            FAIL("mismatch for bits " << bits);
        }
    }
}

TEST_CASE("random masks agree with flood fill") {
    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const double density = 0.05 + 0.45 * (i % 10) / 9.0;
        auto m = oracle::random_mask(rng, 64, 64, density);
        CHECK(oracle::sorted_sizes(extract_regions(m)) == oracle::flood_fill_sizes(m));
    }
}

TEST_CASE("region invariants") {
    Rng rng(9);
    auto m = oracle::random_mask(rng, 40, 30, 0.3);
    auto rs = extract_regions(m);
    std::size_t total = 0;
    for (std::size_t i = 0; i < rs.regions.size(); ++i) {
        const auto& r = rs.regions[i];
        CHECK(r.size >= 1);
        CHECK(r.bbox.area() >= r.size);
        CHECK(r.bbox.contains(r.seed));
        CHECK(m.at(r.seed.row, r.seed.col));
        if (i) CHECK(rs.regions[i - 1].seed < r.seed);
        total += r.size;
    }
    CHECK(total == m.foreground_count());
}

TEST_CASE("row order does not change the result") {
    Rng rng(77);
    for (int t = 0; t < 20; ++t) {
        auto m = oracle::random_mask(rng, 33, 21, 0.35);
        std::vector<std::size_t> order(m.height());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        CHECK(extract_regions(m, order) == extract_regions(m));
    }
}

TEST_CASE("row order must be a permutation") {
    LesionMask m(2, 3, LesionClass::MA);
    std::vector<std::size_t> bad = {0, 0, 1};
    CHECK_THROWS_AS(extract_regions(m, bad), InputError);
    std::vector<std::size_t> short_order = {0, 1};
    CHECK_THROWS_AS(extract_regions(m, short_order), InputError);
}
