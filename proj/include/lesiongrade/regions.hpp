#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lesiongrade/lesion.hpp"
#include "lesiongrade/mask_io.hpp"

namespace lesiongrade {

struct Pixel {
    std::size_t row = 0;
    std::size_t col = 0;

    friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

struct BoundingBox {
    std::size_t min_row = 0;
    std::size_t min_col = 0;
    std::size_t max_row = 0;
    std::size_t max_col = 0;

    std::size_t area() const { return (max_row - min_row + 1) * (max_col - min_col + 1); }
    bool contains(const Pixel& p) const {
        return p.row >= min_row && p.row <= max_row && p.col >= min_col && p.col <= max_col;
    }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// One 8-connected lesion region.
struct Region {
    std::size_t size = 0;
    BoundingBox bbox;
    Pixel seed;  // lexicographically smallest (row, col) member

    friend bool operator==(const Region&, const Region&) = default;
};

struct RegionSet {
    LesionClass lesion_class = LesionClass::MA;
    std::vector<Region> regions;  // sorted by seed

    friend bool operator==(const RegionSet&, const RegionSet&) = default;
};

// Two-pass union-find labelling under 8-connectivity.
RegionSet extract_regions(const LesionMask& mask);

// Same result, but the labelling pass visits rows in `row_order` (a
// permutation of 0..height-1). Output is normalized and identical to the
// raster-order result.
RegionSet extract_regions(const LesionMask& mask, std::span<const std::size_t> row_order);

inline std::size_t count_regions(const RegionSet& set) { return set.regions.size(); }

}  // namespace lesiongrade
