#include "lesiongrade/regions.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "lesiongrade/error.hpp"

namespace lesiongrade {

namespace {

class DisjointSets {
public:
    std::uint32_t make() {
        const auto id = static_cast<std::uint32_t>(parent_.size());
        parent_.push_back(id);
        rank_.push_back(0);
        return id;
    }

    std::uint32_t find(std::uint32_t x) {
        std::uint32_t root = x;
        while (parent_[root] != root) root = parent_[root];
        while (parent_[x] != root) {
            const std::uint32_t next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

    std::size_t size() const { return parent_.size(); }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint8_t> rank_;
};

constexpr std::uint32_t kUnlabeled = std::numeric_limits<std::uint32_t>::max();

RegionSet label(const LesionMask& mask, std::span<const std::size_t> row_order) {
    const std::size_t w = mask.width();
    const std::size_t h = mask.height();
    const auto& px = mask.pixels();
    std::vector<std::uint32_t> labels(px.size(), kUnlabeled);
    DisjointSets sets;

    // First pass: provisional labels, merged with every already-labelled
    // 8-neighbour. In raster order only W, NW, N and NE can be labelled.
    for (const std::size_t r : row_order) {
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t i = r * w + c;
            if (!px[i]) continue;
            std::uint32_t current = kUnlabeled;
            for (int dr = -1; dr <= 1; ++dr) {
                if ((dr < 0 && r == 0) || (dr > 0 && r + 1 >= h)) continue;
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    if ((dc < 0 && c == 0) || (dc > 0 && c + 1 >= w)) continue;
                    const std::size_t j = (r + dr) * w + (c + dc);
                    const std::uint32_t other = labels[j];
                    if (other == kUnlabeled) continue;
                    if (current == kUnlabeled)
                        current = other;
                    else
                        sets.unite(current, other);
                }
            }
            labels[i] = current == kUnlabeled ? sets.make() : current;
        }
    }

    // Second pass in raster order: the first pixel met for a root is its
    // lexicographically smallest member, so regions come out sorted by seed.
    RegionSet out;
    out.lesion_class = mask.lesion_class();
    std::vector<std::uint32_t> region_of_root(sets.size(), kUnlabeled);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t i = r * w + c;
            if (!px[i]) continue;
            const std::uint32_t root = sets.find(labels[i]);
            std::uint32_t& slot = region_of_root[root];
            if (slot == kUnlabeled) {
                slot = static_cast<std::uint32_t>(out.regions.size());
                out.regions.push_back(Region{0, BoundingBox{r, c, r, c}, Pixel{r, c}});
            }
            Region& region = out.regions[slot];
            ++region.size;
            region.bbox.min_col = std::min(region.bbox.min_col, c);
            region.bbox.max_col = std::max(region.bbox.max_col, c);
            region.bbox.max_row = r;
        }
    }
    return out;
}

}  // namespace

RegionSet extract_regions(const LesionMask& mask) {
    std::vector<std::size_t> order(mask.height());
    std::iota(order.begin(), order.end(), std::size_t{0});
    return label(mask, order);
}

RegionSet extract_regions(const LesionMask& mask, std::span<const std::size_t> row_order) {
    std::vector<bool> seen(mask.height(), false);
    if (row_order.size() != mask.height()) throw InputError("row order must list every row exactly once");
    for (const std::size_t r : row_order) {
        if (r >= mask.height() || seen[r]) throw InputError("row order must list every row exactly once");
        seen[r] = true;
    }
    return label(mask, row_order);
}

}  // namespace lesiongrade
