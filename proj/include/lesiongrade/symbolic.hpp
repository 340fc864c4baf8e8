#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesiongrade/lesion.hpp"
#include "lesiongrade/regions.hpp"

namespace lesiongrade {

// Region-size cut points in pixels. A region of size s is small when
// tau0 < s <= tau1, medium when tau1 < s <= tau2, large when tau2 < s <= tau3,
// and discarded otherwise.
struct SizeThresholds {
    std::uint64_t tau0 = 10;
    std::uint64_t tau1 = 500;
    std::uint64_t tau2 = 1000;
    std::uint64_t tau3 = 10000;

    bool valid() const { return tau0 < tau1 && tau1 < tau2 && tau2 < tau3; }
    // Throws InputError when not strictly increasing.
    void validate() const;

    friend bool operator==(const SizeThresholds&, const SizeThresholds&) = default;
};

// Parses "t0,t1,t2,t3".
SizeThresholds parse_thresholds(std::string_view text);
std::string format_thresholds(const SizeThresholds& t);

enum class SizeBucket { Discarded, Small, Medium, Large };

SizeBucket classify_size(std::uint64_t size, const SizeThresholds& thresholds);

struct SizeBuckets {
    std::vector<Region> small;
    std::vector<Region> medium;
    std::vector<Region> large;
    std::vector<Region> discarded;
};

SizeBuckets bucket_regions(const RegionSet& region_set, const SizeThresholds& thresholds);

enum class FeatureMode { Simple, Extended };

constexpr std::size_t feature_length(FeatureMode mode) { return mode == FeatureMode::Simple ? 4 : 12; }
std::string_view feature_mode_name(FeatureMode mode);  // "simple" / "extended"
FeatureMode parse_feature_mode(std::string_view name);

// Region counts per lesion class (Simple, length 4) or per class and size
// bucket (Extended, length 12, ordered small/medium/large within MA, HE, SE, EX).
struct FeatureVector {
    FeatureMode mode = FeatureMode::Simple;
    std::vector<std::uint64_t> values;

    FeatureVector() : values(4, 0) {}
    FeatureVector(FeatureMode m, std::vector<std::uint64_t> v);

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Exactly one RegionSet per lesion class is required, in any order.
FeatureVector simple_features(std::span<const RegionSet> region_sets);
FeatureVector extended_features(std::span<const RegionSet> region_sets, const SizeThresholds& thresholds);
FeatureVector make_features(std::span<const RegionSet> region_sets, FeatureMode mode,
                            const SizeThresholds& thresholds);

// One row of a features CSV.
struct FeatureRow {
    std::string image_id;
    FeatureVector features;
    std::optional<GradePair> grades;
};

struct FeatureTable {
    FeatureMode mode = FeatureMode::Simple;
    std::vector<FeatureRow> rows;

    bool labeled() const;  // every row carries grades
};

// Header: image_id,f1,...,fK,dr_grade,dme_grade. K (4 or 12) decides the mode.
void write_features_csv(std::ostream& out, const FeatureTable& table);
FeatureTable read_features_csv(std::istream& in, const std::string& source);
FeatureTable read_features_file(const std::string& path);

}  // namespace lesiongrade
