#include "lesiongrade/symbolic.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "lesiongrade/csv.hpp"
#include "lesiongrade/error.hpp"

namespace lesiongrade {

void SizeThresholds::validate() const {
    if (!valid())
        throw InputError("size thresholds must be strictly increasing, got " + format_thresholds(*this));
}

namespace {

std::uint64_t parse_count(std::string_view text, const std::string& what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw InputError(what + ": '" + std::string(text) + "' is not a nonnegative integer");
    return v;
}

}  // namespace

SizeThresholds parse_thresholds(std::string_view text) {
    std::vector<std::uint64_t> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = text.find(',', start);
        parts.push_back(parse_count(text.substr(start, comma - start), "thresholds"));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (parts.size() != 4) throw InputError("thresholds: expected four comma-separated values");
    SizeThresholds t{parts[0], parts[1], parts[2], parts[3]};
    t.validate();
    return t;
}

std::string format_thresholds(const SizeThresholds& t) {
    return std::to_string(t.tau0) + "," + std::to_string(t.tau1) + "," + std::to_string(t.tau2) + "," +
           std::to_string(t.tau3);
}

SizeBucket classify_size(std::uint64_t size, const SizeThresholds& t) {
    if (size <= t.tau0 || size > t.tau3) return SizeBucket::Discarded;
    if (size <= t.tau1) return SizeBucket::Small;
    if (size <= t.tau2) return SizeBucket::Medium;
    return SizeBucket::Large;
}

SizeBuckets bucket_regions(const RegionSet& region_set, const SizeThresholds& thresholds) {
    thresholds.validate();
    SizeBuckets out;
    for (const Region& r : region_set.regions) {
        switch (classify_size(r.size, thresholds)) {
            case SizeBucket::Small: out.small.push_back(r); break;
            case SizeBucket::Medium: out.medium.push_back(r); break;
            case SizeBucket::Large: out.large.push_back(r); break;
            case SizeBucket::Discarded: out.discarded.push_back(r); break;
        }
    }
    return out;
}

std::string_view feature_mode_name(FeatureMode mode) { return mode == FeatureMode::Simple ? "simple" : "extended"; }

FeatureMode parse_feature_mode(std::string_view name) {
    if (name == "simple") return FeatureMode::Simple;
    if (name == "extended") return FeatureMode::Extended;
    throw InputError("feature mode must be 'simple' or 'extended', got '" + std::string(name) + "'");
}

FeatureVector::FeatureVector(FeatureMode m, std::vector<std::uint64_t> v) : mode(m), values(std::move(v)) {
    if (values.size() != feature_length(mode))
        throw InputError(std::string(feature_mode_name(mode)) + " feature vector needs " +
                         std::to_string(feature_length(mode)) + " entries, got " + std::to_string(values.size()));
}

namespace {

// Region sets reordered by class; rejects missing or repeated classes.
std::array<const RegionSet*, kNumLesionClasses> by_class(std::span<const RegionSet> region_sets) {
    std::array<const RegionSet*, kNumLesionClasses> slots{};
    for (const RegionSet& set : region_sets) {
        auto& slot = slots[lesion_slot(set.lesion_class)];
        if (slot) throw InputError("duplicate region set for lesion class " + std::string(lesion_name(set.lesion_class)));
        slot = &set;
    }
    for (std::size_t k = 0; k < slots.size(); ++k)
        if (!slots[k])
            throw InputError("missing region set for lesion class " + std::string(lesion_name(kLesionClasses[k])));
    return slots;
}

}  // namespace

FeatureVector simple_features(std::span<const RegionSet> region_sets) {
    const auto slots = by_class(region_sets);
    std::vector<std::uint64_t> values;
    for (const RegionSet* set : slots) values.push_back(count_regions(*set));
    return FeatureVector(FeatureMode::Simple, std::move(values));
}

FeatureVector extended_features(std::span<const RegionSet> region_sets, const SizeThresholds& thresholds) {
    thresholds.validate();
    const auto slots = by_class(region_sets);
    std::vector<std::uint64_t> values;
    for (const RegionSet* set : slots) {
        const SizeBuckets b = bucket_regions(*set, thresholds);
        values.push_back(b.small.size());
        values.push_back(b.medium.size());
        values.push_back(b.large.size());
    }
    return FeatureVector(FeatureMode::Extended, std::move(values));
}

FeatureVector make_features(std::span<const RegionSet> region_sets, FeatureMode mode, const SizeThresholds& thresholds) {
    return mode == FeatureMode::Simple ? simple_features(region_sets) : extended_features(region_sets, thresholds);
}

bool FeatureTable::labeled() const {
    for (const auto& row : rows)
        if (!row.grades) return false;
    return true;
}

void write_features_csv(std::ostream& out, const FeatureTable& table) {
    const std::size_t k = feature_length(table.mode);
    std::vector<std::string> header{"image_id"};
    for (std::size_t i = 1; i <= k; ++i) header.push_back("f" + std::to_string(i));
    header.push_back("dr_grade");
    header.push_back("dme_grade");
    csv::write_row(out, header);
    for (const auto& row : table.rows) {
        if (row.features.mode != table.mode) throw InputError("feature row '" + row.image_id + "' has the wrong mode");
        std::vector<std::string> fields{row.image_id};
        for (auto v : row.features.values) fields.push_back(std::to_string(v));
        fields.push_back(row.grades ? std::to_string(row.grades->dr) : "");
        fields.push_back(row.grades ? std::to_string(row.grades->dme) : "");
        csv::write_row(out, fields);
    }
}

FeatureTable read_features_csv(std::istream& in, const std::string& source) {
    const csv::Table table = csv::read(in, source);
    FeatureTable out;
    const std::size_t width = table.header.size();
    if (width == 4 + 3) {
        out.mode = FeatureMode::Simple;
    } else if (width == 12 + 3) {
        out.mode = FeatureMode::Extended;
    } else {
        throw InputError(source + ": features CSV must have 4 or 12 feature columns");
    }
    const std::size_t k = feature_length(out.mode);
    if (table.header[0] != "image_id") throw InputError(source + ": first column must be image_id");
    for (std::size_t i = 1; i <= k; ++i)
        if (table.header[i] != "f" + std::to_string(i))
            throw InputError(source + ": expected column f" + std::to_string(i) + ", found '" + table.header[i] + "'");
    if (table.header[k + 1] != "dr_grade" || table.header[k + 2] != "dme_grade")
        throw InputError(source + ": last columns must be dr_grade,dme_grade");

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = source + ":" + std::to_string(table.lines[r]);
        std::vector<std::uint64_t> values;
        for (std::size_t i = 1; i <= k; ++i) values.push_back(parse_count(row[i], where));
        FeatureRow fr{row[0], FeatureVector(out.mode, std::move(values)), std::nullopt};
        const std::string& dr = row[k + 1];
        const std::string& dme = row[k + 2];
        if (dr.empty() != dme.empty()) throw InputError(where + ": grades must be both present or both empty");
        if (!dr.empty())
            fr.grades = checked_grades(static_cast<int>(parse_count(dr, where)), static_cast<int>(parse_count(dme, where)));
        out.rows.push_back(std::move(fr));
    }
    return out;
}

FeatureTable read_features_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open");
    return read_features_csv(in, path);
}

}  // namespace lesiongrade
