#include "lesiongrade/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include "lesiongrade/csv.hpp"
#include "lesiongrade/error.hpp"

namespace lesiongrade {

namespace {

constexpr std::size_t kMA = 0, kHE = 1, kSE = 2, kEX = 3;
constexpr std::size_t kSmall = 0, kMedium = 1, kLarge = 2;

std::uint64_t total(const std::array<std::uint64_t, 3>& c) { return c[0] + c[1] + c[2]; }

}  // namespace

std::string_view label_rule_name(LabelRule rule) { return rule == LabelRule::SizeAware ? "size-aware" : "count-only"; }

LabelRule parse_label_rule(std::string_view name) {
    if (name == "size-aware") return LabelRule::SizeAware;
    if (name == "count-only") return LabelRule::CountOnly;
    throw InputError("label rule must be 'size-aware' or 'count-only', got '" + std::string(name) + "'");
}

GradePair label_size_aware(const BucketCounts& c) {
    const std::uint64_t ma = total(c[kMA]), he = total(c[kHE]), se = total(c[kSE]), ex = total(c[kEX]);
    GradePair g;
    if (ma + he + se + ex == 0)
        g.dr = 0;
    else if (he + se + ex == 0)
        g.dr = 1;
    else if (c[kHE][kLarge] >= 3)
        g.dr = 4;
    else if (he > 20)
        g.dr = 3;
    else
        g.dr = 2;
    if (ex == 0)
        g.dme = 0;
    else
        g.dme = c[kEX][kMedium] + c[kEX][kLarge] > 0 ? 2 : 1;
    return g;
}

GradePair label_count_only(const BucketCounts& c) {
    const std::uint64_t ma = total(c[kMA]), he = total(c[kHE]), se = total(c[kSE]), ex = total(c[kEX]);
    GradePair g;
    if (ma + he + se + ex == 0)
        g.dr = 0;
    else if (he + se + ex == 0)
        g.dr = 1;
    else if (he > 40)
        g.dr = 4;
    else if (he > 20)
        g.dr = 3;
    else
        g.dr = 2;
    g.dme = ex == 0 ? 0 : (ex <= 50 ? 1 : 2);
    return g;
}

GradePair apply_label_rule(LabelRule rule, const BucketCounts& counts) {
    return rule == LabelRule::SizeAware ? label_size_aware(counts) : label_count_only(counts);
}

namespace {

ClassPlan plan(CountRange small, CountRange medium = {}, CountRange large = {}, CountRange noise = {}) {
    return ClassPlan{noise, small, medium, large};
}

std::vector<Stratum> severity_strata(CountRange noise) {
    std::vector<Stratum> out;
    Stratum none{"none", 1.0, {}};
    Stratum ma_only{"ma_only", 1.0, {}};
    ma_only.classes[kMA] = plan({1, 40});
    out.push_back(none);
    out.push_back(ma_only);

    // Severity strata also shift MA and SE counts, as real severe cases do;
    // the label rule itself only reads HE and EX.
    struct Severity {
        const char* name;
        CountRange ma;
        ClassPlan he;
        ClassPlan se;
    };
    const Severity severities[] = {
        {"moderate", {0, 20}, plan({1, 8}, {0, 1}, {0, 1}), plan({0, 3})},
        {"severe", {30, 80}, plan({30, 60}, {0, 1}, {0, 1}), plan({3, 10}, {0, 1}, {0, 1})},
        {"proliferative", {30, 80}, plan({3, 50}, {2, 5}, {3, 6}), plan({3, 10}, {1, 3}, {0, 2})},
    };
    struct Exudate {
        const char* name;
        ClassPlan ex;
    };
    const Exudate exudates[] = {
        {"no_ex", plan({0, 0})},
        {"ex_small", plan({1, 80})},
        {"ex_macular", plan({40, 150}, {1, 5}, {1, 3})},
    };
    for (const auto& sev : severities) {
        for (const auto& ex : exudates) {
            Stratum s{std::string(sev.name) + "/" + ex.name, 1.0 / 3.0, {}};
            s.classes[kMA] = plan(sev.ma);
            s.classes[kHE] = sev.he;
            s.classes[kSE] = sev.se;
            s.classes[kEX] = ex.ex;
            out.push_back(s);
        }
    }
    for (auto& s : out)
        for (auto& c : s.classes) c.noise = noise;
    return out;
}

}  // namespace

SynthSpec SynthSpec::size_aware(std::size_t n_images, std::uint64_t seed) {
    SynthSpec s;
    s.n_images = n_images;
    s.seed = seed;
    s.label_rule = LabelRule::SizeAware;
    s.strata = severity_strata({0, 6});
    return s;
}

SynthSpec SynthSpec::count_only(std::size_t n_images, std::uint64_t seed) {
    SynthSpec s;
    s.n_images = n_images;
    s.seed = seed;
    s.label_rule = LabelRule::CountOnly;
    s.strata = severity_strata({0, 0});
    return s;
}

SynthSpec SynthSpec::empty(std::size_t n_images, std::uint64_t seed) {
    SynthSpec s;
    s.n_images = n_images;
    s.seed = seed;
    s.strata = {Stratum{"none", 1.0, {}}};
    return s;
}

void SynthSpec::validate() const {
    thresholds.validate();
    if (width == 0 || height == 0) throw InputError("synthetic canvas must be at least 1x1");
    if (strata.empty()) throw InputError("synthetic spec needs at least one stratum");
    auto check_sizes = [&](const SizeRange& r, SizeBucket want, const char* name) {
        if (r.lo == 0 || r.lo > r.hi) throw InputError(std::string(name) + " size range must satisfy 1 <= lo <= hi");
        if (classify_size(r.lo, thresholds) != want || classify_size(r.hi, thresholds) != want)
            throw InputError(std::string(name) + " size range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) +
                             "] leaves its bucket under thresholds " + format_thresholds(thresholds));
    };
    check_sizes(noise_sizes, SizeBucket::Discarded, "noise");
    if (noise_sizes.hi > thresholds.tau0) throw InputError("noise sizes must not exceed tau0");
    check_sizes(small_sizes, SizeBucket::Small, "small");
    check_sizes(medium_sizes, SizeBucket::Medium, "medium");
    check_sizes(large_sizes, SizeBucket::Large, "large");
    auto check_counts = [](const CountRange& r, const std::string& what) {
        if (r.lo > r.hi) throw InputError(what + ": count range lo > hi");
    };
    check_counts(extra_noise, "extra_noise");
    for (const auto& s : strata) {
        if (!(s.weight > 0.0) || !std::isfinite(s.weight)) throw InputError("stratum '" + s.name + "' needs a positive weight");
        for (const auto& c : s.classes) {
            check_counts(c.noise, s.name);
            check_counts(c.small, s.name);
            check_counts(c.medium, s.name);
            check_counts(c.large, s.name);
        }
    }
    if (max_placement_attempts == 0) throw InputError("max_placement_attempts must be positive");
}

std::string synth_image_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img%05zu", index);
    return buf;
}

SynthGenerator::SynthGenerator(SynthSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) { spec_.validate(); }

ImagePlan SynthGenerator::next_plan() {
    if (done()) throw std::logic_error("synthetic generator exhausted");
    ImagePlan p;
    p.image_id = synth_image_id(next_index_++);
    p.layout_seed = rng_.next();

    double total_weight = 0.0;
    for (const auto& s : spec_.strata) total_weight += s.weight;
    double pick = rng_.uniform() * total_weight;
    const Stratum* stratum = &spec_.strata.back();
    for (const auto& s : spec_.strata) {
        if (pick < s.weight) {
            stratum = &s;
            break;
        }
        pick -= s.weight;
    }
    p.stratum = stratum->name;

    auto draw = [&](CountRange counts, SizeRange sizes, std::vector<std::uint64_t>& out) {
        const std::uint64_t n = rng_.between(counts.lo, counts.hi);
        for (std::uint64_t i = 0; i < n; ++i) out.push_back(rng_.between(sizes.lo, sizes.hi));
    };
    for (std::size_t k = 0; k < kNumLesionClasses; ++k) {
        const ClassPlan& cp = stratum->classes[k];
        auto& sizes = p.sizes[k];
        draw(cp.noise, spec_.noise_sizes, sizes);
        draw(spec_.extra_noise, spec_.noise_sizes, sizes);
        draw(cp.small, spec_.small_sizes, sizes);
        draw(cp.medium, spec_.medium_sizes, sizes);
        draw(cp.large, spec_.large_sizes, sizes);
        for (const auto s : sizes) {
            switch (classify_size(s, spec_.thresholds)) {
                case SizeBucket::Small: ++p.buckets[k][kSmall]; break;
                case SizeBucket::Medium: ++p.buckets[k][kMedium]; break;
                case SizeBucket::Large: ++p.buckets[k][kLarge]; break;
                case SizeBucket::Discarded: break;
            }
        }
    }
    p.grades = apply_label_rule(spec_.label_rule, p.buckets);
    return p;
}

namespace {

struct Offset {
    std::size_t row;
    std::size_t col;
};

// Connected shape of exactly `size` pixels with offsets from its top-left.
std::vector<Offset> make_shape(std::uint64_t size, Rng& rng) {
    std::vector<Offset> out;
    out.reserve(size);
    if (rng.bernoulli(0.5)) {
        // Filled rectangle, possibly with a partial last row.
        const double aspect = rng.uniform(0.5, 2.0);
        auto w = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(size) * aspect)));
        w = std::clamp<std::uint64_t>(w, 1, size);
        for (std::uint64_t i = 0; i < size; ++i) out.push_back({static_cast<std::size_t>(i / w), static_cast<std::size_t>(i % w)});
        return out;
    }
    // Digital disc: the `size` pixels nearest the centre. Every pixel has a
    // strictly nearer 8-neighbour, so any prefix of this order is connected.
    const auto radius = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(size) / 3.14159))) + 2;
    struct Cand {
        long d2, r, c;
    };
    std::vector<Cand> cands;
    for (long r = -radius; r <= radius; ++r)
        for (long c = -radius; c <= radius; ++c) cands.push_back({r * r + c * c, r, c});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return std::tie(a.d2, a.r, a.c) < std::tie(b.d2, b.r, b.c);
    });
    cands.resize(size);
    long min_r = 0, min_c = 0;
    for (const auto& cd : cands) {
        min_r = std::min(min_r, cd.r);
        min_c = std::min(min_c, cd.c);
    }
    for (const auto& cd : cands) out.push_back({static_cast<std::size_t>(cd.r - min_r), static_cast<std::size_t>(cd.c - min_c)});
    return out;
}

// Planted regions keep a Chebyshev gap of at least 3 (two background pixels),
// so 8-connectivity never merges them.
constexpr std::size_t kClearance = 2;

}  // namespace

std::vector<LesionMask> SynthGenerator::rasterize(const ImagePlan& plan) const {
    const std::size_t w = spec_.width, h = spec_.height;
    Rng rng(plan.layout_seed);
    std::vector<LesionMask> masks;
    for (std::size_t k = 0; k < kNumLesionClasses; ++k) {
        LesionMask mask(w, h, kLesionClasses[k]);
        std::vector<std::uint8_t> claimed(w * h, 0);
        std::vector<std::uint64_t> sizes = plan.sizes[k];
        std::sort(sizes.begin(), sizes.end(), std::greater<>());

        std::uint64_t area = 0;
        for (auto s : sizes) area += s;
        if (area > w * h / 2)
            throw InputError("synthetic image " + plan.image_id + ": " + std::string(lesion_name(kLesionClasses[k])) +
                             " regions cover " + std::to_string(area) + " pixels, too many for a " + std::to_string(w) +
                             "x" + std::to_string(h) + " canvas");

        for (const auto size : sizes) {
            const std::vector<Offset> shape = make_shape(size, rng);
            std::size_t shape_h = 0, shape_w = 0;
            for (const auto& o : shape) {
                shape_h = std::max(shape_h, o.row + 1);
                shape_w = std::max(shape_w, o.col + 1);
            }
            bool placed = false;
            if (shape_h <= h && shape_w <= w) {
                for (std::size_t attempt = 0; attempt < spec_.max_placement_attempts && !placed; ++attempt) {
                    const auto top = static_cast<std::size_t>(rng.between(0, h - shape_h));
                    const auto left = static_cast<std::size_t>(rng.between(0, w - shape_w));
                    const bool free = std::none_of(shape.begin(), shape.end(), [&](const Offset& o) {
                        return claimed[(top + o.row) * w + left + o.col] != 0;
                    });
                    if (!free) continue;
                    for (const auto& o : shape) {
                        const std::size_t r = top + o.row, c = left + o.col;
                        mask.set(r, c, true);
                        const std::size_t r0 = r >= kClearance ? r - kClearance : 0;
                        const std::size_t c0 = c >= kClearance ? c - kClearance : 0;
                        const std::size_t r1 = std::min(h - 1, r + kClearance);
                        const std::size_t c1 = std::min(w - 1, c + kClearance);
                        for (std::size_t rr = r0; rr <= r1; ++rr)
                            std::fill(claimed.begin() + static_cast<std::ptrdiff_t>(rr * w + c0),
                                      claimed.begin() + static_cast<std::ptrdiff_t>(rr * w + c1 + 1), std::uint8_t{1});
                    }
                    placed = true;
                }
            }
            if (!placed)
                throw InputError("synthetic image " + plan.image_id + ": could not place a " + std::to_string(size) +
                                 "-pixel " + std::string(lesion_name(kLesionClasses[k])) + " region after " +
                                 std::to_string(spec_.max_placement_attempts) + " attempts");
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

SynthImage SynthGenerator::next() {
    ImagePlan p = next_plan();
    auto masks = rasterize(p);
    return SynthImage{std::move(p), std::move(masks)};
}

namespace {

std::vector<std::string> ground_truth_header() {
    std::vector<std::string> h{"image_id"};
    const char* classes[] = {"ma", "he", "se", "ex"};
    const char* buckets[] = {"small", "medium", "large"};
    for (const char* c : classes)
        for (const char* b : buckets) h.push_back(std::string(c) + "_" + b);
    h.push_back("dr_grade");
    h.push_back("dme_grade");
    return h;
}

}  // namespace

namespace {

std::filesystem::path generate_into(const SynthSpec& spec, const std::filesystem::path& out_dir,
                                    std::vector<std::filesystem::path>& written) {
    SynthGenerator gen(spec);
    std::filesystem::create_directories(out_dir / "masks");
    std::vector<ManifestRecord> records;
    const auto gt_path = out_dir / "ground_truth.csv";
    written.push_back(gt_path);
    std::ofstream gt(gt_path, std::ios::binary | std::ios::trunc);
    if (!gt) throw InputError(gt_path.string() + ": cannot open for writing");
    csv::write_row(gt, ground_truth_header());
    while (!gen.done()) {
        SynthImage img = gen.next();
        ManifestRecord rec;
        rec.image_id = img.plan.image_id;
        rec.grades = img.plan.grades;
        for (std::size_t k = 0; k < kNumLesionClasses; ++k) {
            const std::filesystem::path rel =
                std::filesystem::path("masks") / (img.plan.image_id + "_" + std::string(lesion_name(kLesionClasses[k])) + ".pgm");
            written.push_back(out_dir / rel);
            save_mask(img.masks[k], out_dir / rel);
            rec.mask_paths[k] = rel;
        }
        std::vector<std::string> row{img.plan.image_id};
        for (const auto& cls : img.plan.buckets)
            for (auto v : cls) row.push_back(std::to_string(v));
        row.push_back(std::to_string(img.plan.grades.dr));
        row.push_back(std::to_string(img.plan.grades.dme));
        csv::write_row(gt, row);
        records.push_back(std::move(rec));
    }
    gt.close();
    if (!gt) throw std::runtime_error(gt_path.string() + ": write failed");
    const auto manifest = out_dir / "manifest.csv";
    written.push_back(manifest);
    save_manifest(records, manifest);
    return manifest;
}

}  // namespace

std::filesystem::path generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    const bool fresh = !std::filesystem::exists(out_dir);
    const bool fresh_masks = !std::filesystem::exists(out_dir / "masks");
    std::vector<std::filesystem::path> written;
    try {
        return generate_into(spec, out_dir, written);
    } catch (...) {
        // Leave no half-written dataset behind.
        std::error_code ec;
        if (fresh) {
            std::filesystem::remove_all(out_dir, ec);
        } else {
            for (const auto& p : written) std::filesystem::remove(p, ec);
            if (fresh_masks) std::filesystem::remove(out_dir / "masks", ec);
        }
        throw;
    }
}

std::vector<GroundTruthRow> read_ground_truth(const std::filesystem::path& path) {
    const csv::Table table = csv::read_file(path.string());
    if (table.header != ground_truth_header()) throw InputError(path.string() + ": unexpected ground truth header");
    std::vector<GroundTruthRow> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        GroundTruthRow g;
        g.image_id = row[0];
        auto num = [&](const std::string& s) {
            try {
                std::size_t used = 0;
                const auto v = std::stoull(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                return static_cast<std::uint64_t>(v);
            } catch (const std::exception&) {
                throw InputError(path.string() + ":" + std::to_string(table.lines[r]) + ": bad count '" + s + "'");
            }
        };
        for (std::size_t i = 0; i < 12; ++i) g.buckets[i / 3][i % 3] = num(row[1 + i]);
        g.grades = checked_grades(static_cast<int>(num(row[13])), static_cast<int>(num(row[14])));
        rows.push_back(g);
    }
    return rows;
}

}  // namespace lesiongrade
