#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lesiongrade/lesion.hpp"
#include "lesiongrade/mask_io.hpp"
#include "lesiongrade/random.hpp"
#include "lesiongrade/symbolic.hpp"

namespace lesiongrade {

// Planted region counts: [class slot][small, medium, large].
using BucketCounts = std::array<std::array<std::uint64_t, 3>, kNumLesionClasses>;

enum class LabelRule { SizeAware, CountOnly };

std::string_view label_rule_name(LabelRule rule);
LabelRule parse_label_rule(std::string_view name);

// Severity rule over bucketed counts.
// DR: 0 no regions; 1 MAs only; 4 large HEs >= 3 (neovascularization proxy);
//     3 HEs > 20; otherwise 2.
// DME: 0 no EX; 2 any medium or large EX (macular involvement proxy); otherwise 1.
GradePair label_size_aware(const BucketCounts& counts);

// Same shape of rule over per-class totals only.
// DR: 0 none; 1 MAs only; 4 HEs > 40; 3 HEs > 20; otherwise 2.
// DME: 0 no EX; 1 EX <= 50; otherwise 2.
GradePair label_count_only(const BucketCounts& counts);

GradePair apply_label_rule(LabelRule rule, const BucketCounts& counts);

struct CountRange {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
};

struct SizeRange {
    std::uint64_t lo = 1;
    std::uint64_t hi = 1;
};

// Counts of regions to plant for one lesion class.
struct ClassPlan {
    CountRange noise;  // sizes drawn from SynthSpec::noise_sizes (discarded bucket)
    CountRange small;
    CountRange medium;
    CountRange large;
};

// One mixture component; an image draws a stratum by weight, then each count
// uniformly from its range.
struct Stratum {
    std::string name;
    double weight = 1.0;
    std::array<ClassPlan, kNumLesionClasses> classes{};
};

struct SynthSpec {
    std::size_t n_images = 10;
    std::size_t width = 1024;
    std::size_t height = 1024;
    std::uint64_t seed = 0;
    LabelRule label_rule = LabelRule::SizeAware;
    SizeThresholds thresholds;
    SizeRange noise_sizes{1, 10};
    SizeRange small_sizes{11, 120};
    SizeRange medium_sizes{501, 1000};
    SizeRange large_sizes{1001, 3000};
    std::vector<Stratum> strata;
    // Noise regions added per class on top of each stratum's own noise range.
    CountRange extra_noise{0, 0};
    std::size_t max_placement_attempts = 2000;

    // Severity-stratified mix with speck noise, labelled by the size-aware rule.
    static SynthSpec size_aware(std::size_t n_images, std::uint64_t seed);
    // Same strata without noise, labelled by totals only.
    static SynthSpec count_only(std::size_t n_images, std::uint64_t seed);
    // A single stratum with no regions at all.
    static SynthSpec empty(std::size_t n_images, std::uint64_t seed);

    // Throws InputError: size ranges must lie inside their threshold buckets,
    // count ranges must be ordered, weights positive.
    void validate() const;
};

// What the generator planted in one image.
struct ImagePlan {
    std::string image_id;
    std::string stratum;
    // Planted region sizes per class, including noise.
    std::array<std::vector<std::uint64_t>, kNumLesionClasses> sizes;
    BucketCounts buckets{};
    GradePair grades;
    // Seeds the placement of this image's regions, so plans do not depend on
    // whether earlier images were rasterized.
    std::uint64_t layout_seed = 0;
};

struct SynthImage {
    ImagePlan plan;
    std::vector<LesionMask> masks;  // indexed by lesion_slot()
};

// Streams images in a fixed order from one seeded generator.
class SynthGenerator {
public:
    explicit SynthGenerator(SynthSpec spec);

    bool done() const { return next_index_ >= spec_.n_images; }
    // Draws the plan only (no rasterization); advances the stream exactly as next() does.
    ImagePlan next_plan();
    // Draws a plan and rasterizes its masks. Throws InputError on infeasible packing.
    SynthImage next();

    const SynthSpec& spec() const { return spec_; }

private:
    std::vector<LesionMask> rasterize(const ImagePlan& plan) const;

    SynthSpec spec_;
    Rng rng_;
    std::size_t next_index_ = 0;
};

std::string synth_image_id(std::size_t index);

// Writes masks/<id>_<class>.pgm, manifest.csv and ground_truth.csv under
// out_dir. Returns the manifest path.
std::filesystem::path generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

// ground_truth.csv: image_id, 12 bucket counts, dr_grade, dme_grade.
struct GroundTruthRow {
    std::string image_id;
    BucketCounts buckets{};
    GradePair grades;
};
std::vector<GroundTruthRow> read_ground_truth(const std::filesystem::path& path);

}  // namespace lesiongrade
