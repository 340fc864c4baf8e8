#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lesiongrade/grader.hpp"
#include "lesiongrade/lesion.hpp"
#include "lesiongrade/symbolic.hpp"

namespace lesiongrade {

struct EvalReport {
    std::size_t n = 0;
    double joint_accuracy = 0.0;
    double dr_accuracy = 0.0;
    double dme_accuracy = 0.0;
    // [truth][prediction]
    std::array<std::array<std::size_t, kNumDrGrades>, kNumDrGrades> dr_confusion{};
    std::array<std::array<std::size_t, kNumDmeGrades>, kNumDmeGrades> dme_confusion{};
};

struct LabeledPrediction {
    GradePair truth;
    GradePair pred;
};

// Fraction of samples with DR and DME both correct, plus per-task figures.
// Throws InputError on an empty list.
EvalReport joint_accuracy(std::span<const LabeledPrediction> pairs);

void print_report(std::ostream& out, const std::string& title, const EvalReport& report);

// arm,n,joint_accuracy,dr_accuracy,dme_accuracy
void write_report_csv_header(std::ostream& out);
void write_report_csv_row(std::ostream& out, const std::string& arm, const EvalReport& report);

// Region sets of one labeled image, the common input of both ablation arms.
struct LabeledRegions {
    std::string image_id;
    std::array<RegionSet, kNumLesionClasses> region_sets;
    GradePair grades;
};

struct AblationOptions {
    SizeThresholds thresholds;
    TrainConfig train;
    double test_fraction = 0.2;
};

struct AblationResult {
    EvalReport simple;
    EvalReport extended;
    std::size_t train_samples = 0;  // before the validation split
    std::size_t test_samples = 0;
};

// Held-out test split drawn from options.train.seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double test_fraction,
                                                                            std::uint64_t seed);

// Trains and evaluates one feature mode on a fixed train/test split.
EvalReport evaluate_arm(std::span<const LabeledRegions> data, std::span<const std::size_t> train_idx,
                        std::span<const std::size_t> test_idx, FeatureMode mode, const AblationOptions& options);

AblationResult ablation(std::span<const LabeledRegions> data, const AblationOptions& options);

// Loads masks of a labeled manifest and extracts regions. Throws InputError
// when a record has no grades.
std::vector<LabeledRegions> load_labeled_regions(const std::filesystem::path& manifest);

AblationResult ablation(const std::filesystem::path& manifest, const AblationOptions& options);

void print_ablation(std::ostream& out, const AblationResult& result);
void write_ablation_csv(std::ostream& out, const AblationResult& result);

}  // namespace lesiongrade
