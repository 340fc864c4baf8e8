#include "lesiongrade/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "lesiongrade/error.hpp"
#include "lesiongrade/mask_io.hpp"
#include "lesiongrade/random.hpp"
#include "lesiongrade/regions.hpp"

namespace lesiongrade {

EvalReport joint_accuracy(std::span<const LabeledPrediction> pairs) {
    if (pairs.empty()) throw InputError("cannot evaluate an empty prediction list");
    EvalReport r;
    r.n = pairs.size();
    std::size_t joint = 0, dr = 0, dme = 0;
    for (const auto& p : pairs) {
        if (!valid_grades(p.truth) || !valid_grades(p.pred)) throw InputError("grade out of range in evaluation");
        const bool dr_ok = p.truth.dr == p.pred.dr;
        const bool dme_ok = p.truth.dme == p.pred.dme;
        dr += dr_ok;
        dme += dme_ok;
        joint += dr_ok && dme_ok;
        ++r.dr_confusion[static_cast<std::size_t>(p.truth.dr)][static_cast<std::size_t>(p.pred.dr)];
        ++r.dme_confusion[static_cast<std::size_t>(p.truth.dme)][static_cast<std::size_t>(p.pred.dme)];
    }
    const double n = static_cast<double>(r.n);
    r.joint_accuracy = static_cast<double>(joint) / n;
    r.dr_accuracy = static_cast<double>(dr) / n;
    r.dme_accuracy = static_cast<double>(dme) / n;
    return r;
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

template <std::size_t N>
void print_confusion(std::ostream& out, const std::array<std::array<std::size_t, N>, N>& m) {
    out << "    truth\\pred";
    for (std::size_t j = 0; j < N; ++j) out << "\t" << j;
    out << "\n";
    for (std::size_t i = 0; i < N; ++i) {
        out << "    " << i << "\t";
        for (std::size_t j = 0; j < N; ++j) out << "\t" << m[i][j];
        out << "\n";
    }
}

}  // namespace

void print_report(std::ostream& out, const std::string& title, const EvalReport& r) {
    out << title << " (n=" << r.n << ")\n";
    out << "  joint accuracy: " << fixed4(r.joint_accuracy) << "\n";
    out << "  DR accuracy:    " << fixed4(r.dr_accuracy) << "\n";
    out << "  DME accuracy:   " << fixed4(r.dme_accuracy) << "\n";
    out << "  DR confusion:\n";
    print_confusion(out, r.dr_confusion);
    out << "  DME confusion:\n";
    print_confusion(out, r.dme_confusion);
}

void write_report_csv_header(std::ostream& out) { out << "arm,n,joint_accuracy,dr_accuracy,dme_accuracy\n"; }

void write_report_csv_row(std::ostream& out, const std::string& arm, const EvalReport& r) {
    out << arm << ',' << r.n << ',' << fixed4(r.joint_accuracy) << ',' << fixed4(r.dr_accuracy) << ','
        << fixed4(r.dme_accuracy) << '\n';
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double test_fraction,
                                                                            std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("test fraction must lie in (0, 1)");
    if (n < 2) throw InputError("need at least 2 samples to split");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Offset so the held-out split is not the same permutation as the
    // trainer's internal validation split.
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    rng.shuffle(std::span(order));
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    return {std::move(train), std::move(test)};
}

EvalReport evaluate_arm(std::span<const LabeledRegions> data, std::span<const std::size_t> train_idx,
                        std::span<const std::size_t> test_idx, FeatureMode mode, const AblationOptions& options) {
    std::vector<FeatureVector> x;
    std::vector<GradePair> y;
    for (auto i : train_idx) {
        x.push_back(make_features(data[i].region_sets, mode, options.thresholds));
        y.push_back(data[i].grades);
    }
    const GraderModel model = train(x, y, options.train, options.thresholds);
    std::vector<LabeledPrediction> pairs;
    for (auto i : test_idx)
        pairs.push_back({data[i].grades, predict(model, make_features(data[i].region_sets, mode, options.thresholds))});
    return joint_accuracy(pairs);
}

AblationResult ablation(std::span<const LabeledRegions> data, const AblationOptions& options) {
    options.thresholds.validate();
    options.train.validate();
    const auto [train_idx, test_idx] = split_indices(data.size(), options.test_fraction, options.train.seed);
    AblationResult result;
    result.train_samples = train_idx.size();
    result.test_samples = test_idx.size();
    result.simple = evaluate_arm(data, train_idx, test_idx, FeatureMode::Simple, options);
    result.extended = evaluate_arm(data, train_idx, test_idx, FeatureMode::Extended, options);
    return result;
}

std::vector<LabeledRegions> load_labeled_regions(const std::filesystem::path& manifest) {
    std::vector<LabeledRegions> out;
    for (const auto& rec : load_manifest(manifest)) {
        if (!rec.grades) throw InputError(manifest.string() + ": image '" + rec.image_id + "' has no grades");
        LabeledRegions item;
        item.image_id = rec.image_id;
        item.grades = *rec.grades;
        for (std::size_t k = 0; k < kNumLesionClasses; ++k)
            item.region_sets[k] =
                extract_regions(load_mask(resolve_mask_path(manifest, rec.mask_paths[k]), kLesionClasses[k]));
        out.push_back(std::move(item));
    }
    return out;
}

AblationResult ablation(const std::filesystem::path& manifest, const AblationOptions& options) {
    const auto data = load_labeled_regions(manifest);
    return ablation(data, options);
}

void print_ablation(std::ostream& out, const AblationResult& r) {
    out << "Ablation (train " << r.train_samples << ", test " << r.test_samples << ")\n";
    out << "  arm        joint    DR       DME\n";
    out << "  simple     " << fixed4(r.simple.joint_accuracy) << "   " << fixed4(r.simple.dr_accuracy) << "   "
        << fixed4(r.simple.dme_accuracy) << "\n";
    out << "  extended   " << fixed4(r.extended.joint_accuracy) << "   " << fixed4(r.extended.dr_accuracy) << "   "
        << fixed4(r.extended.dme_accuracy) << "\n";
}

void write_ablation_csv(std::ostream& out, const AblationResult& r) {
    write_report_csv_header(out);
    write_report_csv_row(out, "simple", r.simple);
    write_report_csv_row(out, "extended", r.extended);
}

}  // namespace lesiongrade
