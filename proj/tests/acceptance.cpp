// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "lesiongrade/cli.hpp"
#include "lesiongrade/eval.hpp"
#include "lesiongrade/explain.hpp"
#include "lesiongrade/grader.hpp"
#include "lesiongrade/regions.hpp"
#include "lesiongrade/symbolic.hpp"
#include "lesiongrade/synth.hpp"
#include "oracles.hpp"

using namespace lesiongrade;
namespace fs = std::filesystem;

namespace {

// Canvas for generated datasets. 512 keeps the 2000-image run and the
// on-disk 200-image set small; the lesion load fits comfortably.
constexpr std::size_t kCanvas = 512;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "lesiongrade");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

Outcome a1_ccl() {
    const auto t0 = Clock::now();
    std::size_t bad = 0;
    for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
        std::vector<std::uint8_t> px(16);
        for (int i = 0; i < 16; ++i) px[i] = (bits >> i) & 1u;
        LesionMask m(4, 4, LesionClass::MA, px);
        bad += oracle::sorted_sizes(extract_regions(m)) != oracle::flood_fill_sizes(m);
    }
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double density = 0.05 + 0.45 * rng.uniform();
        auto m = oracle::random_mask(rng, 64, 64, density);
        bad += oracle::sorted_sizes(extract_regions(m)) != oracle::flood_fill_sizes(m);
    }
    const double secs = seconds_since(t0);
    return {bad == 0 && secs < 10.0,
            std::to_string(bad) + " mismatches over 65536 + 1000 masks, " + fmt("%.2f s", secs) + " (limit 10 s)"};
}

Outcome a2_buckets() {
    const std::uint64_t sizes[] = {10, 11, 500, 501, 1000, 1001, 10000, 10001};
    const SizeBucket want[] = {SizeBucket::Discarded, SizeBucket::Small, SizeBucket::Small, SizeBucket::Medium,
                               SizeBucket::Medium,    SizeBucket::Large, SizeBucket::Large, SizeBucket::Discarded};
    std::size_t bad = 0;
    for (int i = 0; i < 8; ++i) bad += classify_size(sizes[i], SizeThresholds{}) != want[i];
    return {bad == 0, std::to_string(8 - bad) + "/8 boundary sizes bucketed as required"};
}

Outcome a3_features() {
    oracle::TempDir dir("accept_a3");
    auto spec = SynthSpec::size_aware(200, 3);
    spec.width = spec.height = kCanvas;
    const auto manifest = generate(spec, dir / "data");
    if (cli({"extract", "--manifest", manifest.string(), "--out", (dir / "f.csv").string()}) != 0)
        return {false, "extract failed"};
    const auto table = read_features_file((dir / "f.csv").string());
    const auto truth = read_ground_truth(dir / "data" / "ground_truth.csv");
    if (table.rows.size() != truth.size()) return {false, "row count mismatch"};
    std::size_t same = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        bool eq = table.rows[i].image_id == truth[i].image_id;
        for (std::size_t j = 0; j < 12; ++j) eq = eq && table.rows[i].features.values[j] == truth[i].buckets[j / 3][j % 3];
        same += eq;
    }
    return {same == truth.size(), std::to_string(same) + "/" + std::to_string(truth.size()) +
                                      " extracted extended vectors equal planted buckets"};
}

// Triples where some +-h perturbation crosses a ReLU kink are redrawn: the
// loss is not differentiable inside the stencil there, so the difference
// quotient is no oracle. Redraws are reported.
Outcome a4_gradients() {
    Rng rng(4);
    std::size_t params = 0, failures = 0, redrawn = 0;
    double worst = 0;
    for (int t = 0; t < 20;) {
        const auto mode = t % 2 ? FeatureMode::Simple : FeatureMode::Extended;
        auto m = GraderModel::zeros(mode, default_trunk_dims(mode));
        init_weights(m, rng);
        for_each_parameter(m, [&](double& p) { p += rng.uniform(-0.05, 0.05); });  // nonzero biases too
        auto x = oracle::random_input(rng, feature_length(mode));
        GradePair y{static_cast<int>(rng.between(0, 4)), static_cast<int>(rng.between(0, 2))};
        auto r = oracle::check_gradients(m, x, y, 1e-4, 1e-4, 1e-6);
        if (r.kinks > 0) {
            ++redrawn;
            continue;
        }
        ++t;
        params += r.params;
        failures += r.failures;
        worst = std::max(worst, r.worst_rel);
    }
    return {failures == 0, std::to_string(failures) + " of " + std::to_string(params) +
                               " parameter gradients outside rel 1e-4 (h 1e-4, abs floor 1e-6) over 20 triples; worst rel " +
                               fmt("%.2e", worst) + "; " + std::to_string(redrawn) +
                               " draw(s) replaced because +-h crossed a ReLU kink"};
}

// Shared by A5 and A6.
struct AblationRun {
    AblationResult result;
    double seconds = 0;
};

const AblationRun& ablation_run() {
    static const AblationRun run = [] {
        const auto t0 = Clock::now();
        auto spec = SynthSpec::size_aware(2000, 42);
        spec.width = spec.height = kCanvas;
        SynthGenerator gen(spec);
        std::vector<LabeledRegions> data;
        data.reserve(spec.n_images);
        while (!gen.done()) {
            auto img = gen.next();
            LabeledRegions lr;
            lr.image_id = img.plan.image_id;
            lr.grades = img.plan.grades;
            for (std::size_t k = 0; k < kNumLesionClasses; ++k) lr.region_sets[k] = extract_regions(img.masks[k]);
            data.push_back(std::move(lr));
        }
        AblationOptions o;
        o.train.max_epochs = 100;
        o.train.seed = 42;
        o.test_fraction = 0.2;
        AblationRun r;
        r.result = ablation(data, o);
        r.seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

Outcome a5_accuracy() {
    const auto& r = ablation_run();
    const double acc = r.result.extended.joint_accuracy;
    return {acc >= 0.90 && r.seconds < 300.0,
            "extended joint accuracy " + fmt("%.4f", acc) + " on " + std::to_string(r.result.test_samples) +
                " held-out images (need >= 0.90); " + fmt("%.1f s", r.seconds) + " (limit 300 s)"};
}

Outcome a6_ablation() {
    const auto& r = ablation_run().result;
    const double gap = r.extended.joint_accuracy - r.simple.joint_accuracy;
    return {gap >= 0.05, "extended " + fmt("%.4f", r.extended.joint_accuracy) + " - simple " +
                             fmt("%.4f", r.simple.joint_accuracy) + " = " + fmt("%.4f", gap) + " (need >= 0.05)"};
}

Outcome a7_explanations() {
    const std::string want =
        "The image 1 is classified as severe NPDR because 37 small MAs, 26 small HEs, 2 medium HEs, 2 large HEs, "
        "197 small EXs, 5 medium EXs and 3 large EXs are detected.";
    const auto e = render_extended("1", FeatureVector(FeatureMode::Extended, {37, 0, 0, 26, 2, 2, 0, 0, 0, 197, 5, 3}),
                                   {3, 0});
    const bool verbatim = e.rendered == want;
    Rng rng(7);
    std::size_t ok = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto mode = i % 2 ? FeatureMode::Simple : FeatureMode::Extended;
        std::vector<std::uint64_t> v(feature_length(mode));
        for (auto& x : v) x = rng.bernoulli(0.3) ? 0 : rng.between(1, 1000000);
        const GradePair g{static_cast<int>(rng.between(0, 4)), 0};
        const std::string id = "img" + std::to_string(i);
        try {
            auto p = parse_explanation(render(id, FeatureVector(mode, v), g).rendered);
            ok += p.image_id == id && p.grade_text == dr_grade_name(g.dr) && p.features == FeatureVector(mode, v);
        } catch (const std::exception&) {
        }
    }
    return {verbatim && ok == 1000, std::string("image-1 sentence ") + (verbatim ? "reproduced" : "DIFFERS") +
                                        "; parse(render) identity on " + std::to_string(ok) + "/1000 vectors"};
}

Outcome a8_metrics() {
    Rng rng(8);
    std::size_t bound_ok = 0, self_ok = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<LabeledPrediction> v(rng.between(1, 200));
        for (auto& p : v) {
            p.truth = {static_cast<int>(rng.between(0, 4)), static_cast<int>(rng.between(0, 2))};
            p.pred = {static_cast<int>(rng.between(0, 4)), static_cast<int>(rng.between(0, 2))};
            if (rng.bernoulli(0.4)) p.pred.dr = p.truth.dr;
            if (rng.bernoulli(0.4)) p.pred.dme = p.truth.dme;
        }
        const auto r = joint_accuracy(v);
        bound_ok += r.joint_accuracy <= std::min(r.dr_accuracy, r.dme_accuracy);
        for (auto& p : v) p.pred = p.truth;
        self_ok += joint_accuracy(v).joint_accuracy == 1.0;
    }
    return {bound_ok == 1000 && self_ok == 1000, "joint <= min(dr, dme) on " + std::to_string(bound_ok) +
                                                     "/1000 lists; self-evaluation 1.0 on " + std::to_string(self_ok) +
                                                     "/1000"};
}

Outcome a9_determinism() {
    oracle::TempDir dir("accept_a9");
    auto pipeline = [&](const std::string& tag) -> bool {
        const fs::path root = dir / tag;
        const std::string data = (root / "data").string();
        return cli({"synth", "--out", data, "--n", "150", "--seed", "9", "--width", std::to_string(kCanvas), "--height",
                    std::to_string(kCanvas)}) == 0 &&
               cli({"extract", "--manifest", data + "/manifest.csv", "--out", (root / "f.csv").string(), "--threads",
                    tag == "a" ? "1" : "4"}) == 0 &&
               cli({"train", "--features", (root / "f.csv").string(), "--out-model", (root / "m.json").string(),
                    "--seed", "9"}) == 0 &&
               cli({"predict", "--model", (root / "m.json").string(), "--features", (root / "f.csv").string(), "--out",
                    (root / "p.csv").string()}) == 0;
    };
    if (!pipeline("a") || !pipeline("b")) return {false, "pipeline step failed"};
    const bool model_same = oracle::slurp(dir / "a" / "m.json") == oracle::slurp(dir / "b" / "m.json");
    const bool pred_same = oracle::slurp(dir / "a" / "p.csv") == oracle::slurp(dir / "b" / "p.csv");
    return {model_same && pred_same, std::string("model files ") + (model_same ? "identical" : "DIFFER") +
                                         ", prediction CSVs " + (pred_same ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"A1 connected regions match flood fill", a1_ccl},
        {"A2 size bucket boundaries", a2_buckets},
        {"A3 extracted features equal planted counts", a3_features},
        {"A4 gradients match central differences", a4_gradients},
        {"A5 synthetic end-to-end accuracy", a5_accuracy},
        {"A6 extended beats simple", a6_ablation},
        {"A7 explanation text and round trip", a7_explanations},
        {"A8 metric properties", a8_metrics},
        {"A9 pipeline determinism", a9_determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
    return failed ? 1 : 0;
}
