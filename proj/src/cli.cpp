#include "lesiongrade/cli.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lesiongrade/error.hpp"
#include "lesiongrade/eval.hpp"
#include "lesiongrade/explain.hpp"
#include "lesiongrade/grader.hpp"
#include "lesiongrade/mask_io.hpp"
#include "lesiongrade/regions.hpp"
#include "lesiongrade/symbolic.hpp"
#include "lesiongrade/synth.hpp"

namespace lesiongrade {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Writes to "<path>.partial" and renames on commit; the partial file is
// removed if the object dies uncommitted.
class OutputFile {
public:
    explicit OutputFile(fs::path path) : path_(std::move(path)), tmp_(path_.string() + ".partial") {
        stream_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!stream_) throw InputError(path_.string() + ": cannot open for writing");
    }
    OutputFile(const OutputFile&) = delete;
    OutputFile& operator=(const OutputFile&) = delete;
    ~OutputFile() {
        if (!committed_) {
            stream_.close();
            std::error_code ec;
            fs::remove(tmp_, ec);
        }
    }

    std::ostream& stream() { return stream_; }

    void commit() {
        stream_.close();
        if (!stream_) throw std::runtime_error(path_.string() + ": write failed");
        fs::rename(tmp_, path_);
        committed_ = true;
    }

private:
    fs::path path_;
    fs::path tmp_;
    std::ofstream stream_;
    bool committed_ = false;
};

// Settings shared by extract/train/ablation. JSON config first, then flags.
struct PipelineConfig {
    SizeThresholds thresholds;
    FeatureMode mode = FeatureMode::Extended;
    TrainConfig train;
    double test_fraction = 0.2;
};

struct PipelineFlags {
    std::string config_path;
    std::string thresholds;
    std::string mode;
    double learning_rate = 0.01;
    std::size_t batch_size = 16;
    double dropout = 0.1;
    std::size_t epochs = 20;
    std::size_t patience = 10;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;

    CLI::Option* o_learning_rate = nullptr;
    CLI::Option* o_batch_size = nullptr;
    CLI::Option* o_dropout = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_patience = nullptr;
    CLI::Option* o_val_fraction = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_test_fraction = nullptr;
};

void add_config_flag(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; explicit flags override its values");
}

void add_threshold_flag(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--thresholds", f.thresholds, "size thresholds tau0,tau1,tau2,tau3 (default 10,500,1000,10000)");
}

void add_mode_flag(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--mode", f.mode, "feature mode: simple (4 counts) or extended (12 size-bucketed counts) (default extended)");
}

void add_train_flags(CLI::App* cmd, PipelineFlags& f) {
    f.o_learning_rate = cmd->add_option("--lr", f.learning_rate, "Adam learning rate")->capture_default_str();
    f.o_batch_size = cmd->add_option("--batch-size", f.batch_size, "minibatch size")->capture_default_str();
    f.o_dropout = cmd->add_option("--dropout", f.dropout, "training dropout probability (every hidden layer but the last)")->capture_default_str();
    f.o_epochs = cmd->add_option("--epochs", f.epochs, "maximum training epochs")->capture_default_str();
    f.o_patience = cmd->add_option("--patience", f.patience, "early-stopping patience in epochs")->capture_default_str();
    f.o_val_fraction =
        cmd->add_option("--val-fraction", f.val_fraction, "fraction of training rows held for validation")->capture_default_str();
    f.o_seed = cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
}

SizeThresholds thresholds_from_json(const json& j) {
    if (j.is_string()) return parse_thresholds(j.get<std::string>());
    if (j.is_array() && j.size() == 4) {
        SizeThresholds t{j[0].get<std::uint64_t>(), j[1].get<std::uint64_t>(), j[2].get<std::uint64_t>(),
                         j[3].get<std::uint64_t>()};
        t.validate();
        return t;
    }
    if (j.is_object()) {
        SizeThresholds t{j.at("tau0").get<std::uint64_t>(), j.at("tau1").get<std::uint64_t>(),
                         j.at("tau2").get<std::uint64_t>(), j.at("tau3").get<std::uint64_t>()};
        t.validate();
        return t;
    }
    throw InputError("config: thresholds must be \"t0,t1,t2,t3\", a 4-element array or an object");
}

PipelineConfig resolve_config(const PipelineFlags& f) {
    PipelineConfig c;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path, std::ios::binary);
        if (!in) throw InputError(f.config_path + ": cannot open");
        json j;
        try {
            j = json::parse(in);
            if (!j.is_object()) throw InputError(f.config_path + ": config must be a JSON object");
            static const std::set<std::string> known = {"thresholds", "mode",     "learning_rate",       "batch_size",
                                                        "dropout_prob", "max_epochs", "patience", "validation_fraction",
                                                        "seed",       "test_fraction"};
            for (const auto& [key, value] : j.items())
                if (!known.count(key)) throw InputError(f.config_path + ": unknown config key '" + key + "'");
            if (j.contains("thresholds")) c.thresholds = thresholds_from_json(j["thresholds"]);
            if (j.contains("mode")) c.mode = parse_feature_mode(j["mode"].get<std::string>());
            c.train.learning_rate = j.value("learning_rate", c.train.learning_rate);
            c.train.batch_size = j.value("batch_size", c.train.batch_size);
            c.train.dropout_prob = j.value("dropout_prob", c.train.dropout_prob);
            c.train.max_epochs = j.value("max_epochs", c.train.max_epochs);
            c.train.patience = j.value("patience", c.train.patience);
            c.train.validation_fraction = j.value("validation_fraction", c.train.validation_fraction);
            c.train.seed = j.value("seed", c.train.seed);
            c.test_fraction = j.value("test_fraction", c.test_fraction);
        } catch (const json::exception& e) {
            throw InputError(f.config_path + ": " + e.what());
        }
    }
    if (!f.thresholds.empty()) c.thresholds = parse_thresholds(f.thresholds);
    if (!f.mode.empty()) c.mode = parse_feature_mode(f.mode);
    auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
    if (given(f.o_learning_rate)) c.train.learning_rate = f.learning_rate;
    if (given(f.o_batch_size)) c.train.batch_size = f.batch_size;
    if (given(f.o_dropout)) c.train.dropout_prob = f.dropout;
    if (given(f.o_epochs)) c.train.max_epochs = f.epochs;
    if (given(f.o_patience)) c.train.patience = f.patience;
    if (given(f.o_val_fraction)) c.train.validation_fraction = f.val_fraction;
    if (given(f.o_seed)) c.train.seed = f.seed;
    if (given(f.o_test_fraction)) c.test_fraction = f.test_fraction;
    c.thresholds.validate();
    c.train.validate();
    return c;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string manifest;
    std::string out;
    std::size_t threads = 1;
};

int cmd_extract(const ExtractArgs& a, const PipelineFlags& flags, std::ostream& out, std::ostream& err) {
    const PipelineConfig cfg = resolve_config(flags);
    const auto records = load_manifest(a.manifest);
    FeatureTable table;
    table.mode = cfg.mode;
    table.rows.resize(records.size());
    std::vector<std::string> errors(records.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            const auto& rec = records[i];
            try {
                std::vector<RegionSet> sets;
                for (std::size_t k = 0; k < kNumLesionClasses; ++k)
                    sets.push_back(extract_regions(load_mask(resolve_mask_path(a.manifest, rec.mask_paths[k]), kLesionClasses[k])));
                table.rows[i] = FeatureRow{rec.image_id, make_features(sets, cfg.mode, cfg.thresholds), rec.grades};
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(a.threads, records.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    std::size_t failed = 0;
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) {
            err << "error: " << records[i].image_id << ": " << errors[i] << "\n";
            ++failed;
        }
    if (failed) throw InputError(std::to_string(failed) + " of " + std::to_string(records.size()) + " images failed");

    OutputFile file(a.out);
    write_features_csv(file.stream(), table);
    file.commit();
    out << "extracted " << table.rows.size() << " " << feature_mode_name(cfg.mode) << " feature rows to " << a.out << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string features;
    std::string out_model;
};

int cmd_train(const TrainArgs& a, const PipelineFlags& flags, std::ostream& out) {
    const PipelineConfig cfg = resolve_config(flags);
    const FeatureTable table = read_features_file(a.features);
    if (!table.labeled()) throw InputError(a.features + ": labels required (every row needs dr_grade and dme_grade)");
    std::vector<FeatureVector> x;
    std::vector<GradePair> y;
    for (const auto& row : table.rows) {
        x.push_back(row.features);
        y.push_back(*row.grades);
    }
    const GraderModel model = train(x, y, cfg.train, cfg.thresholds);
    OutputFile file(a.out_model);
    file.stream() << model_to_json(model);
    file.commit();
    out << "trained " << feature_mode_name(model.feature_mode) << " model on " << model.training.train_samples
        << " rows (" << model.training.validation_samples << " validation); best epoch " << model.training.best_epoch
        << " of " << model.training.epochs_run << ", validation loss " << model.training.best_validation_loss << "\n";
    out << "wrote " << a.out_model << "\n";
    return kExitOk;
}

struct PredictArgs {
    std::string model;
    std::string features;
    std::string out;
};

std::vector<PredictionRow> predict_all(const GraderModel& model, const FeatureTable& table) {
    std::vector<PredictionRow> rows;
    for (const auto& row : table.rows) rows.push_back({row.image_id, predict(model, row.features)});
    return rows;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const GraderModel model = load_model(a.model);
    const FeatureTable table = read_features_file(a.features);
    if (table.mode != model.feature_mode)
        throw InputError(a.features + ": " + std::string(feature_mode_name(table.mode)) + " features but the model expects " +
                         std::string(feature_mode_name(model.feature_mode)));
    const auto rows = predict_all(model, table);
    OutputFile file(a.out);
    write_predictions_csv(file.stream(), rows);
    file.commit();
    out << "wrote " << rows.size() << " predictions to " << a.out << "\n";
    return kExitOk;
}

int cmd_explain(const PredictArgs& a, std::ostream& out) {
    const GraderModel model = load_model(a.model);
    const FeatureTable table = read_features_file(a.features);
    if (table.mode != model.feature_mode)
        throw InputError(a.features + ": " + std::string(feature_mode_name(table.mode)) + " features but the model expects " +
                         std::string(feature_mode_name(model.feature_mode)));
    std::ostringstream text;
    for (const auto& row : table.rows) text << render(row.image_id, row.features, predict(model, row.features)).rendered << "\n";
    if (a.out.empty() || a.out == "-") {
        out << text.str();
    } else {
        OutputFile file(a.out);
        file.stream() << text.str();
        file.commit();
        out << "wrote " << table.rows.size() << " explanations to " << a.out << "\n";
    }
    return kExitOk;
}

struct EvaluateArgs {
    std::string features;
    std::string predictions;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const FeatureTable truth = read_features_file(a.features);
    if (!truth.labeled()) throw InputError(a.features + ": labels required for evaluation");
    const auto preds = read_predictions_file(a.predictions);
    if (preds.size() != truth.rows.size())
        throw InputError("row count mismatch: " + std::to_string(truth.rows.size()) + " labeled rows vs " +
                         std::to_string(preds.size()) + " predictions");
    std::map<std::string, GradePair> by_id;
    for (const auto& p : preds)
        if (!by_id.emplace(p.image_id, p.grades).second)
            throw InputError(a.predictions + ": duplicate image_id '" + p.image_id + "'");
    std::vector<LabeledPrediction> pairs;
    for (const auto& row : truth.rows) {
        const auto it = by_id.find(row.image_id);
        if (it == by_id.end()) throw InputError(a.predictions + ": no prediction for '" + row.image_id + "'");
        pairs.push_back({*row.grades, it->second});
    }
    const EvalReport report = joint_accuracy(pairs);
    print_report(out, "Evaluation", report);
    if (!a.out.empty()) {
        OutputFile file(a.out);
        write_report_csv_header(file.stream());
        write_report_csv_row(file.stream(), "evaluate", report);
        file.commit();
    }
    return kExitOk;
}

struct SynthArgs {
    std::string out_dir;
    std::size_t n = 10;
    std::uint64_t seed = 0;
    std::size_t width = 1024;
    std::size_t height = 1024;
    std::string rule = "size-aware";
    std::string thresholds;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const LabelRule rule = parse_label_rule(a.rule);
    SynthSpec spec = rule == LabelRule::SizeAware ? SynthSpec::size_aware(a.n, a.seed) : SynthSpec::count_only(a.n, a.seed);
    spec.width = a.width;
    spec.height = a.height;
    if (!a.thresholds.empty()) spec.thresholds = parse_thresholds(a.thresholds);
    const fs::path manifest = generate(spec, a.out_dir);
    out << "generated " << a.n << " synthetic images; manifest " << manifest.string() << "\n";
    return kExitOk;
}

struct AblationArgs {
    std::string manifest;
    std::string out;
};

int cmd_ablation(const AblationArgs& a, const PipelineFlags& flags, std::ostream& out) {
    const PipelineConfig cfg = resolve_config(flags);
    AblationOptions opts{cfg.thresholds, cfg.train, cfg.test_fraction};
    const AblationResult result = ablation(fs::path(a.manifest), opts);
    print_ablation(out, result);
    if (!a.out.empty()) {
        OutputFile file(a.out);
        write_ablation_csv(file.stream(), result);
        file.commit();
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lesion-mask grading pipeline: regions, symbolic features, grader, explanations", "lesiongrade"};
    app.require_subcommand(1);

    PipelineFlags extract_flags, train_flags, ablation_flags;

    ExtractArgs extract_args;
    auto* extract = app.add_subcommand("extract", "Count lesion regions and write a features CSV");
    extract->add_option("--manifest", extract_args.manifest, "manifest CSV")->required();
    extract->add_option("--out", extract_args.out, "features CSV to write")->required();
    extract->add_option("--threads", extract_args.threads, "worker threads")->capture_default_str();
    add_mode_flag(extract, extract_flags);
    add_threshold_flag(extract, extract_flags);
    add_config_flag(extract, extract_flags);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train the grader on a labeled features CSV");
    train_cmd->add_option("--features", train_args.features, "labeled features CSV")->required();
    train_cmd->add_option("--out-model", train_args.out_model, "model JSON to write")->required();
    add_threshold_flag(train_cmd, train_flags);
    add_train_flags(train_cmd, train_flags);
    add_config_flag(train_cmd, train_flags);

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "Predict (DR, DME) grades for a features CSV");
    predict_cmd->add_option("--model", predict_args.model, "model JSON")->required();
    predict_cmd->add_option("--features", predict_args.features, "features CSV")->required();
    predict_cmd->add_option("--out", predict_args.out, "predictions CSV to write")->required();

    PredictArgs explain_args;
    auto* explain_cmd = app.add_subcommand("explain", "Write one explanation sentence per image");
    explain_cmd->add_option("--model", explain_args.model, "model JSON")->required();
    explain_cmd->add_option("--features", explain_args.features, "features CSV")->required();
    explain_cmd->add_option("--out", explain_args.out, "text file to write (default stdout)");

    EvaluateArgs evaluate_args;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Joint accuracy of predictions against labels");
    evaluate_cmd->add_option("--features", evaluate_args.features, "labeled features CSV (ground truth)")->required();
    evaluate_cmd->add_option("--predictions", evaluate_args.predictions, "predictions CSV")->required();
    evaluate_cmd->add_option("--out", evaluate_args.out, "report CSV to write");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled mask dataset");
    synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth_cmd->add_option("--n", synth_args.n, "number of images")->capture_default_str();
    synth_cmd->add_option("--seed", synth_args.seed, "random seed")->capture_default_str();
    synth_cmd->add_option("--width", synth_args.width, "canvas width")->capture_default_str();
    synth_cmd->add_option("--height", synth_args.height, "canvas height")->capture_default_str();
    synth_cmd->add_option("--rule", synth_args.rule, "label rule: size-aware or count-only")->capture_default_str();
    synth_cmd->add_option("--thresholds", synth_args.thresholds, "size thresholds tau0,tau1,tau2,tau3 (default 10,500,1000,10000)");

    AblationArgs ablation_args;
    auto* ablation_cmd = app.add_subcommand("ablation", "Train and compare simple vs extended features");
    ablation_cmd->add_option("--manifest", ablation_args.manifest, "labeled manifest CSV")->required();
    ablation_cmd->add_option("--out", ablation_args.out, "report CSV to write");
    add_threshold_flag(ablation_cmd, ablation_flags);
    add_train_flags(ablation_cmd, ablation_flags);
    ablation_flags.o_test_fraction =
        ablation_cmd->add_option("--test-fraction", ablation_flags.test_fraction, "held-out test fraction")->capture_default_str();
    add_config_flag(ablation_cmd, ablation_flags);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitBadInput;
    }

    try {
        if (*extract) return cmd_extract(extract_args, extract_flags, out, err);
        if (*train_cmd) return cmd_train(train_args, train_flags, out);
        if (*predict_cmd) return cmd_predict(predict_args, out);
        if (*explain_cmd) return cmd_explain(explain_args, out);
        if (*evaluate_cmd) return cmd_evaluate(evaluate_args, out);
        if (*synth_cmd) return cmd_synth(synth_args, out);
        if (*ablation_cmd) return cmd_ablation(ablation_args, ablation_flags, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}

}  // namespace lesiongrade
