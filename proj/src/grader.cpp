#include "lesiongrade/grader.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "lesiongrade/csv.hpp"
#include "lesiongrade/error.hpp"

namespace lesiongrade {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InputError("learning rate must be positive");
    if (batch_size < 1) throw InputError("batch size must be at least 1");
    if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw InputError("dropout probability must lie in [0, 1)");
    if (max_epochs < 1) throw InputError("max epochs must be at least 1");
    if (patience < 1) throw InputError("patience must be at least 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw InputError("validation fraction must lie in (0, 1)");
}

std::vector<std::size_t> default_trunk_dims(FeatureMode mode) {
    std::vector<std::size_t> dims{feature_length(mode)};
    dims.insert(dims.end(), kDefaultHiddenWidths.begin(), kDefaultHiddenWidths.end());
    return dims;
}

GraderModel GraderModel::zeros(FeatureMode mode, std::vector<std::size_t> trunk_dims, SizeThresholds thresholds) {
    GraderModel m;
    m.feature_mode = mode;
    m.thresholds = thresholds;
    m.trunk_dims = std::move(trunk_dims);
    if (m.trunk_dims.empty()) throw ShapeError("trunk_dims must not be empty");
    for (std::size_t l = 0; l + 1 < m.trunk_dims.size(); ++l) m.trunk.emplace_back(m.trunk_dims[l], m.trunk_dims[l + 1]);
    m.dr_head = DenseLayer(m.trunk_dims.back(), kNumDrGrades);
    m.dme_head = DenseLayer(m.trunk_dims.back(), kNumDmeGrades);
    m.shift.assign(m.trunk_dims.front(), 0.0);
    m.scale.assign(m.trunk_dims.front(), 1.0);
    m.validate();
    return m;
}

namespace {

void check_layer(const DenseLayer& layer, std::size_t in, std::size_t out, const std::string& name) {
    if (layer.inputs != in || layer.outputs != out)
        throw ShapeError(name + ": expected " + std::to_string(out) + "x" + std::to_string(in) + " weights, found " +
                         std::to_string(layer.outputs) + "x" + std::to_string(layer.inputs));
    if (layer.weights.size() != in * out) throw ShapeError(name + ": weight count does not match its shape");
    if (layer.bias.size() != out)
        throw ShapeError(name + ": expected " + std::to_string(out) + " biases, found " + std::to_string(layer.bias.size()));
}

}  // namespace

void GraderModel::validate() const {
    if (trunk_dims.empty()) throw ShapeError("trunk_dims must not be empty");
    if (trunk_dims.front() != feature_length(feature_mode))
        throw ShapeError("trunk_dims[0] is " + std::to_string(trunk_dims.front()) + " but " +
                         std::string(feature_mode_name(feature_mode)) + " features have " +
                         std::to_string(feature_length(feature_mode)) + " entries");
    for (auto d : trunk_dims)
        if (d == 0) throw ShapeError("trunk_dims entries must be positive");
    if (trunk.size() + 1 != trunk_dims.size())
        throw ShapeError("expected " + std::to_string(trunk_dims.size() - 1) + " trunk layers, found " +
                         std::to_string(trunk.size()));
    for (std::size_t l = 0; l < trunk.size(); ++l)
        check_layer(trunk[l], trunk_dims[l], trunk_dims[l + 1], "trunk layer " + std::to_string(l));
    check_layer(dr_head, trunk_dims.back(), kNumDrGrades, "dr_head");
    check_layer(dme_head, trunk_dims.back(), kNumDmeGrades, "dme_head");
    if (shift.size() != trunk_dims.front() || scale.size() != trunk_dims.front())
        throw ShapeError("preprocess shift/scale must have " + std::to_string(trunk_dims.front()) + " entries");
    for (double s : scale)
        if (!(s > 0.0) || !std::isfinite(s)) throw ShapeError("preprocess scales must be positive and finite");
    thresholds.validate();
    if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw ShapeError("dropout_prob must lie in [0, 1)");
}

void init_weights(GraderModel& model, Rng& rng) {
    auto init = [&](DenseLayer& layer) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs));
        for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    };
    for (auto& layer : model.trunk) init(layer);
    init(model.dr_head);
    init(model.dme_head);
}

std::vector<double> preprocess(const FeatureVector& features, const GraderModel& model) {
    if (features.mode != model.feature_mode)
        throw InputError(std::string("model expects ") + std::string(feature_mode_name(model.feature_mode)) +
                         " features, got " + std::string(feature_mode_name(features.mode)));
    std::vector<double> out(features.values.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (std::log1p(static_cast<double>(features.values[i])) - model.shift[i]) / model.scale[i];
    return out;
}

std::pair<std::vector<double>, std::vector<double>> preprocess_stats(std::span<const FeatureVector> features) {
    if (features.empty()) throw InputError("cannot compute preprocessing statistics of an empty set");
    const std::size_t k = features.front().values.size();
    std::vector<double> mean(k, 0.0), var(k, 0.0);
    for (const auto& f : features)
        for (std::size_t i = 0; i < k; ++i) mean[i] += std::log1p(static_cast<double>(f.values[i]));
    for (auto& m : mean) m /= static_cast<double>(features.size());
    for (const auto& f : features)
        for (std::size_t i = 0; i < k; ++i) {
            const double d = std::log1p(static_cast<double>(f.values[i])) - mean[i];
            var[i] += d * d;
        }
    std::vector<double> scale(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double sd = std::sqrt(var[i] / static_cast<double>(features.size()));
        scale[i] = sd > 1e-12 ? sd : 1.0;
    }
    return {std::move(mean), std::move(scale)};
}

std::vector<double> softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        sum += out[i];
    }
    for (auto& p : out) p /= sum;
    return out;
}

double loss(std::span<const double> dr_probs, std::span<const double> dme_probs, const GradePair& label) {
    constexpr double kClamp = 1e-12;
    return -std::log(std::max(dr_probs[static_cast<std::size_t>(label.dr)], kClamp)) -
           std::log(std::max(dme_probs[static_cast<std::size_t>(label.dme)], kClamp));
}

namespace {

void affine(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
    out.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double* row = layer.weights.data() + o * layer.inputs;
        double acc = out[o];
        for (std::size_t i = 0; i < layer.inputs; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

using Trace = ForwardTrace;

void run_forward(const GraderModel& model, std::span<const double> input, bool training, Rng* rng, Trace& t) {
    if (input.size() != model.input_width())
        throw ShapeError("input has " + std::to_string(input.size()) + " entries, model expects " +
                         std::to_string(model.input_width()));
    const bool drop = training && model.dropout_prob > 0.0;
    if (drop && rng == nullptr) throw std::invalid_argument("dropout in training mode requires a generator");
    const double keep = 1.0 - model.dropout_prob;
    t.acts.resize(model.trunk.size() + 1);
    t.pre.resize(model.trunk.size());
    t.mask.resize(model.trunk.size());
    t.acts[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < model.trunk.size(); ++l) {
        affine(model.trunk[l], t.acts[l], t.pre[l]);
        auto& a = t.acts[l + 1];
        a.resize(t.pre[l].size());
        for (std::size_t j = 0; j < a.size(); ++j) a[j] = t.pre[l][j] > 0.0 ? t.pre[l][j] : 0.0;
        t.mask[l].clear();
        if (drop && l + 1 < model.trunk.size()) {
            t.mask[l].resize(a.size());
            for (std::size_t j = 0; j < a.size(); ++j) {
                t.mask[l][j] = rng->uniform() < keep ? 1.0 / keep : 0.0;
                a[j] *= t.mask[l][j];
            }
        }
    }
    affine(model.dr_head, t.acts.back(), t.heads.dr_logits);
    affine(model.dme_head, t.acts.back(), t.heads.dme_logits);
    t.heads.dr_probs = softmax(t.heads.dr_logits);
    t.heads.dme_probs = softmax(t.heads.dme_logits);
}

void accumulate_layer(const DenseLayer& layer, std::span<const double> in, std::span<const double> delta,
                      DenseLayer& grad, std::vector<double>* delta_in) {
    for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        grad.bias[o] += d;
        if (d == 0.0) continue;
        double* g = grad.weights.data() + o * layer.inputs;
        for (std::size_t i = 0; i < layer.inputs; ++i) g[i] += d * in[i];
    }
    if (delta_in) {
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* row = layer.weights.data() + o * layer.inputs;
            for (std::size_t i = 0; i < layer.inputs; ++i) (*delta_in)[i] += d * row[i];
        }
    }
}

}  // namespace

ForwardTrace forward_trace(const GraderModel& model, std::span<const double> input, bool training, Rng* rng) {
    ForwardTrace t;
    run_forward(model, input, training, rng, t);
    return t;
}

HeadOutput forward_input(const GraderModel& model, std::span<const double> input, bool training, Rng* rng) {
    Trace t;
    run_forward(model, input, training, rng, t);
    return std::move(t.heads);
}

HeadOutput forward(const GraderModel& model, const FeatureVector& features, bool training, Rng* rng) {
    const auto x = preprocess(features, model);
    return forward_input(model, x, training, rng);
}

Gradients Gradients::like(const GraderModel& model) {
    Gradients g;
    for (const auto& layer : model.trunk) g.trunk.emplace_back(layer.inputs, layer.outputs);
    g.dr_head = DenseLayer(model.dr_head.inputs, model.dr_head.outputs);
    g.dme_head = DenseLayer(model.dme_head.inputs, model.dme_head.outputs);
    return g;
}

void Gradients::clear() {
    for_each_parameter(*this, [](double& v) { v = 0.0; });
}

void Gradients::add_scaled(const Gradients& other, double factor) {
    std::vector<double> flat;
    for_each_parameter(other, [&](const double& v) { flat.push_back(v); });
    std::size_t i = 0;
    for_each_parameter(*this, [&](double& v) { v += factor * flat[i++]; });
}

double backward_input(const GraderModel& model, std::span<const double> input, const GradePair& label, bool training,
                      Rng* rng, Gradients& grads) {
    Trace t;
    run_forward(model, input, training, rng, t);
    std::vector<double> d_dr = t.heads.dr_probs;
    d_dr[static_cast<std::size_t>(label.dr)] -= 1.0;
    std::vector<double> d_dme = t.heads.dme_probs;
    d_dme[static_cast<std::size_t>(label.dme)] -= 1.0;

    std::vector<double> delta(t.acts.back().size(), 0.0);
    accumulate_layer(model.dr_head, t.acts.back(), d_dr, grads.dr_head, &delta);
    accumulate_layer(model.dme_head, t.acts.back(), d_dme, grads.dme_head, &delta);

    for (std::size_t l = model.trunk.size(); l-- > 0;) {
        for (std::size_t j = 0; j < delta.size(); ++j) {
            if (!t.mask[l].empty()) delta[j] *= t.mask[l][j];
            if (!(t.pre[l][j] > 0.0)) delta[j] = 0.0;
        }
        std::vector<double> delta_in(t.acts[l].size(), 0.0);
        accumulate_layer(model.trunk[l], t.acts[l], delta, grads.trunk[l], l > 0 ? &delta_in : nullptr);
        delta = std::move(delta_in);
    }
    return loss(t.heads.dr_probs, t.heads.dme_probs, label);
}

int argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return static_cast<int>(best);
}

GradePair predict(const GraderModel& model, const FeatureVector& features) {
    const HeadOutput out = forward(model, features, false, nullptr);
    return {argmax(out.dr_probs), argmax(out.dme_probs)};
}

double mean_loss(const GraderModel& model, std::span<const FeatureVector> features, std::span<const GradePair> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const HeadOutput out = forward(model, features[i], false, nullptr);
        total += loss(out.dr_probs, out.dme_probs, labels[i]);
    }
    return total / static_cast<double>(features.size());
}

namespace {

class Adam {
public:
    Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

    void step(const std::vector<double*>& params, const std::vector<const double*>& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = *grads[i];
            m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
            v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g * g;
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            *params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + kEps);
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    double lr_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t t_ = 0;
};

}  // namespace

GraderModel train(std::span<const FeatureVector> features, std::span<const GradePair> labels, const TrainConfig& config,
                  const SizeThresholds& thresholds, std::vector<std::size_t> hidden_widths) {
    config.validate();
    if (features.empty()) throw InputError("training set is empty");
    if (features.size() != labels.size()) throw InputError("feature and label counts differ");
    if (features.size() < 2) throw InputError("training needs at least 2 samples");
    const FeatureMode mode = features.front().mode;
    for (const auto& f : features)
        if (f.mode != mode) throw InputError("training set mixes simple and extended feature vectors");
    for (const auto& g : labels)
        if (!valid_grades(g)) throw InputError("training label out of range");

    Rng rng(config.seed);
    const std::size_t n = features.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.validation_fraction));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    std::vector<FeatureVector> train_x, val_x;
    std::vector<GradePair> train_y, val_y;
    for (auto i : train_idx) {
        train_x.push_back(features[i]);
        train_y.push_back(labels[i]);
    }
    for (auto i : val_idx) {
        val_x.push_back(features[i]);
        val_y.push_back(labels[i]);
    }

    std::vector<std::size_t> dims{feature_length(mode)};
    dims.insert(dims.end(), hidden_widths.begin(), hidden_widths.end());
    GraderModel model = GraderModel::zeros(mode, std::move(dims), thresholds);
    std::tie(model.shift, model.scale) = preprocess_stats(train_x);
    model.dropout_prob = config.dropout_prob;
    model.seed = config.seed;
    init_weights(model, rng);

    std::vector<std::vector<double>> inputs;
    inputs.reserve(train_x.size());
    for (const auto& f : train_x) inputs.push_back(preprocess(f, model));

    Gradients grads = Gradients::like(model);
    std::vector<double*> params;
    for_each_parameter(model, [&](double& v) { params.push_back(&v); });
    std::vector<const double*> grad_ptrs;
    for_each_parameter(grads, [&](double& v) { grad_ptrs.push_back(&v); });
    Adam adam(params.size(), config.learning_rate);

    GraderModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    std::vector<double> history;
    std::vector<std::size_t> batch_order(inputs.size());
    std::iota(batch_order.begin(), batch_order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(std::span(batch_order));
        for (std::size_t start = 0; start < batch_order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(start + config.batch_size, batch_order.size());
            grads.clear();
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = batch_order[b];
                backward_input(model, inputs[i], train_y[i], true, &rng, grads);
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for_each_parameter(grads, [&](double& v) { v *= inv; });
            adam.step(params, grad_ptrs);
        }
        const double val_loss = mean_loss(model, val_x, val_y);
        history.push_back(val_loss);
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best_epoch = epoch;
            best = model;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }

    if (best_epoch == 0) {
        // Every epoch produced a non-finite validation loss.
        throw std::runtime_error("training diverged: validation loss never finite");
    }
    best.training.train_samples = train_x.size();
    best.training.validation_samples = val_x.size();
    best.training.epochs_run = history.size();
    best.training.best_epoch = best_epoch;
    best.training.best_validation_loss = best_loss;
    best.training.validation_losses = std::move(history);
    best.training.validation_indices = val_idx;
    std::sort(best.training.validation_indices.begin(), best.training.validation_indices.end());
    best.training.config = config;
    return best;
}

// ---------------------------------------------------------------------------
// Model files

namespace {

json layer_to_json(const DenseLayer& layer) {
    json rows = json::array();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
        json row = json::array();
        for (std::size_t i = 0; i < layer.inputs; ++i) row.push_back(layer.w(o, i));
        rows.push_back(std::move(row));
    }
    return json{{"weights", std::move(rows)}, {"bias", layer.bias}};
}

DenseLayer layer_from_json(const json& j, std::size_t in, std::size_t out, const std::string& name) {
    if (!j.is_object() || !j.contains("weights") || !j.contains("bias"))
        throw ShapeError(name + ": expected object with weights and bias");
    const json& rows = j.at("weights");
    if (!rows.is_array() || rows.size() != out)
        throw ShapeError(name + ": expected " + std::to_string(out) + " weight rows, found " +
                         std::to_string(rows.is_array() ? rows.size() : 0));
    DenseLayer layer(in, out);
    for (std::size_t o = 0; o < out; ++o) {
        const json& row = rows[o];
        if (!row.is_array() || row.size() != in)
            throw ShapeError(name + ": weight row " + std::to_string(o) + " should have " + std::to_string(in) +
                             " columns, found " + std::to_string(row.is_array() ? row.size() : 0));
        for (std::size_t i = 0; i < in; ++i) layer.w(o, i) = row[i].get<double>();
    }
    const json& bias = j.at("bias");
    if (!bias.is_array() || bias.size() != out)
        throw ShapeError(name + ": expected " + std::to_string(out) + " biases, found " +
                         std::to_string(bias.is_array() ? bias.size() : 0));
    for (std::size_t o = 0; o < out; ++o) layer.bias[o] = bias[o].get<double>();
    return layer;
}

json config_to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},   {"dropout_prob", c.dropout_prob},
                {"max_epochs", c.max_epochs},       {"patience", c.patience},       {"validation_fraction", c.validation_fraction},
                {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.dropout_prob = j.value("dropout_prob", c.dropout_prob);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.seed = j.value("seed", c.seed);
    return c;
}

}  // namespace

std::string model_to_json(const GraderModel& model) {
    model.validate();
    json trunk = json::array();
    for (const auto& layer : model.trunk) trunk.push_back(layer_to_json(layer));
    const TrainingInfo& t = model.training;
    json doc = {
        {"format_version", kModelFormatVersion},
        {"feature_mode", std::string(feature_mode_name(model.feature_mode))},
        {"thresholds",
         {{"tau0", model.thresholds.tau0}, {"tau1", model.thresholds.tau1}, {"tau2", model.thresholds.tau2},
          {"tau3", model.thresholds.tau3}}},
        {"trunk_dims", model.trunk_dims},
        {"trunk", std::move(trunk)},
        {"dr_head", layer_to_json(model.dr_head)},
        {"dme_head", layer_to_json(model.dme_head)},
        {"preprocess", {{"shift", model.shift}, {"scale", model.scale}}},
        {"dropout_prob", model.dropout_prob},
        {"seed", model.seed},
        {"training",
         {{"train_samples", t.train_samples},
          {"validation_samples", t.validation_samples},
          {"epochs_run", t.epochs_run},
          {"best_epoch", t.best_epoch},
          {"best_validation_loss", t.best_validation_loss},
          {"validation_losses", t.validation_losses},
          {"validation_indices", t.validation_indices},
          {"config", config_to_json(t.config)}}},
    };
    return doc.dump(1) + "\n";
}

GraderModel model_from_json(std::string_view text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(source + ": invalid JSON: " + e.what());
    }
    try {
        if (!doc.is_object() || !doc.contains("format_version"))
            throw InputError(source + ": missing format_version");
        const int version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw InputError(source + ": unknown format_version " + std::to_string(version));
        GraderModel m;
        m.feature_mode = parse_feature_mode(doc.at("feature_mode").get<std::string>());
        const json& th = doc.at("thresholds");
        m.thresholds = {th.at("tau0").get<std::uint64_t>(), th.at("tau1").get<std::uint64_t>(),
                        th.at("tau2").get<std::uint64_t>(), th.at("tau3").get<std::uint64_t>()};
        m.trunk_dims = doc.at("trunk_dims").get<std::vector<std::size_t>>();
        if (m.trunk_dims.empty()) throw ShapeError(source + ": trunk_dims must not be empty");
        const json& trunk = doc.at("trunk");
        if (!trunk.is_array() || trunk.size() + 1 != m.trunk_dims.size())
            throw ShapeError(source + ": trunk_dims lists " + std::to_string(m.trunk_dims.size() - 1) +
                             " layers but the file holds " + std::to_string(trunk.is_array() ? trunk.size() : 0));
        for (std::size_t l = 0; l < trunk.size(); ++l)
            m.trunk.push_back(layer_from_json(trunk[l], m.trunk_dims[l], m.trunk_dims[l + 1],
                                              source + ": trunk layer " + std::to_string(l)));
        m.dr_head = layer_from_json(doc.at("dr_head"), m.trunk_dims.back(), kNumDrGrades, source + ": dr_head");
        m.dme_head = layer_from_json(doc.at("dme_head"), m.trunk_dims.back(), kNumDmeGrades, source + ": dme_head");
        m.shift = doc.at("preprocess").at("shift").get<std::vector<double>>();
        m.scale = doc.at("preprocess").at("scale").get<std::vector<double>>();
        m.dropout_prob = doc.value("dropout_prob", 0.0);
        m.seed = doc.value("seed", std::uint64_t{0});
        if (doc.contains("training")) {
            const json& t = doc.at("training");
            m.training.train_samples = t.value("train_samples", std::size_t{0});
            m.training.validation_samples = t.value("validation_samples", std::size_t{0});
            m.training.epochs_run = t.value("epochs_run", std::size_t{0});
            m.training.best_epoch = t.value("best_epoch", std::size_t{0});
            m.training.best_validation_loss = t.value("best_validation_loss", 0.0);
            m.training.validation_losses = t.value("validation_losses", std::vector<double>{});
            m.training.validation_indices = t.value("validation_indices", std::vector<std::size_t>{});
            if (t.contains("config")) m.training.config = config_from_json(t.at("config"));
        }
        try {
            m.validate();
        } catch (const ShapeError& e) {
            throw ShapeError(source + ": " + e.what());
        }
        return m;
    } catch (const json::exception& e) {
        throw InputError(source + ": malformed model file: " + e.what());
    }
}

void save_model(const GraderModel& model, const std::filesystem::path& path) {
    const std::string text = model_to_json(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

GraderModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path.string() + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str(), path.string());
}

void write_predictions_csv(std::ostream& out, std::span<const PredictionRow> rows) {
    csv::write_row(out, {"image_id", "dr_pred", "dme_pred"});
    for (const auto& r : rows) csv::write_row(out, {r.image_id, std::to_string(r.grades.dr), std::to_string(r.grades.dme)});
}

std::vector<PredictionRow> read_predictions_file(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const std::size_t id = table.column("image_id"), dr = table.column("dr_pred"), dme = table.column("dme_pred");
    if (id == std::string::npos || dr == std::string::npos || dme == std::string::npos)
        throw InputError(path + ": predictions CSV needs image_id,dr_pred,dme_pred");
    std::vector<PredictionRow> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto parse = [&](const std::string& s) {
            int v = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
                throw InputError(path + ":" + std::to_string(table.lines[r]) + ": bad grade '" + s + "'");
            return v;
        };
        rows.push_back({row[id], checked_grades(parse(row[dr]), parse(row[dme]))});
    }
    return rows;
}

}  // namespace lesiongrade
