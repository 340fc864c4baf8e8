#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lesiongrade/lesion.hpp"
#include "lesiongrade/random.hpp"
#include "lesiongrade/symbolic.hpp"

namespace lesiongrade {

// Affine map out = W * in + b with W stored row-major as out x in.
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out) : inputs(in), outputs(out), weights(in * out, 0.0), bias(out, 0.0) {}

    double& w(std::size_t o, std::size_t i) { return weights[o * inputs + i]; }
    double w(std::size_t o, std::size_t i) const { return weights[o * inputs + i]; }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 16;
    double dropout_prob = 0.1;
    std::size_t max_epochs = 20;
    std::size_t patience = 10;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;

    // Throws InputError on out-of-range values.
    void validate() const;
};

struct TrainingInfo {
    std::size_t train_samples = 0;
    std::size_t validation_samples = 0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;  // 1-based
    double best_validation_loss = 0.0;
    std::vector<double> validation_losses;  // one per completed epoch
    std::vector<std::size_t> validation_indices;  // rows of the training input held out, ascending
    TrainConfig config;
};

// Hidden widths used after the input layer; the input width is the feature length.
inline const std::vector<std::size_t> kDefaultHiddenWidths = {25, 50, 75, 100, 75, 50, 25, 12};

std::vector<std::size_t> default_trunk_dims(FeatureMode mode);

struct GraderModel {
    FeatureMode feature_mode = FeatureMode::Extended;
    SizeThresholds thresholds;
    std::vector<std::size_t> trunk_dims;  // trunk_dims[0] is the input width
    std::vector<DenseLayer> trunk;         // trunk_dims.size() - 1 layers, ReLU after each
    DenseLayer dr_head;                    // last width -> 5
    DenseLayer dme_head;                   // last width -> 3
    std::vector<double> shift;
    std::vector<double> scale;
    double dropout_prob = 0.0;  // applied only in training mode
    std::uint64_t seed = 0;
    TrainingInfo training;

    // All-zero parameters with identity preprocessing.
    static GraderModel zeros(FeatureMode mode, std::vector<std::size_t> trunk_dims,
                             SizeThresholds thresholds = {});

    // Throws ShapeError naming the offending layer.
    void validate() const;
    std::size_t input_width() const { return trunk_dims.empty() ? 0 : trunk_dims.front(); }
};

// Uniform(+-sqrt(6 / fan_in)) weights, zero biases.
void init_weights(GraderModel& model, Rng& rng);

// (log1p(v) - shift) / scale per entry.
std::vector<double> preprocess(const FeatureVector& features, const GraderModel& model);

// Per-feature mean and population std of log1p(values). Zero std becomes 1.
std::pair<std::vector<double>, std::vector<double>> preprocess_stats(std::span<const FeatureVector> features);

struct HeadOutput {
    std::vector<double> dr_logits;
    std::vector<double> dme_logits;
    std::vector<double> dr_probs;
    std::vector<double> dme_probs;
};

// Intermediate values of one forward pass.
struct ForwardTrace {
    std::vector<std::vector<double>> acts;  // acts[0] = input, acts[l+1] = output of trunk layer l
    std::vector<std::vector<double>> pre;   // pre-activation of trunk layer l
    std::vector<std::vector<double>> mask;  // dropout multipliers, empty where not applied
    HeadOutput heads;
};

// Trunk layers use ReLU. In training mode every trunk layer except the last
// (the width-12 layer feeding the heads) is followed by inverted dropout.
ForwardTrace forward_trace(const GraderModel& model, std::span<const double> input, bool training, Rng* rng);

// Forward on already-preprocessed input. `rng` may be null unless training
// with a nonzero dropout probability.
HeadOutput forward_input(const GraderModel& model, std::span<const double> input, bool training, Rng* rng);
HeadOutput forward(const GraderModel& model, const FeatureVector& features, bool training, Rng* rng);

std::vector<double> softmax(std::span<const double> logits);

// Summed cross-entropy of both heads, probabilities clamped at 1e-12.
double loss(std::span<const double> dr_probs, std::span<const double> dme_probs, const GradePair& label);

// Gradient of the summed loss with respect to every parameter. Same layout as
// the model's layers.
struct Gradients {
    std::vector<DenseLayer> trunk;
    DenseLayer dr_head;
    DenseLayer dme_head;

    static Gradients like(const GraderModel& model);
    void clear();
    void add_scaled(const Gradients& other, double factor);
};

// Accumulates d(loss)/d(params) for one sample into `grads` and returns the
// loss. Dropout masks are drawn when training with dropout.
double backward_input(const GraderModel& model, std::span<const double> input, const GradePair& label, bool training,
                      Rng* rng, Gradients& grads);

// Visits every trainable scalar in a fixed order: trunk layers, DR head, DME head.
template <typename Model, typename Fn>
void for_each_parameter(Model& model, Fn&& fn) {
    auto visit = [&](auto& layer) {
        for (auto& w : layer.weights) fn(w);
        for (auto& b : layer.bias) fn(b);
    };
    for (auto& layer : model.trunk) visit(layer);
    visit(model.dr_head);
    visit(model.dme_head);
}

// Trains with Adam (beta1 0.9, beta2 0.999, eps 1e-8), early stopping on
// validation loss, restoring the best epoch's weights. Deterministic for a seed.
GraderModel train(std::span<const FeatureVector> features, std::span<const GradePair> labels,
                  const TrainConfig& config, const SizeThresholds& thresholds = {},
                  std::vector<std::size_t> hidden_widths = kDefaultHiddenWidths);

// Mean loss in inference mode.
double mean_loss(const GraderModel& model, std::span<const FeatureVector> features, std::span<const GradePair> labels);

// Lowest index wins ties.
int argmax(std::span<const double> values);

GradePair predict(const GraderModel& model, const FeatureVector& features);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const GraderModel& model);
GraderModel model_from_json(std::string_view text, const std::string& source = "<model>");
void save_model(const GraderModel& model, const std::filesystem::path& path);
GraderModel load_model(const std::filesystem::path& path);

struct PredictionRow {
    std::string image_id;
    GradePair grades;
};

// Header: image_id,dr_pred,dme_pred
void write_predictions_csv(std::ostream& out, std::span<const PredictionRow> rows);
std::vector<PredictionRow> read_predictions_file(const std::string& path);

}  // namespace lesiongrade
