#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "occuforge/features.hpp"
#include "occuforge/nn.hpp"

namespace occuforge::models {

using features::DayTypeProfiles;
using features::Sample;
using ingest::OccupancySeries;

/// Decision rule for every model: probability >= threshold predicts occupied.
std::vector<std::uint8_t> threshold_probabilities(std::span<const double> probs, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Hybrid LSTM
//
//   x1 (m binary states) -> LSTM -> dropout -> dense(relu) --------------+
//                                                                        concat -> dense(relu) -> dropout -> dense(sigmoid, k)
//   x2 (time + profile)  -> dense(relu) -> dense(relu) -> dense(relu) ---+

struct HybridConfig {
    int m = 12;
    int k = 1;
    int context_dim = 147;
    int lstm_hidden = 36;
    std::vector<int> branch{64, 32, 16};
    int post_lstm = 16;
    int merge = 32;
    double threshold = 0.5;

    void validate() const;
};

class HybridModel final : public nn::Network {
public:
    explicit HybridModel(HybridConfig config);  // all weights zero

    /// Uniform fan-in initialisation, biases zero.
    static HybridModel initialized(HybridConfig config, std::uint64_t seed);

    const HybridConfig& config() const { return config_; }

    nn::LstmCellParams lstm;
    std::vector<nn::DenseLayer> branch;
    nn::DenseLayer post_lstm;
    nn::DenseLayer merge;
    nn::DenseLayer output;

    std::vector<nn::ParamView> parameters() override;
    std::unique_ptr<nn::Network> clone() const override { return std::make_unique<HybridModel>(*this); }
    int outputs() const override { return config_.k; }
    nn::Matrix forward(const nn::Batch& batch, nn::DropoutContext dropout) const override;
    nn::LossAndGradients loss_and_gradients(const nn::Batch& batch, nn::DropoutContext dropout) const override;

private:
    struct Activations;
    Activations run(const nn::Batch& batch, nn::DropoutContext dropout) const;
    void check_batch(const nn::Batch& batch) const;

    HybridConfig config_;
};

/// Samples as a column batch: sequence = m steps of 1 x B (oldest first),
/// context = x2, targets = y.
nn::Batch to_batch(std::span<const Sample> samples);
inline nn::Batch to_batch(const features::Dataset& d) { return to_batch(d.samples); }

/// k probabilities; dropout (rate `dropout_rate`) is active only when training.
std::vector<double> hybrid_forward(const HybridModel& model, const Sample& sample, bool training,
                                   double dropout_rate = 0.0, nn::Rng* rng = nullptr);

std::vector<std::uint8_t> predict_window(const HybridModel& model, const Sample& sample);

// ---------------------------------------------------------------------------
// Plain recurrent baselines over frames V = {slot, day, weekend, profile, y[t-1]}

enum class RecurrentKind { lstm, gru };

struct RecurrentBaselineConfig {
    RecurrentKind kind = RecurrentKind::lstm;
    int frames = 3;
    int frame_dim = 148;
    int k = 1;
    int hidden = 36;
    int dense = 32;
    double threshold = 0.5;

    void validate() const;
};

/// recurrent block -> dense(relu) -> dropout -> dense(sigmoid, k)
class RecurrentBaseline final : public nn::Network {
public:
    explicit RecurrentBaseline(RecurrentBaselineConfig config);

    const RecurrentBaselineConfig& config() const { return config_; }

    nn::LstmCellParams lstm;  // used when kind == lstm
    nn::GruCellParams gru;    // used when kind == gru
    nn::DenseLayer dense;
    nn::DenseLayer output;

    std::vector<nn::ParamView> parameters() override;
    std::unique_ptr<nn::Network> clone() const override { return std::make_unique<RecurrentBaseline>(*this); }
    int outputs() const override { return config_.k; }
    nn::Matrix forward(const nn::Batch& batch, nn::DropoutContext dropout) const override;
    nn::LossAndGradients loss_and_gradients(const nn::Batch& batch, nn::DropoutContext dropout) const override;

private:
    void check_batch(const nn::Batch& batch) const;
    RecurrentBaselineConfig config_;
};

RecurrentBaseline build_baseline_recurrent(RecurrentKind kind, RecurrentBaselineConfig config, std::uint64_t seed);

/// Frame for step t: slot/day/weekend of t, profile of t's day type, y[t-1].
std::vector<double> baseline_frame(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t t);

/// Column batch of frame sequences (V[t-frames+1], ..., V[t]) with targets
/// y[t..t+k-1], one column per t in [first, last].
nn::Batch build_frame_batch(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t first,
                            std::size_t last, int frames, int k);

// ---------------------------------------------------------------------------
// Logistic regression on {slot, day, weekend, y[t-1], y[t-2], y[t-3]}

using Model1Features = std::array<double, 6>;

struct LogisticModel {
    Model1Features weights{};
    double intercept = 0.0;
};

struct LogisticFitOptions {
    int steps = 2000;
    double learning_rate = 0.5;
    std::uint64_t seed = 0;
};

/// Features of step t from the true history.
Model1Features model1_features(const OccupancySeries& series, std::size_t t);

/// Full-batch gradient descent on mean binary cross-entropy; the initial
/// weights are drawn uniformly in [-0.01, 0.01] from the seed.
LogisticModel logistic_fit(std::span<const Model1Features> features, std::span<const std::uint8_t> targets,
                           const LogisticFitOptions& options);

double logistic_predict(const LogisticModel& model, const Model1Features& features);

using SingleStepClassifier = std::function<double(const Model1Features&)>;

/// Predicts steps t..t+k-1 one at a time, feeding each thresholded
/// prediction back as the newest history state. Needs t >= 3.
std::vector<std::uint8_t> walk_forward_predict(const SingleStepClassifier& classifier, const OccupancySeries& series,
                                               std::size_t t, int k, double threshold = 0.5);

}  // namespace occuforge::models
