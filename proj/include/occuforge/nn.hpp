#pragma once

// From-scratch differentiable kernels. Batched tensors keep one sample per
// column, so a D x B matrix is a batch of B inputs of dimension D.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace occuforge::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Parameters and gradients

/// Named, mutable view of one learnable tensor.
struct ParamView {
    std::string name;
    Eigen::Map<Matrix> value;
};

ParamView view(std::string name, Matrix& m);
ParamView view(std::string name, Vector& v);

/// Gradient blocks aligned one-to-one with a network's parameters().
struct Gradients {
    std::vector<std::string> names;
    std::vector<Matrix> blocks;

    static Gradients zeros_like(std::span<const ParamView> params);
    std::size_t scalar_count() const;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Matrix& m, int fan_in, Rng& rng);

// ---------------------------------------------------------------------------
// Dense layers

enum class Activation { relu, sigmoid, identity };

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::identity;

    static DenseLayer zeros(int in, int out, Activation act);
    int in_dim() const { return static_cast<int>(weight.cols()); }
    int out_dim() const { return static_cast<int>(weight.rows()); }
    void append_params(std::vector<ParamView>& out, const std::string& prefix);
    void init(Rng& rng);
};

double sigmoid(double z);

Vector dense_forward(const DenseLayer& layer, const Vector& x);
Matrix dense_forward(const DenseLayer& layer, const Matrix& x);

/// Backward through activation(W x + b). `y` is the forward output; gradients
/// are accumulated into `grad`; returns dL/dx.
Matrix dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& y, const Matrix& dy, DenseLayer& grad);

/// Same, starting from dL/d(W x + b).
Matrix dense_backward_linear(const DenseLayer& layer, const Matrix& x, const Matrix& dz, DenseLayer& grad);

// ---------------------------------------------------------------------------
// Dropout

struct DropoutResult {
    Matrix output;
    Matrix mask;  // 0 for dropped units, 1/(1-rate) for kept ones
};

/// Inverted dropout. Identity (mask of ones) when `training` is false or rate is 0.
DropoutResult dropout_apply(const Matrix& x, double rate, Rng& rng, bool training);

// ---------------------------------------------------------------------------
// Binary cross-entropy over sigmoid outputs

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean over all entries of -[y log p + (1-y) log(1-p)], p clamped to
/// [1e-12, 1 - 1e-12]. Equals the batch mean of per-sample means over k outputs.
double bce_loss(const Matrix& probs, const Matrix& targets);

/// d(bce_loss)/d(pre-sigmoid logits): (p - y) / (rows * cols), zero where clamped.
Matrix bce_logit_grad(const Matrix& probs, const Matrix& targets);

// ---------------------------------------------------------------------------
// LSTM

struct LstmCellParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Matrix W_xi, W_xf, W_xo, W_xc;  // H x D
    Matrix W_hi, W_hf, W_ho, W_hc;  // H x H
    Vector b_i, b_f, b_o, b_c;      // H

    static LstmCellParams zeros(int input_dim, int hidden_dim);
    void append_params(std::vector<ParamView>& out, const std::string& prefix);
    void init(Rng& rng);
};

struct LstmState {
    Matrix h;
    Matrix c;
};

struct LstmGates {
    Matrix i, f, o, g;  // g is the candidate cell state
};

/// One step of the LSTM recurrence. Columns of x, h_prev, c_prev are batch entries.
LstmState lstm_cell_forward(const LstmCellParams& p, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                            LstmGates* gates = nullptr);

struct LstmSequenceCache {
    std::vector<Matrix> x, h_prev, c_prev, c;
    std::vector<LstmGates> gates;
};

/// Unrolls from zero state over `inputs` (oldest first); returns the final h.
Matrix lstm_sequence_forward(const LstmCellParams& p, std::span<const Matrix> inputs, LstmSequenceCache* cache);

/// BPTT from dL/dh_final back through every cached step. Accumulates into `grad`.
void lstm_sequence_backward(const LstmCellParams& p, const LstmSequenceCache& cache, const Matrix& dh_final,
                            LstmCellParams& grad);

// ---------------------------------------------------------------------------
// GRU: z = s(W_xz x + W_hz h + b_z), r = s(W_xr x + W_hr h + b_r),
//      n = tanh(W_xh x + W_hh (r*h) + b_h), h' = (1-z)*h + z*n

struct GruCellParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Matrix W_xz, W_xr, W_xh;
    Matrix W_hz, W_hr, W_hh;
    Vector b_z, b_r, b_h;

    static GruCellParams zeros(int input_dim, int hidden_dim);
    void append_params(std::vector<ParamView>& out, const std::string& prefix);
    void init(Rng& rng);
};

struct GruGates {
    Matrix z, r, n;
};

Matrix gru_cell_forward(const GruCellParams& p, const Matrix& x, const Matrix& h_prev, GruGates* gates = nullptr);

struct GruSequenceCache {
    std::vector<Matrix> x, h_prev;
    std::vector<GruGates> gates;
};

Matrix gru_sequence_forward(const GruCellParams& p, std::span<const Matrix> inputs, GruSequenceCache* cache);
void gru_sequence_backward(const GruCellParams& p, const GruSequenceCache& cache, const Matrix& dh_final,
                           GruCellParams& grad);

// ---------------------------------------------------------------------------
// Networks, training and the gradient oracle

/// Column-batched network input: an ordered sequence of per-step matrices
/// (oldest first), an optional static context matrix, and k x B targets.
struct Batch {
    std::vector<Matrix> sequence;
    Matrix context;
    Matrix targets;

    /// Column count, taken from whichever of targets, context, sequence is present.
    Eigen::Index size() const {
        if (targets.size() > 0) return targets.cols();
        if (context.size() > 0) return context.cols();
        return sequence.empty() ? 0 : sequence.front().cols();
    }
};

Batch select_columns(const Batch& batch, std::span<const std::size_t> columns);
Batch concatenate(std::span<const Batch> batches);

/// Dropout configuration for one forward pass. A null rng disables dropout.
struct DropoutContext {
    double rate = 0.0;
    Rng* rng = nullptr;
};

struct LossAndGradients {
    double loss = 0.0;
    Gradients gradients;
};

/// A model trained by mean binary cross-entropy over k sigmoid outputs.
class Network {
public:
    virtual ~Network() = default;

    virtual std::vector<ParamView> parameters() = 0;
    virtual std::unique_ptr<Network> clone() const = 0;
    virtual int outputs() const = 0;

    /// k x B probabilities.
    virtual Matrix forward(const Batch& batch, DropoutContext dropout) const = 0;
    virtual LossAndGradients loss_and_gradients(const Batch& batch, DropoutContext dropout) const = 0;

    Matrix predict(const Batch& batch) const { return forward(batch, {}); }
    double loss(const Batch& batch) const { return bce_loss(forward(batch, {}), batch.targets); }
    std::size_t parameter_count() const;
};

/// Analytic gradient of the mean batch loss. Throws when the loss or any
/// gradient block is non-finite, naming the block.
LossAndGradients compute_gradients(const Network& net, const Batch& batch, DropoutContext dropout = {});

/// Central differences (L(theta+eps) - L(theta-eps)) / (2 eps) for every scalar
/// parameter, dropout disabled.
Gradients finite_diff_grad(const Network& net, const Batch& batch, double eps);

/// max over parameter blocks of ||a - b|| / max(||a||, ||b||, floor), Frobenius norms.
double max_relative_error(const Gradients& a, const Gradients& b, double floor = 1e-12);

/// max over scalar entries of |a - b| / max(|a|, |b|, floor). Entries near
/// zero are dominated by finite-difference roundoff (about 1e-11 absolute at
/// eps 1e-5), so this is reported, not used as the check.
double max_entry_relative_error(const Gradients& a, const Gradients& b, double floor = 1e-7);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update of every parameter in place.
void adam_step(AdamState& state, std::span<ParamView> params, const Gradients& grads, double learning_rate);

struct TrainHyperparams {
    double learning_rate = 0.001;
    int batch_size = 30;
    int epochs = 15;
    double dropout_rate = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean training loss per epoch
    AdamState optimizer;
};

/// Mini-batch Adam. Each epoch shuffles with an rng seeded from hp.seed (which
/// also drives dropout); the final batch of an epoch may be short.
TrainResult train(Network& net, const Batch& data, const TrainHyperparams& hp);

}  // namespace occuforge::nn
