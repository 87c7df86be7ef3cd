#include <doctest.h>

#include <cmath>
#include <random>

#include "occuforge/error.hpp"
#include "occuforge/models.hpp"
#include "occuforge/nn.hpp"

using namespace occuforge;
using namespace occuforge::nn;

namespace {

template <class Gen>
Matrix filled(Eigen::Index rows, Eigen::Index cols, Gen gen) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gen();
    }
    return m;
}

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Scalar recurrences written out independently of the library.
struct ScalarLstm {
    double wxi, wxf, wxo, wxc, whi, whf, who, whc, bi, bf, bo, bc;
    std::pair<double, double> step(double x, double h, double c) const {
        const double i = sig(wxi * x + whi * h + bi);
        const double f = sig(wxf * x + whf * h + bf);
        const double o = sig(wxo * x + who * h + bo);
        const double g = std::tanh(wxc * x + whc * h + bc);
        const double c2 = f * c + i * g;
        return {o * std::tanh(c2), c2};
    }
};

struct ScalarGru {
    double wxz, wxr, wxh, whz, whr, whh, bz, br, bh;
    double step(double x, double h) const {
        const double z = sig(wxz * x + whz * h + bz);
        const double r = sig(wxr * x + whr * h + br);
        const double n = std::tanh(wxh * x + whh * (r * h) + bh);
        return (1.0 - z) * h + z * n;
    }
};

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

LstmCellParams lstm_from(const ScalarLstm& s) {
    auto p = LstmCellParams::zeros(1, 1);
    p.W_xi(0, 0) = s.wxi, p.W_xf(0, 0) = s.wxf, p.W_xo(0, 0) = s.wxo, p.W_xc(0, 0) = s.wxc;
    p.W_hi(0, 0) = s.whi, p.W_hf(0, 0) = s.whf, p.W_ho(0, 0) = s.who, p.W_hc(0, 0) = s.whc;
    p.b_i(0) = s.bi, p.b_f(0) = s.bf, p.b_o(0) = s.bo, p.b_c(0) = s.bc;
    return p;
}

GruCellParams gru_from(const ScalarGru& s) {
    auto p = GruCellParams::zeros(1, 1);
    p.W_xz(0, 0) = s.wxz, p.W_xr(0, 0) = s.wxr, p.W_xh(0, 0) = s.wxh;
    p.W_hz(0, 0) = s.whz, p.W_hr(0, 0) = s.whr, p.W_hh(0, 0) = s.whh;
    p.b_z(0) = s.bz, p.b_r(0) = s.br, p.b_h(0) = s.bh;
    return p;
}

// L(theta) = theta^2 expressed as BCE of p = exp(-theta^2) against target 1.
class SquareNet final : public Network {
public:
    Matrix theta = scalar(3.0);
    std::vector<ParamView> parameters() override { return {view("theta", theta)}; }
    std::unique_ptr<Network> clone() const override { return std::make_unique<SquareNet>(*this); }
    int outputs() const override { return 1; }
    Matrix forward(const Batch&, DropoutContext) const override { return scalar(std::exp(-theta(0, 0) * theta(0, 0))); }
    LossAndGradients loss_and_gradients(const Batch& b, DropoutContext d) const override {
        LossAndGradients r;
        r.loss = bce_loss(forward(b, d), b.targets);
        r.gradients.names = {"theta"};
        r.gradients.blocks = {scalar(2.0 * theta(0, 0))};
        return r;
    }
};

Batch random_frames(int frames, int dim, int k, int cols, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Batch b;
    for (int f = 0; f < frames; ++f) b.sequence.push_back(filled(dim, cols, [&] { return u(rng); }));
    b.targets = filled(k, cols, [&] { return u(rng) < 0.5 ? 1.0 : 0.0; });
    return b;
}

models::HybridConfig tiny_hybrid(int k) {
    models::HybridConfig c;
    c.m = 4;
    c.k = k;
    c.context_dim = 5;
    c.lstm_hidden = 3;
    c.branch = {4, 3};
    c.post_lstm = 3;
    c.merge = 4;
    return c;
}

// Learnable by persistence: target = the most recent history state.
Batch persistence_batch(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::bernoulli_distribution b(0.4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Batch batch;
    for (int s = 0; s < 4; ++s) batch.sequence.push_back(filled(1, n, [&] { return b(rng) ? 1.0 : 0.0; }));
    batch.context = filled(5, n, [&] { return u(rng); });
    batch.targets = batch.sequence.back();
    return batch;
}

}  // namespace

TEST_CASE("dense layer examples") {
    auto relu = DenseLayer::zeros(2, 2, Activation::relu);
    relu.weight.setIdentity();
    Vector x(2);
    x << -1, 2;
    const Vector y = dense_forward(relu, x);
    CHECK(y(0) == 0.0);
    CHECK(y(1) == 2.0);

    auto bias_only = DenseLayer::zeros(3, 1, Activation::relu);
    bias_only.bias(0) = 3.0;
    CHECK(dense_forward(bias_only, Vector(Vector::Constant(3, 7.0)))(0) == 3.0);

    auto s = DenseLayer::zeros(1, 1, Activation::sigmoid);
    CHECK(dense_forward(s, Vector(Vector::Zero(1)))(0) == 0.5);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("LSTM cell examples") {
    const auto zero = LstmCellParams::zeros(1, 1);
    LstmGates gates;
    auto s = lstm_cell_forward(zero, scalar(0), scalar(0), scalar(0), &gates);
    CHECK(gates.i(0, 0) == 0.5);
    CHECK(gates.f(0, 0) == 0.5);
    CHECK(gates.o(0, 0) == 0.5);
    CHECK(gates.g(0, 0) == 0.0);
    CHECK(s.c(0, 0) == 0.0);
    CHECK(s.h(0, 0) == 0.0);

    s = lstm_cell_forward(zero, scalar(0), scalar(0), scalar(2));
    CHECK(s.c(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.h(0, 0) == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
    CHECK(s.h(0, 0) == doctest::Approx(0.380797).epsilon(1e-6));

    const ScalarLstm w{0.3, -0.7, 1.1, 0.45, -0.2, 0.9, 0.35, -1.3, 0.1, 0.6, -0.25, 0.05};
    const auto p = lstm_from(w);
    double h = 0.0, c = 0.0;
    std::vector<Matrix> xs;
    for (double x : {1.0, 0.0, 1.0, 1.0, -0.5}) {
        const auto ref = w.step(x, h, c);
        const auto got = lstm_cell_forward(p, scalar(x), scalar(h), scalar(c));
        CHECK(std::abs(got.h(0, 0) - ref.first) <= 1e-12);
        CHECK(std::abs(got.c(0, 0) - ref.second) <= 1e-12);
        h = ref.first;
        c = ref.second;
        xs.push_back(scalar(x));
    }
    CHECK(std::abs(lstm_sequence_forward(p, xs, nullptr)(0, 0) - h) <= 1e-12);
    CHECK_THROWS(lstm_cell_forward(p, Matrix::Zero(2, 1), scalar(0), scalar(0)));
}

TEST_CASE("LSTM invariants on random instances") {
    Rng rng(17);
    std::normal_distribution<double> n(0.0, 2.0);
    std::normal_distribution<double> w(0.0, 0.7);  // keeps gate inputs well inside the range where sigmoid < 1 in double
    for (int trial = 0; trial < 50; ++trial) {
        auto p = LstmCellParams::zeros(3, 4);
        std::vector<ParamView> params;
        p.append_params(params, "lstm");
        for (auto& v : params) v.value = v.value.unaryExpr([&](double) { return w(rng); });
        const Matrix x = filled(3, 5, [&] { return n(rng); });
        const Matrix h = filled(4, 5, [&] { return std::tanh(n(rng)); });
        const Matrix c = filled(4, 5, [&] { return n(rng); });
        LstmGates g;
        const auto s = lstm_cell_forward(p, x, h, c, &g);
        for (const Matrix* gate : {&g.i, &g.f, &g.o}) {
            CHECK((gate->array() > 0.0).all());
            CHECK((gate->array() < 1.0).all());
        }
        CHECK((s.h.array().abs() < 1.0).all());
        CHECK((s.c.array().abs() <= c.array().abs() + 1.0).all());
    }
}

TEST_CASE("GRU cell examples") {
    const auto zero = GruCellParams::zeros(1, 1);
    CHECK(gru_cell_forward(zero, scalar(0), scalar(0))(0, 0) == 0.0);
    GruGates g;
    CHECK(gru_cell_forward(zero, scalar(0), scalar(1), &g)(0, 0) == 0.5);
    CHECK(g.z(0, 0) == 0.5);
    CHECK(g.n(0, 0) == 0.0);

    const ScalarGru w{0.8, -0.4, 1.2, 0.3, 0.7, -0.9, 0.15, -0.05, 0.2};
    const auto p = gru_from(w);
    double h = 0.0;
    std::vector<Matrix> xs;
    for (double x : {1.0, 1.0, 0.0, -1.5, 0.25}) {
        const double ref = w.step(x, h);
        CHECK(std::abs(gru_cell_forward(p, scalar(x), scalar(h))(0, 0) - ref) <= 1e-12);
        h = ref;
        xs.push_back(scalar(x));
    }
    CHECK(std::abs(gru_sequence_forward(p, xs, nullptr)(0, 0) - h) <= 1e-12);
    CHECK_THROWS(gru_cell_forward(p, scalar(0), Matrix::Zero(2, 1)));
}

TEST_CASE("dropout") {
    Rng rng(3);
    const Matrix x = Matrix::Constant(4, 1, 2.5);
    SUBCASE("identity when not training or rate zero") {
        for (auto r : {dropout_apply(x, 0.5, rng, false), dropout_apply(x, 0.0, rng, true)}) {
            CHECK(r.output == x);
            CHECK((r.mask.array() == 1.0).all());
        }
    }
    SUBCASE("inverted scaling, Monte Carlo mean") {
        Matrix sum = Matrix::Zero(4, 1);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            const auto r = dropout_apply(x, 0.2, rng, true);
            for (Eigen::Index j = 0; j < 4; ++j) {
                CHECK_FALSE((r.output(j, 0) != 0.0 && std::abs(r.output(j, 0) - 2.5 / 0.8) > 1e-12));
            }
            sum += r.output;
        }
        const Matrix mean = sum / draws;
        for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(mean(j, 0) - 2.5) <= 0.01 * 2.5);
    }
    SUBCASE("rate bounds") {
        CHECK_THROWS(dropout_apply(x, 1.0, rng, true));
        CHECK_THROWS(dropout_apply(x, -0.1, rng, true));
    }
}

TEST_CASE("binary cross-entropy") {
    CHECK(bce_loss(scalar(0.5), scalar(1.0)) == doctest::Approx(std::log(2.0)));
    CHECK(bce_logit_grad(scalar(0.5), scalar(1.0))(0, 0) == -0.5);
    CHECK(std::isfinite(bce_loss(scalar(0.0), scalar(1.0))));
    CHECK(bce_loss(scalar(0.0), scalar(1.0)) == doctest::Approx(-std::log(1e-12)));
    Matrix p(2, 2), y(2, 2);
    p << 0.2, 0.9, 0.6, 0.4;
    y << 0, 1, 1, 0;
    const double manual = -(std::log(0.8) + std::log(0.9) + std::log(0.6) + std::log(0.6)) / 4.0;
    CHECK(bce_loss(p, y) == doctest::Approx(manual).epsilon(1e-14));
    CHECK(bce_logit_grad(p, y)(0, 0) == doctest::Approx(0.2 / 4));
}

TEST_CASE("finite differences") {
    SquareNet net;
    Batch b;
    b.targets = scalar(1.0);
    const auto g = finite_diff_grad(net, b, 1e-5);
    CHECK(std::abs(g.blocks[0](0, 0) - 6.0) <= 1e-9);
    CHECK(net.theta(0, 0) == 3.0);  // the original network is untouched
    CHECK_THROWS(finite_diff_grad(net, b, 0.0));
    CHECK_THROWS(finite_diff_grad(net, b, -1e-5));
}

TEST_CASE("gradient error metrics") {
    Gradients a, b;
    a.names = b.names = {"w", "v"};
    Matrix w(1, 2), v(1, 1);
    w << 3.0, 4.0;
    v << 1e-9;
    a.blocks = {w, v};
    w(0, 1) = 4.5;
    v(0, 0) = 2e-9;
    b.blocks = {w, v};
    // Block w: ||(0, -0.5)|| / ||(3, 4.5)||; block v: 1e-9 / 2e-9.
    CHECK(max_relative_error(a, b) == doctest::Approx(0.5));
    CHECK(max_relative_error(a, b, 1e-7) == doctest::Approx(0.5 / std::sqrt(9.0 + 20.25)));
    CHECK(max_entry_relative_error(a, b) == doctest::Approx(0.5 / 4.5));
    CHECK(max_relative_error(a, a) == 0.0);
    b.blocks.pop_back();
    CHECK_THROWS(max_relative_error(a, b));
}

TEST_CASE("recurrent baselines pass the gradient check") {
    Rng rng(21);
    for (auto kind : {models::RecurrentKind::lstm, models::RecurrentKind::gru}) {
        models::RecurrentBaselineConfig cfg;
        cfg.frames = 3;
        cfg.frame_dim = 5;
        cfg.k = 2;
        cfg.hidden = 4;
        cfg.dense = 3;
        const auto model = models::build_baseline_recurrent(kind, cfg, 8);
        const Batch b = random_frames(3, 5, 2, 4, rng);
        const auto analytic = compute_gradients(model, b);
        const auto numeric = finite_diff_grad(model, b, 1e-5);
        CHECK(max_relative_error(analytic.gradients, numeric) < 1e-4);
        CHECK(model.outputs() == 2);
        CHECK(model.predict(b) == model.predict(b));
    }
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
    const auto model = models::HybridModel::initialized(tiny_hybrid(2), 5);
    Batch b = persistence_batch(6, 2);
    b.targets = filled(2, 6, [i = 0]() mutable { return (i++ % 3) == 0 ? 1.0 : 0.0; });
    const auto full = compute_gradients(model, b);
    std::vector<Matrix> mean;
    for (const auto& blk : full.gradients.blocks) mean.push_back(Matrix::Zero(blk.rows(), blk.cols()));
    for (std::size_t j = 0; j < 6; ++j) {
        const auto one = compute_gradients(model, select_columns(b, std::vector<std::size_t>{j}));
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += one.gradients.blocks[k] / 6.0;
    }
    for (std::size_t k = 0; k < mean.size(); ++k) {
        CHECK((full.gradients.blocks[k] - mean[k]).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("Adam matches hand-computed steps") {
    Matrix theta = scalar(1.0);
    std::vector<ParamView> params{view("theta", theta)};
    Gradients g;
    g.names = {"theta"};
    g.blocks = {scalar(0.3)};
    AdamState state;

    double m = 0.0, v = 0.0, expect = 1.0;
    for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * 0.3;
        v = 0.999 * v + 0.001 * 0.09;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        expect -= 0.001 * mhat / (std::sqrt(vhat) + 1e-8);
        adam_step(state, params, g, 0.001);
        CHECK(std::abs(theta(0, 0) - expect) <= 1e-15);
        CHECK(state.step == t);
    }
    CHECK(theta(0, 0) == doctest::Approx(1.0 - 0.002).epsilon(1e-6));

    Matrix still = scalar(4.0);
    std::vector<ParamView> p2{view("x", still)};
    Gradients zero;
    zero.names = {"x"};
    zero.blocks = {scalar(0.0)};
    AdamState s2;
    adam_step(s2, p2, zero, 0.001);
    CHECK(still(0, 0) == 4.0);
    CHECK((s2.second_moment[0].array() >= 0.0).all());
}

TEST_CASE("training contract") {
    const Batch data = persistence_batch(95, 4);
    TrainHyperparams hp;
    hp.epochs = 3;
    hp.seed = 9;

    SUBCASE("zero epochs leave weights unchanged") {
        auto model = models::HybridModel::initialized(tiny_hybrid(1), 1);
        const auto before = model;
        hp.epochs = 0;
        const auto r = train(model, data, hp);
        CHECK(r.epoch_loss.empty());
        CHECK(model.output.weight == before.output.weight);
        CHECK(model.lstm.W_hi == before.lstm.W_hi);
    }
    SUBCASE("Adam steps = epochs * ceil(N / B)") {
        auto model = models::HybridModel::initialized(tiny_hybrid(1), 1);
        const auto r = train(model, data, hp);
        CHECK(r.optimizer.step == 3 * 4);
        CHECK(r.epoch_loss.size() == 3);
    }
    SUBCASE("deterministic given seed") {
        auto a = models::HybridModel::initialized(tiny_hybrid(1), 1);
        auto b = models::HybridModel::initialized(tiny_hybrid(1), 1);
        const auto ra = train(a, data, hp);
        const auto rb = train(b, data, hp);
        CHECK(ra.epoch_loss == rb.epoch_loss);
        CHECK(a.merge.weight == b.merge.weight);
        CHECK(a.lstm.W_xc == b.lstm.W_xc);
    }
    SUBCASE("empty data") {
        auto model = models::HybridModel::initialized(tiny_hybrid(1), 1);
        CHECK_THROWS(train(model, Batch{}, hp));
    }
}

TEST_CASE("all-zero targets are learned") {
    Batch data = persistence_batch(200, 6);
    data.targets.setZero();
    auto model = models::HybridModel::initialized(tiny_hybrid(1), 2);
    TrainHyperparams hp;
    hp.seed = 1;
    train(model, data, hp);
    CHECK((model.predict(data).array() < 0.5).all());
}

TEST_CASE("loss falls over the first epochs in most seeds") {
    const Batch data = persistence_batch(600, 8);
    int monotone = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto model = models::HybridModel::initialized(tiny_hybrid(1), seed);
        TrainHyperparams hp;
        hp.epochs = 3;
        hp.learning_rate = 0.01;
        hp.seed = seed;
        const auto r = train(model, data, hp);
        if (r.epoch_loss[1] <= r.epoch_loss[0] && r.epoch_loss[2] <= r.epoch_loss[1]) ++monotone;
    }
    CHECK(monotone >= 4);
}
