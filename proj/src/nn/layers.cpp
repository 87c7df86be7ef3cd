#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "occuforge/error.hpp"
#include "occuforge/nn.hpp"

namespace occuforge::nn {

ParamView view(std::string name, Matrix& m) {
    return {std::move(name), Eigen::Map<Matrix>(m.data(), m.rows(), m.cols())};
}

ParamView view(std::string name, Vector& v) {
    return {std::move(name), Eigen::Map<Matrix>(v.data(), v.size(), 1)};
}

Gradients Gradients::zeros_like(std::span<const ParamView> params) {
    Gradients g;
    g.names.reserve(params.size());
    g.blocks.reserve(params.size());
    for (const auto& p : params) {
        g.names.push_back(p.name);
        g.blocks.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
    return g;
}

std::size_t Gradients::scalar_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += static_cast<std::size_t>(b.size());
    return n;
}

void init_uniform(Matrix& m, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    }
}

DenseLayer DenseLayer::zeros(int in, int out, Activation act) {
    return {Matrix::Zero(out, in), Vector::Zero(out), act};
}

void DenseLayer::append_params(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back(view(prefix + ".W", weight));
    out.push_back(view(prefix + ".b", bias));
}

void DenseLayer::init(Rng& rng) {
    init_uniform(weight, in_dim(), rng);
    bias.setZero();
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

void activate(Matrix& z, Activation act) {
    switch (act) {
        case Activation::relu: z = z.cwiseMax(0.0); break;
        case Activation::sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
        case Activation::identity: break;
    }
}

void check_input(const DenseLayer& layer, Eigen::Index rows) {
    if (rows != layer.weight.cols()) {
        throw Error(fmt::format("dense layer expects {} inputs, got {}", layer.weight.cols(), rows));
    }
}

}  // namespace

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
    check_input(layer, x.rows());
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    activate(z, layer.activation);
    return z;
}

Vector dense_forward(const DenseLayer& layer, const Vector& x) {
    return dense_forward(layer, Matrix(x)).col(0);
}

Matrix dense_backward_linear(const DenseLayer& layer, const Matrix& x, const Matrix& dz, DenseLayer& grad) {
    grad.weight.noalias() += dz * x.transpose();
    grad.bias += dz.rowwise().sum();
    return layer.weight.transpose() * dz;
}

Matrix dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& y, const Matrix& dy, DenseLayer& grad) {
    Matrix dz;
    switch (layer.activation) {
        case Activation::relu: dz = (y.array() > 0.0).select(dy, 0.0); break;
        case Activation::sigmoid: dz = dy.array() * y.array() * (1.0 - y.array()); break;
        case Activation::identity: dz = dy; break;
    }
    return dense_backward_linear(layer, x, dz, grad);
}

DropoutResult dropout_apply(const Matrix& x, double rate, Rng& rng, bool training) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(fmt::format("dropout rate {} outside [0, 1)", rate));
    if (!training || rate == 0.0) return {x, Matrix::Ones(x.rows(), x.cols())};
    const double keep = 1.0 - rate;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Matrix mask(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) mask(i, j) = uniform(rng) < keep ? 1.0 / keep : 0.0;
    }
    return {x.cwiseProduct(mask), std::move(mask)};
}

double bce_loss(const Matrix& probs, const Matrix& targets) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) {
        throw Error("probability and target shapes differ");
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            const double p = std::clamp(probs(i, j), kProbabilityClamp, 1.0 - kProbabilityClamp);
            const double y = targets(i, j);
            total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
    }
    return total / static_cast<double>(probs.size());
}

Matrix bce_logit_grad(const Matrix& probs, const Matrix& targets) {
    const double scale = 1.0 / static_cast<double>(probs.size());
    Matrix g(probs.rows(), probs.cols());
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            const double p = probs(i, j);
            const bool clamped = p < kProbabilityClamp || p > 1.0 - kProbabilityClamp;
            g(i, j) = clamped ? 0.0 : (p - targets(i, j)) * scale;
        }
    }
    return g;
}

}  // namespace occuforge::nn
