#include <cmath>

#include <fmt/format.h>

#include "occuforge/error.hpp"
#include "occuforge/nn.hpp"

namespace occuforge::nn {

void adam_step(AdamState& state, std::span<ParamView> params, const Gradients& grads, double learning_rate) {
    if (grads.blocks.size() != params.size()) {
        throw Error(fmt::format("Adam got {} gradient blocks for {} parameters", grads.blocks.size(), params.size()));
    }
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
            state.second_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        }
    }
    ++state.step;
    const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t b = 0; b < params.size(); ++b) {
        const Matrix& g = grads.blocks[b];
        Matrix& m = state.first_moment[b];
        Matrix& v = state.second_moment[b];
        if (g.rows() != params[b].value.rows() || g.cols() != params[b].value.cols()) {
            throw Error(fmt::format("gradient shape mismatch for '{}'", params[b].name));
        }
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        params[b].value.array() -=
            learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.epsilon);
    }
}

}  // namespace occuforge::nn
