#include <fmt/format.h>

#include "occuforge/error.hpp"
#include "occuforge/nn.hpp"

namespace occuforge::nn {

namespace {

Matrix sigmoid_of(const Matrix& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix affine(const Matrix& wx, const Matrix& x, const Matrix& wh, const Matrix& h, const Vector& b) {
    Matrix z = wx * x;
    z.noalias() += wh * h;
    z.colwise() += b;
    return z;
}

void check_step(int input_dim, int hidden_dim, const Matrix& x, const Matrix& h_prev) {
    if (x.rows() != input_dim || h_prev.rows() != hidden_dim || x.cols() != h_prev.cols()) {
        throw Error(fmt::format("recurrent cell expects input {}x B and state {}x B, got {}x{} and {}x{}", input_dim,
                                hidden_dim, x.rows(), x.cols(), h_prev.rows(), h_prev.cols()));
    }
}

void accumulate(Matrix& wx_grad, Matrix& wh_grad, Vector& b_grad, const Matrix& dz, const Matrix& x,
                const Matrix& h) {
    wx_grad.noalias() += dz * x.transpose();
    wh_grad.noalias() += dz * h.transpose();
    b_grad += dz.rowwise().sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// LSTM

LstmCellParams LstmCellParams::zeros(int input_dim, int hidden_dim) {
    LstmCellParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    for (Matrix* m : {&p.W_xi, &p.W_xf, &p.W_xo, &p.W_xc}) *m = Matrix::Zero(hidden_dim, input_dim);
    for (Matrix* m : {&p.W_hi, &p.W_hf, &p.W_ho, &p.W_hc}) *m = Matrix::Zero(hidden_dim, hidden_dim);
    for (Vector* v : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) *v = Vector::Zero(hidden_dim);
    return p;
}

void LstmCellParams::append_params(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back(view(prefix + ".W_xi", W_xi));
    out.push_back(view(prefix + ".W_xf", W_xf));
    out.push_back(view(prefix + ".W_xo", W_xo));
    out.push_back(view(prefix + ".W_xc", W_xc));
    out.push_back(view(prefix + ".W_hi", W_hi));
    out.push_back(view(prefix + ".W_hf", W_hf));
    out.push_back(view(prefix + ".W_ho", W_ho));
    out.push_back(view(prefix + ".W_hc", W_hc));
    out.push_back(view(prefix + ".b_i", b_i));
    out.push_back(view(prefix + ".b_f", b_f));
    out.push_back(view(prefix + ".b_o", b_o));
    out.push_back(view(prefix + ".b_c", b_c));
}

void LstmCellParams::init(Rng& rng) {
    for (Matrix* m : {&W_xi, &W_xf, &W_xo, &W_xc}) init_uniform(*m, input_dim, rng);
    for (Matrix* m : {&W_hi, &W_hf, &W_ho, &W_hc}) init_uniform(*m, hidden_dim, rng);
    for (Vector* v : {&b_i, &b_f, &b_o, &b_c}) v->setZero();
}

LstmState lstm_cell_forward(const LstmCellParams& p, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                            LstmGates* gates) {
    check_step(p.input_dim, p.hidden_dim, x, h_prev);
    if (c_prev.rows() != h_prev.rows() || c_prev.cols() != h_prev.cols()) {
        throw Error("LSTM cell state and hidden state shapes differ");
    }
    LstmGates g;
    g.i = sigmoid_of(affine(p.W_xi, x, p.W_hi, h_prev, p.b_i));
    g.f = sigmoid_of(affine(p.W_xf, x, p.W_hf, h_prev, p.b_f));
    g.o = sigmoid_of(affine(p.W_xo, x, p.W_ho, h_prev, p.b_o));
    g.g = affine(p.W_xc, x, p.W_hc, h_prev, p.b_c).array().tanh();

    LstmState next;
    next.c = g.f.cwiseProduct(c_prev) + g.i.cwiseProduct(g.g);
    next.h = g.o.array() * next.c.array().tanh();
    if (gates) *gates = std::move(g);
    return next;
}

Matrix lstm_sequence_forward(const LstmCellParams& p, std::span<const Matrix> inputs, LstmSequenceCache* cache) {
    if (inputs.empty()) throw Error("LSTM needs at least one input step");
    const Eigen::Index batch = inputs.front().cols();
    Matrix h = Matrix::Zero(p.hidden_dim, batch);
    Matrix c = Matrix::Zero(p.hidden_dim, batch);
    if (cache) *cache = {};
    for (const Matrix& x : inputs) {
        LstmGates gates;
        LstmState next = lstm_cell_forward(p, x, h, c, cache ? &gates : nullptr);
        if (cache) {
            cache->x.push_back(x);
            cache->h_prev.push_back(std::move(h));
            cache->c_prev.push_back(std::move(c));
            cache->c.push_back(next.c);
            cache->gates.push_back(std::move(gates));
        }
        h = std::move(next.h);
        c = std::move(next.c);
    }
    return h;
}

void lstm_sequence_backward(const LstmCellParams& p, const LstmSequenceCache& cache, const Matrix& dh_final,
                            LstmCellParams& grad) {
    Matrix dh = dh_final;
    Matrix dc = Matrix::Zero(dh.rows(), dh.cols());
    for (std::size_t s = cache.x.size(); s-- > 0;) {
        const LstmGates& g = cache.gates[s];
        const Matrix tanh_c = cache.c[s].array().tanh();

        dc.array() += dh.array() * g.o.array() * (1.0 - tanh_c.array().square());
        const Matrix d_o = dh.array() * tanh_c.array() * g.o.array() * (1.0 - g.o.array());
        const Matrix d_i = dc.array() * g.g.array() * g.i.array() * (1.0 - g.i.array());
        const Matrix d_f = dc.array() * cache.c_prev[s].array() * g.f.array() * (1.0 - g.f.array());
        const Matrix d_g = dc.array() * g.i.array() * (1.0 - g.g.array().square());

        const Matrix& x = cache.x[s];
        const Matrix& h_prev = cache.h_prev[s];
        accumulate(grad.W_xi, grad.W_hi, grad.b_i, d_i, x, h_prev);
        accumulate(grad.W_xf, grad.W_hf, grad.b_f, d_f, x, h_prev);
        accumulate(grad.W_xo, grad.W_ho, grad.b_o, d_o, x, h_prev);
        accumulate(grad.W_xc, grad.W_hc, grad.b_c, d_g, x, h_prev);

        if (s == 0) break;
        dh = p.W_hi.transpose() * d_i;
        dh.noalias() += p.W_hf.transpose() * d_f;
        dh.noalias() += p.W_ho.transpose() * d_o;
        dh.noalias() += p.W_hc.transpose() * d_g;
        dc = dc.cwiseProduct(g.f);
    }
}

// ---------------------------------------------------------------------------
// GRU

GruCellParams GruCellParams::zeros(int input_dim, int hidden_dim) {
    GruCellParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    for (Matrix* m : {&p.W_xz, &p.W_xr, &p.W_xh}) *m = Matrix::Zero(hidden_dim, input_dim);
    for (Matrix* m : {&p.W_hz, &p.W_hr, &p.W_hh}) *m = Matrix::Zero(hidden_dim, hidden_dim);
    for (Vector* v : {&p.b_z, &p.b_r, &p.b_h}) *v = Vector::Zero(hidden_dim);
    return p;
}

void GruCellParams::append_params(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back(view(prefix + ".W_xz", W_xz));
    out.push_back(view(prefix + ".W_xr", W_xr));
    out.push_back(view(prefix + ".W_xh", W_xh));
    out.push_back(view(prefix + ".W_hz", W_hz));
    out.push_back(view(prefix + ".W_hr", W_hr));
    out.push_back(view(prefix + ".W_hh", W_hh));
    out.push_back(view(prefix + ".b_z", b_z));
    out.push_back(view(prefix + ".b_r", b_r));
    out.push_back(view(prefix + ".b_h", b_h));
}

void GruCellParams::init(Rng& rng) {
    for (Matrix* m : {&W_xz, &W_xr, &W_xh}) init_uniform(*m, input_dim, rng);
    for (Matrix* m : {&W_hz, &W_hr, &W_hh}) init_uniform(*m, hidden_dim, rng);
    for (Vector* v : {&b_z, &b_r, &b_h}) v->setZero();
}

Matrix gru_cell_forward(const GruCellParams& p, const Matrix& x, const Matrix& h_prev, GruGates* gates) {
    check_step(p.input_dim, p.hidden_dim, x, h_prev);
    GruGates g;
    g.z = sigmoid_of(affine(p.W_xz, x, p.W_hz, h_prev, p.b_z));
    g.r = sigmoid_of(affine(p.W_xr, x, p.W_hr, h_prev, p.b_r));
    const Matrix rh = g.r.cwiseProduct(h_prev);
    g.n = affine(p.W_xh, x, p.W_hh, rh, p.b_h).array().tanh();
    Matrix h = (1.0 - g.z.array()) * h_prev.array() + g.z.array() * g.n.array();
    if (gates) *gates = std::move(g);
    return h;
}

Matrix gru_sequence_forward(const GruCellParams& p, std::span<const Matrix> inputs, GruSequenceCache* cache) {
    if (inputs.empty()) throw Error("GRU needs at least one input step");
    Matrix h = Matrix::Zero(p.hidden_dim, inputs.front().cols());
    if (cache) *cache = {};
    for (const Matrix& x : inputs) {
        GruGates gates;
        Matrix next = gru_cell_forward(p, x, h, cache ? &gates : nullptr);
        if (cache) {
            cache->x.push_back(x);
            cache->h_prev.push_back(std::move(h));
            cache->gates.push_back(std::move(gates));
        }
        h = std::move(next);
    }
    return h;
}

void gru_sequence_backward(const GruCellParams& p, const GruSequenceCache& cache, const Matrix& dh_final,
                           GruCellParams& grad) {
    Matrix dh = dh_final;
    for (std::size_t s = cache.x.size(); s-- > 0;) {
        const GruGates& g = cache.gates[s];
        const Matrix& x = cache.x[s];
        const Matrix& h_prev = cache.h_prev[s];

        const Matrix d_n = dh.array() * g.z.array() * (1.0 - g.n.array().square());
        const Matrix d_z = dh.array() * (g.n.array() - h_prev.array()) * g.z.array() * (1.0 - g.z.array());
        const Matrix rh = g.r.cwiseProduct(h_prev);
        accumulate(grad.W_xh, grad.W_hh, grad.b_h, d_n, x, rh);
        const Matrix d_rh = p.W_hh.transpose() * d_n;
        const Matrix d_r = d_rh.array() * h_prev.array() * g.r.array() * (1.0 - g.r.array());
        accumulate(grad.W_xz, grad.W_hz, grad.b_z, d_z, x, h_prev);
        accumulate(grad.W_xr, grad.W_hr, grad.b_r, d_r, x, h_prev);

        if (s == 0) break;
        Matrix dh_prev = dh.array() * (1.0 - g.z.array());
        dh_prev.array() += d_rh.array() * g.r.array();
        dh_prev.noalias() += p.W_hz.transpose() * d_z;
        dh_prev.noalias() += p.W_hr.transpose() * d_r;
        dh = std::move(dh_prev);
    }
}

}  // namespace occuforge::nn
