#include "lop/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lop::nnet {

Matrix init_truncated_normal(std::size_t rows, std::size_t cols, const InitSpec& spec) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("init_truncated_normal: empty shape");
    if (spec.stddev <= 0.0) throw std::invalid_argument("init_truncated_normal: stddev must be > 0");
    const double bound = spec.truncation_sigmas * spec.stddev;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> dist(0.0, spec.stddev);
    Matrix out(rows, cols);
    for (double& x : out.v) {
        double s;
        do {
            s = dist(rng);
        } while (std::abs(s) > bound);
        x = s;
    }
    return out;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
    if (x.cols != layer.W.rows) throw std::invalid_argument("dense_forward: input width mismatch");
    Matrix out = matmul(x, layer.W);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += layer.b(0, j);
    return out;
}

Matrix softmax(const Matrix& z) {
    Matrix out(z.rows, z.cols);
    for (std::size_t i = 0; i < z.rows; ++i) {
        double mx = z(i, 0);
        for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, z(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols; ++j) {
            const double e = std::exp(z(i, j) - mx);
            out(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < z.cols; ++j) out(i, j) /= sum;
    }
    return out;
}

Matrix relu(const Matrix& z) {
    Matrix out = z;
    for (double& x : out.v) x = std::max(0.0, x);
    return out;
}

namespace {
double weight_for(const std::vector<double>& class_weights, int cls) {
    if (class_weights.empty()) return 1.0;
    if (cls < 0 || static_cast<std::size_t>(cls) >= class_weights.size())
        throw std::invalid_argument("cross_entropy: label out of range");
    return class_weights[static_cast<std::size_t>(cls)];
}
}  // namespace

double cross_entropy_sum(const Matrix& probs, const std::vector<int>& labels,
                         const std::vector<double>& class_weights) {
    if (probs.rows != labels.size()) throw std::invalid_argument("cross_entropy: length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const int c = labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= probs.cols)
            throw std::invalid_argument("cross_entropy: label out of range");
        const double p = std::max(probs(i, static_cast<std::size_t>(c)), 1e-12);
        total -= weight_for(class_weights, c) * std::log(p);
    }
    return total;
}

double cross_entropy_mean(const Matrix& probs, const std::vector<int>& labels,
                          const std::vector<double>& class_weights) {
    if (labels.empty()) throw std::invalid_argument("cross_entropy: empty batch");
    return cross_entropy_sum(probs, labels, class_weights) / static_cast<double>(labels.size());
}

Matrix softmax_ce_grad(const Matrix& probs, const std::vector<int>& labels,
                       const std::vector<double>& class_weights) {
    if (probs.rows != labels.size()) throw std::invalid_argument("softmax_ce_grad: length mismatch");
    Matrix g = probs;
    const double inv_n = 1.0 / static_cast<double>(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const int c = labels[i];
        g(i, static_cast<std::size_t>(c)) -= 1.0;
        const double w = weight_for(class_weights, c) * inv_n;
        for (std::size_t j = 0; j < probs.cols; ++j) g(i, j) *= w;
    }
    return g;
}

void adam_step(Matrix& params, const Matrix& grads, AdamState& state) {
    if (!params.same_shape(grads) || !params.same_shape(state.m))
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads.v[i];
        state.m.v[i] = state.beta1 * state.m.v[i] + (1.0 - state.beta1) * g;
        state.v.v[i] = state.beta2 * state.v.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m.v[i] / b1t;
        const double vhat = state.v.v[i] / b2t;
        params.v[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng,
                    bool training) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout_mask: rate must be in [0,1)");
    Matrix mask(rows, cols, 1.0);
    if (!training || rate == 0.0) return mask;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double scale = 1.0 / (1.0 - rate);
    for (double& x : mask.v) x = (u(rng) < rate) ? 0.0 : scale;
    return mask;
}

double gradient_check(GradCheckable model, double h) {
    const std::vector<Matrix*> params = model.params();
    const std::vector<Matrix> analytic = model.analytic_grads();
    if (params.size() != analytic.size())
        throw std::invalid_argument("gradient_check: grad/param count mismatch");
    double max_rel = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& par = *params[p];
        for (std::size_t i = 0; i < par.size(); ++i) {
            const double orig = par.v[i];
            par.v[i] = orig + h;
            const double lp = model.loss();
            par.v[i] = orig - h;
            const double lm = model.loss();
            par.v[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[p].v[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace lop::nnet
