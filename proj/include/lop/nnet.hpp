#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "lop/matrix.hpp"

namespace lop::nnet {

struct DenseLayer {
    Matrix W;  // in_dim x out_dim
    Matrix b;  // 1 x out_dim

    DenseLayer() = default;
    DenseLayer(std::size_t in_dim, std::size_t out_dim) : W(in_dim, out_dim), b(1, out_dim) {}
};

struct InitSpec {
    double stddev = 0.1;
    double truncation_sigmas = 2.0;  // reject |x| > truncation_sigmas * stddev
    std::uint64_t seed = 0;
};

// i.i.d. N(0, stddev^2) with rejection of samples beyond the truncation bound.
Matrix init_truncated_normal(std::size_t rows, std::size_t cols, const InitSpec& spec);

// y = x W + b, bias broadcast over rows.
Matrix dense_forward(const DenseLayer& layer, const Matrix& x);

// Row-wise numerically stable softmax.
Matrix softmax(const Matrix& z);

Matrix relu(const Matrix& z);

// Weighted cross-entropy. labels[i] is the true class index of row i,
// class_weights has one entry per class. Summed over the batch; the mean
// variant divides by the row count.
double cross_entropy_sum(const Matrix& probs, const std::vector<int>& labels,
                         const std::vector<double>& class_weights);
double cross_entropy_mean(const Matrix& probs, const std::vector<int>& labels,
                          const std::vector<double>& class_weights);

// Gradient of mean weighted cross-entropy w.r.t. the softmax input logits:
// w_i (p - y) / batch.
Matrix softmax_ce_grad(const Matrix& probs, const std::vector<int>& labels,
                       const std::vector<double>& class_weights);

struct AdamState {
    Matrix m;
    Matrix v;
    long step = 0;
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t rows, std::size_t cols, double lr_) : m(rows, cols), v(rows, cols), lr(lr_) {}
};

// In-place Adam update with bias correction.
void adam_step(Matrix& params, const Matrix& grads, AdamState& state);

// Inverted-scaling dropout mask: Bernoulli(1-rate)/(1-rate) while training,
// all ones at inference.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng,
                    bool training);

// Anything with parameters and a scalar loss can be gradient-checked.
// `params` returns live pointers into the model; `loss` re-evaluates the
// model on a fixed batch.
struct GradCheckable {
    std::function<std::vector<Matrix*>()> params;
    std::function<std::vector<Matrix>()> analytic_grads;
    std::function<double()> loss;
};

// Max relative error of analytic vs central-difference gradients.
double gradient_check(GradCheckable model, double h = 1e-5);

}  // namespace lop::nnet
