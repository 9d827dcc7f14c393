#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lop/nnet.hpp"

namespace lop::models {

enum class ModelKind { BNN, ESN, TBN };

const char* model_name(ModelKind k);

struct FeatureLayout {
    int segment_count = 0;
    int features_per_segment = 4;

    std::size_t dims() const {
        return static_cast<std::size_t>(segment_count) * features_per_segment;
    }
    int segment_of(std::size_t d) const {
        return static_cast<int>(d / static_cast<std::size_t>(features_per_segment));  // 0-based
    }
};

// Text side of the ESN/TBN inputs: one embedding per segment plus the
// summed quiz embedding.
struct TextArtifacts {
    std::vector<std::vector<double>> segment_vecs;  // S x dim
    std::vector<double> quiz_sum_vec;
};

struct TrainConfig {
    double lr = 0.005;
    std::size_t batch_size = 50;
    long epochs = 2000;
    std::size_t hidden_dim = 8;
    std::uint64_t seed = 0;
    double dropout_rate = 0.2;  // TBN hidden layer only
    std::vector<double> class_weights;  // empty = unweighted
    double init_stddev = 0.1;
    bool record_trace = true;
};

struct EpochTrace {
    long epoch = 0;
    double loss = 0.0;      // mean batch loss
    double accuracy = 0.0;  // on the training set
    double auc = 0.0;
};

double median_similarity(const TextArtifacts& text);

// mask[d] = cosine(T_c(s(d)), sum_q T_q) > threshold. Throws if no segment
// clears the threshold.
std::vector<bool> build_esn_mask(const TextArtifacts& text, double threshold,
                                 const FeatureLayout& layout);

// Shared contract of the three network architectures. forward() caches the
// activations consumed by backward(); grads() aligns with params().
class NetworkModel {
  public:
    virtual ~NetworkModel() = default;
    virtual ModelKind kind() const = 0;

    // soft: differentiable surrogate path (TBN sigmoid gates).
    // dropout: optional hidden-layer mask owned by the caller.
    virtual Matrix forward(const Matrix& x, bool soft, const Matrix* dropout) = 0;
    virtual void backward(const std::vector<int>& labels,
                          const std::vector<double>& class_weights) = 0;
    virtual std::vector<Matrix*> params() = 0;
    virtual std::vector<Matrix>& grads() = 0;

    // Pass-class probability per row; inference path (hard gates, no dropout).
    std::vector<double> predict_proba(const Matrix& x);
    double dropout_rate() const { return dropout_rate_; }

  protected:
    double dropout_rate_ = 0.0;
};

class BnnModel : public NetworkModel {
  public:
    BnnModel(std::size_t in_dim, const nnet::InitSpec& init);
    ModelKind kind() const override { return ModelKind::BNN; }
    Matrix forward(const Matrix& x, bool soft, const Matrix* dropout) override;
    void backward(const std::vector<int>& labels, const std::vector<double>& cw) override;
    std::vector<Matrix*> params() override;
    std::vector<Matrix>& grads() override;

    nnet::DenseLayer out_layer;

  private:
    Matrix x_, probs_;
    std::vector<Matrix> grads_;
};

class EsnModel : public NetworkModel {
  public:
    EsnModel(std::vector<bool> mask, double threshold, std::size_t hidden_dim,
             const nnet::InitSpec& init);
    ModelKind kind() const override { return ModelKind::ESN; }
    Matrix forward(const Matrix& x, bool soft, const Matrix* dropout) override;
    void backward(const std::vector<int>& labels, const std::vector<double>& cw) override;
    std::vector<Matrix*> params() override;
    std::vector<Matrix>& grads() override;

    std::vector<bool> mask;
    double threshold = 0.0;
    nnet::DenseLayer hidden;  // D' x H
    nnet::DenseLayer out_layer;

  private:
    std::vector<std::size_t> active_;
    Matrix xa_, z1_, h_, probs_;
    std::vector<Matrix> grads_;
};

class TbnModel : public NetworkModel {
  public:
    // products: S x dim rows of T_c(s) ⊙ sum_q T_q.
    TbnModel(Matrix products, const FeatureLayout& layout, std::size_t hidden_dim,
             double dropout_rate, const nnet::InitSpec& init);
    ModelKind kind() const override { return ModelKind::TBN; }
    Matrix forward(const Matrix& x, bool soft, const Matrix* dropout) override;
    void backward(const std::vector<int>& labels, const std::vector<double>& cw) override;
    std::vector<Matrix*> params() override;
    std::vector<Matrix>& grads() override;

    // Gate values per segment: sigmoid(z) when soft, 1[z > 0] otherwise.
    std::vector<double> gate_values(bool soft) const;

    Matrix products;  // S x dim
    FeatureLayout layout;
    nnet::DenseLayer gate_layer;  // dim x 1
    nnet::DenseLayer hidden;      // D x H
    nnet::DenseLayer out_layer;   // H x 2

  private:
    Matrix x_, xg_, z1_, h_, probs_;
    std::vector<double> soft_gates_;
    const Matrix* dropout_ = nullptr;
    bool soft_cached_ = false;
    std::vector<Matrix> grads_;
};

std::unique_ptr<NetworkModel> build_model(ModelKind kind, const FeatureLayout& layout,
                                          const TextArtifacts& text, const TrainConfig& config,
                                          std::optional<double> esn_threshold = std::nullopt);

// Mini-batch Adam on weighted cross-entropy; shuffle order depends only on
// (seed, epoch). Throws on non-finite loss.
std::vector<EpochTrace> train(NetworkModel& model, const Matrix& x,
                              const std::vector<int>& labels, const TrainConfig& config);

// Parameter snapshot (JSON text, shapes plus row-major values).
std::string save_model(const NetworkModel& model);
std::unique_ptr<NetworkModel> load_model(const std::string& json_text);

// Gradient-check adapter over mean weighted cross-entropy on a fixed batch
// (soft path, no dropout).
nnet::GradCheckable make_gradcheckable(NetworkModel& model, const Matrix& x,
                                       const std::vector<int>& labels,
                                       const std::vector<double>& class_weights);

}  // namespace lop::models
