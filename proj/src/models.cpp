#include "lop/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lop/eval.hpp"
#include "lop/textpipe.hpp"

namespace lop::models {

using nnet::DenseLayer;
using nnet::InitSpec;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Matrix colsum(const Matrix& g) {
    Matrix out(1, g.cols);
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) out(0, j) += g(i, j);
    return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

nlohmann::json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"values", m.v}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.v = j.at("values").get<std::vector<double>>();
    if (m.v.size() != m.rows * m.cols) throw std::runtime_error("model snapshot: bad matrix shape");
    return m;
}

}  // namespace

const char* model_name(ModelKind k) {
    switch (k) {
        case ModelKind::BNN: return "bnn";
        case ModelKind::ESN: return "esn";
        case ModelKind::TBN: return "tbn";
    }
    return "?";
}

double median_similarity(const TextArtifacts& text) {
    std::vector<double> sims;
    sims.reserve(text.segment_vecs.size());
    for (const auto& seg : text.segment_vecs)
        sims.push_back(textpipe::cosine_similarity(seg, text.quiz_sum_vec));
    if (sims.empty()) throw std::invalid_argument("median_similarity: no segments");
    std::sort(sims.begin(), sims.end());
    const std::size_t n = sims.size();
    return n % 2 == 1 ? sims[n / 2] : 0.5 * (sims[n / 2 - 1] + sims[n / 2]);
}

std::vector<bool> build_esn_mask(const TextArtifacts& text, double threshold,
                                 const FeatureLayout& layout) {
    if (static_cast<int>(text.segment_vecs.size()) != layout.segment_count)
        throw std::invalid_argument("build_esn_mask: segment count mismatch");
    std::vector<bool> seg_active(text.segment_vecs.size());
    bool any = false;
    for (std::size_t s = 0; s < text.segment_vecs.size(); ++s) {
        const double sim = textpipe::cosine_similarity(text.segment_vecs[s], text.quiz_sum_vec);
        seg_active[s] = sim > threshold;
        any = any || seg_active[s];
    }
    if (!any) throw std::runtime_error("build_esn_mask: degenerate mask, no segment above threshold");
    std::vector<bool> mask(layout.dims());
    for (std::size_t d = 0; d < mask.size(); ++d)
        mask[d] = seg_active[static_cast<std::size_t>(layout.segment_of(d))];
    return mask;
}

std::vector<double> NetworkModel::predict_proba(const Matrix& x) {
    const Matrix probs = forward(x, /*soft=*/false, /*dropout=*/nullptr);
    std::vector<double> out(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) out[i] = probs(i, 1);
    return out;
}

// ---------------------------------------------------------------- BNN

namespace {

// Zero-mean truncated normal with a fan-scaled spread for the softmax
// layer. A fixed narrow spread there starves the hidden layer of gradient
// early on and some seeds settle into poorly generalizing fits.
InitSpec glorot_like(const InitSpec& init, std::size_t fan_in, std::size_t fan_out) {
    InitSpec out = init;
    out.stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    return out;
}

}  // namespace

BnnModel::BnnModel(std::size_t in_dim, const InitSpec& init) {
    out_layer.W = nnet::init_truncated_normal(in_dim, 2, glorot_like(init, in_dim, 2));
    out_layer.b = Matrix(1, 2);  // zero bias
}

Matrix BnnModel::forward(const Matrix& x, bool, const Matrix*) {
    x_ = x;
    probs_ = nnet::softmax(nnet::dense_forward(out_layer, x));
    return probs_;
}

void BnnModel::backward(const std::vector<int>& labels, const std::vector<double>& cw) {
    const Matrix g = nnet::softmax_ce_grad(probs_, labels, cw);
    grads_.clear();
    grads_.push_back(matmul(transpose(x_), g));
    grads_.push_back(colsum(g));
}

std::vector<Matrix*> BnnModel::params() { return {&out_layer.W, &out_layer.b}; }
std::vector<Matrix>& BnnModel::grads() { return grads_; }

// ---------------------------------------------------------------- ESN

EsnModel::EsnModel(std::vector<bool> mask_in, double threshold_in, std::size_t hidden_dim,
                   const InitSpec& init)
    : mask(std::move(mask_in)), threshold(threshold_in) {
    for (std::size_t d = 0; d < mask.size(); ++d)
        if (mask[d]) active_.push_back(d);
    if (active_.empty()) throw std::invalid_argument("EsnModel: empty mask");
    InitSpec s1 = init, s2 = init;
    s2.seed = splitmix64(init.seed + 1);
    hidden.W = nnet::init_truncated_normal(active_.size(), hidden_dim, s1);
    hidden.b = Matrix(1, hidden_dim);
    out_layer.W = nnet::init_truncated_normal(hidden_dim, 2, glorot_like(s2, hidden_dim, 2));
    out_layer.b = Matrix(1, 2);
}

Matrix EsnModel::forward(const Matrix& x, bool, const Matrix*) {
    if (x.cols != mask.size()) throw std::invalid_argument("esn_forward: width mismatch");
    xa_ = Matrix(x.rows, active_.size());
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < active_.size(); ++j) xa_(i, j) = x(i, active_[j]);
    z1_ = nnet::dense_forward(hidden, xa_);
    h_ = nnet::relu(z1_);
    probs_ = nnet::softmax(nnet::dense_forward(out_layer, h_));
    return probs_;
}

void EsnModel::backward(const std::vector<int>& labels, const std::vector<double>& cw) {
    const Matrix g2 = nnet::softmax_ce_grad(probs_, labels, cw);
    Matrix gh = matmul(g2, transpose(out_layer.W));
    for (std::size_t i = 0; i < gh.size(); ++i)
        if (z1_.v[i] <= 0.0) gh.v[i] = 0.0;
    grads_.clear();
    grads_.push_back(matmul(transpose(xa_), gh));
    grads_.push_back(colsum(gh));
    grads_.push_back(matmul(transpose(h_), g2));
    grads_.push_back(colsum(g2));
}

std::vector<Matrix*> EsnModel::params() {
    return {&hidden.W, &hidden.b, &out_layer.W, &out_layer.b};
}
std::vector<Matrix>& EsnModel::grads() { return grads_; }

// ---------------------------------------------------------------- TBN

TbnModel::TbnModel(Matrix products_in, const FeatureLayout& layout_in, std::size_t hidden_dim,
                   double dropout, const InitSpec& init)
    : products(std::move(products_in)), layout(layout_in) {
    dropout_rate_ = dropout;
    if (products.rows != static_cast<std::size_t>(layout.segment_count))
        throw std::invalid_argument("TbnModel: product rows != segment count");
    InitSpec s1 = init, s2 = init, s3 = init;
    s2.seed = splitmix64(init.seed + 1);
    s3.seed = splitmix64(init.seed + 2);
    gate_layer.W = nnet::init_truncated_normal(products.cols, 1, s1);
    gate_layer.b = Matrix(1, 1);
    hidden.W = nnet::init_truncated_normal(layout.dims(), hidden_dim, s2);
    hidden.b = Matrix(1, hidden_dim);
    out_layer.W = nnet::init_truncated_normal(hidden_dim, 2, glorot_like(s3, hidden_dim, 2));
    out_layer.b = Matrix(1, 2);
}

std::vector<double> TbnModel::gate_values(bool soft) const {
    std::vector<double> gates(products.rows);
    for (std::size_t s = 0; s < products.rows; ++s) {
        double z = gate_layer.b(0, 0);
        for (std::size_t j = 0; j < products.cols; ++j)
            z += products(s, j) * gate_layer.W(j, 0);
        gates[s] = soft ? sigmoid(z) : (z > 0.0 ? 1.0 : 0.0);
    }
    return gates;
}

Matrix TbnModel::forward(const Matrix& x, bool soft, const Matrix* dropout) {
    if (x.cols != layout.dims()) throw std::invalid_argument("tbn_forward: width mismatch");
    x_ = x;
    soft_cached_ = soft;
    soft_gates_ = gate_values(soft);
    xg_ = Matrix(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t d = 0; d < x.cols; ++d)
            xg_(i, d) = x(i, d) * soft_gates_[static_cast<std::size_t>(layout.segment_of(d))];
    z1_ = nnet::dense_forward(hidden, xg_);
    h_ = nnet::relu(z1_);
    dropout_ = dropout;
    if (dropout != nullptr) {
        if (!h_.same_shape(*dropout)) throw std::invalid_argument("tbn_forward: bad dropout shape");
        for (std::size_t i = 0; i < h_.size(); ++i) h_.v[i] *= dropout->v[i];
    }
    probs_ = nnet::softmax(nnet::dense_forward(out_layer, h_));
    return probs_;
}

void TbnModel::backward(const std::vector<int>& labels, const std::vector<double>& cw) {
    const Matrix g2 = nnet::softmax_ce_grad(probs_, labels, cw);
    Matrix gh = matmul(g2, transpose(out_layer.W));
    if (dropout_ != nullptr)
        for (std::size_t i = 0; i < gh.size(); ++i) gh.v[i] *= dropout_->v[i];
    for (std::size_t i = 0; i < gh.size(); ++i)
        if (z1_.v[i] <= 0.0) gh.v[i] = 0.0;
    const Matrix g_w1 = matmul(transpose(xg_), gh);
    const Matrix g_b1 = colsum(gh);
    const Matrix g_xg = matmul(gh, transpose(hidden.W));

    // gate gradient: accumulate per segment, then through the sigmoid
    std::vector<double> dz(products.rows, 0.0);
    for (std::size_t i = 0; i < x_.rows; ++i)
        for (std::size_t d = 0; d < x_.cols; ++d)
            dz[static_cast<std::size_t>(layout.segment_of(d))] += x_(i, d) * g_xg(i, d);
    Matrix g_gw(products.cols, 1);
    Matrix g_gb(1, 1);
    for (std::size_t s = 0; s < products.rows; ++s) {
        const double g = soft_gates_[s];
        // hard gates have zero gradient almost everywhere
        const double dzd = soft_cached_ ? dz[s] * g * (1.0 - g) : 0.0;
        for (std::size_t j = 0; j < products.cols; ++j) g_gw(j, 0) += products(s, j) * dzd;
        g_gb(0, 0) += dzd;
    }

    grads_.clear();
    grads_.push_back(g_gw);
    grads_.push_back(g_gb);
    grads_.push_back(g_w1);
    grads_.push_back(g_b1);
    grads_.push_back(matmul(transpose(h_), g2));
    grads_.push_back(colsum(g2));
}

std::vector<Matrix*> TbnModel::params() {
    return {&gate_layer.W, &gate_layer.b, &hidden.W, &hidden.b, &out_layer.W, &out_layer.b};
}
std::vector<Matrix>& TbnModel::grads() { return grads_; }

// ---------------------------------------------------------------- factory

std::unique_ptr<NetworkModel> build_model(ModelKind kind, const FeatureLayout& layout,
                                          const TextArtifacts& text, const TrainConfig& config,
                                          std::optional<double> esn_threshold) {
    InitSpec init;
    init.stddev = config.init_stddev;
    init.seed = config.seed;
    switch (kind) {
        case ModelKind::BNN:
            return std::make_unique<BnnModel>(layout.dims(), init);
        case ModelKind::ESN: {
            const double thr = esn_threshold.value_or(median_similarity(text));
            return std::make_unique<EsnModel>(build_esn_mask(text, thr, layout), thr,
                                              config.hidden_dim, init);
        }
        case ModelKind::TBN: {
            if (text.segment_vecs.empty())
                throw std::invalid_argument("build_model: TBN needs text artifacts");
            Matrix products(text.segment_vecs.size(), text.quiz_sum_vec.size());
            for (std::size_t s = 0; s < text.segment_vecs.size(); ++s)
                for (std::size_t j = 0; j < text.quiz_sum_vec.size(); ++j)
                    products(s, j) = text.segment_vecs[s][j] * text.quiz_sum_vec[j];
            return std::make_unique<TbnModel>(std::move(products), layout, config.hidden_dim,
                                              config.dropout_rate, init);
        }
    }
    throw std::invalid_argument("build_model: unknown kind");
}

// ---------------------------------------------------------------- training

std::vector<EpochTrace> train(NetworkModel& model, const Matrix& x, const std::vector<int>& labels,
                              const TrainConfig& config) {
    if (x.rows != labels.size()) throw std::invalid_argument("train: label count mismatch");
    if (x.rows == 0) throw std::invalid_argument("train: empty training set");

    const std::vector<Matrix*> params = model.params();
    std::vector<nnet::AdamState> adam;
    adam.reserve(params.size());
    for (const Matrix* p : params) adam.emplace_back(p->rows, p->cols, config.lr);

    std::vector<EpochTrace> trace;
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);

    for (long epoch = 0; epoch < config.epochs; ++epoch) {
        // shuffle schedule depends only on (seed, epoch)
        std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(epoch))));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            Matrix xb(end - start, x.cols);
            std::vector<int> yb(end - start);
            for (std::size_t i = start; i < end; ++i) {
                for (std::size_t j = 0; j < x.cols; ++j) xb(i - start, j) = x(order[i], j);
                yb[i - start] = labels[order[i]];
            }
            Matrix mask;
            const Matrix* mask_ptr = nullptr;
            // TBN applies dropout on its hidden layer; other models take none.
            if (model.dropout_rate() > 0.0 && model.kind() == ModelKind::TBN) {
                auto& tbn = static_cast<TbnModel&>(model);
                mask = nnet::dropout_mask(xb.rows, tbn.hidden.W.cols, model.dropout_rate(), rng, true);
                mask_ptr = &mask;
            }
            const Matrix probs = model.forward(xb, /*soft=*/true, mask_ptr);
            const double loss = nnet::cross_entropy_mean(probs, yb, config.class_weights);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += loss;
            ++batches;
            model.backward(yb, config.class_weights);
            std::vector<Matrix>& grads = model.grads();
            for (std::size_t p = 0; p < params.size(); ++p)
                nnet::adam_step(*params[p], grads[p], adam[p]);
        }

        if (config.record_trace) {
            EpochTrace t;
            t.epoch = epoch + 1;
            t.loss = loss_sum / static_cast<double>(batches);
            const std::vector<double> probs = model.predict_proba(x);
            t.accuracy = eval::accuracy(probs, labels);
            bool both = false;
            for (std::size_t i = 1; i < labels.size() && !both; ++i) both = labels[i] != labels[0];
            t.auc = both ? eval::auc_roc(probs, labels) : 0.5;
            trace.push_back(t);
        }
    }
    return trace;
}

// ---------------------------------------------------------------- snapshots

std::string save_model(const NetworkModel& model) {
    nlohmann::json j;
    j["version"] = 1;
    auto& m = const_cast<NetworkModel&>(model);
    j["arch"] = model_name(model.kind());
    switch (model.kind()) {
        case ModelKind::BNN: {
            auto& bnn = static_cast<BnnModel&>(m);
            j["out_W"] = matrix_to_json(bnn.out_layer.W);
            j["out_b"] = matrix_to_json(bnn.out_layer.b);
            break;
        }
        case ModelKind::ESN: {
            auto& esn = static_cast<EsnModel&>(m);
            j["mask"] = std::vector<int>(esn.mask.begin(), esn.mask.end());
            j["threshold"] = esn.threshold;
            j["hidden_W"] = matrix_to_json(esn.hidden.W);
            j["hidden_b"] = matrix_to_json(esn.hidden.b);
            j["out_W"] = matrix_to_json(esn.out_layer.W);
            j["out_b"] = matrix_to_json(esn.out_layer.b);
            break;
        }
        case ModelKind::TBN: {
            auto& tbn = static_cast<TbnModel&>(m);
            j["products"] = matrix_to_json(tbn.products);
            j["segment_count"] = tbn.layout.segment_count;
            j["features_per_segment"] = tbn.layout.features_per_segment;
            j["dropout_rate"] = tbn.dropout_rate();
            j["gate_W"] = matrix_to_json(tbn.gate_layer.W);
            j["gate_b"] = matrix_to_json(tbn.gate_layer.b);
            j["hidden_W"] = matrix_to_json(tbn.hidden.W);
            j["hidden_b"] = matrix_to_json(tbn.hidden.b);
            j["out_W"] = matrix_to_json(tbn.out_layer.W);
            j["out_b"] = matrix_to_json(tbn.out_layer.b);
            break;
        }
    }
    return j.dump(2);
}

std::unique_ptr<NetworkModel> load_model(const std::string& json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    const std::string arch = j.at("arch").get<std::string>();
    InitSpec dummy;
    dummy.stddev = 0.1;
    if (arch == "bnn") {
        const Matrix w = matrix_from_json(j.at("out_W"));
        auto model = std::make_unique<BnnModel>(w.rows, dummy);
        model->out_layer.W = w;
        model->out_layer.b = matrix_from_json(j.at("out_b"));
        return model;
    }
    if (arch == "esn") {
        const auto mask_int = j.at("mask").get<std::vector<int>>();
        std::vector<bool> mask(mask_int.begin(), mask_int.end());
        const Matrix hw = matrix_from_json(j.at("hidden_W"));
        auto model = std::make_unique<EsnModel>(mask, j.at("threshold").get<double>(), hw.cols, dummy);
        model->hidden.W = hw;
        model->hidden.b = matrix_from_json(j.at("hidden_b"));
        model->out_layer.W = matrix_from_json(j.at("out_W"));
        model->out_layer.b = matrix_from_json(j.at("out_b"));
        return model;
    }
    if (arch == "tbn") {
        FeatureLayout layout;
        layout.segment_count = j.at("segment_count").get<int>();
        layout.features_per_segment = j.at("features_per_segment").get<int>();
        const Matrix hw = matrix_from_json(j.at("hidden_W"));
        auto model = std::make_unique<TbnModel>(matrix_from_json(j.at("products")), layout, hw.cols,
                                                j.at("dropout_rate").get<double>(), dummy);
        model->gate_layer.W = matrix_from_json(j.at("gate_W"));
        model->gate_layer.b = matrix_from_json(j.at("gate_b"));
        model->hidden.W = hw;
        model->hidden.b = matrix_from_json(j.at("hidden_b"));
        model->out_layer.W = matrix_from_json(j.at("out_W"));
        model->out_layer.b = matrix_from_json(j.at("out_b"));
        return model;
    }
    throw std::runtime_error("load_model: unknown architecture '" + arch + "'");
}

nnet::GradCheckable make_gradcheckable(NetworkModel& model, const Matrix& x,
                                       const std::vector<int>& labels,
                                       const std::vector<double>& class_weights) {
    nnet::GradCheckable g;
    g.params = [&model]() { return model.params(); };
    g.analytic_grads = [&model, &x, labels, class_weights]() {
        model.forward(x, /*soft=*/true, nullptr);
        model.backward(labels, class_weights);
        return model.grads();
    };
    g.loss = [&model, &x, labels, class_weights]() {
        const Matrix probs = model.forward(x, /*soft=*/true, nullptr);
        return nnet::cross_entropy_mean(probs, labels, class_weights);
    };
    return g;
}

}  // namespace lop::models
