#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hybridsent/io.hpp"
#include "hybridsent/layers.hpp"
#include "hybridsent/tensor.hpp"

namespace hybridsent {

enum class Arch { CnnLstm, LstmCnn, CnnGru, GruCnn, Cnn, Lstm, Gru };
enum class Representation { BertFeatures, TrainableEmbedding };

// Report row order used throughout (matches the evaluation tables).
inline constexpr Arch kArchOrder[7] = {Arch::CnnLstm, Arch::LstmCnn, Arch::CnnGru,
                                       Arch::GruCnn,  Arch::Cnn,     Arch::Lstm,
                                       Arch::Gru};

std::string to_string(Arch a);
std::string to_string(Representation r);
Arch arch_from_string(const std::string& s);
Representation representation_from_string(const std::string& s);

inline bool arch_has_cnn(Arch a) { return a != Arch::Lstm && a != Arch::Gru; }
inline bool arch_has_lstm(Arch a) {
    return a == Arch::CnnLstm || a == Arch::LstmCnn || a == Arch::Lstm;
}
inline bool arch_has_gru(Arch a) {
    return a == Arch::CnnGru || a == Arch::GruCnn || a == Arch::Gru;
}
inline bool arch_cnn_first(Arch a) {
    return a == Arch::Cnn || a == Arch::CnnLstm || a == Arch::CnnGru;
}
inline bool arch_is_hybrid(Arch a) { return arch_has_cnn(a) && (arch_has_lstm(a) || arch_has_gru(a)); }

struct ArchitectureSpec {
    Arch kind = Arch::Cnn;
    Representation representation = Representation::BertFeatures;
};

struct HyperParams {
    int num_filters = 250;
    int region_size = 4;
    double cnn_l2 = 0.001;
    int rnn_units = 150;
    double kernel_l2 = 0.001;
    double recurrent_l2 = 0.001;
    double dense_l2 = 0.001;
    int embedding_size = 100;  // trainable-embedding path only
};

std::string hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const std::string& json_text);

// One classification input. The bert path fills `features` (frozen encoder
// output); the embedding path fills `ids`. `mask` flags non-pad positions.
template <typename T>
struct ClassifierExample {
    Tensor<T> features;
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;
    int label = 0;
};

template <typename T>
struct ModelCache {
    Tensor<T> input;  // representation consumed by the first numeric layer
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;
    Conv1dCache<T> conv;
    MaxPoolCache<T> pool;
    RnnCache<T> rnn;
    DenseCache<T> dense;
    Tensor<T> logits;
};

// One of the seven architectures with its parameter tensors.
//
// Wiring:
//   CNN:      conv -> global maxpool -> dense(2)
//   LSTM/GRU: rnn (last unmasked state) -> dense(2)
//   CNN-RNN:  conv -> local maxpool(2,2) -> rnn (last state) -> dense(2)
//   RNN-CNN:  rnn (full sequence) -> conv -> global maxpool -> dense(2)
// The embedding path prepends a trainable lookup; the bert path consumes
// FeatureMatrix rows directly (pad rows included; the mask only selects the
// RNN's last state).
template <typename T>
class ModelInstance {
public:
    ModelInstance() = default;

    static ModelInstance build(const ArchitectureSpec& spec, const HyperParams& hp,
                               std::size_t input_dim, std::uint64_t seed, std::size_t vocab_size = 0);

    Tensor<T> forward(const ClassifierExample<T>& ex, ModelCache<T>* cache = nullptr) const;
    // Stacked [B,2] logits over a batch; B = 1 equals the single-example path.
    Tensor<T> forward_batch(const std::vector<ClassifierExample<T>>& batch) const;
    void backward(const ModelCache<T>& cache, const Tensor<T>& dlogits);

    // Prediction = argmax of the softmaxed logits; ties resolve to class 0.
    int predict(const ClassifierExample<T>& ex) const;

    T l2_penalty() const;
    void accumulate_l2_gradients();

    std::vector<Param<T>*> parameters();
    std::vector<const Param<T>*> parameters() const;
    std::vector<std::string> parameter_names() const;
    void zero_grads();

    const ArchitectureSpec& spec() const { return spec_; }
    const HyperParams& hyperparams() const { return hp_; }
    std::size_t input_dim() const { return input_dim_; }

    std::vector<NamedTensor> to_tensors() const;
    void load_tensors(const std::vector<NamedTensor>& tensors);

private:
    ArchitectureSpec spec_;
    HyperParams hp_;
    std::size_t input_dim_ = 0;

    std::optional<EmbeddingTable<T>> embedding_;
    std::optional<Conv1dParams<T>> conv_;
    std::optional<LstmParams<T>> lstm_;
    std::optional<GruParams<T>> gru_;
    DenseParams<T> dense_;
};

template <typename T>
ModelInstance<T> ModelInstance<T>::build(const ArchitectureSpec& spec, const HyperParams& hp,
                                         std::size_t input_dim, std::uint64_t seed,
                                         std::size_t vocab_size) {
    if (hp.num_filters < 1 || hp.region_size < 1 || hp.rnn_units < 1 || hp.embedding_size < 1) {
        throw ConfigError("hyperparameters must be positive");
    }
    ModelInstance<T> m;
    m.spec_ = spec;
    m.hp_ = hp;
    Rng rng(seed);

    std::size_t d = input_dim;
    if (spec.representation == Representation::TrainableEmbedding) {
        if (vocab_size == 0) throw ConfigError("embedding representation requires a vocab size");
        m.embedding_.emplace(vocab_size, static_cast<std::size_t>(hp.embedding_size), rng);
        d = static_cast<std::size_t>(hp.embedding_size);
    } else if (input_dim == 0) {
        throw ConfigError("bert representation requires a feature dimension");
    }
    m.input_dim_ = d;

    const std::size_t filters = static_cast<std::size_t>(hp.num_filters);
    const std::size_t region = static_cast<std::size_t>(hp.region_size);
    const std::size_t units = static_cast<std::size_t>(hp.rnn_units);

    std::size_t dense_in = 0;
    const Arch a = spec.kind;
    if (arch_cnn_first(a)) {
        m.conv_.emplace(filters, region, d, rng);
        if (a == Arch::Cnn) {
            dense_in = filters;
        } else {
            // conv -> local pool -> rnn
            if (arch_has_lstm(a)) m.lstm_.emplace(units, filters, rng);
            else m.gru_.emplace(units, filters, rng);
            dense_in = units;
        }
    } else if (a == Arch::Lstm || a == Arch::Gru) {
        if (a == Arch::Lstm) m.lstm_.emplace(units, d, rng);
        else m.gru_.emplace(units, d, rng);
        dense_in = units;
    } else {
        // rnn -> conv -> global pool
        if (arch_has_lstm(a)) m.lstm_.emplace(units, d, rng);
        else m.gru_.emplace(units, d, rng);
        m.conv_.emplace(filters, region, units, rng);
        dense_in = filters;
    }
    m.dense_ = DenseParams<T>(2, dense_in, rng);
    return m;
}

template <typename T>
Tensor<T> ModelInstance<T>::forward(const ClassifierExample<T>& ex, ModelCache<T>* cache) const {
    ModelCache<T> local;
    ModelCache<T>& c = cache ? *cache : local;
    c.mask = ex.mask;

    Tensor<T> x;
    if (spec_.representation == Representation::TrainableEmbedding) {
        c.ids = ex.ids;
        x = embedding_forward(ex.ids, *embedding_);
    } else {
        if (ex.features.rank() != 2 || ex.features.dim(1) != input_dim_) {
            throw DimensionError("feature input " + ex.features.shape_string() +
                                 " does not match model input dim " + std::to_string(input_dim_));
        }
        x = ex.features;
    }
    c.input = x;

    Tensor<T> logits;
    const Arch a = spec_.kind;
    if (a == Arch::Cnn) {
        Tensor<T> conv_out = conv1d_forward(x, *conv_, Activation::Relu, &c.conv);
        Tensor<T> pooled = maxpool_global_forward(conv_out, &c.pool);
        logits = dense_forward(pooled, dense_, &c.dense);
    } else if (a == Arch::Lstm) {
        Tensor<T> h = rnn_forward(x, ex.mask, *lstm_, false, &c.rnn);
        logits = dense_forward(h, dense_, &c.dense);
    } else if (a == Arch::Gru) {
        Tensor<T> h = rnn_forward(x, ex.mask, *gru_, false, &c.rnn);
        logits = dense_forward(h, dense_, &c.dense);
    } else if (arch_cnn_first(a)) {
        Tensor<T> conv_out = conv1d_forward(x, *conv_, Activation::Relu, &c.conv);
        if (conv_out.dim(0) < 2) {
            throw ConfigError("CNN-first hybrid: conv output length " +
                              std::to_string(conv_out.dim(0)) + " is below the pooling window (2)");
        }
        Tensor<T> pooled = maxpool_local_forward(conv_out, 2, 2, &c.pool);
        const std::vector<std::uint8_t> no_mask;  // pooled positions are all valid
        Tensor<T> h = arch_has_lstm(a) ? rnn_forward(pooled, no_mask, *lstm_, false, &c.rnn)
                                       : rnn_forward(pooled, no_mask, *gru_, false, &c.rnn);
        logits = dense_forward(h, dense_, &c.dense);
    } else {
        Tensor<T> seq = arch_has_lstm(a) ? rnn_forward(x, ex.mask, *lstm_, true, &c.rnn)
                                         : rnn_forward(x, ex.mask, *gru_, true, &c.rnn);
        Tensor<T> conv_out = conv1d_forward(seq, *conv_, Activation::Relu, &c.conv);
        Tensor<T> pooled = maxpool_global_forward(conv_out, &c.pool);
        logits = dense_forward(pooled, dense_, &c.dense);
    }
    c.logits = logits;
    return logits;
}

template <typename T>
void ModelInstance<T>::backward(const ModelCache<T>& cache, const Tensor<T>& dlogits) {
    const Arch a = spec_.kind;
    Tensor<T> dx;
    if (a == Arch::Cnn) {
        Tensor<T> dpool = dense_backward(dense_, cache.dense, dlogits);
        Tensor<T> dconv = maxpool_global_backward(cache.pool, dpool);
        dx = conv1d_backward(*conv_, cache.conv, dconv);
    } else if (a == Arch::Lstm || a == Arch::Gru) {
        Tensor<T> dh = dense_backward(dense_, cache.dense, dlogits);
        Tensor<T> dh_all({cache.rnn.steps, dh.size()});
        std::copy(dh.data(), dh.data() + dh.size(), dh_all.row(cache.rnn.last_index));
        dx = a == Arch::Lstm ? rnn_backward(*lstm_, cache.rnn, dh_all)
                             : rnn_backward(*gru_, cache.rnn, dh_all);
    } else if (arch_cnn_first(a)) {
        Tensor<T> dh = dense_backward(dense_, cache.dense, dlogits);
        Tensor<T> dh_all({cache.rnn.steps, dh.size()});
        std::copy(dh.data(), dh.data() + dh.size(), dh_all.row(cache.rnn.last_index));
        Tensor<T> dpool = arch_has_lstm(a) ? rnn_backward(*lstm_, cache.rnn, dh_all)
                                           : rnn_backward(*gru_, cache.rnn, dh_all);
        Tensor<T> dconv = maxpool_local_backward(cache.pool, dpool);
        dx = conv1d_backward(*conv_, cache.conv, dconv);
    } else {
        Tensor<T> dpool = dense_backward(dense_, cache.dense, dlogits);
        Tensor<T> dconv = maxpool_global_backward(cache.pool, dpool);
        Tensor<T> dseq = conv1d_backward(*conv_, cache.conv, dconv);
        dx = arch_has_lstm(a) ? rnn_backward(*lstm_, cache.rnn, dseq)
                              : rnn_backward(*gru_, cache.rnn, dseq);
    }
    if (embedding_) embedding_backward(*embedding_, cache.ids, dx);
}

template <typename T>
Tensor<T> ModelInstance<T>::forward_batch(const std::vector<ClassifierExample<T>>& batch) const {
    if (batch.empty()) throw DataError("forward_batch: empty batch");
    Tensor<T> logits({batch.size(), 2});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor<T> row = forward(batch[b]);
        logits(b, 0) = row[0];
        logits(b, 1) = row[1];
    }
    return logits;
}

template <typename T>
int ModelInstance<T>::predict(const ClassifierExample<T>& ex) const {
    const Tensor<T> probs = softmax(forward(ex));
    return probs[1] > probs[0] ? 1 : 0;
}

template <typename T>
T ModelInstance<T>::l2_penalty() const {
    const auto sumsq = [](const Tensor<T>& t) {
        T acc = T(0);
        for (std::size_t i = 0; i < t.size(); ++i) acc += t[i] * t[i];
        return acc;
    };
    T total = T(0);
    if (conv_) total += static_cast<T>(hp_.cnn_l2) * sumsq(conv_->w.value);
    if (lstm_) {
        T kernels = sumsq(lstm_->w_fx.value) + sumsq(lstm_->w_ix.value) +
                    sumsq(lstm_->w_cx.value) + sumsq(lstm_->w_ox.value);
        T recurrent = sumsq(lstm_->w_fh.value) + sumsq(lstm_->w_ih.value) +
                      sumsq(lstm_->w_ch.value) + sumsq(lstm_->w_oh.value);
        total += static_cast<T>(hp_.kernel_l2) * kernels + static_cast<T>(hp_.recurrent_l2) * recurrent;
    }
    if (gru_) {
        T kernels = sumsq(gru_->w_zx.value) + sumsq(gru_->w_rx.value) + sumsq(gru_->w_hx.value);
        T recurrent = sumsq(gru_->w_zh.value) + sumsq(gru_->w_rh.value) + sumsq(gru_->w_hh.value);
        total += static_cast<T>(hp_.kernel_l2) * kernels + static_cast<T>(hp_.recurrent_l2) * recurrent;
    }
    total += static_cast<T>(hp_.dense_l2) * sumsq(dense_.w.value);
    return total;  // biases and embedding table excluded; no 1/2 factor
}

template <typename T>
void ModelInstance<T>::accumulate_l2_gradients() {
    const auto add = [](Param<T>& p, T lambda) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += T(2) * lambda * p.value[i];
    };
    if (conv_) add(conv_->w, static_cast<T>(hp_.cnn_l2));
    if (lstm_) {
        for (Param<T>* p : {&lstm_->w_fx, &lstm_->w_ix, &lstm_->w_cx, &lstm_->w_ox}) {
            add(*p, static_cast<T>(hp_.kernel_l2));
        }
        for (Param<T>* p : {&lstm_->w_fh, &lstm_->w_ih, &lstm_->w_ch, &lstm_->w_oh}) {
            add(*p, static_cast<T>(hp_.recurrent_l2));
        }
    }
    if (gru_) {
        for (Param<T>* p : {&gru_->w_zx, &gru_->w_rx, &gru_->w_hx}) {
            add(*p, static_cast<T>(hp_.kernel_l2));
        }
        for (Param<T>* p : {&gru_->w_zh, &gru_->w_rh, &gru_->w_hh}) {
            add(*p, static_cast<T>(hp_.recurrent_l2));
        }
    }
    add(dense_.w, static_cast<T>(hp_.dense_l2));
}

template <typename T>
std::vector<Param<T>*> ModelInstance<T>::parameters() {
    std::vector<Param<T>*> out;
    if (embedding_) out.push_back(&embedding_->table);
    if (conv_) {
        out.push_back(&conv_->w);
        out.push_back(&conv_->b);
    }
    if (lstm_) {
        for (Param<T>* p : {&lstm_->w_fx, &lstm_->w_ix, &lstm_->w_cx, &lstm_->w_ox, &lstm_->w_fh,
                            &lstm_->w_ih, &lstm_->w_ch, &lstm_->w_oh, &lstm_->b_f, &lstm_->b_i,
                            &lstm_->b_c, &lstm_->b_o}) {
            out.push_back(p);
        }
    }
    if (gru_) {
        for (Param<T>* p : {&gru_->w_zx, &gru_->w_rx, &gru_->w_hx, &gru_->w_zh, &gru_->w_rh,
                            &gru_->w_hh, &gru_->b_z, &gru_->b_r, &gru_->b_h}) {
            out.push_back(p);
        }
    }
    out.push_back(&dense_.w);
    out.push_back(&dense_.b);
    return out;
}

template <typename T>
std::vector<const Param<T>*> ModelInstance<T>::parameters() const {
    auto mut = const_cast<ModelInstance<T>*>(this)->parameters();
    return std::vector<const Param<T>*>(mut.begin(), mut.end());
}

template <typename T>
std::vector<std::string> ModelInstance<T>::parameter_names() const {
    std::vector<std::string> out;
    if (embedding_) out.push_back("embedding.table");
    if (conv_) {
        out.push_back("conv.weight");
        out.push_back("conv.bias");
    }
    if (lstm_) {
        for (const char* n : {"lstm.w_fx", "lstm.w_ix", "lstm.w_cx", "lstm.w_ox", "lstm.w_fh",
                              "lstm.w_ih", "lstm.w_ch", "lstm.w_oh", "lstm.b_f", "lstm.b_i",
                              "lstm.b_c", "lstm.b_o"}) {
            out.emplace_back(n);
        }
    }
    if (gru_) {
        for (const char* n : {"gru.w_zx", "gru.w_rx", "gru.w_hx", "gru.w_zh", "gru.w_rh",
                              "gru.w_hh", "gru.b_z", "gru.b_r", "gru.b_h"}) {
            out.emplace_back(n);
        }
    }
    out.push_back("dense.weight");
    out.push_back("dense.bias");
    return out;
}

template <typename T>
void ModelInstance<T>::zero_grads() {
    for (Param<T>* p : parameters()) p->zero_grad();
}

template <typename T>
std::vector<NamedTensor> ModelInstance<T>::to_tensors() const {
    const auto params = parameters();
    const auto names = parameter_names();
    std::vector<NamedTensor> out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor<T>& v = params[i]->value;
        std::vector<float> data(v.size());
        for (std::size_t j = 0; j < v.size(); ++j) data[j] = static_cast<float>(v[j]);
        out.push_back({names[i], Tensorf(v.shape(), std::move(data))});
    }
    return out;
}

template <typename T>
void ModelInstance<T>::load_tensors(const std::vector<NamedTensor>& tensors) {
    const auto params = parameters();
    const auto names = parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const NamedTensor* found = nullptr;
        for (const NamedTensor& t : tensors) {
            if (t.name == names[i]) {
                found = &t;
                break;
            }
        }
        if (!found) throw DataError("checkpoint is missing tensor '" + names[i] + "'");
        if (found->value.shape() != params[i]->value.shape()) {
            throw DataError("checkpoint tensor '" + names[i] + "' has shape " +
                            found->value.shape_string() + ", expected " +
                            params[i]->value.shape_string());
        }
        for (std::size_t j = 0; j < found->value.size(); ++j) {
            params[i]->value[j] = static_cast<T>(found->value[j]);
        }
    }
}

}  // namespace hybridsent
