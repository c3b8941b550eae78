#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hybridsent/errors.hpp"
#include "hybridsent/io.hpp"
#include "hybridsent/tensor.hpp"
#include "hybridsent/text.hpp"

namespace hybridsent {

struct EncoderConfig {
    int num_layers = 12;
    int hidden = 768;        // H
    int num_heads = 12;      // A, divides H
    int intermediate = 3072;
    int vocab_size = 30522;
    int max_positions = 512;
    int type_vocab = 2;
    double ln_eps = 1e-12;

    void validate() const;
    static EncoderConfig reference();      // BERT_BASE profile
    static EncoderConfig load(const std::string& path);  // JSON
};

template <typename T>
struct EncoderLayerWeights {
    Tensor<T> q_w, q_b, k_w, k_b, v_w, v_b;  // projections, [H,H] weight, [H] bias
    Tensor<T> out_w, out_b;
    Tensor<T> attn_ln_gamma, attn_ln_beta;
    Tensor<T> ffn_in_w, ffn_in_b;    // [H,I], [I]
    Tensor<T> ffn_out_w, ffn_out_b;  // [I,H], [H]
    Tensor<T> ffn_ln_gamma, ffn_ln_beta;
};

// Projection weights are stored [in, out] and applied as x*W + b on row
// vectors; this orientation is part of the NTC1 container contract.
template <typename T>
struct EncoderWeights {
    Tensor<T> token_emb;     // [vocab_size, H]
    Tensor<T> segment_emb;   // [type_vocab, H]
    Tensor<T> position_emb;  // [max_positions, H]
    Tensor<T> emb_ln_gamma, emb_ln_beta;
    std::vector<EncoderLayerWeights<T>> layers;
};

// L x H contextual representation of one text plus its attention mask.
template <typename T>
struct FeatureMatrix {
    Tensor<T> values;                // [L, H]; pad rows carried, flagged by mask
    std::vector<std::uint8_t> mask;  // 1 iff non-pad
};

// Test hook capturing per-head attention probabilities of one layer pass.
template <typename T>
struct AttentionProbe {
    std::vector<Tensor<T>> head_probs;  // one [L, L] matrix per head
};

namespace detail {

template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    Tensor<T> y = matmul(x, w);
    const std::size_t rows = y.dim(0), cols = y.dim(1);
    for (std::size_t i = 0; i < rows; ++i) {
        T* r = y.row(i);
        for (std::size_t j = 0; j < cols; ++j) r[j] += b[j];
    }
    return y;
}

}  // namespace detail

template <typename T>
Tensor<T> embed_input(const TokenizedExample& ex, const EncoderWeights<T>& w,
                      const EncoderConfig& cfg) {
    const std::size_t L = ex.ids.size();
    const std::size_t H = static_cast<std::size_t>(cfg.hidden);
    if (L > static_cast<std::size_t>(cfg.max_positions)) {
        throw DimensionError("sequence length " + std::to_string(L) + " exceeds max_positions " +
                             std::to_string(cfg.max_positions));
    }
    Tensor<T> x({L, H});
    for (std::size_t pos = 0; pos < L; ++pos) {
        const std::int32_t id = ex.ids[pos];
        if (id < 0 || id >= cfg.vocab_size) {
            throw DataError("token id " + std::to_string(id) + " out of vocab range at position " +
                            std::to_string(pos));
        }
        const std::int32_t seg = pos < ex.segment_ids.size() ? ex.segment_ids[pos] : 0;
        const T* tok = w.token_emb.row(static_cast<std::size_t>(id));
        const T* sg = w.segment_emb.row(static_cast<std::size_t>(seg));
        const T* ps = w.position_emb.row(pos);
        T* out = x.row(pos);
        for (std::size_t j = 0; j < H; ++j) out[j] = tok[j] + sg[j] + ps[j];
    }
    return layer_norm(x, w.emb_ln_gamma, w.emb_ln_beta, static_cast<T>(cfg.ln_eps));
}

template <typename T>
Tensor<T> encoder_layer(const Tensor<T>& x, const std::vector<std::uint8_t>& mask,
                        const EncoderLayerWeights<T>& lw, const EncoderConfig& cfg,
                        AttentionProbe<T>* probe = nullptr) {
    const std::size_t L = x.dim(0);
    const std::size_t H = static_cast<std::size_t>(cfg.hidden);
    const std::size_t A = static_cast<std::size_t>(cfg.num_heads);
    const std::size_t dh = H / A;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    const Tensor<T> q = detail::affine(x, lw.q_w, lw.q_b);
    const Tensor<T> k = detail::affine(x, lw.k_w, lw.k_b);
    const Tensor<T> v = detail::affine(x, lw.v_w, lw.v_b);

    Tensor<T> ctx({L, H});
    Tensor<T> scores({L, L});
    for (std::size_t head = 0; head < A; ++head) {
        const std::size_t off = head * dh;
        for (std::size_t i = 0; i < L; ++i) {
            const T* qi = q.row(i) + off;
            T* srow = scores.row(i);
            for (std::size_t j = 0; j < L; ++j) {
                const T* kj = k.row(j) + off;
                T acc = T(0);
                for (std::size_t c = 0; c < dh; ++c) acc += qi[c] * kj[c];
                srow[j] = acc * scale;
                if (j < mask.size() && mask[j] == 0) srow[j] += T(-1e9);  // additive key mask
            }
        }
        const Tensor<T> probs = softmax(scores);
        if (probe) probe->head_probs.push_back(probs);
        for (std::size_t i = 0; i < L; ++i) {
            const T* prow = probs.row(i);
            T* crow = ctx.row(i) + off;
            for (std::size_t j = 0; j < L; ++j) {
                const T p = prow[j];
                const T* vj = v.row(j) + off;
                for (std::size_t c = 0; c < dh; ++c) crow[c] += p * vj[c];
            }
        }
    }

    Tensor<T> attn = detail::affine(ctx, lw.out_w, lw.out_b);
    for (std::size_t i = 0; i < attn.size(); ++i) attn[i] += x[i];  // residual
    Tensor<T> mid = layer_norm(attn, lw.attn_ln_gamma, lw.attn_ln_beta, static_cast<T>(cfg.ln_eps));

    Tensor<T> ffn = map(detail::affine(mid, lw.ffn_in_w, lw.ffn_in_b), Activation::Gelu);
    Tensor<T> out = detail::affine(ffn, lw.ffn_out_w, lw.ffn_out_b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += mid[i];  // residual
    return layer_norm(out, lw.ffn_ln_gamma, lw.ffn_ln_beta, static_cast<T>(cfg.ln_eps));
}

template <typename T>
FeatureMatrix<T> encode(const TokenizedExample& ex, const EncoderWeights<T>& w,
                        const EncoderConfig& cfg) {
    Tensor<T> x = embed_input(ex, w, cfg);
    for (const EncoderLayerWeights<T>& lw : w.layers) {
        x = encoder_layer(x, ex.attention_mask, lw, cfg);
    }
    FeatureMatrix<T> fm;
    fm.values = std::move(x);
    fm.mask = ex.attention_mask;
    return fm;
}

// Builds typed encoder weights from an NTC1 tensor list, validating that every
// slot is present with the shape the config demands (float32 container
// payloads are widened when T is double).
template <typename T>
EncoderWeights<T> bind_encoder_weights(const std::vector<NamedTensor>& tensors,
                                       const EncoderConfig& cfg);

// Randomly initialized weights for tests and toy runs.
EncoderWeights<float> random_encoder_weights(const EncoderConfig& cfg, std::uint64_t seed,
                                             float scale = 0.05f);

// Flattens weights back to the NTC1 name scheme (layer.3.attn.q.weight, ...).
std::vector<NamedTensor> encoder_weights_to_tensors(const EncoderWeights<float>& w);

// Encodes every example once, fanning out across `threads` workers; cache
// records are written in input order, so the output bytes do not depend on
// the thread count.
void extract_features(const std::vector<TokenizedExample>& examples,
                      const std::vector<int>& labels, const EncoderWeights<float>& w,
                      const EncoderConfig& cfg, const std::string& cache_path, int threads = 1,
                      const std::function<void(std::size_t done, std::size_t total)>& progress = {});

}  // namespace hybridsent
