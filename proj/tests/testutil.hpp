#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hybridsent/encoder.hpp"
#include "hybridsent/model.hpp"
#include "hybridsent/rng.hpp"
#include "hybridsent/tensor.hpp"

namespace testutil {

template <typename T>
hybridsent::Tensor<T> random_tensor(std::vector<std::size_t> shape, hybridsent::Rng& rng,
                                    double lo = -1.0, double hi = 1.0) {
    hybridsent::Tensor<T> t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

struct GradCheckFailure {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

// Central finite differences on a scalar loss over every parameter element.
// `loss` must be a pure function of the current parameter values; `compute_grads`
// must leave analytic gradients in each Param's grad tensor.
inline bool gradient_check(const std::vector<hybridsent::Param<double>*>& params,
                           const std::vector<std::string>& names,
                           const std::function<double()>& loss,
                           const std::function<void()>& compute_grads, double step,
                           double rel_tol, GradCheckFailure* failure = nullptr) {
    compute_grads();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto* p : params) analytic.push_back(p->grad.storage());

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        hybridsent::Tensor<double>& value = params[pi]->value;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + step;
            const double up = loss();
            value[i] = saved - step;
            const double down = loss();
            value[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[pi][i];
            const double scale = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            const double rel = std::fabs(a - numeric) / scale;
            if (rel > rel_tol) {
                if (failure) {
                    failure->param = names.empty() ? std::to_string(pi) : names[pi];
                    failure->index = i;
                    failure->analytic = a;
                    failure->numeric = numeric;
                    failure->rel_error = rel;
                }
                return false;
            }
        }
    }
    return true;
}

// Builds a deterministic random example for a given representation.
inline hybridsent::ClassifierExample<double> random_example(
    std::size_t seq_len, std::size_t dim, int label, hybridsent::Rng& rng,
    bool embedding_path = false, std::size_t vocab = 0) {
    hybridsent::ClassifierExample<double> ex;
    ex.label = label;
    ex.mask.assign(seq_len, 1);
    if (embedding_path) {
        for (std::size_t t = 0; t < seq_len; ++t) {
            ex.ids.push_back(static_cast<std::int32_t>(rng.below(vocab)));
        }
    } else {
        ex.features = random_tensor<double>({seq_len, dim}, rng, -0.8, 0.8);
    }
    return ex;
}

// Encoder weights with zero tables/projections and identity layer norms.
inline hybridsent::EncoderWeights<float> zero_encoder_weights(const hybridsent::EncoderConfig& cfg) {
    using hybridsent::Tensorf;
    const std::size_t h = static_cast<std::size_t>(cfg.hidden);
    const std::size_t inter = static_cast<std::size_t>(cfg.intermediate);
    hybridsent::EncoderWeights<float> w;
    w.token_emb = Tensorf({static_cast<std::size_t>(cfg.vocab_size), h});
    w.segment_emb = Tensorf({static_cast<std::size_t>(cfg.type_vocab), h});
    w.position_emb = Tensorf({static_cast<std::size_t>(cfg.max_positions), h});
    w.emb_ln_gamma = Tensorf::full({h}, 1.0f);
    w.emb_ln_beta = Tensorf({h});
    w.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& lw : w.layers) {
        lw.q_w = Tensorf({h, h});
        lw.q_b = Tensorf({h});
        lw.k_w = Tensorf({h, h});
        lw.k_b = Tensorf({h});
        lw.v_w = Tensorf({h, h});
        lw.v_b = Tensorf({h});
        lw.out_w = Tensorf({h, h});
        lw.out_b = Tensorf({h});
        lw.attn_ln_gamma = Tensorf::full({h}, 1.0f);
        lw.attn_ln_beta = Tensorf({h});
        lw.ffn_in_w = Tensorf({h, inter});
        lw.ffn_in_b = Tensorf({inter});
        lw.ffn_out_w = Tensorf({inter, h});
        lw.ffn_out_b = Tensorf({h});
        lw.ffn_ln_gamma = Tensorf::full({h}, 1.0f);
        lw.ffn_ln_beta = Tensorf({h});
    }
    return w;
}

}  // namespace testutil
