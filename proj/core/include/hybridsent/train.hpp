#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hybridsent/metrics.hpp"
#include "hybridsent/model.hpp"
#include "hybridsent/rng.hpp"

namespace hybridsent {

// Defaults are the experiment protocol: 50 epochs, batch 32, lr 1e-3,
// patience 5, 80/20 split handled by split_dataset, 5 repetitions.
struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int patience = 5;
    double val_fraction = 0.1;  // carved from the train portion
    std::uint64_t seed = 42;
    int repetitions = 5;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
    int best_epoch = 0;  // 1-indexed
    int stop_epoch = 0;  // 1-indexed; == epochs when never stopped early
};

void write_history_csv(const std::string& path, const TrainHistory& history);

// Validation-loss early stopping: stop after `patience` consecutive epochs
// without strict improvement; the best epoch's weights are restored by train().
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // Returns true when training should stop after this epoch.
    bool observe(int epoch, double val_loss) {
        if (val_loss < best_loss_) {
            best_loss_ = val_loss;
            best_epoch_ = epoch;
            return false;
        }
        return epoch - best_epoch_ >= patience_;
    }

    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    int patience_;
    int best_epoch_ = 0;
    double best_loss_ = std::numeric_limits<double>::infinity();
};

// Seeded shuffle, then first ceil(ratio*n) examples to the first part.
template <typename E>
std::pair<std::vector<E>, std::vector<E>> split_dataset(const std::vector<E>& data, double ratio,
                                                        std::uint64_t seed) {
    if (data.size() < 5) {
        throw DataError("split_dataset requires at least 5 examples, got " +
                        std::to_string(data.size()));
    }
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t train_n =
        static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(data.size())));
    std::pair<std::vector<E>, std::vector<E>> out;
    out.first.reserve(train_n);
    out.second.reserve(data.size() - train_n);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < train_n ? out.first : out.second).push_back(data[order[i]]);
    }
    return out;
}

// Mean over the batch of -sum_c target_c * log softmax(logits)_c, stabilized
// with log-sum-exp.
template <typename T>
double cross_entropy(const Tensor<T>& logits, const std::vector<LabelVector>& targets) {
    if (logits.rank() != 2 || logits.dim(0) != targets.size() || logits.dim(1) != 2) {
        throw DimensionError("cross_entropy expects [B,2] logits matching targets");
    }
    double total = 0.0;
    for (std::size_t b = 0; b < targets.size(); ++b) {
        const double z0 = logits(b, 0), z1 = logits(b, 1);
        const double mx = std::max(z0, z1);
        const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
        total += targets[b][0] * (lse - z0) + targets[b][1] * (lse - z1);
    }
    return total / static_cast<double>(targets.size());
}

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    template <typename P>
    static AdamState init(const std::vector<P*>& params) {
        AdamState st;
        st.m.reserve(params.size());
        st.v.reserve(params.size());
        for (const P* p : params) {
            st.m.emplace_back(p->value.shape());
            st.v.emplace_back(p->value.shape());
        }
        return st;
    }
};

// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  bias-corrected step.
template <typename T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& st, double lr) {
    if (params.size() != st.m.size()) {
        throw DimensionError("adam state does not match parameter list");
    }
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor<T>& value = params[p]->value;
        const Tensor<T>& grad = params[p]->grad;
        Tensor<T>& m = st.m[p];
        Tensor<T>& v = st.v[p];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = static_cast<double>(grad[i]);
            const double mi = st.beta1 * static_cast<double>(m[i]) + (1.0 - st.beta1) * g;
            const double vi = st.beta2 * static_cast<double>(v[i]) + (1.0 - st.beta2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + st.eps));
        }
    }
}

struct EvalResult {
    double loss = 0.0;  // mean cross-entropy (no penalty)
    double accuracy = 0.0;
};

template <typename T>
EvalResult evaluate(const ModelInstance<T>& model, const std::vector<ClassifierExample<T>>& data) {
    EvalResult r;
    if (data.empty()) return r;
    double loss = 0.0;
    std::size_t correct = 0;
    for (const ClassifierExample<T>& ex : data) {
        const Tensor<T> logits = model.forward(ex);
        const LabelVector y = one_hot(ex.label);
        const double z0 = logits[0], z1 = logits[1];
        const double mx = std::max(z0, z1);
        const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
        loss += y[0] * (lse - z0) + y[1] * (lse - z1);
        const int pred = z1 > z0 ? 1 : 0;
        correct += pred == ex.label ? 1 : 0;
    }
    r.loss = loss / static_cast<double>(data.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return r;
}

// One deterministic optimization run. Carves off `val_fraction` of the given
// train portion (tail of a seeded shuffle) as validation, monitors validation
// loss (cross-entropy plus the L2 penalty, i.e. the training objective) with
// patience-based early stopping, and restores the best epoch's parameters.
template <typename T>
TrainHistory train(ModelInstance<T>& model, const std::vector<ClassifierExample<T>>& train_data,
                   const TrainConfig& cfg) {
    if (train_data.empty()) throw DataError("train: empty training set");
    Rng rng = Rng(cfg.seed).substream(0x7261696e);  // shuffle stream

    std::vector<std::size_t> order(train_data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t val_n = static_cast<std::size_t>(
        std::ceil(cfg.val_fraction * static_cast<double>(train_data.size())));
    if (val_n >= train_data.size()) val_n = train_data.size() - 1;
    const std::size_t fit_n = train_data.size() - val_n;

    std::vector<ClassifierExample<T>> fit, val;
    fit.reserve(fit_n);
    val.reserve(val_n);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < fit_n ? fit : val).push_back(train_data[order[i]]);
    }

    auto params = model.parameters();
    AdamState<T> adam = AdamState<T>::init(params);
    EarlyStopper stopper(cfg.patience);
    TrainHistory history;

    std::vector<Tensor<T>> best_params;
    const auto snapshot = [&]() {
        best_params.clear();
        for (const Param<T>* p : params) best_params.push_back(p->value);
    };
    snapshot();

    std::vector<std::size_t> batch_order(fit.size());
    for (std::size_t i = 0; i < batch_order.size(); ++i) batch_order[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(batch_order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t base = 0; base < batch_order.size();
             base += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(batch_order.size(), base + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t bsz = end - base;
            model.zero_grads();
            double batch_ce = 0.0;
            for (std::size_t k = base; k < end; ++k) {
                const ClassifierExample<T>& ex = fit[batch_order[k]];
                ModelCache<T> cache;
                const Tensor<T> logits = model.forward(ex, &cache);
                const LabelVector y = one_hot(ex.label);
                const double z0 = logits[0], z1 = logits[1];
                const double mx = std::max(z0, z1);
                const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
                batch_ce += y[0] * (lse - z0) + y[1] * (lse - z1);
                const double p1 = std::exp(z1 - lse);
                const double p0 = std::exp(z0 - lse);
                Tensor<T> dlogits({2});
                dlogits[0] = static_cast<T>((p0 - y[0]) / static_cast<double>(bsz));
                dlogits[1] = static_cast<T>((p1 - y[1]) / static_cast<double>(bsz));
                model.backward(cache, dlogits);
            }
            batch_ce /= static_cast<double>(bsz);
            model.accumulate_l2_gradients();
            adam_step(params, adam, cfg.learning_rate);
            const double batch_total = batch_ce + static_cast<double>(model.l2_penalty());
            if (!std::isfinite(batch_total)) {
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch));
            }
            epoch_loss += batch_total * static_cast<double>(bsz);
            seen += bsz;
        }
        epoch_loss /= static_cast<double>(seen);

        const EvalResult on_val = evaluate(model, val);
        const double val_total = on_val.loss + static_cast<double>(model.l2_penalty());
        if (!std::isfinite(val_total)) {
            throw NumericError("training diverged: non-finite validation loss at epoch " +
                               std::to_string(epoch));
        }
        history.train_loss.push_back(epoch_loss);
        history.val_loss.push_back(val_total);
        history.val_accuracy.push_back(on_val.accuracy);

        const int prev_best = stopper.best_epoch();
        const bool stop = stopper.observe(epoch, val_total);
        if (stopper.best_epoch() == epoch && epoch != prev_best) snapshot();
        if (stop) {
            history.stop_epoch = epoch;
            break;
        }
        history.stop_epoch = epoch;
    }
    history.best_epoch = stopper.best_epoch();

    for (std::size_t p = 0; p < params.size(); ++p) params[p]->value = best_params[p];
    return history;
}

struct RunMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

template <typename T>
struct RepetitionResult {
    ModelInstance<T> model;
    TrainHistory history;
    RunMetrics test_metrics;
    std::uint64_t seed = 0;
};

template <typename T>
RunMetrics evaluate_metrics(const ModelInstance<T>& model,
                            const std::vector<ClassifierExample<T>>& data) {
    std::vector<int> preds, labels;
    preds.reserve(data.size());
    labels.reserve(data.size());
    for (const ClassifierExample<T>& ex : data) {
        preds.push_back(model.predict(ex));
        labels.push_back(ex.label);
    }
    const MetricTriple t = metrics(confusion(preds, labels));
    return RunMetrics{t.accuracy, t.precision, t.recall};
}

// Fixed 80/20 split from cfg.seed, then `repetitions` runs whose seeds are
// cfg.seed, cfg.seed+1, ... (initialization and shuffles differ per run).
template <typename T>
std::vector<RepetitionResult<T>> run_repetitions(const ArchitectureSpec& spec,
                                                 const HyperParams& hp,
                                                 const std::vector<ClassifierExample<T>>& data,
                                                 const TrainConfig& cfg, std::size_t input_dim,
                                                 std::size_t vocab_size = 0) {
    if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    auto [train_part, test_part] = split_dataset(data, 0.8, cfg.seed);
    std::vector<RepetitionResult<T>> results;
    results.reserve(static_cast<std::size_t>(cfg.repetitions));
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        const std::uint64_t rep_seed = cfg.seed + static_cast<std::uint64_t>(rep);
        RepetitionResult<T> r;
        r.seed = rep_seed;
        r.model = ModelInstance<T>::build(spec, hp, input_dim, rep_seed, vocab_size);
        TrainConfig rep_cfg = cfg;
        rep_cfg.seed = rep_seed;
        r.history = train(r.model, train_part, rep_cfg);
        r.test_metrics = evaluate_metrics(r.model, test_part);
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace hybridsent
