#include "hybridsent/encoder.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "hybridsent/rng.hpp"

namespace hybridsent {

void EncoderConfig::validate() const {
    if (num_layers < 1 || hidden < 1 || num_heads < 1 || intermediate < 1 || vocab_size < 1 ||
        max_positions < 1 || type_vocab < 1 || ln_eps <= 0.0) {
        throw ConfigError("encoder config fields must be positive");
    }
    if (hidden % num_heads != 0) {
        throw ConfigError("hidden size " + std::to_string(hidden) + " not divisible by " +
                          std::to_string(num_heads) + " heads");
    }
}

EncoderConfig EncoderConfig::reference() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open encoder config: " + path);
    nlohmann::json obj;
    try {
        in >> obj;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid encoder config JSON in " + path + ": " + e.what());
    }
    EncoderConfig cfg;
    cfg.num_layers = obj.value("num_layers", cfg.num_layers);
    cfg.hidden = obj.value("hidden", cfg.hidden);
    cfg.num_heads = obj.value("num_heads", cfg.num_heads);
    cfg.intermediate = obj.value("intermediate", cfg.intermediate);
    cfg.vocab_size = obj.value("vocab_size", cfg.vocab_size);
    cfg.max_positions = obj.value("max_positions", cfg.max_positions);
    cfg.type_vocab = obj.value("type_vocab", cfg.type_vocab);
    cfg.ln_eps = obj.value("ln_eps", cfg.ln_eps);
    cfg.validate();
    return cfg;
}

namespace {

using ShapeMap = std::map<std::string, std::vector<std::size_t>>;

ShapeMap expected_slots(const EncoderConfig& cfg) {
    const std::size_t H = static_cast<std::size_t>(cfg.hidden);
    const std::size_t I = static_cast<std::size_t>(cfg.intermediate);
    ShapeMap slots;
    slots["embedding.token"] = {static_cast<std::size_t>(cfg.vocab_size), H};
    slots["embedding.segment"] = {static_cast<std::size_t>(cfg.type_vocab), H};
    slots["embedding.position"] = {static_cast<std::size_t>(cfg.max_positions), H};
    slots["embedding.ln.gamma"] = {H};
    slots["embedding.ln.beta"] = {H};
    for (int i = 0; i < cfg.num_layers; ++i) {
        const std::string p = "layer." + std::to_string(i) + ".";
        for (const char* proj : {"q", "k", "v", "out"}) {
            slots[p + "attn." + proj + ".weight"] = {H, H};
            slots[p + "attn." + proj + ".bias"] = {H};
        }
        slots[p + "attn.ln.gamma"] = {H};
        slots[p + "attn.ln.beta"] = {H};
        slots[p + "ffn.in.weight"] = {H, I};
        slots[p + "ffn.in.bias"] = {I};
        slots[p + "ffn.out.weight"] = {I, H};
        slots[p + "ffn.out.bias"] = {H};
        slots[p + "ffn.ln.gamma"] = {H};
        slots[p + "ffn.ln.beta"] = {H};
    }
    return slots;
}

template <typename T>
Tensor<T> widen(const Tensorf& t) {
    if constexpr (std::is_same_v<T, float>) {
        return t;
    } else {
        std::vector<T> data(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) data[i] = static_cast<T>(t[i]);
        return Tensor<T>(t.shape(), std::move(data));
    }
}

template <typename T>
class SlotReader {
public:
    SlotReader(const std::vector<NamedTensor>& tensors, const EncoderConfig& cfg) {
        expected_ = expected_slots(cfg);
        for (const NamedTensor& t : tensors) by_name_[t.name] = &t.value;
    }

    Tensor<T> take(const std::string& name) {
        const auto slot = expected_.find(name);
        const auto it = by_name_.find(name);
        if (it == by_name_.end()) {
            throw DataError("weight file is missing slot '" + name + "'");
        }
        if (slot != expected_.end() && it->second->shape() != slot->second) {
            throw DataError("weight slot '" + name + "' has shape " + it->second->shape_string() +
                            ", expected " + Tensorf::shape_string(slot->second));
        }
        return widen<T>(*it->second);
    }

private:
    ShapeMap expected_;
    std::map<std::string, const Tensorf*> by_name_;
};

}  // namespace

template <typename T>
EncoderWeights<T> bind_encoder_weights(const std::vector<NamedTensor>& tensors,
                                       const EncoderConfig& cfg) {
    cfg.validate();
    SlotReader<T> reader(tensors, cfg);
    EncoderWeights<T> w;
    w.token_emb = reader.take("embedding.token");
    w.segment_emb = reader.take("embedding.segment");
    w.position_emb = reader.take("embedding.position");
    w.emb_ln_gamma = reader.take("embedding.ln.gamma");
    w.emb_ln_beta = reader.take("embedding.ln.beta");
    w.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (int i = 0; i < cfg.num_layers; ++i) {
        const std::string p = "layer." + std::to_string(i) + ".";
        EncoderLayerWeights<T>& lw = w.layers[static_cast<std::size_t>(i)];
        lw.q_w = reader.take(p + "attn.q.weight");
        lw.q_b = reader.take(p + "attn.q.bias");
        lw.k_w = reader.take(p + "attn.k.weight");
        lw.k_b = reader.take(p + "attn.k.bias");
        lw.v_w = reader.take(p + "attn.v.weight");
        lw.v_b = reader.take(p + "attn.v.bias");
        lw.out_w = reader.take(p + "attn.out.weight");
        lw.out_b = reader.take(p + "attn.out.bias");
        lw.attn_ln_gamma = reader.take(p + "attn.ln.gamma");
        lw.attn_ln_beta = reader.take(p + "attn.ln.beta");
        lw.ffn_in_w = reader.take(p + "ffn.in.weight");
        lw.ffn_in_b = reader.take(p + "ffn.in.bias");
        lw.ffn_out_w = reader.take(p + "ffn.out.weight");
        lw.ffn_out_b = reader.take(p + "ffn.out.bias");
        lw.ffn_ln_gamma = reader.take(p + "ffn.ln.gamma");
        lw.ffn_ln_beta = reader.take(p + "ffn.ln.beta");
    }
    return w;
}

template EncoderWeights<float> bind_encoder_weights<float>(const std::vector<NamedTensor>&,
                                                           const EncoderConfig&);
template EncoderWeights<double> bind_encoder_weights<double>(const std::vector<NamedTensor>&,
                                                             const EncoderConfig&);

EncoderWeights<float> random_encoder_weights(const EncoderConfig& cfg, std::uint64_t seed,
                                             float scale) {
    cfg.validate();
    Rng rng(seed);
    const auto randn = [&](std::vector<std::size_t> shape, bool ones = false) {
        Tensorf t(std::move(shape));
        if (ones) {
            t.fill(1.0f);
        } else {
            for (std::size_t i = 0; i < t.size(); ++i) {
                t[i] = static_cast<float>(rng.normal()) * scale;
            }
        }
        return t;
    };
    const std::size_t H = static_cast<std::size_t>(cfg.hidden);
    const std::size_t I = static_cast<std::size_t>(cfg.intermediate);
    EncoderWeights<float> w;
    w.token_emb = randn({static_cast<std::size_t>(cfg.vocab_size), H});
    w.segment_emb = randn({static_cast<std::size_t>(cfg.type_vocab), H});
    w.position_emb = randn({static_cast<std::size_t>(cfg.max_positions), H});
    w.emb_ln_gamma = randn({H}, true);
    w.emb_ln_beta = Tensorf({H});
    w.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& lw : w.layers) {
        lw.q_w = randn({H, H});
        lw.q_b = Tensorf({H});
        lw.k_w = randn({H, H});
        lw.k_b = Tensorf({H});
        lw.v_w = randn({H, H});
        lw.v_b = Tensorf({H});
        lw.out_w = randn({H, H});
        lw.out_b = Tensorf({H});
        lw.attn_ln_gamma = randn({H}, true);
        lw.attn_ln_beta = Tensorf({H});
        lw.ffn_in_w = randn({H, I});
        lw.ffn_in_b = Tensorf({I});
        lw.ffn_out_w = randn({I, H});
        lw.ffn_out_b = Tensorf({H});
        lw.ffn_ln_gamma = randn({H}, true);
        lw.ffn_ln_beta = Tensorf({H});
    }
    return w;
}

std::vector<NamedTensor> encoder_weights_to_tensors(const EncoderWeights<float>& w) {
    std::vector<NamedTensor> out;
    out.push_back({"embedding.token", w.token_emb});
    out.push_back({"embedding.segment", w.segment_emb});
    out.push_back({"embedding.position", w.position_emb});
    out.push_back({"embedding.ln.gamma", w.emb_ln_gamma});
    out.push_back({"embedding.ln.beta", w.emb_ln_beta});
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        const std::string p = "layer." + std::to_string(i) + ".";
        const EncoderLayerWeights<float>& lw = w.layers[i];
        out.push_back({p + "attn.q.weight", lw.q_w});
        out.push_back({p + "attn.q.bias", lw.q_b});
        out.push_back({p + "attn.k.weight", lw.k_w});
        out.push_back({p + "attn.k.bias", lw.k_b});
        out.push_back({p + "attn.v.weight", lw.v_w});
        out.push_back({p + "attn.v.bias", lw.v_b});
        out.push_back({p + "attn.out.weight", lw.out_w});
        out.push_back({p + "attn.out.bias", lw.out_b});
        out.push_back({p + "attn.ln.gamma", lw.attn_ln_gamma});
        out.push_back({p + "attn.ln.beta", lw.attn_ln_beta});
        out.push_back({p + "ffn.in.weight", lw.ffn_in_w});
        out.push_back({p + "ffn.in.bias", lw.ffn_in_b});
        out.push_back({p + "ffn.out.weight", lw.ffn_out_w});
        out.push_back({p + "ffn.out.bias", lw.ffn_out_b});
        out.push_back({p + "ffn.ln.gamma", lw.ffn_ln_gamma});
        out.push_back({p + "ffn.ln.beta", lw.ffn_ln_beta});
    }
    return out;
}

void extract_features(const std::vector<TokenizedExample>& examples, const std::vector<int>& labels,
                      const EncoderWeights<float>& w, const EncoderConfig& cfg,
                      const std::string& cache_path, int threads,
                      const std::function<void(std::size_t, std::size_t)>& progress) {
    if (examples.size() != labels.size()) {
        throw DataError("extract_features: examples/labels size mismatch");
    }
    cfg.validate();
    const std::size_t n = examples.size();
    const std::size_t L = n > 0 ? examples[0].ids.size() : 128;
    const std::size_t H = static_cast<std::size_t>(cfg.hidden);

    FeatureCacheWriter writer(cache_path, static_cast<std::uint32_t>(n),
                              static_cast<std::uint32_t>(L), static_cast<std::uint32_t>(H));

    // Encode in fixed-size chunks fanned across workers, then flush the chunk
    // in input order; output bytes are independent of the thread count.
    const std::size_t chunk = 64;
    const int workers = std::max(1, threads);
    std::vector<FeatureRecord> buffer;
    for (std::size_t base = 0; base < n; base += chunk) {
        const std::size_t end = std::min(n, base + chunk);
        buffer.assign(end - base, FeatureRecord{});
        const auto encode_one = [&](std::size_t idx) {
            if (examples[idx].ids.size() != L) {
                throw DataError("extract_features: inconsistent sequence lengths");
            }
            const FeatureMatrix<float> fm = encode(examples[idx], w, cfg);
            FeatureRecord& rec = buffer[idx - base];
            rec.label = static_cast<std::uint8_t>(labels[idx]);
            rec.mask_count = static_cast<std::uint32_t>(examples[idx].mask_count());
            rec.values = fm.values.storage();
        };
        if (workers == 1 || end - base == 1) {
            for (std::size_t i = base; i < end; ++i) encode_one(i);
        } else {
            std::vector<std::thread> pool;
            std::exception_ptr err;
            std::mutex err_mu;
            for (int t = 0; t < workers; ++t) {
                pool.emplace_back([&, t]() {
                    for (std::size_t i = base + static_cast<std::size_t>(t); i < end;
                         i += static_cast<std::size_t>(workers)) {
                        try {
                            encode_one(i);
                        } catch (...) {
                            std::lock_guard<std::mutex> lock(err_mu);
                            if (!err) err = std::current_exception();
                        }
                    }
                });
            }
            for (auto& th : pool) th.join();
            if (err) std::rethrow_exception(err);
        }
        for (const FeatureRecord& rec : buffer) writer.append(rec);
        if (progress) progress(end, n);
    }
    writer.close();
}

}  // namespace hybridsent
