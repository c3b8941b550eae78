#include "hybridsent/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hybridsent/errors.hpp"

namespace hybridsent {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

bool close(double a, double b) { return std::fabs(a - b) <= 1e-12; }

// Cholesky factorization with escalating diagonal jitter; returns the lower
// factor or throws NumericError once the jitter budget is exhausted.
std::vector<double> cholesky_with_jitter(std::vector<double> k, std::size_t n) {
    for (double jitter = 0.0;; jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0) {
        if (jitter > 1e-2) throw NumericError("GP kernel matrix is not positive definite");
        std::vector<double> l(n * n, 0.0);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double sum = k[i * n + j] + (i == j ? jitter : 0.0);
                for (std::size_t p = 0; p < j; ++p) sum -= l[i * n + p] * l[j * n + p];
                if (i == j) {
                    if (sum <= 0.0) {
                        ok = false;
                        break;
                    }
                    l[i * n + i] = std::sqrt(sum);
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        if (ok) return l;
    }
}

std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                   std::vector<double> b) {
    for (std::size_t i = 0; i < n; ++i) {  // L z = b
        for (std::size_t j = 0; j < i; ++j) b[i] -= l[i * n + j] * b[j];
        b[i] /= l[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {  // L^T x = z
        for (std::size_t j = i + 1; j < n; ++j) b[i] -= l[j * n + i] * b[j];
        b[i] /= l[i * n + i];
    }
    return b;
}

double rbf(const std::vector<double>& a, const std::vector<double>& b, const GpConfig& cfg) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return cfg.signal_stddev * cfg.signal_stddev *
           std::exp(-d2 / (2.0 * cfg.length_scale * cfg.length_scale));
}

}  // namespace

SearchSpace SearchSpace::for_architecture(const ArchitectureSpec& spec, bool strict_region_sizes) {
    SearchSpace space;
    space.spec_ = spec;
    const bool cnn = arch_has_cnn(spec.kind);
    const bool rnn = arch_has_lstm(spec.kind) || arch_has_gru(spec.kind);
    if (cnn) {
        space.dims_.push_back({"num_filters", {200, 250, 300}});
        if (strict_region_sizes) space.dims_.push_back({"region_size", {4, 5}});
        else space.dims_.push_back({"region_size", {3, 4, 5}});
        space.dims_.push_back({"cnn_l2", {0.001, 0.01}});
    }
    if (rnn) {
        space.dims_.push_back({"rnn_units", {100, 150, 200}});
        space.dims_.push_back({"kernel_l2", {0.001, 0.01}});
        space.dims_.push_back({"recurrent_l2", {0.001, 0.01}});
    }
    space.dims_.push_back({"dense_l2", {0.001, 0.01}});
    if (spec.representation == Representation::TrainableEmbedding) {
        space.dims_.push_back({"embedding_size", {64, 100, 128}});
    }
    return space;
}

std::size_t SearchSpace::grid_size() const {
    std::size_t n = 1;
    for (const SearchDimension& d : dims_) n *= d.candidates.size();
    return n;
}

double SearchSpace::dimension_value(const HyperParams& hp, const std::string& name) const {
    if (name == "num_filters") return hp.num_filters;
    if (name == "region_size") return hp.region_size;
    if (name == "cnn_l2") return hp.cnn_l2;
    if (name == "rnn_units") return hp.rnn_units;
    if (name == "kernel_l2") return hp.kernel_l2;
    if (name == "recurrent_l2") return hp.recurrent_l2;
    if (name == "dense_l2") return hp.dense_l2;
    if (name == "embedding_size") return hp.embedding_size;
    throw ConfigError("unknown search dimension: " + name);
}

void SearchSpace::set_dimension_value(HyperParams& hp, const std::string& name, double v) const {
    if (name == "num_filters") hp.num_filters = static_cast<int>(v);
    else if (name == "region_size") hp.region_size = static_cast<int>(v);
    else if (name == "cnn_l2") hp.cnn_l2 = v;
    else if (name == "rnn_units") hp.rnn_units = static_cast<int>(v);
    else if (name == "kernel_l2") hp.kernel_l2 = v;
    else if (name == "recurrent_l2") hp.recurrent_l2 = v;
    else if (name == "dense_l2") hp.dense_l2 = v;
    else if (name == "embedding_size") hp.embedding_size = static_cast<int>(v);
    else throw ConfigError("unknown search dimension: " + name);
}

HyperParams SearchSpace::config_at(std::size_t grid_index) const {
    if (grid_index >= grid_size()) {
        throw ConfigError("grid index " + std::to_string(grid_index) + " out of range");
    }
    HyperParams hp;
    for (std::size_t d = dims_.size(); d-- > 0;) {
        const std::size_t k = dims_[d].candidates.size();
        set_dimension_value(hp, dims_[d].name, dims_[d].candidates[grid_index % k]);
        grid_index /= k;
    }
    return hp;
}

std::size_t SearchSpace::index_of(const HyperParams& hp) const {
    std::size_t index = 0;
    for (const SearchDimension& dim : dims_) {
        const double v = dimension_value(hp, dim.name);
        std::size_t pos = dim.candidates.size();
        for (std::size_t i = 0; i < dim.candidates.size(); ++i) {
            if (close(dim.candidates[i], v)) {
                pos = i;
                break;
            }
        }
        if (pos == dim.candidates.size()) {
            throw ConfigError("config value " + std::to_string(v) + " for '" + dim.name +
                              "' is not a grid candidate");
        }
        index = index * dim.candidates.size() + pos;
    }
    return index;
}

std::vector<double> SearchSpace::encode_config(const HyperParams& hp) const {
    index_of(hp);  // membership check
    std::vector<double> x;
    x.reserve(dims_.size());
    for (const SearchDimension& dim : dims_) {
        const double lo = *std::min_element(dim.candidates.begin(), dim.candidates.end());
        const double hi = *std::max_element(dim.candidates.begin(), dim.candidates.end());
        const double v = dimension_value(hp, dim.name);
        x.push_back(hi > lo ? (v - lo) / (hi - lo) : 0.0);
    }
    return x;
}

HyperParams SearchSpace::decode_config(const std::vector<double>& x) const {
    if (x.size() != dims_.size()) {
        throw ConfigError("encoded vector length does not match search space");
    }
    HyperParams hp;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        const SearchDimension& dim = dims_[d];
        const double lo = *std::min_element(dim.candidates.begin(), dim.candidates.end());
        const double hi = *std::max_element(dim.candidates.begin(), dim.candidates.end());
        const double raw = hi > lo ? lo + x[d] * (hi - lo) : lo;
        double best_v = dim.candidates[0];
        double best_d = std::fabs(raw - best_v);
        for (const double c : dim.candidates) {
            const double dist = std::fabs(raw - c);
            if (dist < best_d) {
                best_d = dist;
                best_v = c;
            }
        }
        set_dimension_value(hp, dim.name, best_v);
    }
    return hp;
}

GpPosterior gp_posterior(const std::vector<std::vector<double>>& observed_x,
                         const std::vector<double>& observed_y, const std::vector<double>& query,
                         const GpConfig& cfg) {
    const std::size_t n = observed_x.size();
    GpPosterior post;
    if (n == 0) {
        post.mean = 0.0;
        post.variance = cfg.signal_stddev * cfg.signal_stddev;
        return post;
    }
    // Standardize once two scores exist; a constant column keeps scale 1.
    double mu = 0.0, sd = 1.0;
    if (n >= 2) {
        for (const double y : observed_y) mu += y;
        mu /= static_cast<double>(n);
        double ss = 0.0;
        for (const double y : observed_y) ss += (y - mu) * (y - mu);
        sd = std::sqrt(ss / static_cast<double>(n));
        if (sd < 1e-12) sd = 1.0;
    }
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) k[i * n + j] = rbf(observed_x[i], observed_x[j], cfg);
        k[i * n + i] += cfg.noise_stddev * cfg.noise_stddev;
    }
    const std::vector<double> l = cholesky_with_jitter(std::move(k), n);
    std::vector<double> y_std(n);
    for (std::size_t i = 0; i < n; ++i) y_std[i] = (observed_y[i] - mu) / sd;
    const std::vector<double> alpha = cholesky_solve(l, n, y_std);

    std::vector<double> ks(n);
    for (std::size_t i = 0; i < n; ++i) ks[i] = rbf(observed_x[i], query, cfg);
    double mean_std = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_std += ks[i] * alpha[i];
    const std::vector<double> kinv_ks = cholesky_solve(l, n, ks);
    double reduction = 0.0;
    for (std::size_t i = 0; i < n; ++i) reduction += ks[i] * kinv_ks[i];
    const double var_std = std::max(0.0, cfg.signal_stddev * cfg.signal_stddev - reduction);

    post.mean = mu + sd * mean_std;
    post.variance = sd * sd * var_std;
    return post;
}

double expected_improvement(double mean, double variance, double best_so_far) {
    if (variance < 0.0) throw NumericError("expected_improvement: negative variance");
    const double sigma = std::sqrt(variance);
    const double delta = mean - best_so_far;
    if (sigma == 0.0) return std::max(delta, 0.0);
    const double z = delta / sigma;
    return std::max(0.0, delta * normal_cdf(z) + sigma * normal_pdf(z));
}

HyperParams suggest(const std::vector<Trial>& history, const SearchSpace& space, Rng& rng,
                    const GpConfig& gp) {
    const std::size_t total = space.grid_size();
    std::vector<bool> explored(total, false);
    for (const Trial& t : history) explored[space.index_of(t.config)] = true;
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < total; ++i) {
        if (!explored[i]) open.push_back(i);
    }
    if (open.empty()) throw ConfigError("search grid exhausted");

    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (const Trial& t : history) {
        if (!t.ok) continue;
        xs.push_back(space.encode_config(t.config));
        ys.push_back(t.score);
    }
    if (history.size() < 3 || ys.empty()) {
        return space.config_at(open[static_cast<std::size_t>(rng.below(open.size()))]);
    }

    const double best = *std::max_element(ys.begin(), ys.end());
    std::size_t arg = open[0];
    double best_ei = -1.0;
    for (const std::size_t idx : open) {
        const HyperParams cand = space.config_at(idx);
        const GpPosterior post = gp_posterior(xs, ys, space.encode_config(cand), gp);
        const double ei = expected_improvement(post.mean, post.variance, best);
        if (ei > best_ei) {  // strict: ties keep the lowest grid index
            best_ei = ei;
            arg = idx;
        }
    }
    return space.config_at(arg);
}

std::string trial_to_json(const Trial& t) {
    nlohmann::json obj;
    obj["trial"] = t.number;
    obj["config"] = nlohmann::json::parse(hyperparams_to_json(t.config));
    if (t.ok) obj["score"] = t.score;  // scores are recorded for completed trials only
    obj["seed"] = t.seed;
    obj["status"] = t.ok ? "ok" : "failed";
    if (!t.error.empty()) obj["error"] = t.error;
    return obj.dump();
}

Trial trial_from_json(const std::string& line) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid trial ledger line: ") + e.what());
    }
    Trial t;
    t.number = obj.at("trial").get<std::size_t>();
    t.config = hyperparams_from_json(obj.at("config").dump());
    t.score = obj.value("score", 0.0);
    t.seed = obj.value("seed", std::uint64_t{0});
    t.ok = obj.value("status", "failed") == std::string("ok");
    t.error = obj.value("error", std::string{});
    return t;
}

OptimizeResult optimize(const SearchSpace& space, const Objective& objective, int max_trials,
                        std::uint64_t seed, const std::string& ledger_path, const GpConfig& gp) {
    OptimizeResult result;
    if (!ledger_path.empty()) {
        std::ifstream in(ledger_path);
        std::string line;
        while (in && std::getline(in, line)) {
            if (!line.empty()) result.trials.push_back(trial_from_json(line));
        }
    }

    const Rng base(seed);
    while (static_cast<int>(result.trials.size()) < max_trials) {
        const std::size_t number = result.trials.size() + 1;
        Rng trial_rng = base.substream(number);
        HyperParams config;
        try {
            config = suggest(result.trials, space, trial_rng, gp);
        } catch (const ConfigError&) {
            break;  // grid exhausted
        }
        Trial t;
        t.number = number;
        t.config = config;
        t.seed = seed + number;
        try {
            t.score = objective(config, t.seed);
            t.ok = true;
        } catch (const std::exception& e) {
            t.ok = false;
            t.error = e.what();
        }
        result.trials.push_back(t);
        if (!ledger_path.empty()) {
            std::ofstream out(ledger_path, std::ios::app);
            if (!out) throw DataError("cannot append to trial ledger: " + ledger_path);
            out << trial_to_json(t) << '\n';
        }
    }

    for (const Trial& t : result.trials) {
        if (!t.ok) continue;
        if (!result.best || t.score > result.best->score) result.best = t;
    }
    return result;
}

}  // namespace hybridsent
