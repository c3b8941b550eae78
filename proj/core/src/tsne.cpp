#include "hybridsent/tsne.hpp"

#include <cmath>
#include <limits>

#include "hybridsent/errors.hpp"
#include "hybridsent/rng.hpp"

namespace hybridsent {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

std::vector<double> squared_distances(const Tensord& x) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            const double* xi = x.row(i);
            const double* xj = x.row(j);
            for (std::size_t k = 0; k < d; ++k) s += (xi[k] - xj[k]) * (xi[k] - xj[k]);
            dist[i * n + j] = s;
            dist[j * n + i] = s;
        }
    }
    return dist;
}

// Conditional distribution row for point i at precision beta; returns the
// entropy in bits. Row i of `p` is overwritten (diagonal forced to zero).
double fill_row(const std::vector<double>& dist, std::size_t n, std::size_t i, double beta,
                std::vector<double>& p) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double v = j == i ? 0.0 : std::exp(-beta * dist[i * n + j]);
        p[i * n + j] = v;
        sum += v;
    }
    if (sum <= 0.0) sum = std::numeric_limits<double>::min();
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        weighted += p[i * n + j] * dist[i * n + j];
        p[i * n + j] /= sum;
    }
    const double entropy_nats = beta * weighted / sum + std::log(sum);
    return entropy_nats / kLn2;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, std::size_t n) {
    const double tiny = std::numeric_limits<double>::min();
    double kl = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) {
        if (p[i] > 0.0) kl += p[i] * std::log((p[i] + tiny) / (q[i] + tiny));
    }
    return kl;
}

}  // namespace

TsneSimilarities tsne_similarities(const Tensord& points, double perplexity) {
    if (points.rank() != 2) throw ConfigError("tsne expects an [n,D] matrix");
    const std::size_t n = points.dim(0);
    const std::size_t d = points.dim(1);
    if (d < 2) throw ConfigError("tsne requires at least 2 input dimensions");
    if (3.0 * perplexity >= static_cast<double>(n)) {
        throw ConfigError("perplexity " + std::to_string(perplexity) +
                          " infeasible for n=" + std::to_string(n) + " (need 3*perplexity < n)");
    }

    const std::vector<double> dist = squared_distances(points);
    const double target_bits = std::log2(perplexity);

    std::vector<double> cond(n * n, 0.0);
    TsneSimilarities sim;
    sim.entropy_error.resize(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        double h = fill_row(dist, n, i, beta, cond);
        for (int iter = 0; iter < 50 && std::fabs(h - target_bits) > 1e-4; ++iter) {
            if (h > target_bits) {  // too flat: raise precision
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = std::isinf(lo) ? beta * 0.5 : 0.5 * (beta + lo);
            }
            h = fill_row(dist, n, i, beta, cond);
        }
        sim.entropy_error[i] = std::fabs(h - target_bits);
    }

    // Symmetrize; the full matrix sums to 1 with a zero diagonal.
    sim.p = Tensord({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            sim.p(i, j) = (cond[i * n + j] + cond[j * n + i]) / (2.0 * static_cast<double>(n));
        }
    }
    return sim;
}

TsneResult tsne(const Tensord& points, const TsneOptions& opts) {
    TsneSimilarities sim = tsne_similarities(points, opts.perplexity);
    const std::size_t n = points.dim(0);
    const std::vector<double>& p = sim.p.storage();

    TsneResult result;
    result.entropy_error = std::move(sim.entropy_error);

    Rng rng(opts.seed);
    Tensord y({n, 2});
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.normal() * 1e-4;

    std::vector<double> q(n * n, 0.0);
    std::vector<double> qtilde(n * n, 0.0);
    const auto compute_q = [&]() {
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            qtilde[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dy0 = y(i, 0) - y(j, 0);
                const double dy1 = y(i, 1) - y(j, 1);
                const double w = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                qtilde[i * n + j] = w;
                qtilde[j * n + i] = w;
                z += 2.0 * w;
            }
        }
        if (z <= 0.0) z = std::numeric_limits<double>::min();
        for (std::size_t i = 0; i < n * n; ++i) q[i] = qtilde[i] / z;
    };

    compute_q();
    result.initial_kl = kl_divergence(p, q, n);

    Tensord velocity({n, 2});
    Tensord grad({n, 2});
    for (int iter = 0; iter < opts.iterations; ++iter) {
        const double exaggeration = iter < opts.exaggeration_iters ? opts.exaggeration : 1.0;
        const double momentum =
            iter < opts.momentum_switch_iter ? opts.initial_momentum : opts.final_momentum;
        compute_q();
        grad.fill(0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double mult =
                    4.0 * (exaggeration * p[i * n + j] - q[i * n + j]) * qtilde[i * n + j];
                grad(i, 0) += mult * (y(i, 0) - y(j, 0));
                grad(i, 1) += mult * (y(i, 1) - y(j, 1));
            }
        }
        double mean0 = 0.0, mean1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            velocity(i, 0) = momentum * velocity(i, 0) - opts.learning_rate * grad(i, 0);
            velocity(i, 1) = momentum * velocity(i, 1) - opts.learning_rate * grad(i, 1);
            y(i, 0) += velocity(i, 0);
            y(i, 1) += velocity(i, 1);
            mean0 += y(i, 0);
            mean1 += y(i, 1);
        }
        mean0 /= static_cast<double>(n);
        mean1 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y(i, 0) -= mean0;
            y(i, 1) -= mean1;
        }
    }

    compute_q();
    result.final_kl = kl_divergence(p, q, n);
    result.coords = std::move(y);
    return result;
}

}  // namespace hybridsent
