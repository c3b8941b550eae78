#pragma once

#include <cstdint>
#include <vector>

#include "hybridsent/tensor.hpp"

namespace hybridsent {

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 1000;
    std::uint64_t seed = 0;
    double learning_rate = 200.0;
    double exaggeration = 12.0;
    int exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
};

struct TsneResult {
    Tensord coords;  // [n, 2]
    double initial_kl = 0.0;
    double final_kl = 0.0;
    // Per-point |achieved - target| entropy error in bits after calibration.
    std::vector<double> entropy_error;
};

// Calibration stage: symmetrized input similarities P (an [n,n] matrix that
// sums to 1 with a zero diagonal) and the per-point entropy errors.
struct TsneSimilarities {
    Tensord p;
    std::vector<double> entropy_error;
};

TsneSimilarities tsne_similarities(const Tensord& points, double perplexity);

// Exact (quadratic) t-SNE. Per-point Gaussian bandwidths are found by binary
// search so the conditional entropy hits log2(perplexity) within 1e-4 bits
// (at most 50 halvings); P is symmetrized to sum to 1; the map is fit by
// KL gradient descent with momentum and early exaggeration.
TsneResult tsne(const Tensord& points, const TsneOptions& opts = {});

}  // namespace hybridsent
