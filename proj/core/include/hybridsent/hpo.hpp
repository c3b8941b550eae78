#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybridsent/model.hpp"
#include "hybridsent/rng.hpp"

namespace hybridsent {

// One searchable dimension: an ordered list of candidate values.
struct SearchDimension {
    std::string name;
    std::vector<double> candidates;  // deduplicated, ascending insertion order
};

// The discrete hyperparameter grid for one architecture/representation pair.
// Candidate sets follow the experiment's published list; `strict_region_sizes`
// keeps the verbatim degenerate region-size column {5,4,5} (deduplicated)
// instead of the corrected {3,4,5}.
class SearchSpace {
public:
    static SearchSpace for_architecture(const ArchitectureSpec& spec,
                                        bool strict_region_sizes = false);

    const std::vector<SearchDimension>& dimensions() const { return dims_; }
    std::size_t grid_size() const;

    // Lexicographic enumeration, last dimension fastest.
    HyperParams config_at(std::size_t grid_index) const;
    std::size_t index_of(const HyperParams& hp) const;  // throws if off-grid

    // Min-max normalization of each dimension to [0,1]; single-candidate
    // dimensions map to the constant 0.
    std::vector<double> encode_config(const HyperParams& hp) const;
    HyperParams decode_config(const std::vector<double>& x) const;  // nearest-candidate snap

    const ArchitectureSpec& spec() const { return spec_; }

private:
    double dimension_value(const HyperParams& hp, const std::string& name) const;
    void set_dimension_value(HyperParams& hp, const std::string& name, double v) const;

    ArchitectureSpec spec_;
    std::vector<SearchDimension> dims_;
};

struct Trial {
    std::size_t number = 0;  // 1-based
    HyperParams config;
    double score = 0.0;  // validation accuracy (higher better)
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
};

// Gaussian-process surrogate over normalized config vectors with an RBF
// kernel k(x,x') = sf^2 exp(-|x-x'|^2 / (2 l^2)) + sn^2 I. Scores are
// standardized internally once two observations exist; posterior moments are
// reported back in raw score units.
struct GpConfig {
    double signal_stddev = 1.0;   // sf
    double length_scale = 0.5;    // l
    double noise_stddev = 1e-4;   // sn
};

struct GpPosterior {
    double mean = 0.0;
    double variance = 0.0;
};

GpPosterior gp_posterior(const std::vector<std::vector<double>>& observed_x,
                         const std::vector<double>& observed_y, const std::vector<double>& query,
                         const GpConfig& cfg = {});

// Expected improvement for maximization; sigma = 0 degenerates to
// max(mean - best, 0).
double expected_improvement(double mean, double variance, double best_so_far);

// Trials 1-3 draw uniformly from unexplored grid points; later trials take the
// EI argmax over every unexplored point, ties broken by lowest grid index.
HyperParams suggest(const std::vector<Trial>& history, const SearchSpace& space, Rng& rng,
                    const GpConfig& gp = {});

using Objective = std::function<double(const HyperParams&, std::uint64_t seed)>;

// Experiment protocol budget: at most ten trials per search.
inline constexpr int kDefaultMaxTrials = 10;

struct OptimizeResult {
    std::vector<Trial> trials;
    std::optional<Trial> best;  // highest-score completed trial
};

// Runs at most max_trials suggestions (or until the grid is exhausted). When
// `ledger_path` is non-empty, trials append to a JSON-lines ledger and any
// existing ledger entries are resumed first. Objective failures mark the trial
// failed and the loop continues.
OptimizeResult optimize(const SearchSpace& space, const Objective& objective, int max_trials,
                        std::uint64_t seed, const std::string& ledger_path = "",
                        const GpConfig& gp = {});

std::string trial_to_json(const Trial& t);
Trial trial_from_json(const std::string& line);

}  // namespace hybridsent
