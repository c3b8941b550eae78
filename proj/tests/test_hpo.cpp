#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "hybridsent/hpo.hpp"
#include "hybridsent/rng.hpp"

using namespace hybridsent;

namespace {

SearchSpace hybrid_space() {
    return SearchSpace::for_architecture({Arch::CnnLstm, Representation::BertFeatures});
}

// Smooth deterministic objective over the encoded grid: a seeded quadratic
// bowl. Used for comparing search strategies.
double bowl_objective(const SearchSpace& space, const HyperParams& hp, std::uint64_t fn_seed) {
    Rng rng(fn_seed);
    const auto x = space.encode_config(hp);
    double value = 0.0;
    for (const double xi : x) {
        const double center = rng.uniform();
        value -= (xi - center) * (xi - center);
    }
    return value;
}

}  // namespace

TEST_CASE("search space construction") {
    SUBCASE("hybrid space covers the published candidates") {
        const SearchSpace s = hybrid_space();
        CHECK(s.grid_size() == 3 * 3 * 2 * 3 * 2 * 2 * 2);  // 432
        CHECK(s.dimensions().size() == 7);
    }
    SUBCASE("embedding path appends embedding_size") {
        const SearchSpace s =
            SearchSpace::for_architecture({Arch::CnnLstm, Representation::TrainableEmbedding});
        CHECK(s.grid_size() == 432 * 3);
        CHECK(s.dimensions().back().name == "embedding_size");
        CHECK(s.dimensions().back().candidates == std::vector<double>{64, 100, 128});
    }
    SUBCASE("single models carry only their layers") {
        const SearchSpace cnn = SearchSpace::for_architecture({Arch::Cnn, Representation::BertFeatures});
        CHECK(cnn.grid_size() == 3 * 3 * 2 * 2);
        const SearchSpace lstm =
            SearchSpace::for_architecture({Arch::Lstm, Representation::BertFeatures});
        CHECK(lstm.grid_size() == 3 * 2 * 2 * 2);
    }
    SUBCASE("strict region sizes keep the verbatim deduplicated column") {
        const SearchSpace s =
            SearchSpace::for_architecture({Arch::Cnn, Representation::BertFeatures}, true);
        for (const auto& d : s.dimensions()) {
            if (d.name == "region_size") CHECK(d.candidates == std::vector<double>{4, 5});
        }
    }
    SUBCASE("grid enumeration round trips") {
        const SearchSpace s = hybrid_space();
        for (std::size_t i = 0; i < s.grid_size(); i += 37) {
            CHECK(s.index_of(s.config_at(i)) == i);
        }
    }
}

TEST_CASE("encode_config") {
    const SearchSpace s = hybrid_space();
    SUBCASE("min-max law for num_filters") {
        HyperParams hp = s.config_at(0);
        hp.num_filters = 200;
        CHECK(s.encode_config(hp)[0] == doctest::Approx(0.0));
        hp.num_filters = 250;
        CHECK(s.encode_config(hp)[0] == doctest::Approx(0.5));
        hp.num_filters = 300;
        CHECK(s.encode_config(hp)[0] == doctest::Approx(1.0));
    }
    SUBCASE("decode snaps to the nearest candidate") {
        for (std::size_t i = 0; i < s.grid_size(); i += 53) {
            const HyperParams hp = s.config_at(i);
            const HyperParams back = s.decode_config(s.encode_config(hp));
            CHECK(s.index_of(back) == i);
        }
    }
    SUBCASE("off-grid config rejected") {
        HyperParams hp = s.config_at(0);
        hp.num_filters = 123;
        CHECK_THROWS_AS(s.encode_config(hp), ConfigError);
    }
    SUBCASE("single-candidate dimension maps to zero") {
        SearchSpace one = hybrid_space();
        // exercised through the public surface: a space with one candidate
        // would encode constantly; emulate via equal min/max on region 4,5 vs
        // direct check on the strict space's two-value column instead.
        const SearchSpace strict =
            SearchSpace::for_architecture({Arch::Cnn, Representation::BertFeatures}, true);
        HyperParams hp = strict.config_at(0);
        hp.region_size = 4;
        const auto x = strict.encode_config(hp);
        CHECK(x[1] == doctest::Approx(0.0));
    }
}

TEST_CASE("gp_posterior") {
    const GpConfig cfg;
    SUBCASE("prior with no observations") {
        const GpPosterior p = gp_posterior({}, {}, {0.3, 0.4});
        CHECK(p.mean == 0.0);
        CHECK(p.variance == doctest::Approx(1.0));
    }
    SUBCASE("near-noiseless interpolation at an observed point") {
        GpConfig tight;
        tight.noise_stddev = 1e-8;
        const std::vector<std::vector<double>> xs{{0.0, 0.0}, {1.0, 0.5}, {0.2, 0.9}};
        const std::vector<double> ys{1.5, -0.5, 0.7};
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const GpPosterior p = gp_posterior(xs, ys, xs[i], tight);
            CHECK(p.mean == doctest::Approx(ys[i]).epsilon(1e-6));
        }
    }
    SUBCASE("three-point hand case matches a direct matrix-formula oracle") {
        // Oracle: explicit 3x3 solve via cofactor inversion, including the
        // same standardization the implementation documents.
        const GpConfig g;
        const std::vector<std::vector<double>> xs{{0.1}, {0.5}, {0.9}};
        const std::vector<double> ys{0.2, 0.8, 0.5};
        const std::vector<double> query{0.3};

        const auto kernel = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double d2 = 0;
            for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
            return g.signal_stddev * g.signal_stddev *
                   std::exp(-d2 / (2 * g.length_scale * g.length_scale));
        };
        double mu = (ys[0] + ys[1] + ys[2]) / 3.0;
        double sd = std::sqrt(((ys[0] - mu) * (ys[0] - mu) + (ys[1] - mu) * (ys[1] - mu) +
                               (ys[2] - mu) * (ys[2] - mu)) / 3.0);
        double k[3][3];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) k[i][j] = kernel(xs[i], xs[j]);
            k[i][i] += g.noise_stddev * g.noise_stddev;
        }
        // cofactor inverse
        const double det = k[0][0] * (k[1][1] * k[2][2] - k[1][2] * k[2][1]) -
                           k[0][1] * (k[1][0] * k[2][2] - k[1][2] * k[2][0]) +
                           k[0][2] * (k[1][0] * k[2][1] - k[1][1] * k[2][0]);
        double inv[3][3];
        inv[0][0] = (k[1][1] * k[2][2] - k[1][2] * k[2][1]) / det;
        inv[0][1] = (k[0][2] * k[2][1] - k[0][1] * k[2][2]) / det;
        inv[0][2] = (k[0][1] * k[1][2] - k[0][2] * k[1][1]) / det;
        inv[1][0] = (k[1][2] * k[2][0] - k[1][0] * k[2][2]) / det;
        inv[1][1] = (k[0][0] * k[2][2] - k[0][2] * k[2][0]) / det;
        inv[1][2] = (k[0][2] * k[1][0] - k[0][0] * k[1][2]) / det;
        inv[2][0] = (k[1][0] * k[2][1] - k[1][1] * k[2][0]) / det;
        inv[2][1] = (k[0][1] * k[2][0] - k[0][0] * k[2][1]) / det;
        inv[2][2] = (k[0][0] * k[1][1] - k[0][1] * k[1][0]) / det;

        double ks[3], alpha[3] = {0, 0, 0};
        const double ystd[3] = {(ys[0] - mu) / sd, (ys[1] - mu) / sd, (ys[2] - mu) / sd};
        for (int i = 0; i < 3; ++i) ks[i] = kernel(xs[i], query);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) alpha[i] += inv[i][j] * ystd[j];
        }
        double mean_std = 0, reduction = 0;
        for (int i = 0; i < 3; ++i) mean_std += ks[i] * alpha[i];
        for (int i = 0; i < 3; ++i) {
            double kik = 0;
            for (int j = 0; j < 3; ++j) kik += inv[i][j] * ks[j];
            reduction += ks[i] * kik;
        }
        const double want_mean = mu + sd * mean_std;
        const double want_var = sd * sd * (kernel(query, query) - reduction);

        const GpPosterior p = gp_posterior(xs, ys, query, g);
        CHECK(std::fabs(p.mean - want_mean) < 1e-10);
        CHECK(std::fabs(p.variance - want_var) < 1e-10);
    }
    SUBCASE("posterior variance at an observed point is below the prior") {
        const std::vector<std::vector<double>> xs{{0.4, 0.6}};
        const std::vector<double> ys{0.9};
        const GpPosterior p = gp_posterior(xs, ys, xs[0], cfg);
        CHECK(p.variance <= cfg.signal_stddev * cfg.signal_stddev);
    }
    SUBCASE("EI vanishes at observed points when the noise is zero") {
        GpConfig noiseless;
        noiseless.noise_stddev = 0.0;
        const std::vector<std::vector<double>> xs{{0.0, 0.2}, {0.7, 0.9}, {0.4, 0.4}};
        const std::vector<double> ys{0.3, 0.9, 0.6};
        const double best = 0.9;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const GpPosterior p = gp_posterior(xs, ys, xs[i], noiseless);
            CHECK(expected_improvement(p.mean, p.variance, best) < 1e-6);
        }
    }
}

TEST_CASE("expected_improvement") {
    SUBCASE("closed form at mean == best, sigma = 1") {
        CHECK(expected_improvement(0.5, 1.0, 0.5) == doctest::Approx(0.39894).epsilon(1e-4));
    }
    SUBCASE("sigma = 0 degenerates to max(mean - best, 0)") {
        CHECK(expected_improvement(0.4, 0.0, 0.5) == 0.0);
        CHECK(expected_improvement(0.7, 0.0, 0.5) == doctest::Approx(0.2));
    }
    SUBCASE("EI grows with sigma at fixed mean == best") {
        double prev = 0.0;
        for (double sigma = 0.1; sigma <= 2.0; sigma += 0.1) {
            const double ei = expected_improvement(1.0, sigma * sigma, 1.0);
            CHECK(ei > prev);
            prev = ei;
        }
    }
    SUBCASE("EI is nonnegative everywhere") {
        Rng rng(3);
        for (int i = 0; i < 200; ++i) {
            CHECK(expected_improvement(rng.uniform(-2, 2), rng.uniform(0, 4), rng.uniform(-2, 2)) >=
                  0.0);
        }
    }
}

TEST_CASE("suggest") {
    const SearchSpace space = hybrid_space();
    SUBCASE("empty history draws a random config from the space") {
        Rng rng(5);
        const HyperParams hp = suggest({}, space, rng);
        CHECK(space.index_of(hp) < space.grid_size());
    }
    SUBCASE("never returns an already-tried config") {
        SearchSpace tiny = SearchSpace::for_architecture({Arch::Lstm, Representation::BertFeatures});
        std::vector<Trial> history;
        std::set<std::size_t> seen;
        Rng rng(7);
        for (std::size_t k = 0; k < tiny.grid_size(); ++k) {
            const HyperParams hp = suggest(history, tiny, rng);
            const std::size_t idx = tiny.index_of(hp);
            CHECK(seen.insert(idx).second);
            Trial t;
            t.number = k + 1;
            t.config = hp;
            t.ok = true;
            t.score = bowl_objective(tiny, hp, 99);
            history.push_back(t);
        }
        CHECK_THROWS_AS(suggest(history, tiny, rng), ConfigError);
    }
    SUBCASE("trial 4 suggestion equals the brute-force EI argmax") {
        std::vector<Trial> history;
        Rng seed_rng(11);
        for (std::size_t k = 0; k < 3; ++k) {
            Trial t;
            t.number = k + 1;
            t.config = space.config_at(space.grid_size() / (k + 2));
            t.score = bowl_objective(space, t.config, 5);
            t.ok = true;
            history.push_back(t);
        }
        Rng rng(13);
        const HyperParams got = suggest(history, space, rng);

        // independent exhaustive EI evaluation
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        std::set<std::size_t> tried;
        for (const Trial& t : history) {
            xs.push_back(space.encode_config(t.config));
            ys.push_back(t.score);
            tried.insert(space.index_of(t.config));
        }
        const double best = *std::max_element(ys.begin(), ys.end());
        double best_ei = -1;
        std::size_t best_idx = 0;
        for (std::size_t i = 0; i < space.grid_size(); ++i) {
            if (tried.count(i)) continue;
            const GpPosterior p = gp_posterior(xs, ys, space.encode_config(space.config_at(i)));
            const double ei = expected_improvement(p.mean, p.variance, best);
            if (ei > best_ei) {
                best_ei = ei;
                best_idx = i;
            }
        }
        CHECK(space.index_of(got) == best_idx);
    }
}

TEST_CASE("optimize") {
    const SearchSpace small = SearchSpace::for_architecture({Arch::Gru, Representation::BertFeatures});
    SUBCASE("grid smaller than the budget is searched exhaustively") {
        REQUIRE(small.grid_size() == 24);
        const OptimizeResult res = optimize(
            small, [&](const HyperParams& hp, std::uint64_t) { return bowl_objective(small, hp, 3); },
            30, 42);
        CHECK(res.trials.size() == 24);
        double global_best = -1e9;
        for (std::size_t i = 0; i < small.grid_size(); ++i) {
            global_best = std::max(global_best, bowl_objective(small, small.config_at(i), 3));
        }
        REQUIRE(res.best.has_value());
        CHECK(res.best->score == doctest::Approx(global_best));
    }
    SUBCASE("constant objective returns the constant") {
        const OptimizeResult res = optimize(
            small, [](const HyperParams&, std::uint64_t) { return 0.25; }, 5, 1);
        CHECK(res.trials.size() == 5);
        CHECK(res.best->score == 0.25);
    }
    SUBCASE("objective failure marks the trial failed and continues") {
        int calls = 0;
        const OptimizeResult res = optimize(
            small,
            [&](const HyperParams&, std::uint64_t) -> double {
                ++calls;
                if (calls == 2) throw NumericError("diverged");
                return 0.5;
            },
            4, 7);
        CHECK(res.trials.size() == 4);
        CHECK(!res.trials[1].ok);
        CHECK(res.trials[1].error == "diverged");
        CHECK(res.best->ok);
    }
    SUBCASE("ledger persists and resumes") {
        std::filesystem::create_directories("./hpo_test_tmp");
        const std::string ledger = "./hpo_test_tmp/trials.jsonl";
        std::filesystem::remove(ledger);
        const auto obj = [&](const HyperParams& hp, std::uint64_t) {
            return bowl_objective(small, hp, 9);
        };
        const OptimizeResult first = optimize(small, obj, 4, 77, ledger);
        CHECK(first.trials.size() == 4);
        const OptimizeResult resumed = optimize(small, obj, 10, 77, ledger);
        CHECK(resumed.trials.size() == 10);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(resumed.trials[i].number == first.trials[i].number);
            CHECK(resumed.trials[i].score == first.trials[i].score);
        }
        // trials 1..10 all distinct configs
        std::set<std::size_t> seen;
        for (const Trial& t : resumed.trials) CHECK(seen.insert(small.index_of(t.config)).second);
    }
}

TEST_CASE("bayesian optimization beats random search on smooth objectives") {
    const SearchSpace space = hybrid_space();
    double bo_sum = 0.0, rs_sum = 0.0;
    for (std::uint64_t fn = 0; fn < 30; ++fn) {
        const auto obj = [&](const HyperParams& hp, std::uint64_t) {
            return bowl_objective(space, hp, 1000 + fn);
        };
        const OptimizeResult bo = optimize(space, obj, 10, 500 + fn);
        REQUIRE(bo.best.has_value());
        bo_sum += bo.best->score;

        // 10-trial random search over distinct grid points
        Rng rng(900 + fn);
        std::set<std::size_t> picked;
        double best_rs = -1e9;
        while (picked.size() < 10) {
            const std::size_t idx = rng.below(space.grid_size());
            if (!picked.insert(idx).second) continue;
            best_rs = std::max(best_rs, obj(space.config_at(idx), 0));
        }
        rs_sum += best_rs;
    }
    MESSAGE("BO mean best ", bo_sum / 30.0, " vs RS mean best ", rs_sum / 30.0);
    CHECK(bo_sum / 30.0 >= rs_sum / 30.0);
}
