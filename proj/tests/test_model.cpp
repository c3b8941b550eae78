#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include "hybridsent/hpo.hpp"
#include "hybridsent/model.hpp"
#include "hybridsent/rng.hpp"
#include "testutil.hpp"

using namespace hybridsent;

TEST_CASE("architecture names round trip") {
    for (const Arch a : kArchOrder) CHECK(arch_from_string(to_string(a)) == a);
    CHECK_THROWS_AS(arch_from_string("RNN"), ConfigError);
    CHECK(representation_from_string("bert") == Representation::BertFeatures);
    CHECK(representation_from_string("embedding") == Representation::TrainableEmbedding);
}

TEST_CASE("wiring laws") {
    Rng rng(1);
    HyperParams hp;
    hp.num_filters = 5;
    hp.region_size = 3;
    hp.rnn_units = 4;

    SUBCASE("CNN-GRU runs conv, local pool, gru, dense") {
        ArchitectureSpec spec{Arch::CnnGru, Representation::BertFeatures};
        auto m = ModelInstance<double>::build(spec, hp, 6, 7);
        auto ex = testutil::random_example(10, 6, 1, rng);
        ModelCache<double> cache;
        const Tensord logits = m.forward(ex, &cache);
        CHECK(logits.size() == 2);
        // conv output 10-3+1=8 rows, pooled to 4, gru consumes all 4 steps
        CHECK(cache.conv.pre.shape() == std::vector<std::size_t>{8, 5});
        CHECK(cache.pool.in_rows == 8);
        CHECK(cache.rnn.steps == 4);
        CHECK(cache.rnn.gru_steps.size() == 4);
        CHECK(cache.rnn.lstm_steps.empty());
        CHECK(cache.rnn.last_index == 3);
    }
    SUBCASE("LSTM-CNN pool width and dense input equal num_filters") {
        ArchitectureSpec spec{Arch::LstmCnn, Representation::BertFeatures};
        auto m = ModelInstance<double>::build(spec, hp, 6, 7);
        auto ex = testutil::random_example(10, 6, 0, rng);
        ModelCache<double> cache;
        m.forward(ex, &cache);
        CHECK(cache.rnn.return_sequence);
        CHECK(cache.conv.pre.dim(1) == 5);       // filters
        CHECK(cache.pool.argmax.size() == 5);    // global pool, one max per filter
        CHECK(cache.dense.x.size() == 5);        // dense in-dim = num_filters
    }
    SUBCASE("same seed, same spec: bit-identical parameters") {
        ArchitectureSpec spec{Arch::CnnLstm, Representation::TrainableEmbedding};
        auto a = ModelInstance<float>::build(spec, hp, 0, 99, 11);
        auto b = ModelInstance<float>::build(spec, hp, 0, 99, 11);
        const auto pa = a.parameters();
        const auto pb = b.parameters();
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            REQUIRE(pa[i]->value.size() == pb[i]->value.size());
            for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
                CHECK(pa[i]->value[j] == pb[i]->value[j]);
            }
        }
    }
}

TEST_CASE("forward basics") {
    Rng rng(2);
    HyperParams hp;
    hp.num_filters = 3;
    hp.region_size = 2;
    hp.rnn_units = 3;
    SUBCASE("zero dense weights: logits equal bias, tie predicts class 0") {
        ArchitectureSpec spec{Arch::Cnn, Representation::BertFeatures};
        auto m = ModelInstance<double>::build(spec, hp, 4, 3);
        for (Param<double>* p : m.parameters()) {
            if (p == m.parameters().back() || p->value.rank() == 2) continue;
        }
        // zero out the dense layer explicitly
        auto params = m.parameters();
        params[params.size() - 2]->value.fill(0.0);  // dense.weight
        params[params.size() - 1]->value.fill(0.0);  // dense.bias
        auto ex = testutil::random_example(6, 4, 1, rng);
        const Tensord logits = m.forward(ex);
        CHECK(logits[0] == 0.0);
        CHECK(logits[1] == 0.0);
        CHECK(m.predict(ex) == 0);
    }
    SUBCASE("batch of one equals the single-example path") {
        ArchitectureSpec spec{Arch::LstmCnn, Representation::BertFeatures};
        auto m = ModelInstance<double>::build(spec, hp, 4, 3);
        auto ex = testutil::random_example(7, 4, 1, rng);
        const Tensord single = m.forward(ex);
        const Tensord batch = m.forward_batch({ex});
        CHECK(batch.shape() == std::vector<std::size_t>{1, 2});
        CHECK(batch(0, 0) == single[0]);
        CHECK(batch(0, 1) == single[1]);
    }
    SUBCASE("config error when conv output is shorter than the pool window") {
        ArchitectureSpec spec{Arch::CnnLstm, Representation::BertFeatures};
        HyperParams tight = hp;
        tight.region_size = 4;
        auto m = ModelInstance<double>::build(spec, tight, 4, 3);
        auto ex = testutil::random_example(4, 4, 0, rng);  // conv out length 1 < window 2
        CHECK_THROWS_AS(m.forward(ex), ConfigError);
    }
    SUBCASE("feature dim mismatch") {
        ArchitectureSpec spec{Arch::Gru, Representation::BertFeatures};
        auto m = ModelInstance<double>::build(spec, hp, 4, 3);
        auto ex = testutil::random_example(6, 5, 0, rng);
        CHECK_THROWS_AS(m.forward(ex), DimensionError);
    }
}

TEST_CASE("l2 penalty") {
    Rng rng(3);
    HyperParams hp;
    hp.num_filters = 1;
    hp.region_size = 2;
    hp.cnn_l2 = 0.01;
    hp.dense_l2 = 0.0;
    SUBCASE("all weights zero gives zero") {
        ArchitectureSpec spec{Arch::Cnn, Representation::BertFeatures};
        auto m = ModelInstance<double>::build(spec, hp, 2, 5);
        for (Param<double>* p : m.parameters()) p->value.fill(0.0);
        CHECK(m.l2_penalty() == 0.0);
    }
    SUBCASE("hand case: 2x2 conv filter of ones at cnn_l2=0.01") {
        ArchitectureSpec spec{Arch::Cnn, Representation::BertFeatures};
        auto m = ModelInstance<double>::build(spec, hp, 2, 5);
        for (Param<double>* p : m.parameters()) p->value.fill(0.0);
        m.parameters()[0]->value.fill(1.0);  // conv weight [1,2,2]
        CHECK(m.l2_penalty() == doctest::Approx(0.04));
    }
    SUBCASE("doubling cnn_l2 doubles the conv contribution exactly") {
        ArchitectureSpec spec{Arch::CnnGru, Representation::BertFeatures};
        HyperParams a = hp;
        a.rnn_units = 3;
        a.kernel_l2 = 0.0;
        a.recurrent_l2 = 0.0;
        a.dense_l2 = 0.0;
        auto m = ModelInstance<double>::build(spec, a, 4, 5);
        const double base = m.l2_penalty();
        HyperParams b = a;
        b.cnn_l2 = 2 * a.cnn_l2;
        auto m2 = ModelInstance<double>::build(spec, b, 4, 5);
        CHECK(m2.l2_penalty() == doctest::Approx(2 * base).epsilon(1e-12));
    }
}

TEST_CASE("bert path never touches encoder weights during training") {
    // Training consumes cached features; the encoder weight file is outside
    // the classifier parameter set, so its bytes must stay put.
    Rng rng(4);
    ArchitectureSpec spec{Arch::Lstm, Representation::BertFeatures};
    HyperParams hp;
    hp.rnn_units = 3;
    auto m = ModelInstance<double>::build(spec, hp, 4, 11);
    const auto names = m.parameter_names();
    for (const std::string& n : names) CHECK(n.rfind("encoder", 0) != 0);
    // gradient w.r.t. the input features is still produced for backprop
    auto ex = testutil::random_example(5, 4, 1, rng);
    ModelCache<double> cache;
    m.forward(ex, &cache);
    Tensord dlogits({2}, {0.3, -0.3});
    m.backward(cache, dlogits);  // must not throw
}

TEST_CASE("checkpoint tensors round trip") {
    Rng rng(5);
    ArchitectureSpec spec{Arch::GruCnn, Representation::TrainableEmbedding};
    HyperParams hp;
    hp.num_filters = 3;
    hp.region_size = 2;
    hp.rnn_units = 3;
    hp.embedding_size = 4;
    auto m = ModelInstance<float>::build(spec, hp, 0, 21, 13);
    const auto tensors = m.to_tensors();
    auto m2 = ModelInstance<float>::build(spec, hp, 0, 22, 13);  // different init
    m2.load_tensors(tensors);
    auto ex = testutil::random_example(6, 4, 1, rng, true, 13);
    ClassifierExample<float> exf;
    exf.ids = ex.ids;
    exf.mask = ex.mask;
    exf.label = ex.label;
    const Tensorf la = m.forward(exf);
    const Tensorf lb = m2.forward(exf);
    CHECK(la[0] == lb[0]);
    CHECK(la[1] == lb[1]);

    SUBCASE("missing tensor is named") {
        std::vector<NamedTensor> partial(tensors.begin() + 1, tensors.end());
        CHECK_THROWS_WITH_AS(m2.load_tensors(partial), doctest::Contains("embedding.table"),
                             DataError);
    }
}

TEST_CASE("shape chain: every architecture x full hyperparameter grid") {
    // Every Table-derived candidate combination must build and produce finite
    // [B,2] logits on a random batch for both representations.
    std::atomic<std::size_t> built{0};
    std::atomic<bool> failed{false};
    std::vector<std::pair<ArchitectureSpec, std::size_t>> work;
    for (const Arch a : kArchOrder) {
        for (const Representation rep :
             {Representation::BertFeatures, Representation::TrainableEmbedding}) {
            const ArchitectureSpec spec{a, rep};
            const SearchSpace space = SearchSpace::for_architecture(spec);
            for (std::size_t i = 0; i < space.grid_size(); ++i) work.push_back({spec, i});
        }
    }
    const unsigned workers = std::max(2u, std::thread::hardware_concurrency());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&]() {
            const std::size_t T = 12, d = 12, vocab = 17;
            while (true) {
                const std::size_t k = next.fetch_add(1);
                if (k >= work.size() || failed.load()) return;
                const auto& [spec, idx] = work[k];
                const SearchSpace space = SearchSpace::for_architecture(spec);
                const HyperParams hp = space.config_at(idx);
                try {
                    Rng rng(1000 + k);
                    const bool emb = spec.representation == Representation::TrainableEmbedding;
                    auto m = ModelInstance<float>::build(spec, hp, d, 77, emb ? vocab : 0);
                    std::vector<ClassifierExample<float>> batch;
                    for (int b = 0; b < 2; ++b) {
                        auto exd = testutil::random_example(T, d, b % 2, rng, emb, vocab);
                        ClassifierExample<float> ex;
                        ex.ids = exd.ids;
                        ex.mask = exd.mask;
                        ex.label = exd.label;
                        if (!emb) {
                            ex.features = Tensorf({T, d});
                            for (std::size_t i = 0; i < ex.features.size(); ++i) {
                                ex.features[i] = static_cast<float>(exd.features[i]);
                            }
                        }
                        batch.push_back(std::move(ex));
                    }
                    const Tensorf logits = m.forward_batch(batch);
                    if (logits.shape() != std::vector<std::size_t>{2, 2} || !logits.all_finite()) {
                        failed.store(true);
                        return;
                    }
                    built.fetch_add(1);
                } catch (...) {
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    CHECK(!failed.load());
    CHECK(built.load() == work.size());
    MESSAGE("validated ", built.load(), " build+forward combinations");
}
