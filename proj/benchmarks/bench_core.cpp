#include <benchmark/benchmark.h>

#include "hybridsent/encoder.hpp"
#include "hybridsent/layers.hpp"
#include "hybridsent/model.hpp"
#include "hybridsent/rng.hpp"
#include "hybridsent/tensor.hpp"
#include "hybridsent/tsne.hpp"

using namespace hybridsent;

namespace {

Tensorf random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Tensorf t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-1, 1));
    return t;
}

void BM_matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const Tensorf a = random_matrix(n, n, 1);
    const Tensorf b = random_matrix(n, n, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_conv1d_forward(benchmark::State& state) {
    Rng rng(3);
    Conv1dParams<float> p(200, 4, 768, rng);
    const Tensorf x = random_matrix(128, 768, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv1d_forward(x, p, Activation::Relu));
    }
}
BENCHMARK(BM_conv1d_forward);

void BM_lstm_forward_backward(benchmark::State& state) {
    Rng rng(5);
    LstmParams<float> p(100, 768, rng);
    const Tensorf x = random_matrix(128, 768, 6);
    const std::vector<std::uint8_t> mask(128, 1);
    const Tensorf upstream = random_matrix(128, 100, 7);
    for (auto _ : state) {
        RnnCache<float> cache;
        benchmark::DoNotOptimize(rnn_forward(x, mask, p, true, &cache));
        benchmark::DoNotOptimize(rnn_backward(p, cache, upstream));
    }
}
BENCHMARK(BM_lstm_forward_backward);

void BM_encoder_layer(benchmark::State& state) {
    EncoderConfig cfg;
    cfg.num_layers = 1;
    cfg.hidden = 256;
    cfg.num_heads = 4;
    cfg.intermediate = 1024;
    cfg.vocab_size = 1000;
    cfg.max_positions = 128;
    const EncoderWeights<float> w = random_encoder_weights(cfg, 8);
    const Tensorf x = random_matrix(128, 256, 9);
    const std::vector<std::uint8_t> mask(128, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(encoder_layer(x, mask, w.layers[0], cfg));
    }
}
BENCHMARK(BM_encoder_layer);

void BM_tsne_n200(benchmark::State& state) {
    Rng rng(10);
    Tensord x({200, 16});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    for (auto _ : state) {
        TsneOptions opts;
        opts.perplexity = 20;
        opts.iterations = 50;
        opts.seed = 1;
        benchmark::DoNotOptimize(tsne(x, opts));
    }
}
BENCHMARK(BM_tsne_n200);

}  // namespace

BENCHMARK_MAIN();
