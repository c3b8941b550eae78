// Batch front end: preprocess -> features -> train/hpo -> eval -> tsne.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridsent/encoder.hpp"
#include "hybridsent/hpo.hpp"
#include "hybridsent/io.hpp"
#include "hybridsent/metrics.hpp"
#include "hybridsent/model.hpp"
#include "hybridsent/svg.hpp"
#include "hybridsent/text.hpp"
#include "hybridsent/train.hpp"
#include "hybridsent/tsne.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hybridsent;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("HYBRIDSENT_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ConfigError("HYBRIDSENT_SEED is not an integer: " + std::string(env));
        }
    }
    return 42;
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
}

// Every command drops its resolved configuration next to its outputs.
void write_runconfig(const std::string& out_dir, const json& resolved) {
    std::ofstream out(out_dir + "/runconfig.json", std::ios::trunc);
    if (!out) throw DataError("cannot write runconfig.json in " + out_dir);
    out << resolved.dump(2) << '\n';
}

json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw DataError(std::string("cannot open ") + what + ": " + path);
    json obj;
    try {
        in >> obj;
    } catch (const json::exception& e) {
        throw DataError("invalid JSON in " + path + ": " + e.what());
    }
    return obj;
}

HyperParams load_hyperparams(const std::string& path) {
    if (path.empty()) return HyperParams{};
    return hyperparams_from_json(load_json_file(path, "hyperparameter file").dump());
}

json hyperparams_json(const HyperParams& hp) { return json::parse(hyperparams_to_json(hp)); }

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

std::vector<ClassifierExample<float>> examples_from_cache(const FeatureCache& cache) {
    std::vector<ClassifierExample<float>> out;
    out.reserve(cache.records.size());
    const std::size_t L = cache.seq_len, H = cache.hidden;
    for (const FeatureRecord& rec : cache.records) {
        ClassifierExample<float> ex;
        ex.label = rec.label;
        ex.features = Tensorf({L, H}, rec.values);
        ex.mask.assign(L, 0);
        for (std::size_t i = 0; i < rec.mask_count && i < L; ++i) ex.mask[i] = 1;
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<ClassifierExample<float>> examples_from_jsonl(const std::string& data_path,
                                                          const std::string& vocab_path,
                                                          std::size_t max_len) {
    if (vocab_path.empty()) {
        throw ConfigError("--vocab is required when training from a JSONL dataset");
    }
    const Vocab vocab = Vocab::load(vocab_path);
    const auto raw = read_jsonl(data_path);
    std::vector<ClassifierExample<float>> out;
    out.reserve(raw.size());
    for (const RawExample& r : raw) {
        const TokenizedExample tok = encode_tokens(wordpiece_tokenize(r.text, vocab), vocab, max_len);
        ClassifierExample<float> ex;
        ex.label = r.label;
        ex.ids = tok.ids;
        ex.mask = tok.attention_mask;
        out.push_back(std::move(ex));
    }
    return out;
}

struct DatasetArgs {
    std::string features_path;
    std::string data_path;
    std::string vocab_path;
    std::size_t max_len = 128;
};

struct LoadedDataset {
    std::vector<ClassifierExample<float>> examples;
    Representation representation = Representation::BertFeatures;
    std::size_t input_dim = 0;   // feature width for the bert path
    std::size_t vocab_size = 0;  // for the embedding path
};

LoadedDataset load_dataset(const DatasetArgs& args, Representation rep) {
    LoadedDataset ds;
    ds.representation = rep;
    if (rep == Representation::BertFeatures) {
        if (args.features_path.empty()) {
            throw ConfigError("the bert representation needs --features <cache.bfc1>");
        }
        const FeatureCache cache = read_bfc1(args.features_path);
        ds.examples = examples_from_cache(cache);
        ds.input_dim = cache.hidden;
    } else {
        if (args.data_path.empty()) {
            throw ConfigError("the embedding representation needs --data <cleaned.jsonl>");
        }
        ds.examples = examples_from_jsonl(args.data_path, args.vocab_path, args.max_len);
        ds.vocab_size = Vocab::load(args.vocab_path).size();
    }
    return ds;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

int cmd_preprocess(const std::string& data, const std::string& slang_path, const std::string& out) {
    ensure_out_dir(out);
    const SlangDict slang = slang_path.empty() ? SlangDict{} : SlangDict::load(slang_path);
    const auto raw = read_jsonl(data);
    std::vector<RawExample> cleaned;
    cleaned.reserve(raw.size());
    std::size_t positive = 0, negative = 0;
    for (const RawExample& r : raw) {
        cleaned.push_back({clean_text(r.text, slang), r.label});
        (r.label == 1 ? positive : negative) += 1;
    }
    write_jsonl(out + "/cleaned.jsonl", cleaned);

    char summary[128];
    std::snprintf(summary, sizeof(summary), "positive %zu, negative %zu, total %zu", positive,
                  negative, positive + negative);
    std::ofstream sum(out + "/summary.txt", std::ios::trunc);
    sum << summary << '\n';
    std::cout << summary << '\n';

    write_runconfig(out, json{{"command", "preprocess"},
                              {"data", data},
                              {"slang", slang_path},
                              {"out", out},
                              {"positive", positive},
                              {"negative", negative},
                              {"total", positive + negative}});
    return 0;
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

int cmd_features(const std::string& data, const std::string& vocab_path,
                 const std::string& weights_path, const std::string& config_path,
                 const std::string& out, std::size_t max_len, int threads) {
    ensure_out_dir(out);
    const EncoderConfig cfg =
        config_path.empty() ? EncoderConfig::reference() : EncoderConfig::load(config_path);
    const Vocab vocab = Vocab::load(vocab_path);
    if (static_cast<int>(vocab.size()) != cfg.vocab_size) {
        throw DataError("vocab has " + std::to_string(vocab.size()) +
                        " tokens but the encoder config expects " + std::to_string(cfg.vocab_size));
    }
    const EncoderWeights<float> weights = bind_encoder_weights<float>(read_ntc1(weights_path), cfg);

    const auto raw = read_jsonl(data);
    std::vector<TokenizedExample> tokens;
    std::vector<int> labels;
    tokens.reserve(raw.size());
    for (const RawExample& r : raw) {
        tokens.push_back(encode_tokens(wordpiece_tokenize(r.text, vocab), vocab, max_len));
        labels.push_back(r.label);
    }
    const std::string cache_path = out + "/features.bfc1";
    extract_features(tokens, labels, weights, cfg, cache_path, threads,
                     [&](std::size_t done, std::size_t total) {
                         std::fprintf(stderr, "\rencoded %zu/%zu", done, total);
                         if (done == total) std::fprintf(stderr, "\n");
                     });
    std::cout << "wrote " << cache_path << " (" << raw.size() << " records, " << max_len << "x"
              << cfg.hidden << ")\n";

    write_runconfig(out, json{{"command", "features"},
                              {"data", data},
                              {"vocab", vocab_path},
                              {"weights", weights_path},
                              {"config", config_path},
                              {"max_len", max_len},
                              {"threads", threads},
                              {"out", out}});
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

json metrics_json(const RunMetrics& m) {
    return json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}};
}

int cmd_train(const DatasetArgs& data_args, const std::string& arch_name,
              const std::string& rep_name, const std::string& hp_path, const TrainConfig& cfg,
              const std::string& out, const std::string& export_representation) {
    ensure_out_dir(out);
    const ArchitectureSpec spec{arch_from_string(arch_name), representation_from_string(rep_name)};
    const HyperParams hp = load_hyperparams(hp_path);
    const LoadedDataset ds = load_dataset(data_args, spec.representation);
    if (ds.examples.empty()) throw DataError("training dataset is empty");

    const auto runs = run_repetitions(spec, hp, ds.examples, cfg, ds.input_dim, ds.vocab_size);

    std::vector<MetricTriple> triples;
    json run_meta = json::array();
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const std::string stem = out + "/run_" + std::to_string(r);
        write_ntc1(stem + ".ntc1", runs[r].model.to_tensors());
        write_history_csv(stem + "_history.csv", runs[r].history);
        const json meta{{"architecture", to_string(spec.kind)},
                        {"representation", to_string(spec.representation)},
                        {"hyperparams", hyperparams_json(hp)},
                        {"seed", runs[r].seed},
                        {"input_dim", ds.input_dim},
                        {"vocab_size", ds.vocab_size},
                        {"best_epoch", runs[r].history.best_epoch},
                        {"stop_epoch", runs[r].history.stop_epoch},
                        {"metrics", metrics_json(runs[r].test_metrics)}};
        std::ofstream meta_out(stem + ".meta.json", std::ios::trunc);
        meta_out << meta.dump(2) << '\n';
        run_meta.push_back(meta);
        triples.push_back({runs[r].test_metrics.accuracy, runs[r].test_metrics.precision,
                           runs[r].test_metrics.recall});
    }

    const MetricsReport report = aggregate_runs(triples);
    const json agg{{"accuracy", format_mean_std(report.accuracy)},
                   {"precision", format_mean_std(report.precision)},
                   {"recall", format_mean_std(report.recall)},
                   {"runs", report.runs}};
    std::ofstream metrics_out(out + "/metrics.json", std::ios::trunc);
    metrics_out << json{{"aggregate", agg}, {"runs", run_meta}}.dump(2) << '\n';
    std::cout << to_string(spec.representation) << " " << to_string(spec.kind) << ": accuracy "
              << format_mean_std(report.accuracy) << " over " << report.runs << " runs\n";

    if (!export_representation.empty()) {
        if (spec.representation != Representation::TrainableEmbedding) {
            throw ConfigError("--export-representation applies to the embedding path only");
        }
        // The first run's trained table defines the exported text representation.
        const auto& model = runs.front().model;
        const std::uint32_t L = static_cast<std::uint32_t>(ds.examples.front().mask.size());
        FeatureCacheWriter writer(export_representation,
                                  static_cast<std::uint32_t>(ds.examples.size()), L,
                                  static_cast<std::uint32_t>(hp.embedding_size));
        for (const auto& ex : ds.examples) {
            ModelCache<float> fwd_cache;
            model.forward(ex, &fwd_cache);  // fills the embedding representation
            FeatureRecord rec;
            rec.label = static_cast<std::uint8_t>(ex.label);
            rec.mask_count = 0;
            for (const auto m : ex.mask) rec.mask_count += m;
            rec.values = fwd_cache.input.storage();
            writer.append(rec);
        }
        writer.close();
        std::cout << "exported embedding representation to " << export_representation << '\n';
    }

    write_runconfig(out, json{{"command", "train"},
                              {"architecture", arch_name},
                              {"representation", rep_name},
                              {"hyperparams", hyperparams_json(hp)},
                              {"features", data_args.features_path},
                              {"data", data_args.data_path},
                              {"vocab", data_args.vocab_path},
                              {"epochs", cfg.epochs},
                              {"batch_size", cfg.batch_size},
                              {"learning_rate", cfg.learning_rate},
                              {"patience", cfg.patience},
                              {"val_fraction", cfg.val_fraction},
                              {"repetitions", cfg.repetitions},
                              {"seed", cfg.seed},
                              {"out", out}});
    return 0;
}

// ---------------------------------------------------------------------------
// hpo
// ---------------------------------------------------------------------------

int cmd_hpo(const DatasetArgs& data_args, const std::string& arch_name, const std::string& rep_name,
            int max_trials, const TrainConfig& cfg, bool strict_region_sizes,
            const std::string& objective_name, const std::string& out) {
    ensure_out_dir(out);
    const ArchitectureSpec spec{arch_from_string(arch_name), representation_from_string(rep_name)};
    const SearchSpace space = SearchSpace::for_architecture(spec, strict_region_sizes);
    const LoadedDataset ds = load_dataset(data_args, spec.representation);
    if (ds.examples.empty()) throw DataError("hpo dataset is empty");
    if (objective_name != "val-accuracy" && objective_name != "val-loss") {
        throw ConfigError("--objective must be val-accuracy or val-loss");
    }

    const bool use_loss = objective_name == "val-loss";
    // The HPO objective only ever sees the train portion of the split.
    const auto split = split_dataset(ds.examples, 0.8, cfg.seed);
    const auto& train_part = split.first;

    const Objective objective = [&](const HyperParams& hp, std::uint64_t seed) {
        auto model = ModelInstance<float>::build(spec, hp, ds.input_dim, seed, ds.vocab_size);
        TrainConfig trial_cfg = cfg;
        trial_cfg.seed = seed;
        const TrainHistory h = train(model, train_part, trial_cfg);
        const std::size_t best = static_cast<std::size_t>(h.best_epoch) - 1;
        // maximization: validation accuracy, or negated validation loss
        return use_loss ? -h.val_loss[best] : h.val_accuracy[best];
    };

    const OptimizeResult result =
        optimize(space, objective, max_trials, cfg.seed, out + "/trials.jsonl");
    if (!result.best) throw NumericError("no HPO trial completed successfully");

    const json best{{"config", hyperparams_json(result.best->config)},
                    {"score", result.best->score},
                    {"trial", result.best->number},
                    {"objective", objective_name}};
    std::ofstream best_out(out + "/best.json", std::ios::trunc);
    best_out << best.dump(2) << '\n';
    std::cout << "best trial " << result.best->number << " score " << result.best->score << '\n';

    write_runconfig(out, json{{"command", "hpo"},
                              {"architecture", arch_name},
                              {"representation", rep_name},
                              {"max_trials", max_trials},
                              {"objective", objective_name},
                              {"strict_region_sizes", strict_region_sizes},
                              {"features", data_args.features_path},
                              {"data", data_args.data_path},
                              {"vocab", data_args.vocab_path},
                              {"epochs", cfg.epochs},
                              {"batch_size", cfg.batch_size},
                              {"learning_rate", cfg.learning_rate},
                              {"patience", cfg.patience},
                              {"seed", cfg.seed},
                              {"out", out}});
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

bool is_bfc1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    return in.gcount() == 4 && std::string(magic, 4) == "BFC1";
}

int cmd_eval(const std::vector<std::string>& checkpoint_dirs, const std::string& test_path,
             const std::string& vocab_path, const std::string& out, bool decimal_comma,
             bool macro) {
    ensure_out_dir(out);

    // Test artifacts: a BFC1 cache (bert path) or a JSONL dataset (embedding).
    std::vector<ClassifierExample<float>> bert_test, emb_test;
    if (is_bfc1(test_path)) {
        bert_test = examples_from_cache(read_bfc1(test_path));
    } else {
        emb_test = examples_from_jsonl(test_path, vocab_path, 128);
    }

    std::map<std::pair<std::string, std::string>, std::vector<MetricTriple>> collected;
    for (const std::string& dir : checkpoint_dirs) {
        if (!fs::is_directory(dir)) throw DataError("not a checkpoint directory: " + dir);
        std::vector<std::string> metas;
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string path = entry.path().string();
            if (path.size() >= 10 && path.substr(path.size() - 10) == ".meta.json") {
                metas.push_back(path);
            }
        }
        std::sort(metas.begin(), metas.end());
        for (const std::string& path : metas) {
            const json meta = load_json_file(path, "checkpoint sidecar");
            const ArchitectureSpec spec{
                arch_from_string(meta.at("architecture").get<std::string>()),
                representation_from_string(meta.at("representation").get<std::string>())};
            const HyperParams hp = hyperparams_from_json(meta.at("hyperparams").dump());
            const std::string weights = path.substr(0, path.size() - 10) + ".ntc1";
            auto model = ModelInstance<float>::build(
                spec, hp, meta.value("input_dim", std::size_t{0}),
                meta.value("seed", std::uint64_t{1}), meta.value("vocab_size", std::size_t{0}));
            model.load_tensors(read_ntc1(weights));

            const auto& test_set =
                spec.representation == Representation::BertFeatures ? bert_test : emb_test;
            if (test_set.empty()) {
                throw DataError("no test artifacts compatible with " +
                                to_string(spec.representation) + " checkpoints (got " + test_path +
                                ")");
            }
            std::vector<int> preds, labels;
            for (const auto& ex : test_set) {
                preds.push_back(model.predict(ex));
                labels.push_back(ex.label);
            }
            const MetricTriple t = metrics(confusion(preds, labels), macro);
            collected[{to_string(spec.representation), to_string(spec.kind)}].push_back(t);
        }
    }
    if (collected.empty()) throw DataError("no checkpoints found in the given directories");

    ReportGrid grid;
    for (const auto& [key, runs] : collected) grid[key] = aggregate_runs(runs);
    const std::string text = render_table_text(grid, decimal_comma);
    const std::string csv = render_table_csv(grid, decimal_comma);
    std::ofstream(out + "/report.txt", std::ios::trunc) << text;
    std::ofstream(out + "/report.csv", std::ios::trunc) << csv;
    std::cout << text;

    json dirs_json = json::array();
    for (const auto& d : checkpoint_dirs) dirs_json.push_back(d);
    write_runconfig(out, json{{"command", "eval"},
                              {"checkpoints", dirs_json},
                              {"test", test_path},
                              {"vocab", vocab_path},
                              {"decimal_comma", decimal_comma},
                              {"macro", macro},
                              {"out", out}});
    return 0;
}

// ---------------------------------------------------------------------------
// tsne
// ---------------------------------------------------------------------------

Tensord pooled_points(const FeatureCache& cache, const std::string& pool, std::size_t max_points,
                      std::vector<int>& labels) {
    const std::size_t n = std::min<std::size_t>(cache.records.size(), max_points);
    const std::size_t L = cache.seq_len, H = cache.hidden;
    Tensord points({std::max<std::size_t>(n, 1), H});
    labels.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const FeatureRecord& rec = cache.records[i];
        labels.push_back(rec.label);
        if (pool == "cls") {
            for (std::size_t j = 0; j < H; ++j) points(i, j) = rec.values[j];
        } else {
            const std::size_t rows = std::max<std::uint32_t>(rec.mask_count, 1);
            for (std::size_t t = 0; t < rows && t < L; ++t) {
                for (std::size_t j = 0; j < H; ++j) points(i, j) += rec.values[t * H + j];
            }
            for (std::size_t j = 0; j < H; ++j) points(i, j) /= static_cast<double>(rows);
        }
    }
    return points;
}

int cmd_tsne(const std::vector<std::string>& feature_paths, double perplexity, int iterations,
             std::uint64_t seed, const std::string& pool, std::size_t max_points,
             const std::string& out) {
    ensure_out_dir(out);
    if (pool != "mean" && pool != "cls") throw ConfigError("--pool must be mean or cls");
    json outputs = json::array();
    for (const std::string& path : feature_paths) {
        const FeatureCache cache = read_bfc1(path);
        if (cache.records.empty()) throw DataError("feature cache is empty: " + path);
        std::vector<int> labels;
        const Tensord points = pooled_points(cache, pool, max_points, labels);
        TsneOptions opts;
        opts.perplexity = perplexity;
        opts.iterations = iterations;
        opts.seed = seed;
        const TsneResult res = tsne(points, opts);
        const std::string svg_path = out + "/tsne_" + fs::path(path).stem().string() + ".svg";
        emit_plot(res.coords, labels, svg_path);
        std::cout << svg_path << ": KL " << res.initial_kl << " -> " << res.final_kl << '\n';
        outputs.push_back(svg_path);
    }
    json inputs = json::array();
    for (const auto& p : feature_paths) inputs.push_back(p);
    write_runconfig(out, json{{"command", "tsne"},
                              {"features", inputs},
                              {"perplexity", perplexity},
                              {"iterations", iterations},
                              {"seed", seed},
                              {"pool", pool},
                              {"max_points", max_points},
                              {"outputs", outputs},
                              {"out", out}});
    return 0;
}

// Fills option values from a JSON config file for flags not set on the CLI.
template <typename T>
void fill_from_config(const json& cfg, const CLI::Option* opt, const char* key, T& value) {
    if (opt && opt->count() > 0) return;  // CLI flags override file values
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"from-scratch sentiment classification toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; CLI flags override its values");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "clean a JSONL dataset and summarize its labels");
    std::string pre_data, pre_slang, pre_out;
    pre->add_option("--data", pre_data, "raw JSONL dataset")->required();
    pre->add_option("--slang", pre_slang, "slang dictionary TSV");
    pre->add_option("--out", pre_out, "output directory")->required();

    // features
    auto* feat = app.add_subcommand("features", "extract frozen encoder features into a BFC1 cache");
    std::string feat_data, feat_vocab, feat_weights, feat_config, feat_out;
    std::size_t feat_maxlen = 128;
    int feat_threads = 1;
    feat->add_option("--data", feat_data, "cleaned JSONL dataset")->required();
    feat->add_option("--vocab", feat_vocab, "wordpiece vocab, one token per line")->required();
    feat->add_option("--weights", feat_weights, "encoder weights (NTC1)")->required();
    feat->add_option("--encoder-config", feat_config, "encoder config JSON (default: reference)");
    feat->add_option("--max-len", feat_maxlen, "sequence length (default 128)");
    feat->add_option("--threads", feat_threads, "worker threads for extraction");
    feat->add_option("--out", feat_out, "output directory")->required();

    // shared train/hpo options
    const auto add_dataset_options = [](CLI::App* cmd, DatasetArgs& args) {
        cmd->add_option("--features", args.features_path, "BFC1 feature cache (bert path)");
        cmd->add_option("--data", args.data_path, "cleaned JSONL dataset (embedding path)");
        cmd->add_option("--vocab", args.vocab_path, "vocab file (embedding path)");
        cmd->add_option("--max-len", args.max_len, "sequence length (default 128)");
    };
    struct TrainFlags {
        TrainConfig cfg;
        CLI::Option *epochs = nullptr, *batch = nullptr, *lr = nullptr, *patience = nullptr,
                    *valfrac = nullptr, *reps = nullptr, *seed = nullptr;
    };
    const auto add_train_options = [](CLI::App* cmd, TrainFlags& f) {
        f.epochs = cmd->add_option("--epochs", f.cfg.epochs, "training epochs (default 50)");
        f.batch = cmd->add_option("--batch-size", f.cfg.batch_size, "mini-batch size (default 32)");
        f.lr = cmd->add_option("--lr", f.cfg.learning_rate, "Adam learning rate (default 1e-3)");
        f.patience =
            cmd->add_option("--patience", f.cfg.patience, "early-stopping patience (default 5)");
        f.valfrac = cmd->add_option("--val-fraction", f.cfg.val_fraction,
                                    "validation share of the train portion (default 0.1)");
        f.seed = cmd->add_option("--seed", f.cfg.seed, "base seed (default HYBRIDSENT_SEED or 42)");
    };

    // train
    auto* tr = app.add_subcommand("train", "train one architecture with repeated runs");
    DatasetArgs tr_data;
    TrainFlags tr_flags;
    std::string tr_arch, tr_rep = "bert", tr_hp, tr_out, tr_export;
    add_dataset_options(tr, tr_data);
    tr->add_option("--arch", tr_arch, "CNN-LSTM|LSTM-CNN|CNN-GRU|GRU-CNN|CNN|LSTM|GRU")->required();
    tr->add_option("--rep", tr_rep, "bert|embedding (default bert)");
    tr->add_option("--hp", tr_hp, "hyperparameter JSON file");
    add_train_options(tr, tr_flags);
    tr_flags.reps = tr->add_option("--reps", tr_flags.cfg.repetitions, "repetitions (default 5)");
    tr->add_option("--export-representation", tr_export,
                   "write the trained embedding representation as a BFC1 cache");
    tr->add_option("--out", tr_out, "output directory")->required();

    // hpo
    auto* hp = app.add_subcommand("hpo", "Bayesian hyperparameter search over the candidate grid");
    DatasetArgs hp_data;
    TrainFlags hp_flags;
    std::string hp_arch, hp_rep = "bert", hp_out, hp_objective = "val-accuracy";
    int hp_max_trials = kDefaultMaxTrials;
    bool hp_strict = false;
    add_dataset_options(hp, hp_data);
    hp->add_option("--arch", hp_arch, "architecture name")->required();
    hp->add_option("--rep", hp_rep, "bert|embedding (default bert)");
    hp->add_option("--max-trials", hp_max_trials, "trial budget (default 10)");
    hp->add_option("--objective", hp_objective, "val-accuracy|val-loss (default val-accuracy)");
    hp->add_flag("--strict-region-sizes", hp_strict,
                 "use the verbatim published region-size candidates {5,4,5} (deduplicated)");
    add_train_options(hp, hp_flags);
    hp->add_option("--out", hp_out, "output directory")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate checkpoints and render the report tables");
    std::vector<std::string> ev_dirs;
    std::string ev_test, ev_vocab, ev_out;
    bool ev_comma = false, ev_macro = false;
    ev->add_option("--checkpoints", ev_dirs, "one or more train output directories")->required();
    ev->add_option("--test", ev_test, "test artifacts: BFC1 cache or JSONL dataset")->required();
    ev->add_option("--vocab", ev_vocab, "vocab file (JSONL test sets)");
    ev->add_flag("--decimal-comma", ev_comma, "render the tables with decimal commas");
    ev->add_flag("--macro", ev_macro, "macro-average precision/recall over both classes");
    ev->add_option("--out", ev_out, "output directory")->required();

    // tsne
    auto* ts = app.add_subcommand("tsne", "t-SNE diagnostics of text representations");
    std::vector<std::string> ts_features;
    std::string ts_out, ts_pool = "mean";
    double ts_perplexity = 30.0;
    int ts_iterations = 1000;
    std::uint64_t ts_seed = 0;
    std::size_t ts_max_points = 2000;
    ts->add_option("--features", ts_features, "one or two BFC1 caches (bert / embedding)")
        ->required();
    ts->add_option("--perplexity", ts_perplexity, "perplexity (default 30)");
    ts->add_option("--iterations", ts_iterations, "gradient iterations (default 1000)");
    auto* ts_seed_opt = ts->add_option("--seed", ts_seed, "map seed");
    ts->add_option("--pool", ts_pool, "per-text pooling: mean|cls (default mean)");
    ts->add_option("--max-points", ts_max_points, "cap on points per cache (default 2000)");
    ts->add_option("--out", ts_out, "output directory")->required();

    try {
        app.parse(argc, argv);

        json file_cfg;
        if (!config_path.empty()) file_cfg = load_json_file(config_path, "config file");

        const auto resolve_train = [&](TrainFlags& f) {
            fill_from_config(file_cfg, f.epochs, "epochs", f.cfg.epochs);
            fill_from_config(file_cfg, f.batch, "batch_size", f.cfg.batch_size);
            fill_from_config(file_cfg, f.lr, "learning_rate", f.cfg.learning_rate);
            fill_from_config(file_cfg, f.patience, "patience", f.cfg.patience);
            fill_from_config(file_cfg, f.valfrac, "val_fraction", f.cfg.val_fraction);
            if (f.reps) fill_from_config(file_cfg, f.reps, "repetitions", f.cfg.repetitions);
            if (f.seed && f.seed->count() == 0) {
                if (file_cfg.contains("seed")) {
                    f.cfg.seed = file_cfg.at("seed").get<std::uint64_t>();
                } else {
                    f.cfg.seed = default_seed();
                }
            }
        };

        if (pre->parsed()) return cmd_preprocess(pre_data, pre_slang, pre_out);
        if (feat->parsed()) {
            return cmd_features(feat_data, feat_vocab, feat_weights, feat_config, feat_out,
                                feat_maxlen, feat_threads);
        }
        if (tr->parsed()) {
            resolve_train(tr_flags);
            return cmd_train(tr_data, tr_arch, tr_rep, tr_hp, tr_flags.cfg, tr_out, tr_export);
        }
        if (hp->parsed()) {
            resolve_train(hp_flags);
            return cmd_hpo(hp_data, hp_arch, hp_rep, hp_max_trials, hp_flags.cfg, hp_strict,
                           hp_objective, hp_out);
        }
        if (ev->parsed()) return cmd_eval(ev_dirs, ev_test, ev_vocab, ev_out, ev_comma, ev_macro);
        if (ts->parsed()) {
            if (ts_seed_opt->count() == 0) ts_seed = default_seed();
            return cmd_tsne(ts_features, ts_perplexity, ts_iterations, ts_seed, ts_pool,
                            ts_max_points, ts_out);
        }
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
