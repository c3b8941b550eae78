#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <limits>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hybridsent/encoder.hpp"
#include "hybridsent/io.hpp"
#include "hybridsent/rng.hpp"

using namespace hybridsent;
namespace fs = std::filesystem;

namespace {

const std::string kCli = HYBRIDSENT_CLI_PATH;
const std::string kDir = "./cli_test_tmp";

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >" + kDir + "/last_stdout.txt 2>" + kDir +
                            "/last_stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct Fixture {
    std::string vocab_path = kDir + "/vocab.txt";
    std::string slang_path = kDir + "/slang.tsv";
    std::string raw_path = kDir + "/raw.jsonl";
    std::string weights_path = kDir + "/encoder.ntc1";
    std::string config_path = kDir + "/encoder.json";

    Fixture() {
        fs::remove_all(kDir);
        fs::create_directories(kDir);
        {
            std::ofstream v(vocab_path);
            v << "[PAD]\n[UNK]\n[CLS]\n[SEP]\n";
            for (const char* w : {"bagus", "sekali", "jelek", "kecewa", "suka", "tidak", "barang",
                                  "cepat", "lambat", "mantap", "##nya", "produk"}) {
                v << w << '\n';
            }
        }
        {
            std::ofstream s(slang_path);
            s << "bgs\tbagus\ngk\ttidak\n";
        }
        {
            std::ofstream d(raw_path);
            Rng rng(5);
            const char* pos[] = {"Bagus sekali!", "suka bgs banget 👍", "barang mantap cepat",
                                 "produk bagus suka", "mantap sekali produknya"};
            const char* neg[] = {"Jelek, kecewa berat...", "gk suka, lambat", "barang jelek kecewa",
                                 "lambat sekali jelek", "kecewa produk jelek"};
            for (int i = 0; i < 48; ++i) {
                const int label = i % 2;
                const char* text = label ? pos[i % 5] : neg[i % 5];
                d << R"({"text": ")" << text << R"(", "label": )" << label << "}\n";
            }
        }
        EncoderConfig cfg;
        cfg.num_layers = 2;
        cfg.hidden = 8;
        cfg.num_heads = 2;
        cfg.intermediate = 16;
        cfg.vocab_size = 16;
        cfg.max_positions = 32;
        write_ntc1(weights_path, encoder_weights_to_tensors(random_encoder_weights(cfg, 7)));
        std::ofstream c(config_path);
        c << R"({"num_layers":2,"hidden":8,"num_heads":2,"intermediate":16,)"
          << R"("vocab_size":16,"max_positions":32,"type_vocab":2,"ln_eps":1e-12})" << '\n';
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("preprocess cleans, summarizes, errors on bad lines") {
    const Fixture& f = fixture();
    SUBCASE("happy path") {
        REQUIRE(run("preprocess --data " + f.raw_path + " --slang " + f.slang_path + " --out " +
                    kDir + "/pre") == 0);
        const std::string summary = slurp(kDir + "/pre/summary.txt");
        CHECK(summary == "positive 24, negative 24, total 48\n");
        CHECK(fs::exists(kDir + "/pre/cleaned.jsonl"));
        CHECK(fs::exists(kDir + "/pre/runconfig.json"));
        const auto cleaned = read_jsonl(kDir + "/pre/cleaned.jsonl");
        REQUIRE(cleaned.size() == 48);
        CHECK(cleaned[5].text == "bagus sekali");  // lowercased, punctuation stripped
        CHECK(cleaned[6].text.find("tidak") != std::string::npos);  // slang expanded
    }
    SUBCASE("empty input") {
        std::ofstream(kDir + "/empty.jsonl");
        REQUIRE(run("preprocess --data " + kDir + "/empty.jsonl --out " + kDir + "/pre_empty") == 0);
        CHECK(slurp(kDir + "/pre_empty/summary.txt") == "positive 0, negative 0, total 0\n");
    }
    SUBCASE("line without label fails with the data exit code") {
        std::ofstream bad(kDir + "/bad.jsonl");
        bad << R"({"text":"ok","label":1})" << "\n" << R"({"text":"no label"})" << "\n";
        bad.close();
        CHECK(run("preprocess --data " + kDir + "/bad.jsonl --out " + kDir + "/pre_bad") == 3);
        const std::string err = slurp(kDir + "/last_stderr.txt");
        CHECK(err.find(":2:") != std::string::npos);
    }
    SUBCASE("usage errors exit 2") {
        CHECK(run("preprocess --out nowhere") == 2);
        CHECK(run("unknown-subcommand") == 2);
    }
}

TEST_CASE("features extraction is reproducible and shape-correct") {
    const Fixture& f = fixture();
    REQUIRE(run("preprocess --data " + f.raw_path + " --slang " + f.slang_path + " --out " + kDir +
                "/pre") == 0);
    const std::string base = "features --data " + kDir + "/pre/cleaned.jsonl --vocab " +
                             f.vocab_path + " --weights " + f.weights_path + " --encoder-config " +
                             f.config_path + " --max-len 16";
    REQUIRE(run(base + " --out " + kDir + "/feat_a") == 0);
    REQUIRE(run(base + " --out " + kDir + "/feat_b --threads 3") == 0);
    const FeatureCache cache = read_bfc1(kDir + "/feat_a/features.bfc1");
    CHECK(cache.records.size() == 48);
    CHECK(cache.seq_len == 16);
    CHECK(cache.hidden == 8);
    // rerun (and a threaded run) produce byte-identical caches
    CHECK(slurp(kDir + "/feat_a/features.bfc1") == slurp(kDir + "/feat_b/features.bfc1"));

    SUBCASE("vocab/config mismatch is a data error") {
        CHECK(run("features --data " + kDir + "/pre/cleaned.jsonl --vocab " + f.vocab_path +
                  " --weights " + f.weights_path + " --out " + kDir + "/feat_bad") == 3);
    }
}

TEST_CASE("train, eval, tsne pipeline") {
    const Fixture& f = fixture();
    REQUIRE(run("preprocess --data " + f.raw_path + " --slang " + f.slang_path + " --out " + kDir +
                "/pre") == 0);
    REQUIRE(run("features --data " + kDir + "/pre/cleaned.jsonl --vocab " + f.vocab_path +
                " --weights " + f.weights_path + " --encoder-config " + f.config_path +
                " --max-len 16 --out " + kDir + "/feat") == 0);

    std::ofstream hp(kDir + "/hp.json");
    hp << R"({"num_filters":4,"region_size":3,"rnn_units":4,"embedding_size":8})" << '\n';
    hp.close();

    SUBCASE("bert path training writes checkpoints, histories, metrics") {
        const std::string encoder_before = slurp(f.weights_path);
        REQUIRE(run("train --features " + kDir + "/feat/features.bfc1 --arch CNN-LSTM --rep bert"
                    " --hp " + kDir + "/hp.json --epochs 3 --reps 2 --seed 7 --out " + kDir +
                    "/run_bert") == 0);
        // frozen features: the encoder weight file is bit-identical after training
        CHECK(slurp(f.weights_path) == encoder_before);
        CHECK(fs::exists(kDir + "/run_bert/run_0.ntc1"));
        CHECK(fs::exists(kDir + "/run_bert/run_1.ntc1"));
        CHECK(fs::exists(kDir + "/run_bert/run_0_history.csv"));
        CHECK(fs::exists(kDir + "/run_bert/metrics.json"));
        CHECK(fs::exists(kDir + "/run_bert/runconfig.json"));
        const std::string history = slurp(kDir + "/run_bert/run_0_history.csv");
        CHECK(history.rfind("epoch,train_loss,val_loss,val_acc", 0) == 0);

        // deterministic rerun: identical checkpoints
        REQUIRE(run("train --features " + kDir + "/feat/features.bfc1 --arch CNN-LSTM --rep bert"
                    " --hp " + kDir + "/hp.json --epochs 3 --reps 2 --seed 7 --out " + kDir +
                    "/run_bert2") == 0);
        CHECK(slurp(kDir + "/run_bert/run_0.ntc1") == slurp(kDir + "/run_bert2/run_0.ntc1"));

        REQUIRE(run("eval --checkpoints " + kDir + "/run_bert --test " + kDir +
                    "/feat/features.bfc1 --out " + kDir + "/eval_bert") == 0);
        const std::string report = slurp(kDir + "/eval_bert/report.csv");
        CHECK(report.find("BERT,CNN-LSTM,") != std::string::npos);
        CHECK(report.find("\xE2\x80\x94") != std::string::npos);  // other models dashed
    }

    SUBCASE("non-finite training input exits with the numeric failure code") {
        FeatureCache poisoned = read_bfc1(kDir + "/feat/features.bfc1");
        for (FeatureRecord& rec : poisoned.records) {
            rec.values[3] = std::numeric_limits<float>::quiet_NaN();
        }
        write_bfc1(kDir + "/poisoned.bfc1", poisoned);
        CHECK(run("train --features " + kDir + "/poisoned.bfc1 --arch LSTM --rep bert --hp " +
                  kDir + "/hp.json --epochs 2 --reps 1 --seed 7 --out " + kDir + "/run_div") == 4);
        const std::string err = slurp(kDir + "/last_stderr.txt");
        CHECK(err.find("numeric failure") != std::string::npos);
    }

    SUBCASE("embedding path with representation export feeds tsne with two caches") {
        REQUIRE(run("train --data " + kDir + "/pre/cleaned.jsonl --vocab " + f.vocab_path +
                    " --max-len 16 --arch GRU --rep embedding --hp " + kDir + "/hp.json" +
                    " --epochs 3 --reps 1 --seed 11 --export-representation " + kDir +
                    "/emb.bfc1 --out " + kDir + "/run_emb") == 0);
        CHECK(fs::exists(kDir + "/emb.bfc1"));
        // a single repetition aggregates with zero spread
        const std::string metrics = slurp(kDir + "/run_emb/metrics.json");
        CHECK(metrics.find("\xC2\xB1 0.0000") != std::string::npos);
        const FeatureCache emb = read_bfc1(kDir + "/emb.bfc1");
        CHECK(emb.hidden == 8);
        CHECK(emb.records.size() == 48);

        REQUIRE(run("tsne --features " + kDir + "/feat/features.bfc1 --features " + kDir +
                    "/emb.bfc1 --perplexity 5 --iterations 120 --seed 4 --out " + kDir +
                    "/tsne") == 0);
        CHECK(fs::exists(kDir + "/tsne/tsne_features.svg"));
        CHECK(fs::exists(kDir + "/tsne/tsne_emb.svg"));
        const std::string svg = slurp(kDir + "/tsne/tsne_features.svg");
        CHECK(svg.find("<svg") != std::string::npos);
        CHECK(svg.find("negative") != std::string::npos);

        // determinism: rerun gives identical bytes
        REQUIRE(run("tsne --features " + kDir + "/feat/features.bfc1 --perplexity 5"
                    " --iterations 120 --seed 4 --out " + kDir + "/tsne_b") == 0);
        CHECK(slurp(kDir + "/tsne/tsne_features.svg") == slurp(kDir + "/tsne_b/tsne_features.svg"));
    }

    SUBCASE("hpo writes a resumable ledger and a best config") {
        REQUIRE(run("hpo --features " + kDir + "/feat/features.bfc1 --arch CNN --rep bert"
                    " --max-trials 3 --epochs 2 --seed 5 --out " + kDir + "/hpo") == 0);
        CHECK(fs::exists(kDir + "/hpo/trials.jsonl"));
        CHECK(fs::exists(kDir + "/hpo/best.json"));
        std::ifstream ledger(kDir + "/hpo/trials.jsonl");
        int lines = 0;
        std::string line;
        while (std::getline(ledger, line)) {
            if (!line.empty()) ++lines;
        }
        CHECK(lines == 3);
        // resume adds exactly the missing trials
        REQUIRE(run("hpo --features " + kDir + "/feat/features.bfc1 --arch CNN --rep bert"
                    " --max-trials 4 --epochs 2 --seed 5 --out " + kDir + "/hpo") == 0);
        std::ifstream ledger2(kDir + "/hpo/trials.jsonl");
        lines = 0;
        while (std::getline(ledger2, line)) {
            if (!line.empty()) ++lines;
        }
        CHECK(lines == 4);
    }

    SUBCASE("config file supplies defaults, flags win") {
        std::ofstream cfg(kDir + "/cfg.json");
        cfg << R"({"epochs": 2, "repetitions": 1, "seed": 19})" << '\n';
        cfg.close();
        REQUIRE(run("--config " + kDir + "/cfg.json train --features " + kDir +
                    "/feat/features.bfc1 --arch CNN --rep bert --hp " + kDir + "/hp.json --out " +
                    kDir + "/run_cfg") == 0);
        const std::string rc = slurp(kDir + "/run_cfg/runconfig.json");
        CHECK(rc.find("\"epochs\": 2") != std::string::npos);
        CHECK(rc.find("\"repetitions\": 1") != std::string::npos);
        CHECK(rc.find("\"seed\": 19") != std::string::npos);
    }
}

TEST_CASE("HYBRIDSENT_SEED supplies the default seed") {
    const Fixture& f = fixture();
    REQUIRE(run("preprocess --data " + f.raw_path + " --out " + kDir + "/pre_env") == 0);
    REQUIRE(run("features --data " + kDir + "/pre_env/cleaned.jsonl --vocab " + f.vocab_path +
                " --weights " + f.weights_path + " --encoder-config " + f.config_path +
                " --max-len 12 --out " + kDir + "/feat_env") == 0);
    const std::string cmd = "HYBRIDSENT_SEED=123 " + kCli + " tsne --features " + kDir +
                            "/feat_env/features.bfc1 --perplexity 4 --iterations 5 --out " + kDir +
                            "/tsne_env > /dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const std::string rc = slurp(kDir + "/tsne_env/runconfig.json");
    CHECK(rc.find("\"seed\": 123") != std::string::npos);
}
