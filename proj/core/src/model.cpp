#include "hybridsent/model.hpp"

#include <json.hpp>

#include "hybridsent/errors.hpp"

namespace hybridsent {

std::string to_string(Arch a) {
    switch (a) {
        case Arch::CnnLstm: return "CNN-LSTM";
        case Arch::LstmCnn: return "LSTM-CNN";
        case Arch::CnnGru: return "CNN-GRU";
        case Arch::GruCnn: return "GRU-CNN";
        case Arch::Cnn: return "CNN";
        case Arch::Lstm: return "LSTM";
        case Arch::Gru: return "GRU";
    }
    return "?";
}

std::string to_string(Representation r) {
    return r == Representation::BertFeatures ? "BERT" : "Embedding";
}

Arch arch_from_string(const std::string& s) {
    for (const Arch a : kArchOrder) {
        if (to_string(a) == s) return a;
    }
    throw ConfigError("unknown architecture '" + s +
                      "' (expected CNN-LSTM, LSTM-CNN, CNN-GRU, GRU-CNN, CNN, LSTM or GRU)");
}

Representation representation_from_string(const std::string& s) {
    if (s == "BERT" || s == "bert" || s == "bert-features") return Representation::BertFeatures;
    if (s == "Embedding" || s == "embedding" || s == "trainable-embedding") {
        return Representation::TrainableEmbedding;
    }
    throw ConfigError("unknown representation '" + s + "' (expected bert or embedding)");
}

std::string hyperparams_to_json(const HyperParams& hp) {
    nlohmann::json obj;
    obj["num_filters"] = hp.num_filters;
    obj["region_size"] = hp.region_size;
    obj["cnn_l2"] = hp.cnn_l2;
    obj["rnn_units"] = hp.rnn_units;
    obj["kernel_l2"] = hp.kernel_l2;
    obj["recurrent_l2"] = hp.recurrent_l2;
    obj["dense_l2"] = hp.dense_l2;
    obj["embedding_size"] = hp.embedding_size;
    return obj.dump();
}

HyperParams hyperparams_from_json(const std::string& json_text) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid hyperparameter JSON: ") + e.what());
    }
    HyperParams hp;
    hp.num_filters = obj.value("num_filters", hp.num_filters);
    hp.region_size = obj.value("region_size", hp.region_size);
    hp.cnn_l2 = obj.value("cnn_l2", hp.cnn_l2);
    hp.rnn_units = obj.value("rnn_units", hp.rnn_units);
    hp.kernel_l2 = obj.value("kernel_l2", hp.kernel_l2);
    hp.recurrent_l2 = obj.value("recurrent_l2", hp.recurrent_l2);
    hp.dense_l2 = obj.value("dense_l2", hp.dense_l2);
    hp.embedding_size = obj.value("embedding_size", hp.embedding_size);
    return hp;
}

}  // namespace hybridsent
