#include "hybridsent/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace hybridsent {

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw DataError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred_pos = predictions[i] == 1;
        const bool is_pos = labels[i] == 1;
        if (pred_pos && is_pos) ++c.tp;
        else if (pred_pos && !is_pos) ++c.fp;
        else if (!pred_pos && is_pos) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricTriple metrics(const ConfusionCounts& c, bool macro) {
    if (c.total() == 0) throw DataError("metrics: empty confusion counts");
    MetricTriple m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());

    const auto ratio = [](std::size_t num, std::size_t den, bool& degenerate) {
        if (den == 0) {
            degenerate = true;
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    const double prec_pos = ratio(c.tp, c.tp + c.fp, m.precision_degenerate);
    const double rec_pos = ratio(c.tp, c.tp + c.fn, m.recall_degenerate);
    if (!macro) {
        m.precision = prec_pos;
        m.recall = rec_pos;
        return m;
    }
    const double prec_neg = ratio(c.tn, c.tn + c.fn, m.precision_degenerate);
    const double rec_neg = ratio(c.tn, c.tn + c.fp, m.recall_degenerate);
    m.precision = 0.5 * (prec_pos + prec_neg);
    m.recall = 0.5 * (rec_pos + rec_neg);
    return m;
}

AggregateStat aggregate(const std::vector<double>& values) {
    if (values.empty()) throw DataError("aggregate: no runs");
    AggregateStat s;
    for (const double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (const double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

std::string format_mean_std(const AggregateStat& s, bool decimal_comma) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f \xC2\xB1 %.4f", s.mean, s.std);
    std::string out(buf);
    if (decimal_comma) {
        for (char& c : out) {
            if (c == '.') c = ',';
        }
    }
    return out;
}

MetricsReport aggregate_runs(const std::vector<MetricTriple>& runs) {
    std::vector<double> acc, prec, rec;
    for (const MetricTriple& r : runs) {
        acc.push_back(r.accuracy);
        prec.push_back(r.precision);
        rec.push_back(r.recall);
    }
    MetricsReport report;
    report.accuracy = aggregate(acc);
    report.precision = aggregate(prec);
    report.recall = aggregate(rec);
    report.runs = static_cast<int>(runs.size());
    return report;
}

namespace {

const char* kModelOrder[7] = {"CNN-LSTM", "LSTM-CNN", "CNN-GRU", "GRU-CNN", "CNN", "LSTM", "GRU"};
const char* kRepOrder[2] = {"BERT", "Embedding"};
const char* kDash = "\xE2\x80\x94";  // em-dash placeholder for missing cells

bool group_present(const ReportGrid& grid, const std::string& rep) {
    for (const auto& [key, report] : grid) {
        if (key.first == rep) return true;
    }
    return false;
}

std::string csv_field(const std::string& s) {
    if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
    std::string quoted = "\"";
    for (const char c : s) {
        if (c == '"') quoted += "\"\"";
        else quoted += c;
    }
    quoted += '"';
    return quoted;
}

}  // namespace

std::string render_table_text(const ReportGrid& grid, bool decimal_comma) {
    std::ostringstream out;
    out << "Text Representation Method | Model    | Accuracy        | Precision       | Recall\n";
    for (const char* rep : kRepOrder) {
        if (!group_present(grid, rep)) continue;
        out << rep << '\n';
        for (const char* model : kModelOrder) {
            const auto it = grid.find({rep, model});
            std::string acc = kDash, prec = kDash, rec = kDash;
            if (it != grid.end()) {
                acc = format_mean_std(it->second.accuracy, decimal_comma);
                prec = format_mean_std(it->second.precision, decimal_comma);
                rec = format_mean_std(it->second.recall, decimal_comma);
            }
            char line[256];
            std::snprintf(line, sizeof(line), "  %-25s| %-15s | %-15s | %s\n", model, acc.c_str(),
                          prec.c_str(), rec.c_str());
            out << line;
        }
    }
    return out.str();
}

std::string render_table_csv(const ReportGrid& grid, bool decimal_comma) {
    std::ostringstream out;
    out << "representation,model,accuracy,precision,recall\n";
    for (const char* rep : kRepOrder) {
        if (!group_present(grid, rep)) continue;
        for (const char* model : kModelOrder) {
            const auto it = grid.find({rep, model});
            std::string acc = kDash, prec = kDash, rec = kDash;
            if (it != grid.end()) {
                acc = format_mean_std(it->second.accuracy, decimal_comma);
                prec = format_mean_std(it->second.precision, decimal_comma);
                rec = format_mean_std(it->second.recall, decimal_comma);
            }
            out << csv_field(rep) << ',' << csv_field(model) << ',' << csv_field(acc) << ','
                << csv_field(prec) << ',' << csv_field(rec) << '\n';
        }
    }
    return out.str();
}

}  // namespace hybridsent
