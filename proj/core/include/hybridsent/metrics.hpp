#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridsent/errors.hpp"

namespace hybridsent {

// Positive class is label 1.
struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels);

struct MetricTriple {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    // A zero denominator yields 0 with the corresponding flag raised.
    bool precision_degenerate = false;
    bool recall_degenerate = false;
};

// Positive-class metrics; `macro` averages the per-class values instead.
MetricTriple metrics(const ConfusionCounts& c, bool macro = false);

struct AggregateStat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n-1); 0 for a single run
};

AggregateStat aggregate(const std::vector<double>& values);

// "mean ± std" to 4 decimals; decimal_comma renders the source tables' locale.
std::string format_mean_std(const AggregateStat& s, bool decimal_comma = false);

struct MetricsReport {
    AggregateStat accuracy;
    AggregateStat precision;
    AggregateStat recall;
    int runs = 0;
};

MetricsReport aggregate_runs(const std::vector<MetricTriple>& runs);

// Keys are (representation, model) names, e.g. ("BERT", "LSTM-CNN").
using ReportGrid = std::map<std::pair<std::string, std::string>, MetricsReport>;

// Fixed row order per representation group (BERT first): CNN-LSTM, LSTM-CNN,
// CNN-GRU, GRU-CNN, CNN, LSTM, GRU. Missing models render as an em-dash.
std::string render_table_text(const ReportGrid& grid, bool decimal_comma = false);
std::string render_table_csv(const ReportGrid& grid, bool decimal_comma = false);

}  // namespace hybridsent
