#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pathmon/learn.hpp"

namespace pathmon {

struct CaseSplit {
    std::set<std::string> train_cases;
    std::set<std::string> test_cases;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
};

// Seeded, label-stratified split at the case level. The test side gets
// round(test_fraction * n) cases, of which round(test_fraction * positives)
// are positive (each class keeps at least one case per side). Throws
// "too_few_cases" with fewer than two cases of either class.
CaseSplit case_level_split(const std::map<std::string, int>& case_labels, double test_fraction, std::uint64_t seed);

// Mann-Whitney AUC with half credit for ties; absent when a class is missing.
std::optional<double> auc(std::span<const Prediction> predictions);
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

struct ThresholdMetrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::optional<double> accuracy;
    std::optional<double> precision;  // absent without positive predictions
    std::optional<double> recall;     // absent without positive labels
    std::optional<double> f1;         // absent unless precision and recall exist with P + R > 0
};

// Positive when score >= threshold.
ThresholdMetrics threshold_metrics(std::span<const Prediction> predictions, double threshold = 0.5);
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

struct LengthMetrics {
    std::size_t length = 0;
    std::size_t n_cases = 0;
    std::size_t n_prefixes = 0;
    std::optional<double> auc;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

// One entry per requested length, computed over exactly the prefixes of that
// length.
std::vector<LengthMetrics> prefix_length_report(std::span<const Prediction> predictions,
                                                std::span<const std::size_t> lengths, double threshold = 0.5);

struct MetricsReport {
    std::string model;
    std::size_t n_cases = 0;
    std::size_t n_prefixes = 0;
    double positive_rate = 0.0;
    std::optional<double> auc;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    double threshold = 0.5;
    std::vector<LengthMetrics> per_length;
};

MetricsReport evaluate_predictions(std::span<const Prediction> predictions, std::span<const std::size_t> lengths,
                                   double threshold = 0.5, std::string model = {});

// Machine-readable report, full precision, absent metrics as null.
std::string metrics_to_json(const MetricsReport& report);
// Human-readable tables (overall and by prefix length), three decimals.
std::string metrics_to_text(const MetricsReport& report);

}  // namespace pathmon
