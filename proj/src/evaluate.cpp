#include "pathmon/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace pathmon {

CaseSplit case_level_split(const std::map<std::string, int>& case_labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error("bad_config", "test_fraction must lie strictly between 0 and 1");
    }
    std::vector<std::string> pos;
    std::vector<std::string> neg;
    for (const auto& [id, label] : case_labels) (label == 1 ? pos : neg).push_back(id);
    if (pos.size() < 2 || neg.size() < 2) {
        throw Error("too_few_cases", "stratified split needs at least two cases per class (have " +
                                         std::to_string(pos.size()) + " positive, " + std::to_string(neg.size()) +
                                         " negative)");
    }

    const auto n = pos.size() + neg.size();
    const auto n_test = std::size_t(std::llround(test_fraction * double(n)));
    auto pos_test = std::size_t(std::llround(test_fraction * double(pos.size())));
    pos_test = std::clamp<std::size_t>(pos_test, 1, pos.size() - 1);
    auto neg_test = n_test > pos_test ? n_test - pos_test : 0;
    neg_test = std::clamp<std::size_t>(neg_test, 1, neg.size() - 1);

    // Fisher-Yates with an explicit index draw keeps the split independent of
    // the standard library's shuffle.
    std::mt19937_64 rng(seed);
    auto shuffle = [&](std::vector<std::string>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = std::size_t((static_cast<unsigned __int128>(rng()) * i) >> 64);
            std::swap(v[i - 1], v[j]);
        }
    };
    shuffle(pos);
    shuffle(neg);

    CaseSplit split;
    split.seed = seed;
    split.test_fraction = test_fraction;
    for (std::size_t i = 0; i < pos.size(); ++i) (i < pos_test ? split.test_cases : split.train_cases).insert(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i) (i < neg_test ? split.test_cases : split.train_cases).insert(neg[i]);
    return split;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
    const auto n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of positive ranks (average ranks over ties), kept doubled so it stays integral.
    std::uint64_t rank_sum_x2 = 0;
    std::uint64_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t tied_rank_x2 = i + 1 + j;  // 2 * mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum_x2 += tied_rank_x2;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::uint64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    // U = R - n_pos(n_pos+1)/2 ; doubled: 2U = 2R - n_pos(n_pos+1)
    const std::uint64_t u_x2 = rank_sum_x2 - n_pos * (n_pos + 1);
    return double(u_x2) / (2.0 * double(n_pos) * double(n_neg));
}

std::optional<double> auc(std::span<const Prediction> predictions) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(predictions.size());
    labels.reserve(predictions.size());
    for (const auto& p : predictions) {
        scores.push_back(p.score);
        labels.push_back(p.label);
    }
    return auc(scores, labels);
}

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall) {
    if (!precision || !recall || *precision + *recall == 0.0) return std::nullopt;
    return 2.0 * *precision * *recall / (*precision + *recall);
}

ThresholdMetrics threshold_metrics(std::span<const Prediction> predictions, double threshold) {
    ThresholdMetrics m;
    for (const auto& p : predictions) {
        const bool predicted = p.score >= threshold;
        const bool actual = p.label == 1;
        if (predicted && actual) ++m.tp;
        else if (predicted) ++m.fp;
        else if (actual) ++m.fn;
        else ++m.tn;
    }
    const auto n = m.tp + m.fp + m.tn + m.fn;
    if (n) m.accuracy = double(m.tp + m.tn) / double(n);
    if (m.tp + m.fp) m.precision = double(m.tp) / double(m.tp + m.fp);
    if (m.tp + m.fn) m.recall = double(m.tp) / double(m.tp + m.fn);
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

std::vector<LengthMetrics> prefix_length_report(std::span<const Prediction> predictions,
                                                std::span<const std::size_t> lengths, double threshold) {
    std::vector<LengthMetrics> out;
    for (auto length : lengths) {
        std::vector<Prediction> at;
        std::set<std::string> cases;
        for (const auto& p : predictions) {
            if (p.length != length) continue;
            at.push_back(p);
            cases.insert(p.case_id);
        }
        LengthMetrics row;
        row.length = length;
        row.n_cases = cases.size();
        row.n_prefixes = at.size();
        row.auc = auc(at);
        const auto tm = threshold_metrics(at, threshold);
        row.precision = tm.precision;
        row.recall = tm.recall;
        row.f1 = tm.f1;
        out.push_back(row);
    }
    return out;
}

MetricsReport evaluate_predictions(std::span<const Prediction> predictions, std::span<const std::size_t> lengths,
                                   double threshold, std::string model) {
    MetricsReport r;
    r.model = std::move(model);
    std::set<std::string> cases;
    std::size_t pos = 0;
    for (const auto& p : predictions) {
        cases.insert(p.case_id);
        pos += p.label == 1;
    }
    r.n_cases = cases.size();
    r.n_prefixes = predictions.size();
    r.positive_rate = predictions.empty() ? 0.0 : double(pos) / double(predictions.size());
    r.auc = auc(predictions);
    const auto tm = threshold_metrics(predictions, threshold);
    r.accuracy = tm.accuracy;
    r.precision = tm.precision;
    r.recall = tm.recall;
    r.f1 = tm.f1;
    r.threshold = threshold;
    r.per_length = prefix_length_report(predictions, lengths, threshold);
    return r;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string fmt3(const std::optional<double>& v) {
    if (!v) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["model"] = report.model;
    j["overall"] = {{"n_cases", report.n_cases},     {"n_prefixes", report.n_prefixes},
                    {"positive_rate", report.positive_rate}, {"auc", opt(report.auc)},
                    {"accuracy", opt(report.accuracy)}, {"precision", opt(report.precision)},
                    {"recall", opt(report.recall)},     {"f1", opt(report.f1)},
                    {"threshold", report.threshold}};
    j["per_length"] = nlohmann::ordered_json::array();
    for (const auto& l : report.per_length) {
        j["per_length"].push_back({{"length", l.length},
                                   {"n_cases", l.n_cases},
                                   {"n_prefixes", l.n_prefixes},
                                   {"auc", opt(l.auc)},
                                   {"precision", opt(l.precision)},
                                   {"recall", opt(l.recall)},
                                   {"f1", opt(l.f1)}});
    }
    return j.dump(2) + "\n";
}

std::string metrics_to_text(const MetricsReport& report) {
    std::ostringstream out;
    char line[256];
    out << "Overall predictive performance\n";
    std::snprintf(line, sizeof line, "%-8s %7s %9s %13s %7s %9s %10s %7s %7s\n", "Model", "Cases", "Prefixes",
                  "Positive Rate", "AUC", "Accuracy", "Precision", "Recall", "F1");
    out << line;
    std::snprintf(line, sizeof line, "%-8s %7zu %9zu %13s %7s %9s %10s %7s %7s\n", report.model.c_str(),
                  report.n_cases, report.n_prefixes, fmt3(report.positive_rate).c_str(), fmt3(report.auc).c_str(),
                  fmt3(report.accuracy).c_str(), fmt3(report.precision).c_str(), fmt3(report.recall).c_str(),
                  fmt3(report.f1).c_str());
    out << line << "\nPerformance by prefix length\n";
    std::snprintf(line, sizeof line, "%13s %7s %7s %10s %7s %7s\n", "Prefix length", "Cases", "AUC", "Precision",
                  "Recall", "F1");
    out << line;
    for (const auto& l : report.per_length) {
        std::snprintf(line, sizeof line, "%13zu %7zu %7s %10s %7s %7s\n", l.length, l.n_cases, fmt3(l.auc).c_str(),
                      fmt3(l.precision).c_str(), fmt3(l.recall).c_str(), fmt3(l.f1).c_str());
        out << line;
    }
    return out.str();
}

}  // namespace pathmon
