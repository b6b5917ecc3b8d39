#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pathmon/eventlog.hpp"
#include "pathmon/prefixing.hpp"

namespace pathmon {

enum class SignalAggregate { Latest, Min, Max, Mean };
enum class CaseEncoding { Numeric, OneHot };

SignalAggregate parse_signal_aggregate(const std::string& name);
const char* to_string(SignalAggregate agg);

struct SignalSpec {
    std::string name;
    std::vector<SignalAggregate> aggregations{SignalAggregate::Latest, SignalAggregate::Min, SignalAggregate::Max,
                                              SignalAggregate::Mean};
};

struct CaseAttributeSpec {
    std::string name;
    CaseEncoding encoding = CaseEncoding::Numeric;
};

struct FeatureConfig {
    std::string admission_activity = "Admission";
    std::vector<SignalSpec> signals;
    std::vector<CaseAttributeSpec> case_attributes;
};

inline constexpr const char* kOutOfVocabulary = "__oov__";
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Everything fitted on training data that transformation needs.
struct FeatureSpec {
    FeatureConfig config;
    std::vector<std::string> activity_vocabulary;
    std::vector<std::pair<std::string, std::string>> transition_vocabulary;
    std::map<std::string, std::vector<std::string>> categorical_levels;
    std::vector<std::string> column_names;
    std::vector<bool> scaled;  // false for missing-indicator columns
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    Eigen::Index width() const { return Eigen::Index(column_names.size()); }
    std::string fingerprint() const;

    friend bool operator==(const FeatureSpec& a, const FeatureSpec& b);
};

std::string spec_to_json(const FeatureSpec& spec);
FeatureSpec spec_from_json(std::string_view text);

// Feature values of one family with their column names. Missing values are NaN.
struct NamedValues {
    std::vector<std::string> names;
    std::vector<double> values;

    double at(std::string_view name) const;
};

NamedValues temporal_features(const Prefix& prefix, const FeatureSpec& spec);
NamedValues activity_features(const Prefix& prefix, const FeatureSpec& spec);
NamedValues transition_features(const Prefix& prefix, const FeatureSpec& spec);
NamedValues clinical_aggregates(const Prefix& prefix, const FeatureSpec& spec);
NamedValues case_features(const Prefix& prefix, const Trace& trace, const FeatureSpec& spec);

// Unstandardized row (all five families concatenated, missing as NaN, with
// missing indicators filled in). `invalid_observations` counts non-numeric
// readings of configured signals.
Eigen::VectorXd raw_feature_row(const Prefix& prefix, const Trace& trace, const FeatureSpec& spec,
                                std::size_t* invalid_observations = nullptr);

// Vocabularies, levels and standardization constants from training prefixes
// only. Throws "empty_training_set".
FeatureSpec fit_spec(const PrefixDataset& train, const EventLog& log, const FeatureConfig& config);

struct FeatureTable {
    FeatureSpec spec;
    std::vector<std::string> prefix_ids;
    std::vector<std::string> case_ids;
    std::vector<std::size_t> lengths;
    std::vector<int> labels;
    Eigen::MatrixXd values;  // rows x spec.width(), standardized, no NaN
    std::size_t invalid_observations = 0;

    Eigen::Index rows() const { return values.rows(); }
    const std::vector<std::string>& column_names() const { return spec.column_names; }
    Eigen::VectorXd label_vector() const;
    // Rows whose case is in `cases`, in table order.
    FeatureTable subset(const std::set<std::string>& cases) const;
};

FeatureTable build_feature_table(const PrefixDataset& dataset, const EventLog& log, const FeatureSpec& spec);

// Standardize raw rows with the fitted constants; NaN becomes 0 and
// zero-variance columns become 0.
Eigen::MatrixXd standardize(const FeatureSpec& spec, const Eigen::MatrixXd& raw);
// Inverse of standardize for present values in varying columns.
Eigen::MatrixXd inverse_standardize(const FeatureSpec& spec, const Eigen::MatrixXd& standardized);

// Feature table CSV: prefix_id,case_id,length,label,<feature columns>.
std::string feature_table_to_csv(const FeatureTable& table);
void write_feature_table(const FeatureTable& table, const std::filesystem::path& path);
// The header must match `spec` column for column.
FeatureTable read_feature_table(const std::filesystem::path& path, const FeatureSpec& spec);

}  // namespace pathmon
