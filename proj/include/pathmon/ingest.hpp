#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pathmon/error.hpp"
#include "pathmon/timestamp.hpp"

namespace pathmon {

enum class ColumnType { Int, Float, Boolean, String, Datetime };

ColumnType parse_column_type(const std::string& name);
const char* to_string(ColumnType type);

// Where a table's event time comes from: one datetime column, or a date column
// plus a separate time-of-day column.
struct TimestampSource {
    std::string date_column;
    std::optional<std::string> time_column;
};

struct TableSchema {
    std::string name;
    std::filesystem::path path;
    std::string case_column;
    char delimiter = ',';
    UtcOffset timezone;
    std::map<std::string, ColumnType> column_types;  // undeclared columns are text
    std::set<std::string> nullable;                  // text columns that also treat "0"/"" as missing
    std::optional<TimestampSource> timestamp;
    // Activity used when matching correction rules and ordering labels.
    std::optional<std::string> activity;
    std::optional<std::string> activity_column;
    std::vector<std::string> compress_keys;  // empty: no compression

    bool is_event_table() const { return timestamp.has_value(); }
};

using Cell = std::optional<std::string>;

struct SourceTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::string case_id_column;
    std::map<std::string, ColumnType> column_types;
    std::set<std::string> nullable;

    std::optional<std::size_t> find_column(const std::string& column) const;
    std::size_t column_index(const std::string& column) const;  // throws unknown_column
    ColumnType type_of(const std::string& column) const;
    bool is_nullable(const std::string& column) const;

    friend bool operator==(const SourceTable&, const SourceTable&) = default;
};

SourceTable load_table(const std::filesystem::path& path, const TableSchema& schema);
// Missing cells are written as empty fields.
void write_table(const SourceTable& table, const std::filesystem::path& path, char delimiter = ',');

// "0", "0.0" and "" in numeric or nullable columns become missing. The case
// column is never touched.
SourceTable normalize_missing(SourceTable table);
std::size_t count_missing(const SourceTable& table);

// Keep only the first row (in original order) of every distinct key tuple.
SourceTable compress_high_frequency(SourceTable table, const std::vector<std::string>& keys);

// One row of an event table, seen through its activity and (maybe missing) time.
struct CandidateEvent {
    std::string activity;
    std::optional<Timestamp> timestamp;
    bool time_inferred = false;
    std::string source;
    std::size_t source_row = 0;

    friend bool operator==(const CandidateEvent&, const CandidateEvent&) = default;
};

enum class RuleCondition { PrecedesWithinWindow, Precedes };
enum class RuleAction { ShiftToReference, SwapOrder };

struct CorrectionRule {
    std::string id;
    std::string subject_activity;
    std::string reference_activity;
    RuleCondition condition = RuleCondition::PrecedesWithinWindow;
    std::int64_t window_seconds = 900;
    RuleAction action = RuleAction::ShiftToReference;

    void validate() const;
};

RuleCondition parse_rule_condition(const std::string& name);
RuleAction parse_rule_action(const std::string& name);

struct CorrectionResult {
    std::vector<CandidateEvent> events;
    std::map<std::string, std::size_t> applied;  // rule id -> events changed
};

// Applies rules in order to the events of one case; each rule sees the output
// of the previous one. Events without a timestamp are ignored. A rule whose
// activities are absent from the case is skipped and reported.
CorrectionResult apply_correction_rules(std::vector<CandidateEvent> events,
                                        const std::vector<CorrectionRule>& rules,
                                        Diagnostics* diagnostics = nullptr);

enum class AnchorAggregate { Min, Max };

struct AnchorDefinition {
    std::string name;
    std::string source;  // table name
    AnchorAggregate aggregate = AnchorAggregate::Min;
};

struct AnchorTable {
    std::string case_id;
    std::map<std::string, Timestamp> anchors;

    Timestamp earliest() const;
    Timestamp latest() const;

    friend bool operator==(const AnchorTable&, const AnchorTable&) = default;
};

// Computes every configured anchor that has at least one timestamped source
// event. When none can be computed the observed range is used
// ("first_observed"/"last_observed"). Violated (before, after) ordering pairs
// are reported as "anchor_order" warnings. A case with no timestamp at all
// throws Error("untimestamped_case").
AnchorTable build_anchor_table(const std::string& case_id, const std::vector<CandidateEvent>& events,
                               const std::vector<AnchorDefinition>& definitions,
                               const std::vector<std::pair<std::string, std::string>>& ordering = {},
                               Diagnostics* diagnostics = nullptr);

enum class OrderingLabel { First, NotFirst, Last };

OrderingLabel parse_ordering_label(const std::string& name);
const char* to_string(OrderingLabel label);

struct InferenceResult {
    std::vector<CandidateEvent> events;  // retained, all timestamped
    std::size_t inferred = 0;
    std::map<std::string, std::size_t> dropped;  // reason -> count
};

// Fills in missing timestamps relative to the anchors: FIRST takes the
// earliest anchor, LAST the latest, NOT_FIRST one second past the earliest
// anchor but never before the previous event of the same source. Events that
// end up outside [earliest, latest], and missing-time events without a label,
// are dropped.
InferenceResult infer_timestamps(std::vector<CandidateEvent> events, const AnchorTable& anchors,
                                 const std::map<std::string, OrderingLabel>& label_of,
                                 Diagnostics* diagnostics = nullptr);

struct LiftConfig {
    std::vector<TableSchema> tables;
    std::vector<CorrectionRule> rules;
    std::vector<AnchorDefinition> anchors;
    std::vector<std::pair<std::string, std::string>> anchor_order;
    std::map<std::string, OrderingLabel> labels;
};

struct LiftReport {
    std::size_t cases = 0;
    std::size_t rows_loaded = 0;
    std::size_t rows_compressed = 0;
    std::size_t cells_missing = 0;
    std::size_t timestamps_malformed = 0;
    std::size_t times_inferred = 0;
    std::size_t events_inferred = 0;
    std::size_t events_retained = 0;
    std::size_t anchor_order_warnings = 0;
    std::map<std::string, std::size_t> corrections;
    std::map<std::string, std::size_t> dropped;
    std::vector<std::string> untimestamped_cases;
};

struct LiftResult {
    // Event tables gain "timestamp" (ISO, UTC) and "time_inferred" columns;
    // rows are sorted by (case id, timestamp, original row).
    std::vector<SourceTable> tables;
    std::vector<AnchorTable> anchors;  // sorted by case id
    LiftReport report;
    Diagnostics diagnostics;
};

inline constexpr const char* kTimestampColumn = "timestamp";
inline constexpr const char* kTimeInferredColumn = "time_inferred";

// Runs the whole data-lifting stage over already loaded tables (in the same
// order as config.tables).
LiftResult lift_tables(std::vector<SourceTable> tables, const LiftConfig& config);

// Schema of a lifted event table as written by the lift stage.
TableSchema lifted_schema(const TableSchema& schema, const std::filesystem::path& path);

std::string lift_report_json(const LiftReport& report);

}  // namespace pathmon
