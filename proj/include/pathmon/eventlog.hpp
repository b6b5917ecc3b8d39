#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pathmon/error.hpp"
#include "pathmon/ingest.hpp"
#include "pathmon/timestamp.hpp"

namespace pathmon {

// A present attribute value. Missing values are represented by absence from
// the attribute map, which is also how both file formats encode them.
using AttrValue = std::variant<std::int64_t, double, bool, std::string, Timestamp>;
using AttributeMap = std::map<std::string, AttrValue>;

ColumnType type_of(const AttrValue& value);
std::string format_value(const AttrValue& value);
// nullopt when `text` is empty or does not parse as `type`.
std::optional<AttrValue> parse_value(std::string_view text, ColumnType type);
// Numeric view of int/float/bool values.
std::optional<double> as_number(const AttrValue& value);

inline constexpr const char* kTimeInferredAttribute = "time_inferred";

struct EventRecord {
    std::string case_id;
    std::string activity;
    Timestamp timestamp;
    AttributeMap attributes;
    // Provenance, used only to break timestamp ties. Not serialized.
    std::string source;
    std::size_t source_index = 0;

    friend bool operator==(const EventRecord& a, const EventRecord& b) {
        return a.case_id == b.case_id && a.activity == b.activity && a.timestamp == b.timestamp &&
               a.attributes == b.attributes;
    }
};

struct Trace {
    std::string case_id;
    std::vector<EventRecord> events;
    AttributeMap case_attributes;

    friend bool operator==(const Trace&, const Trace&) = default;
};

struct EventLog {
    std::vector<Trace> traces;  // sorted by case id
    std::set<std::string> activity_alphabet;

    const Trace* find(const std::string& case_id) const;
    std::size_t event_count() const;

    friend bool operator==(const EventLog&, const EventLog&) = default;
};

enum class CollectorMode { SingleTable, Join, Aggregate };
enum class Aggregation { Mean, Min, Max, Sum, First, Last, Count };

CollectorMode parse_collector_mode(const std::string& name);
Aggregation parse_aggregation(const std::string& name);

struct CollectorSpec {
    std::string name;
    CollectorMode mode = CollectorMode::SingleTable;
    std::vector<std::string> source_tables;
    std::string timestamp_column = kTimestampColumn;
    std::optional<std::string> activity;         // fixed activity name
    std::optional<std::string> activity_column;  // or taken from a column
    // (source column, attribute name) in output order.
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<std::string> join_keys;
    std::vector<std::string> group_keys;  // aggregate mode; defaults to (case, timestamp)
    std::map<std::string, Aggregation> aggregations;

    void validate() const;
};

struct CollectResult {
    std::vector<EventRecord> events;
    std::size_t excluded_missing_timestamp = 0;
    std::size_t invalid_values = 0;
};

CollectResult collect_events(const CollectorSpec& spec, const std::map<std::string, SourceTable>& tables);

// Case attributes keyed by case id, one entry for every case that has events.
// Cases missing from `demographics` get an empty map and a warning; duplicate
// demographic rows throw.
std::map<std::string, AttributeMap> propagate_case_attributes(const std::vector<EventRecord>& events,
                                                              const SourceTable& demographics,
                                                              Diagnostics* diagnostics = nullptr);

// Ordering of events that share a timestamp: activity priority (a "*" entry
// stands for every unlisted activity), then source table, then source row.
struct TieBreak {
    std::vector<std::string> activity_priority{"Admission", "Triage", "*", "ICU Discharge", "Discharge"};

    std::size_t rank(const std::string& activity) const;
};

// Canonical event order within a case.
bool canonical_less(const EventRecord& a, const EventRecord& b, const TieBreak& tie_break);

EventLog build_traces(std::vector<EventRecord> events, std::map<std::string, AttributeMap> case_attributes = {},
                      const TieBreak& tie_break = {});

// Event-log CSV: header `case_id,activity,timestamp,<event attrs>,case:<case attrs>`,
// then a type-tag row, then one row per event in canonical order.
void write_csv(const EventLog& log, const std::filesystem::path& path);
std::string to_csv(const EventLog& log);
EventLog read_csv(const std::filesystem::path& path);
EventLog parse_csv(std::string_view text, std::string_view origin = "<memory>");

}  // namespace pathmon
