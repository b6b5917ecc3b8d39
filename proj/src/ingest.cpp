#include "pathmon/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "json.hpp"
#include "pathmon/csv.hpp"

namespace pathmon {

ColumnType parse_column_type(const std::string& name) {
    if (name == "int" || name == "integer") return ColumnType::Int;
    if (name == "float" || name == "double" || name == "number") return ColumnType::Float;
    if (name == "boolean" || name == "bool") return ColumnType::Boolean;
    if (name == "string" || name == "text") return ColumnType::String;
    if (name == "datetime" || name == "date") return ColumnType::Datetime;
    throw Error("bad_config", "unknown column type '" + name + "'");
}

const char* to_string(ColumnType type) {
    switch (type) {
        case ColumnType::Int: return "int";
        case ColumnType::Float: return "float";
        case ColumnType::Boolean: return "boolean";
        case ColumnType::String: return "string";
        case ColumnType::Datetime: return "datetime";
    }
    return "string";
}

std::optional<std::size_t> SourceTable::find_column(const std::string& column) const {
    auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) return std::nullopt;
    return std::size_t(it - columns.begin());
}

std::size_t SourceTable::column_index(const std::string& column) const {
    auto idx = find_column(column);
    if (!idx) throw Error("unknown_column", "table '" + name + "' has no column '" + column + "'");
    return *idx;
}

ColumnType SourceTable::type_of(const std::string& column) const {
    auto it = column_types.find(column);
    return it == column_types.end() ? ColumnType::String : it->second;
}

bool SourceTable::is_nullable(const std::string& column) const {
    if (column == case_id_column) return false;
    const auto type = type_of(column);
    return type == ColumnType::Int || type == ColumnType::Float || nullable.contains(column);
}

SourceTable load_table(const std::filesystem::path& path, const TableSchema& schema) {
    if (!std::filesystem::exists(path)) {
        throw Error("missing_file", "table '" + schema.name + "': file '" + path.string() + "' not found");
    }
    auto doc = csv::read(path, schema.delimiter);

    SourceTable table;
    table.name = schema.name;
    table.case_id_column = schema.case_column;
    table.column_types = schema.column_types;
    table.nullable = schema.nullable;
    table.columns = doc.header;

    std::set<std::string> seen;
    for (const auto& c : table.columns) {
        if (!seen.insert(c).second) {
            throw Error("duplicate_column", "table '" + schema.name + "': duplicate column '" + c + "'");
        }
    }
    auto case_idx = table.find_column(schema.case_column);
    if (!case_idx) {
        throw Error("missing_case_column",
                    "table '" + schema.name + "': case column '" + schema.case_column + "' not in header");
    }

    table.rows.reserve(doc.rows.size());
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        auto& raw = doc.rows[r];
        if (raw[*case_idx].empty()) {
            throw Error("missing_case_id", path.string() + ": line " + std::to_string(doc.lines[r]) +
                                               " has an empty case id");
        }
        std::vector<Cell> row;
        row.reserve(raw.size());
        for (auto& v : raw) row.emplace_back(std::move(v));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_table(const SourceTable& table, const std::filesystem::path& path, char delimiter) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    csv::write_row(out, table.columns, delimiter);
    csv::Row row;
    for (const auto& r : table.rows) {
        row.clear();
        for (const auto& c : r) row.push_back(c.value_or(""));
        csv::write_row(out, row, delimiter);
    }
}

SourceTable normalize_missing(SourceTable table) {
    std::vector<bool> nullable(table.columns.size());
    for (std::size_t c = 0; c < table.columns.size(); ++c) nullable[c] = table.is_nullable(table.columns[c]);
    for (auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!nullable[c] || !row[c]) continue;
            const auto& v = *row[c];
            if (v.empty() || v == "0" || v == "0.0") row[c].reset();
        }
    }
    return table;
}

std::size_t count_missing(const SourceTable& table) {
    std::size_t n = 0;
    for (const auto& row : table.rows) {
        for (const auto& c : row) n += !c.has_value();
    }
    return n;
}

SourceTable compress_high_frequency(SourceTable table, const std::vector<std::string>& keys) {
    std::vector<std::size_t> idx;
    for (const auto& k : keys) idx.push_back(table.column_index(k));

    std::set<std::vector<Cell>> seen;
    std::vector<std::vector<Cell>> kept;
    kept.reserve(table.rows.size());
    std::vector<Cell> key(idx.size());
    for (auto& row : table.rows) {
        for (std::size_t i = 0; i < idx.size(); ++i) key[i] = row[idx[i]];
        if (seen.insert(key).second) kept.push_back(std::move(row));
    }
    table.rows = std::move(kept);
    return table;
}

RuleCondition parse_rule_condition(const std::string& name) {
    if (name == "precedes_within_window") return RuleCondition::PrecedesWithinWindow;
    if (name == "precedes") return RuleCondition::Precedes;
    throw Error("bad_config", "unknown rule condition '" + name + "'");
}

RuleAction parse_rule_action(const std::string& name) {
    if (name == "shift_to_reference") return RuleAction::ShiftToReference;
    if (name == "swap_order") return RuleAction::SwapOrder;
    throw Error("bad_config", "unknown rule action '" + name + "'");
}

void CorrectionRule::validate() const {
    if (condition == RuleCondition::PrecedesWithinWindow && window_seconds <= 0) {
        throw Error("bad_config", "rule '" + id + "': window must be positive");
    }
}

CorrectionResult apply_correction_rules(std::vector<CandidateEvent> events,
                                        const std::vector<CorrectionRule>& rules,
                                        Diagnostics* diagnostics) {
    CorrectionResult result;
    for (const auto& rule : rules) {
        rule.validate();
        // Reference point: earliest timestamped reference event.
        std::optional<std::size_t> ref;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto& e = events[i];
            if (e.activity != rule.reference_activity || !e.timestamp) continue;
            if (!ref || *e.timestamp < *events[*ref].timestamp) ref = i;
        }
        const bool has_subject = std::any_of(events.begin(), events.end(), [&](const auto& e) {
            return e.activity == rule.subject_activity && e.timestamp;
        });
        if (!ref || !has_subject) {
            if (diagnostics) {
                diagnostics->warn("rule_skipped", "rule '" + rule.id + "' skipped: " +
                                                      (!ref ? rule.reference_activity : rule.subject_activity) +
                                                      " absent");
            }
            continue;
        }
        const Timestamp ref_ts = *events[*ref].timestamp;

        auto condition_holds = [&](Timestamp subject) {
            if (!(subject < ref_ts)) return false;
            return rule.condition == RuleCondition::Precedes || ref_ts - subject <= rule.window_seconds;
        };

        std::size_t changed = 0;
        if (rule.action == RuleAction::ShiftToReference) {
            for (auto& e : events) {
                if (e.activity == rule.subject_activity && e.timestamp && condition_holds(*e.timestamp)) {
                    e.timestamp = ref_ts;
                    ++changed;
                }
            }
        } else {
            std::optional<std::size_t> subject;
            for (std::size_t i = 0; i < events.size(); ++i) {
                const auto& e = events[i];
                if (e.activity != rule.subject_activity || !e.timestamp) continue;
                if (!subject || *e.timestamp < *events[*subject].timestamp) subject = i;
            }
            if (condition_holds(*events[*subject].timestamp)) {
                std::swap(events[*subject].timestamp, events[*ref].timestamp);
                std::swap(events[*subject].time_inferred, events[*ref].time_inferred);
                changed = 2;
            }
        }
        if (changed) result.applied[rule.id] += changed;
    }
    result.events = std::move(events);
    return result;
}

Timestamp AnchorTable::earliest() const {
    if (anchors.empty()) throw Error("no_anchor", "case '" + case_id + "' has no anchors");
    Timestamp t{std::numeric_limits<std::int64_t>::max()};
    for (const auto& [_, ts] : anchors) t = std::min(t, ts);
    return t;
}

Timestamp AnchorTable::latest() const {
    if (anchors.empty()) throw Error("no_anchor", "case '" + case_id + "' has no anchors");
    Timestamp t{std::numeric_limits<std::int64_t>::min()};
    for (const auto& [_, ts] : anchors) t = std::max(t, ts);
    return t;
}

AnchorTable build_anchor_table(const std::string& case_id, const std::vector<CandidateEvent>& events,
                               const std::vector<AnchorDefinition>& definitions,
                               const std::vector<std::pair<std::string, std::string>>& ordering,
                               Diagnostics* diagnostics) {
    AnchorTable table;
    table.case_id = case_id;

    std::optional<Timestamp> first;
    std::optional<Timestamp> last;
    for (const auto& e : events) {
        if (!e.timestamp) continue;
        if (!first || *e.timestamp < *first) first = e.timestamp;
        if (!last || *e.timestamp > *last) last = e.timestamp;
    }
    if (!first) throw Error("untimestamped_case", "case '" + case_id + "' has no valid timestamp");

    for (const auto& def : definitions) {
        std::optional<Timestamp> value;
        for (const auto& e : events) {
            if (e.source != def.source || !e.timestamp) continue;
            if (!value) {
                value = e.timestamp;
            } else if (def.aggregate == AnchorAggregate::Min) {
                value = std::min(*value, *e.timestamp);
            } else {
                value = std::max(*value, *e.timestamp);
            }
        }
        if (value) table.anchors[def.name] = *value;
    }
    if (table.anchors.empty()) {
        table.anchors["first_observed"] = *first;
        table.anchors["last_observed"] = *last;
    }

    for (const auto& [before, after] : ordering) {
        auto b = table.anchors.find(before);
        auto a = table.anchors.find(after);
        if (b != table.anchors.end() && a != table.anchors.end() && a->second < b->second && diagnostics) {
            diagnostics->warn("anchor_order", "case '" + case_id + "': anchor " + after + " (" +
                                                  a->second.to_iso() + ") precedes " + before + " (" +
                                                  b->second.to_iso() + ")");
        }
    }
    return table;
}

OrderingLabel parse_ordering_label(const std::string& name) {
    if (name == "FIRST") return OrderingLabel::First;
    if (name == "NOT_FIRST") return OrderingLabel::NotFirst;
    if (name == "LAST") return OrderingLabel::Last;
    throw Error("bad_config", "unknown ordering label '" + name + "'");
}

const char* to_string(OrderingLabel label) {
    switch (label) {
        case OrderingLabel::First: return "FIRST";
        case OrderingLabel::NotFirst: return "NOT_FIRST";
        case OrderingLabel::Last: return "LAST";
    }
    return "FIRST";
}

InferenceResult infer_timestamps(std::vector<CandidateEvent> events, const AnchorTable& anchors,
                                 const std::map<std::string, OrderingLabel>& label_of,
                                 Diagnostics* diagnostics) {
    const Timestamp lo = anchors.earliest();
    const Timestamp hi = anchors.latest();

    InferenceResult result;
    std::map<std::string, Timestamp> previous_by_source;
    auto drop = [&](const CandidateEvent& e, const std::string& reason) {
        ++result.dropped[reason];
        if (diagnostics) {
            diagnostics->warn("event_dropped", "case '" + anchors.case_id + "': " + e.activity + " from " +
                                                   e.source + " row " + std::to_string(e.source_row) +
                                                   " dropped (" + reason + ")");
        }
    };

    for (auto& e : events) {
        if (!e.timestamp) {
            auto label = label_of.find(e.activity);
            if (label == label_of.end()) {
                drop(e, "missing_timestamp_unlabeled");
                continue;
            }
            Timestamp t;
            switch (label->second) {
                case OrderingLabel::First: t = lo; break;
                case OrderingLabel::Last: t = hi; break;
                case OrderingLabel::NotFirst: {
                    t = lo + 1;
                    auto prev = previous_by_source.find(e.source);
                    if (prev != previous_by_source.end()) t = std::max(t, prev->second);
                    break;
                }
            }
            if (t > hi) {
                drop(e, "label_outside_anchor_range");
                continue;
            }
            e.timestamp = t;
            e.time_inferred = true;
            ++result.inferred;
        } else if (*e.timestamp < lo || *e.timestamp > hi) {
            drop(e, "outside_anchor_range");
            continue;
        }
        previous_by_source[e.source] = *e.timestamp;
        result.events.push_back(std::move(e));
    }
    return result;
}

namespace {

struct RowRef {
    std::size_t table;
    std::size_t row;
};

}  // namespace

LiftResult lift_tables(std::vector<SourceTable> tables, const LiftConfig& config) {
    if (tables.size() != config.tables.size()) {
        throw Error("bad_config", "lift: table count does not match configuration");
    }
    LiftResult result;
    auto& report = result.report;

    // Clean and compress.
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const auto& schema = config.tables[t];
        report.rows_loaded += tables[t].rows.size();
        const auto before = count_missing(tables[t]);
        tables[t] = normalize_missing(std::move(tables[t]));
        report.cells_missing += count_missing(tables[t]) - before;
        if (!schema.compress_keys.empty()) {
            const auto n = tables[t].rows.size();
            tables[t] = compress_high_frequency(std::move(tables[t]), schema.compress_keys);
            report.rows_compressed += n - tables[t].rows.size();
        }
    }

    // Event candidates per case, in table then row order.
    std::map<std::string, std::vector<CandidateEvent>> by_case;
    std::map<std::string, std::vector<RowRef>> refs_by_case;
    std::set<std::string> all_cases;
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const auto& table = tables[t];
        const auto& schema = config.tables[t];
        const auto case_idx = table.column_index(table.case_id_column);
        for (const auto& row : table.rows) all_cases.insert(*row[case_idx]);
        if (!schema.is_event_table()) continue;

        const auto date_idx = table.column_index(schema.timestamp->date_column);
        std::optional<std::size_t> time_idx;
        if (schema.timestamp->time_column) time_idx = table.column_index(*schema.timestamp->time_column);
        std::optional<std::size_t> activity_idx;
        if (schema.activity_column) activity_idx = table.column_index(*schema.activity_column);

        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const auto& row = table.rows[r];
            Cell time_cell = time_idx ? row[*time_idx] : Cell{};
            auto built = build_timestamp(row[date_idx], time_cell, schema.timezone);
            if (built.malformed) {
                ++report.timestamps_malformed;
                result.diagnostics.warn("malformed_timestamp", "table '" + table.name + "' row " +
                                                                   std::to_string(r + 1) + ": unparseable date/time");
            }
            // A single datetime column never "infers" a time of day.
            if (!time_idx) built.time_inferred = false;
            report.times_inferred += built.time_inferred;

            CandidateEvent e;
            e.activity = activity_idx ? row[*activity_idx].value_or("") : schema.activity.value_or(table.name);
            e.timestamp = built.value;
            e.time_inferred = built.time_inferred;
            e.source = table.name;
            e.source_row = r;
            const auto& case_id = *row[case_idx];
            by_case[case_id].push_back(std::move(e));
            refs_by_case[case_id].push_back({t, r});
        }
    }

    // Per-case reconstruction. Retained rows get their final timestamp.
    std::vector<std::vector<std::optional<CandidateEvent>>> resolved(tables.size());
    for (std::size_t t = 0; t < tables.size(); ++t) resolved[t].resize(tables[t].rows.size());
    std::set<std::string> excluded;
    std::unordered_map<std::string, std::size_t> table_index;
    for (std::size_t t = 0; t < tables.size(); ++t) table_index[tables[t].name] = t;

    for (auto& [case_id, events] : by_case) {
        auto corrected = apply_correction_rules(std::move(events), config.rules, &result.diagnostics);
        for (const auto& [rule, n] : corrected.applied) report.corrections[rule] += n;

        AnchorTable anchors;
        try {
            anchors = build_anchor_table(case_id, corrected.events, config.anchors, config.anchor_order,
                                         &result.diagnostics);
        } catch (const Error& err) {
            if (err.code() != "untimestamped_case") throw;
            result.diagnostics.warn("untimestamped_case", err.what());
            report.untimestamped_cases.push_back(case_id);
            excluded.insert(case_id);
            continue;
        }
        auto inferred = infer_timestamps(std::move(corrected.events), anchors, config.labels, &result.diagnostics);
        report.events_inferred += inferred.inferred;
        for (const auto& [reason, n] : inferred.dropped) report.dropped[reason] += n;
        report.events_retained += inferred.events.size();

        for (auto& e : inferred.events) {
            const auto t = table_index.at(e.source);
            resolved[t][e.source_row] = std::move(e);
        }
        result.anchors.push_back(std::move(anchors));
    }
    report.anchor_order_warnings = result.diagnostics.count("anchor_order");

    // Rebuild tables in canonical order.
    for (std::size_t t = 0; t < tables.size(); ++t) {
        auto& table = tables[t];
        const auto& schema = config.tables[t];
        const auto case_idx = table.column_index(table.case_id_column);

        std::vector<std::size_t> order;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            if (excluded.contains(*table.rows[r][case_idx])) continue;
            if (schema.is_event_table() && !resolved[t][r]) continue;
            order.push_back(r);
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& ca = *table.rows[a][case_idx];
            const auto& cb = *table.rows[b][case_idx];
            if (ca != cb) return ca < cb;
            if (schema.is_event_table()) return *resolved[t][a]->timestamp < *resolved[t][b]->timestamp;
            return false;
        });

        SourceTable out;
        out.name = table.name;
        out.case_id_column = table.case_id_column;
        out.column_types = table.column_types;
        out.nullable = table.nullable;
        out.columns = table.columns;
        std::optional<std::size_t> ts_idx;
        std::optional<std::size_t> inferred_idx;
        if (schema.is_event_table()) {
            ts_idx = out.find_column(kTimestampColumn);
            if (!ts_idx) {
                out.columns.push_back(kTimestampColumn);
                ts_idx = out.columns.size() - 1;
            }
            inferred_idx = out.find_column(kTimeInferredColumn);
            if (!inferred_idx) {
                out.columns.push_back(kTimeInferredColumn);
                inferred_idx = out.columns.size() - 1;
            }
            out.column_types[kTimestampColumn] = ColumnType::Datetime;
            out.column_types[kTimeInferredColumn] = ColumnType::Boolean;
        }
        for (auto r : order) {
            auto row = std::move(table.rows[r]);
            row.resize(out.columns.size());
            if (ts_idx) {
                const auto& e = *resolved[t][r];
                row[*ts_idx] = e.timestamp->to_iso();
                row[*inferred_idx] = e.time_inferred ? "true" : "false";
            }
            out.rows.push_back(std::move(row));
        }
        result.tables.push_back(std::move(out));
    }

    for (const auto& c : excluded) all_cases.erase(c);
    report.cases = all_cases.size();
    return result;
}

TableSchema lifted_schema(const TableSchema& schema, const std::filesystem::path& path) {
    TableSchema out = schema;
    out.path = path;
    out.delimiter = ',';
    out.timezone = {};
    out.compress_keys.clear();
    if (schema.is_event_table()) {
        out.timestamp = TimestampSource{kTimestampColumn, std::nullopt};
        out.column_types[kTimestampColumn] = ColumnType::Datetime;
        out.column_types[kTimeInferredColumn] = ColumnType::Boolean;
    }
    return out;
}

std::string lift_report_json(const LiftReport& report) {
    nlohmann::ordered_json j;
    j["cases"] = report.cases;
    j["rows_loaded"] = report.rows_loaded;
    j["rows_compressed"] = report.rows_compressed;
    j["cells_missing"] = report.cells_missing;
    j["timestamps_malformed"] = report.timestamps_malformed;
    j["times_inferred"] = report.times_inferred;
    j["events_inferred"] = report.events_inferred;
    j["events_retained"] = report.events_retained;
    j["anchor_order_warnings"] = report.anchor_order_warnings;
    j["corrections"] = report.corrections;
    j["dropped"] = report.dropped;
    j["untimestamped_cases"] = report.untimestamped_cases;
    return j.dump(2) + "\n";
}

}  // namespace pathmon
