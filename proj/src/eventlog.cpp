#include "pathmon/eventlog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "pathmon/csv.hpp"

namespace pathmon {

ColumnType type_of(const AttrValue& value) {
    switch (value.index()) {
        case 0: return ColumnType::Int;
        case 1: return ColumnType::Float;
        case 2: return ColumnType::Boolean;
        case 3: return ColumnType::String;
        default: return ColumnType::Datetime;
    }
}

std::string format_value(const AttrValue& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, double>) {
                char buf[64];
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
                return std::string(buf, ptr);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::string>) {
                return v;
            } else {
                return v.to_iso();
            }
        },
        value);
}

std::optional<AttrValue> parse_value(std::string_view text, ColumnType type) {
    if (text.empty()) return std::nullopt;
    switch (type) {
        case ColumnType::Int: {
            std::int64_t v = 0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec == std::errc{} && ptr == text.data() + text.size()) return v;
            // "60.0" in an int column
            double d = 0;
            auto [p2, e2] = std::from_chars(text.data(), text.data() + text.size(), d);
            if (e2 == std::errc{} && p2 == text.data() + text.size() && std::trunc(d) == d &&
                std::abs(d) < 9e15) {
                return std::int64_t(d);
            }
            return std::nullopt;
        }
        case ColumnType::Float: {
            double v = 0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(v)) return v;
            return std::nullopt;
        }
        case ColumnType::Boolean:
            if (text == "true" || text == "True" || text == "TRUE" || text == "1") return true;
            if (text == "false" || text == "False" || text == "FALSE" || text == "0") return false;
            return std::nullopt;
        case ColumnType::String:
            return std::string(text);
        case ColumnType::Datetime: {
            auto ts = Timestamp::parse_iso(text);
            if (!ts) return std::nullopt;
            return *ts;
        }
    }
    return std::nullopt;
}

std::optional<double> as_number(const AttrValue& value) {
    if (auto p = std::get_if<double>(&value)) return *p;
    if (auto p = std::get_if<std::int64_t>(&value)) return double(*p);
    if (auto p = std::get_if<bool>(&value)) return *p ? 1.0 : 0.0;
    return std::nullopt;
}

const Trace* EventLog::find(const std::string& case_id) const {
    auto it = std::lower_bound(traces.begin(), traces.end(), case_id,
                               [](const Trace& t, const std::string& id) { return t.case_id < id; });
    if (it == traces.end() || it->case_id != case_id) return nullptr;
    return &*it;
}

std::size_t EventLog::event_count() const {
    std::size_t n = 0;
    for (const auto& t : traces) n += t.events.size();
    return n;
}

CollectorMode parse_collector_mode(const std::string& name) {
    if (name == "single_table") return CollectorMode::SingleTable;
    if (name == "join") return CollectorMode::Join;
    if (name == "aggregate") return CollectorMode::Aggregate;
    throw Error("bad_config", "unknown collector mode '" + name + "'");
}

Aggregation parse_aggregation(const std::string& name) {
    if (name == "mean") return Aggregation::Mean;
    if (name == "min") return Aggregation::Min;
    if (name == "max") return Aggregation::Max;
    if (name == "sum") return Aggregation::Sum;
    if (name == "first") return Aggregation::First;
    if (name == "last") return Aggregation::Last;
    if (name == "count") return Aggregation::Count;
    throw Error("bad_config", "unknown aggregation '" + name + "'");
}

void CollectorSpec::validate() const {
    if (source_tables.empty()) throw Error("bad_config", "collector '" + name + "' has no source table");
    if (!activity && !activity_column) {
        throw Error("bad_config", "collector '" + name + "' needs an activity or activity_column");
    }
    if (mode == CollectorMode::Join && (source_tables.size() != 2 || join_keys.empty())) {
        throw Error("bad_config", "join collector '" + name + "' needs two tables and join keys");
    }
    if (mode == CollectorMode::Aggregate && aggregations.empty()) {
        throw Error("bad_config", "aggregate collector '" + name + "' declares no aggregation");
    }
}

namespace {

const SourceTable& table_named(const std::map<std::string, SourceTable>& tables, const std::string& name) {
    auto it = tables.find(name);
    if (it == tables.end()) throw Error("unknown_table", "no table named '" + name + "'");
    return it->second;
}

// A column reference resolved against one or two joined tables.
struct ColumnRef {
    int side = 0;  // 0 = left row, 1 = right row
    std::size_t index = 0;
    ColumnType type = ColumnType::String;
};

ColumnRef resolve(const std::string& column, const SourceTable& left, const SourceTable* right) {
    if (auto idx = left.find_column(column)) return {0, *idx, left.type_of(column)};
    if (right) {
        if (auto idx = right->find_column(column)) return {1, *idx, right->type_of(column)};
    }
    throw Error("unknown_column", "column '" + column + "' not found in table '" + left.name + "'" +
                                      (right ? " or '" + right->name + "'" : std::string{}));
}

const Cell& cell_at(const ColumnRef& ref, const std::vector<Cell>& left, const std::vector<Cell>* right) {
    return ref.side == 0 ? left[ref.index] : (*right)[ref.index];
}

bool is_true(const Cell& c) { return c && (*c == "true" || *c == "1"); }

}  // namespace

CollectResult collect_events(const CollectorSpec& spec, const std::map<std::string, SourceTable>& tables) {
    spec.validate();
    CollectResult result;

    const SourceTable& left = table_named(tables, spec.source_tables[0]);
    const SourceTable* right = spec.mode == CollectorMode::Join ? &table_named(tables, spec.source_tables[1]) : nullptr;

    const ColumnRef case_ref{0, left.column_index(left.case_id_column), ColumnType::String};
    const ColumnRef ts_ref = resolve(spec.timestamp_column, left, right);
    std::optional<ColumnRef> activity_ref;
    if (spec.activity_column) activity_ref = resolve(*spec.activity_column, left, right);
    std::optional<ColumnRef> inferred_ref;
    if (left.find_column(kTimeInferredColumn)) inferred_ref = resolve(kTimeInferredColumn, left, nullptr);

    std::vector<std::pair<ColumnRef, std::string>> attrs;
    for (const auto& [column, rename] : spec.attributes) attrs.emplace_back(resolve(column, left, right), rename);

    auto timestamp_of = [&](const std::vector<Cell>& l, const std::vector<Cell>* r) -> std::optional<Timestamp> {
        const auto& c = cell_at(ts_ref, l, r);
        if (!c || c->empty()) return std::nullopt;
        return Timestamp::parse_iso(*c);
    };
    auto activity_of = [&](const std::vector<Cell>& l, const std::vector<Cell>* r) {
        if (activity_ref) return cell_at(*activity_ref, l, r).value_or("");
        return *spec.activity;
    };

    auto emit_row = [&](const std::vector<Cell>& l, const std::vector<Cell>* r, std::size_t index) {
        auto ts = timestamp_of(l, r);
        if (!ts) {
            ++result.excluded_missing_timestamp;
            return;
        }
        EventRecord e;
        e.case_id = *l[case_ref.index];
        e.activity = activity_of(l, r);
        if (e.activity.empty()) {
            ++result.invalid_values;
            return;
        }
        e.timestamp = *ts;
        e.source = spec.name;
        e.source_index = index;
        for (const auto& [ref, name] : attrs) {
            const auto& c = cell_at(ref, l, r);
            if (!c || c->empty()) continue;
            auto v = parse_value(*c, ref.type);
            if (!v) {
                ++result.invalid_values;
                continue;
            }
            e.attributes[name] = std::move(*v);
        }
        if (inferred_ref && is_true(l[inferred_ref->index])) e.attributes[kTimeInferredAttribute] = true;
        result.events.push_back(std::move(e));
    };

    switch (spec.mode) {
        case CollectorMode::SingleTable:
            for (std::size_t i = 0; i < left.rows.size(); ++i) emit_row(left.rows[i], nullptr, i);
            break;

        case CollectorMode::Join: {
            std::vector<std::size_t> lk;
            std::vector<std::size_t> rk;
            for (const auto& k : spec.join_keys) {
                auto li = left.find_column(k);
                auto ri = right->find_column(k);
                if (!li || !ri) throw Error("unknown_column", "join key '" + k + "' absent from a joined table");
                lk.push_back(*li);
                rk.push_back(*ri);
            }
            std::map<std::vector<Cell>, std::vector<std::size_t>> index;
            for (std::size_t j = 0; j < right->rows.size(); ++j) {
                std::vector<Cell> key;
                for (auto k : rk) key.push_back(right->rows[j][k]);
                index[key].push_back(j);
            }
            std::size_t n = 0;
            for (const auto& row : left.rows) {
                std::vector<Cell> key;
                for (auto k : lk) key.push_back(row[k]);
                auto it = index.find(key);
                if (it == index.end()) continue;
                for (auto j : it->second) emit_row(row, &right->rows[j], n++);
            }
            break;
        }

        case CollectorMode::Aggregate: {
            std::vector<std::string> keys = spec.group_keys;
            if (keys.empty()) keys = {left.case_id_column, spec.timestamp_column};
            std::vector<std::size_t> key_idx;
            for (const auto& k : keys) key_idx.push_back(left.column_index(k));
            if (std::find(keys.begin(), keys.end(), left.case_id_column) == keys.end()) {
                throw Error("bad_config", "aggregate collector '" + spec.name + "' must group by the case column");
            }

            // Groups in order of first appearance.
            std::map<std::vector<Cell>, std::size_t> group_of;
            std::vector<std::vector<std::size_t>> groups;
            for (std::size_t i = 0; i < left.rows.size(); ++i) {
                std::vector<Cell> key;
                for (auto k : key_idx) key.push_back(left.rows[i][k]);
                auto [it, inserted] = group_of.emplace(std::move(key), groups.size());
                if (inserted) groups.emplace_back();
                groups[it->second].push_back(i);
            }

            for (std::size_t g = 0; g < groups.size(); ++g) {
                const auto& members = groups[g];
                std::optional<Timestamp> ts;
                bool inferred = false;
                for (auto i : members) {
                    auto t = timestamp_of(left.rows[i], nullptr);
                    if (t && (!ts || *t < *ts)) ts = t;
                    if (inferred_ref) inferred |= is_true(left.rows[i][inferred_ref->index]);
                }
                if (!ts) {
                    result.excluded_missing_timestamp += members.size();
                    continue;
                }
                EventRecord e;
                e.case_id = *left.rows[members.front()][case_ref.index];
                e.activity = activity_of(left.rows[members.front()], nullptr);
                e.timestamp = *ts;
                e.source = spec.name;
                e.source_index = g;
                for (const auto& [ref, name] : attrs) {
                    auto agg_it = spec.aggregations.find(left.columns[ref.index]);
                    const Aggregation agg = agg_it == spec.aggregations.end() ? Aggregation::First : agg_it->second;

                    std::vector<AttrValue> values;
                    for (auto i : members) {
                        const auto& c = left.rows[i][ref.index];
                        if (!c || c->empty()) continue;
                        if (auto v = parse_value(*c, ref.type)) {
                            values.push_back(std::move(*v));
                        } else {
                            ++result.invalid_values;
                        }
                    }
                    if (agg == Aggregation::Count) {
                        e.attributes[name] = std::int64_t(values.size());
                        continue;
                    }
                    if (values.empty()) continue;
                    if (agg == Aggregation::First) {
                        e.attributes[name] = values.front();
                        continue;
                    }
                    if (agg == Aggregation::Last) {
                        e.attributes[name] = values.back();
                        continue;
                    }
                    std::vector<double> nums;
                    for (const auto& v : values) {
                        if (auto d = as_number(v)) nums.push_back(*d);
                    }
                    if (nums.empty()) {
                        result.invalid_values += values.size();
                        continue;
                    }
                    double out = nums.front();
                    switch (agg) {
                        case Aggregation::Mean: {
                            double s = 0;
                            for (double d : nums) s += d;
                            out = s / double(nums.size());
                            break;
                        }
                        case Aggregation::Sum:
                            out = 0;
                            for (double d : nums) out += d;
                            break;
                        case Aggregation::Min: out = *std::min_element(nums.begin(), nums.end()); break;
                        case Aggregation::Max: out = *std::max_element(nums.begin(), nums.end()); break;
                        default: break;
                    }
                    e.attributes[name] = out;
                }
                if (inferred) e.attributes[kTimeInferredAttribute] = true;
                result.events.push_back(std::move(e));
            }
            break;
        }
    }
    return result;
}

std::map<std::string, AttributeMap> propagate_case_attributes(const std::vector<EventRecord>& events,
                                                              const SourceTable& demographics,
                                                              Diagnostics* diagnostics) {
    const auto case_idx = demographics.column_index(demographics.case_id_column);
    std::map<std::string, AttributeMap> by_case;
    for (const auto& row : demographics.rows) {
        const auto& case_id = *row[case_idx];
        AttributeMap attrs;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == case_idx || !row[c] || row[c]->empty()) continue;
            const auto& column = demographics.columns[c];
            if (auto v = parse_value(*row[c], demographics.type_of(column))) attrs[column] = std::move(*v);
        }
        if (!by_case.emplace(case_id, std::move(attrs)).second) {
            throw Error("duplicate_case_attributes",
                        "table '" + demographics.name + "' has more than one row for case '" + case_id + "'");
        }
    }

    std::map<std::string, AttributeMap> out;
    for (const auto& e : events) {
        if (out.contains(e.case_id)) continue;
        auto it = by_case.find(e.case_id);
        if (it == by_case.end()) {
            if (diagnostics) {
                diagnostics->warn("missing_case_attributes", "case '" + e.case_id + "' absent from '" +
                                                                 demographics.name + "'");
            }
            out[e.case_id] = {};
        } else {
            out[e.case_id] = it->second;
        }
    }
    return out;
}

std::size_t TieBreak::rank(const std::string& activity) const {
    std::size_t wildcard = activity_priority.size();
    for (std::size_t i = 0; i < activity_priority.size(); ++i) {
        if (activity_priority[i] == activity) return i;
        if (activity_priority[i] == "*") wildcard = i;
    }
    return wildcard;
}

bool canonical_less(const EventRecord& a, const EventRecord& b, const TieBreak& tie_break) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    const auto ra = tie_break.rank(a.activity);
    const auto rb = tie_break.rank(b.activity);
    return std::tie(ra, a.source, a.source_index, a.activity, a.attributes) <
           std::tie(rb, b.source, b.source_index, b.activity, b.attributes);
}

EventLog build_traces(std::vector<EventRecord> events, std::map<std::string, AttributeMap> case_attributes,
                      const TieBreak& tie_break) {
    std::map<std::string, std::vector<EventRecord>> grouped;
    for (auto& e : events) {
        if (e.case_id.empty() || e.activity.empty()) {
            throw Error("invalid_event", "event with empty case id or activity");
        }
        grouped[e.case_id].push_back(std::move(e));
    }
    EventLog log;
    for (auto& [case_id, evs] : grouped) {
        std::sort(evs.begin(), evs.end(),
                  [&](const EventRecord& a, const EventRecord& b) { return canonical_less(a, b, tie_break); });
        Trace trace;
        trace.case_id = case_id;
        for (const auto& e : evs) log.activity_alphabet.insert(e.activity);
        trace.events = std::move(evs);
        if (auto it = case_attributes.find(case_id); it != case_attributes.end()) {
            trace.case_attributes = std::move(it->second);
        }
        log.traces.push_back(std::move(trace));
    }
    return log;
}

namespace {

constexpr std::string_view kCasePrefix = "case:";

void note_type(std::map<std::string, ColumnType>& types, const std::string& name, const AttrValue& v) {
    auto [it, inserted] = types.emplace(name, type_of(v));
    if (!inserted && it->second != type_of(v)) {
        throw Error("type_mismatch", "attribute '" + name + "' has both " + to_string(it->second) + " and " +
                                         to_string(type_of(v)) + " values");
    }
}

void check_attribute_name(const std::string& name) {
    if (name == "case_id" || name == "activity" || name == "timestamp" || name.starts_with(kCasePrefix)) {
        throw Error("reserved_attribute", "attribute name '" + name + "' is reserved in the event-log format");
    }
}

}  // namespace

std::string to_csv(const EventLog& log) {
    std::map<std::string, ColumnType> event_types;
    std::map<std::string, ColumnType> case_types;
    for (const auto& t : log.traces) {
        for (const auto& [k, v] : t.case_attributes) note_type(case_types, k, v);
        for (const auto& e : t.events) {
            for (const auto& [k, v] : e.attributes) {
                check_attribute_name(k);
                note_type(event_types, k, v);
            }
        }
    }

    std::ostringstream out;
    csv::Row header{"case_id", "activity", "timestamp"};
    csv::Row types{"id", "string", "datetime"};
    for (const auto& [k, type] : event_types) {
        header.push_back(k);
        types.push_back(to_string(type));
    }
    for (const auto& [k, type] : case_types) {
        header.push_back(std::string(kCasePrefix) + k);
        types.push_back(to_string(type));
    }
    csv::write_row(out, header);
    csv::write_row(out, types);

    csv::Row row;
    for (const auto& t : log.traces) {
        for (const auto& e : t.events) {
            row.assign({e.case_id, e.activity, e.timestamp.to_iso()});
            for (const auto& [k, _] : event_types) {
                auto it = e.attributes.find(k);
                row.push_back(it == e.attributes.end() ? "" : format_value(it->second));
            }
            for (const auto& [k, _] : case_types) {
                auto it = t.case_attributes.find(k);
                row.push_back(it == t.case_attributes.end() ? "" : format_value(it->second));
            }
            csv::write_row(out, row);
        }
    }
    return out.str();
}

void write_csv(const EventLog& log, const std::filesystem::path& path) {
    const auto text = to_csv(log);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    out << text;
}

EventLog read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.string());
}

EventLog parse_csv(std::string_view text, std::string_view origin) {
    auto doc = csv::parse(text, ',', origin);
    const std::string where(origin);
    if (doc.header.size() < 3 || doc.header[0] != "case_id" || doc.header[1] != "activity" ||
        doc.header[2] != "timestamp") {
        throw Error("malformed_log", where + ": header must start with case_id,activity,timestamp");
    }
    if (doc.rows.empty()) throw Error("malformed_log", where + ": missing type-tag row");
    const auto& tags = doc.rows.front();
    if (tags[0] != "id" || tags[1] != "string" || tags[2] != "datetime") {
        throw Error("type_mismatch", where + ": type-tag row must start with id,string,datetime");
    }
    std::vector<ColumnType> types;
    for (std::size_t c = 3; c < tags.size(); ++c) {
        try {
            types.push_back(parse_column_type(tags[c]));
        } catch (const Error&) {
            throw Error("type_mismatch", where + ": unknown type tag '" + tags[c] + "' for column '" +
                                             doc.header[c] + "'");
        }
    }

    std::map<std::string, Trace> traces;
    for (std::size_t r = 1; r < doc.rows.size(); ++r) {
        const auto& row = doc.rows[r];
        const auto line = std::to_string(doc.lines[r]);
        if (row[0].empty() || row[1].empty()) {
            throw Error("malformed_log", where + ": line " + line + " has an empty case id or activity");
        }
        auto ts = Timestamp::parse_iso(row[2]);
        if (!ts) throw Error("malformed_log", where + ": line " + line + " has invalid timestamp '" + row[2] + "'");

        EventRecord e;
        e.case_id = row[0];
        e.activity = row[1];
        e.timestamp = *ts;
        e.source_index = r;
        AttributeMap case_attrs;
        for (std::size_t c = 3; c < row.size(); ++c) {
            if (row[c].empty()) continue;
            auto v = parse_value(row[c], types[c - 3]);
            if (!v) {
                throw Error("type_mismatch", where + ": line " + line + " column '" + doc.header[c] +
                                                 "' value '" + row[c] + "' is not " + to_string(types[c - 3]));
            }
            const auto& name = doc.header[c];
            if (std::string_view(name).starts_with(kCasePrefix)) {
                case_attrs[name.substr(kCasePrefix.size())] = std::move(*v);
            } else {
                e.attributes[name] = std::move(*v);
            }
        }
        auto [it, inserted] = traces.try_emplace(e.case_id);
        auto& trace = it->second;
        if (inserted) {
            trace.case_id = e.case_id;
            trace.case_attributes = std::move(case_attrs);
        } else if (trace.case_attributes != case_attrs) {
            throw Error("malformed_log", where + ": line " + line + " disagrees with earlier case attributes of '" +
                                             e.case_id + "'");
        }
        trace.events.push_back(std::move(e));
    }

    EventLog log;
    for (auto& [_, trace] : traces) {
        std::stable_sort(trace.events.begin(), trace.events.end(),
                         [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
        for (const auto& e : trace.events) log.activity_alphabet.insert(e.activity);
        log.traces.push_back(std::move(trace));
    }
    return log;
}

}  // namespace pathmon
