#include "pathmon/featurize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "pathmon/csv.hpp"
#include "pathmon/digest.hpp"

namespace pathmon {

using json = nlohmann::ordered_json;

SignalAggregate parse_signal_aggregate(const std::string& name) {
    if (name == "latest") return SignalAggregate::Latest;
    if (name == "min") return SignalAggregate::Min;
    if (name == "max") return SignalAggregate::Max;
    if (name == "mean") return SignalAggregate::Mean;
    throw Error("bad_config", "unknown signal aggregation '" + name + "'");
}

const char* to_string(SignalAggregate agg) {
    switch (agg) {
        case SignalAggregate::Latest: return "latest";
        case SignalAggregate::Min: return "min";
        case SignalAggregate::Max: return "max";
        case SignalAggregate::Mean: return "mean";
    }
    return "latest";
}

double NamedValues::at(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return values[i];
    }
    throw Error("unknown_feature", "no feature named '" + std::string(name) + "'");
}

namespace {

bool same_bits(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

// Lookup tables derived from a spec.
struct SpecIndex {
    std::unordered_map<std::string, std::size_t> activity;
    std::map<std::pair<std::string, std::string>, std::size_t> transition;
    std::map<std::string, std::unordered_map<std::string, std::size_t>> levels;

    explicit SpecIndex(const FeatureSpec& spec) {
        for (std::size_t i = 0; i < spec.activity_vocabulary.size(); ++i) activity[spec.activity_vocabulary[i]] = i;
        for (std::size_t i = 0; i < spec.transition_vocabulary.size(); ++i) {
            transition[spec.transition_vocabulary[i]] = i;
        }
        for (const auto& [attr, ls] : spec.categorical_levels) {
            auto& m = levels[attr];
            for (std::size_t i = 0; i < ls.size(); ++i) m[ls[i]] = i;
        }
    }
};

struct Column {
    std::string name;
    bool scaled = true;
};

std::vector<Column> temporal_columns() {
    return {{"elapsed_total"},  {"time_since_admission"}, {"time_since_admission_missing", false},
            {"gap_mean"},       {"gap_max"},              {"gap_last"},
            {"gaps_missing", false}, {"has_inferred_time"}};
}

std::vector<Column> activity_columns(const FeatureSpec& spec) {
    std::vector<Column> cols;
    for (const char* kind : {"act_count", "act_freq", "last_act"}) {
        for (const auto& a : spec.activity_vocabulary) cols.push_back({std::string(kind) + "[" + a + "]"});
        cols.push_back({std::string(kind) + "[" + kOutOfVocabulary + "]"});
    }
    return cols;
}

std::vector<Column> transition_columns(const FeatureSpec& spec) {
    std::vector<Column> cols;
    for (const auto& [a, b] : spec.transition_vocabulary) cols.push_back({"trans[" + a + "->" + b + "]"});
    cols.push_back({std::string("trans[") + kOutOfVocabulary + "]"});
    return cols;
}

std::vector<Column> clinical_columns(const FeatureSpec& spec) {
    std::vector<Column> cols;
    for (const auto& s : spec.config.signals) {
        for (auto agg : s.aggregations) cols.push_back({s.name + "_" + to_string(agg)});
        cols.push_back({s.name + "_missing", false});
    }
    return cols;
}

std::vector<Column> case_columns(const FeatureSpec& spec) {
    std::vector<Column> cols;
    for (const auto& c : spec.config.case_attributes) {
        if (c.encoding == CaseEncoding::Numeric) {
            cols.push_back({"case_" + c.name});
            cols.push_back({"case_" + c.name + "_missing", false});
        } else {
            auto it = spec.categorical_levels.find(c.name);
            if (it != spec.categorical_levels.end()) {
                for (const auto& level : it->second) cols.push_back({"case_" + c.name + "=" + level});
            }
            cols.push_back({"case_" + c.name + "=" + kOutOfVocabulary});
        }
    }
    return cols;
}

std::vector<Column> all_columns(const FeatureSpec& spec) {
    std::vector<Column> cols;
    for (auto&& family : {temporal_columns(), activity_columns(spec), transition_columns(spec),
                          clinical_columns(spec), case_columns(spec)}) {
        cols.insert(cols.end(), family.begin(), family.end());
    }
    return cols;
}

bool is_inferred(const EventRecord& e) {
    auto it = e.attributes.find(kTimeInferredAttribute);
    return it != e.attributes.end() && std::holds_alternative<bool>(it->second) && std::get<bool>(it->second);
}

// Each writer fills its family's slots starting at `out` and returns the
// number written.
std::size_t write_temporal(const Prefix& p, const FeatureSpec& spec, double* out) {
    const auto& ev = p.events;
    const auto last = ev.back().timestamp;
    out[0] = double(last - ev.front().timestamp);

    out[1] = kMissing;
    for (const auto& e : ev) {
        if (e.activity == spec.config.admission_activity) {
            out[1] = double(last - e.timestamp);
            break;
        }
    }
    out[2] = std::isnan(out[1]) ? 1.0 : 0.0;

    if (ev.size() >= 2) {
        double sum = 0;
        double max_gap = 0;
        for (std::size_t i = 1; i < ev.size(); ++i) {
            const double g = double(ev[i].timestamp - ev[i - 1].timestamp);
            sum += g;
            max_gap = i == 1 ? g : std::max(max_gap, g);
        }
        out[3] = sum / double(ev.size() - 1);
        out[4] = max_gap;
        out[5] = double(ev.back().timestamp - ev[ev.size() - 2].timestamp);
        out[6] = 0.0;
    } else {
        out[3] = out[4] = out[5] = kMissing;
        out[6] = 1.0;
    }
    out[7] = std::any_of(ev.begin(), ev.end(), is_inferred) ? 1.0 : 0.0;
    return 8;
}

std::size_t write_activity(const Prefix& p, const FeatureSpec& spec, const SpecIndex& index, double* out) {
    const std::size_t v = spec.activity_vocabulary.size() + 1;  // + OOV
    std::fill(out, out + 3 * v, 0.0);
    auto slot = [&](const std::string& a) {
        auto it = index.activity.find(a);
        return it == index.activity.end() ? v - 1 : it->second;
    };
    for (const auto& e : p.events) out[slot(e.activity)] += 1.0;
    const double k = double(p.events.size());
    for (std::size_t i = 0; i < v; ++i) out[v + i] = out[i] / k;
    out[2 * v + slot(p.events.back().activity)] = 1.0;
    return 3 * v;
}

std::size_t write_transition(const Prefix& p, const FeatureSpec& spec, const SpecIndex& index, double* out) {
    const std::size_t v = spec.transition_vocabulary.size() + 1;
    std::fill(out, out + v, 0.0);
    for (std::size_t i = 1; i < p.events.size(); ++i) {
        auto it = index.transition.find({p.events[i - 1].activity, p.events[i].activity});
        out[it == index.transition.end() ? v - 1 : it->second] += 1.0;
    }
    return v;
}

std::size_t write_clinical(const Prefix& p, const FeatureSpec& spec, double* out, std::size_t* invalid) {
    std::size_t n = 0;
    for (const auto& s : spec.config.signals) {
        double latest = kMissing;
        double lo = kMissing;
        double hi = kMissing;
        double sum = 0;
        std::size_t count = 0;
        for (const auto& e : p.events) {
            auto it = e.attributes.find(s.name);
            if (it == e.attributes.end()) continue;
            auto x = as_number(it->second);
            if (!x || !std::isfinite(*x)) {
                if (invalid) ++*invalid;
                continue;
            }
            latest = *x;
            lo = count ? std::min(lo, *x) : *x;
            hi = count ? std::max(hi, *x) : *x;
            sum += *x;
            ++count;
        }
        for (auto agg : s.aggregations) {
            switch (agg) {
                case SignalAggregate::Latest: out[n++] = latest; break;
                case SignalAggregate::Min: out[n++] = lo; break;
                case SignalAggregate::Max: out[n++] = hi; break;
                case SignalAggregate::Mean: out[n++] = count ? sum / double(count) : kMissing; break;
            }
        }
        out[n++] = count ? 0.0 : 1.0;
    }
    return n;
}

std::optional<double> numeric_case_value(const AttrValue& v) {
    if (auto d = as_number(v)) return d;
    if (auto s = std::get_if<std::string>(&v)) {
        if (auto parsed = parse_value(*s, ColumnType::Float)) return std::get<double>(*parsed);
    }
    return std::nullopt;
}

std::size_t write_case(const Trace& trace, const FeatureSpec& spec, const SpecIndex& index, double* out) {
    std::size_t n = 0;
    for (const auto& c : spec.config.case_attributes) {
        auto it = trace.case_attributes.find(c.name);
        if (c.encoding == CaseEncoding::Numeric) {
            std::optional<double> x;
            if (it != trace.case_attributes.end()) x = numeric_case_value(it->second);
            out[n++] = x ? *x : kMissing;
            out[n++] = x ? 0.0 : 1.0;
            continue;
        }
        auto levels = index.levels.find(c.name);
        const std::size_t v = (levels == index.levels.end() ? 0 : levels->second.size()) + 1;
        std::fill(out + n, out + n + v, 0.0);
        if (it != trace.case_attributes.end()) {
            const auto text = format_value(it->second);
            std::size_t slot = v - 1;
            if (levels != index.levels.end()) {
                if (auto l = levels->second.find(text); l != levels->second.end()) slot = l->second;
            }
            out[n + slot] = 1.0;
        }
        n += v;
    }
    return n;
}

void fill_raw(const Prefix& p, const Trace& trace, const FeatureSpec& spec, const SpecIndex& index, double* out,
              std::size_t* invalid) {
    if (p.events.empty()) throw Error("empty_prefix", "prefix '" + p.prefix_id + "' has no events");
    double* cursor = out;
    cursor += write_temporal(p, spec, cursor);
    cursor += write_activity(p, spec, index, cursor);
    cursor += write_transition(p, spec, index, cursor);
    cursor += write_clinical(p, spec, cursor, invalid);
    cursor += write_case(trace, spec, index, cursor);
}

NamedValues named(std::vector<Column> cols, std::vector<double> values) {
    NamedValues nv;
    for (auto& c : cols) nv.names.push_back(std::move(c.name));
    nv.values = std::move(values);
    return nv;
}

const Trace& trace_for(const EventLog& log, const Prefix& p) {
    const Trace* t = log.find(p.case_id);
    if (!t || p.length > t->events.size()) {
        throw Error("unknown_prefix", "prefix '" + p.prefix_id + "' references events absent from the log");
    }
    return *t;
}

}  // namespace

NamedValues temporal_features(const Prefix& prefix, const FeatureSpec& spec) {
    auto cols = temporal_columns();
    std::vector<double> v(cols.size());
    write_temporal(prefix, spec, v.data());
    return named(std::move(cols), std::move(v));
}

NamedValues activity_features(const Prefix& prefix, const FeatureSpec& spec) {
    auto cols = activity_columns(spec);
    std::vector<double> v(cols.size());
    write_activity(prefix, spec, SpecIndex(spec), v.data());
    return named(std::move(cols), std::move(v));
}

NamedValues transition_features(const Prefix& prefix, const FeatureSpec& spec) {
    auto cols = transition_columns(spec);
    std::vector<double> v(cols.size());
    write_transition(prefix, spec, SpecIndex(spec), v.data());
    return named(std::move(cols), std::move(v));
}

NamedValues clinical_aggregates(const Prefix& prefix, const FeatureSpec& spec) {
    auto cols = clinical_columns(spec);
    std::vector<double> v(cols.size());
    write_clinical(prefix, spec, v.data(), nullptr);
    return named(std::move(cols), std::move(v));
}

NamedValues case_features(const Prefix&, const Trace& trace, const FeatureSpec& spec) {
    auto cols = case_columns(spec);
    std::vector<double> v(cols.size());
    write_case(trace, spec, SpecIndex(spec), v.data());
    return named(std::move(cols), std::move(v));
}

Eigen::VectorXd raw_feature_row(const Prefix& prefix, const Trace& trace, const FeatureSpec& spec,
                                std::size_t* invalid_observations) {
    Eigen::VectorXd row(all_columns(spec).size());
    fill_raw(prefix, trace, spec, SpecIndex(spec), row.data(), invalid_observations);
    return row;
}

FeatureSpec fit_spec(const PrefixDataset& train, const EventLog& log, const FeatureConfig& config) {
    if (train.prefixes.empty()) throw Error("empty_training_set", "cannot fit features on an empty training set");

    FeatureSpec spec;
    spec.config = config;

    std::set<std::string> activities;
    std::set<std::pair<std::string, std::string>> transitions;
    std::map<std::string, std::set<std::string>> levels;
    std::set<std::string> cases;
    for (const auto& p : train.prefixes) {
        const auto& ev = p.events;
        activities.insert(ev.back().activity);
        if (ev.size() >= 2) transitions.emplace(ev[ev.size() - 2].activity, ev.back().activity);
        cases.insert(p.case_id);
    }
    for (const auto& case_id : cases) {
        const Trace& trace = *log.find(case_id);
        for (const auto& c : config.case_attributes) {
            if (c.encoding != CaseEncoding::OneHot) continue;
            auto& ls = levels[c.name];
            if (auto it = trace.case_attributes.find(c.name); it != trace.case_attributes.end()) {
                ls.insert(format_value(it->second));
            }
        }
    }
    spec.activity_vocabulary.assign(activities.begin(), activities.end());
    spec.transition_vocabulary.assign(transitions.begin(), transitions.end());
    for (auto& [k, ls] : levels) spec.categorical_levels[k].assign(ls.begin(), ls.end());

    const auto cols = all_columns(spec);
    for (const auto& c : cols) {
        spec.column_names.push_back(c.name);
        spec.scaled.push_back(c.scaled);
    }
    {
        std::set<std::string> unique(spec.column_names.begin(), spec.column_names.end());
        if (unique.size() != spec.column_names.size()) {
            throw Error("duplicate_feature", "feature column names collide; rename activities or attributes");
        }
    }

    // Two passes over the raw training rows: mean, then variance.
    const SpecIndex index(spec);
    const auto width = Eigen::Index(cols.size());
    Eigen::MatrixXd raw(Eigen::Index(train.prefixes.size()), width);
    for (std::size_t i = 0; i < train.prefixes.size(); ++i) {
        const auto& p = train.prefixes[i];
        Eigen::VectorXd row(width);
        fill_raw(p, trace_for(log, p), spec, index, row.data(), nullptr);
        raw.row(Eigen::Index(i)) = row.transpose();
    }
    spec.mean = Eigen::VectorXd::Zero(width);
    spec.stddev = Eigen::VectorXd::Zero(width);
    for (Eigen::Index j = 0; j < width; ++j) {
        const auto column = raw.col(j);
        const auto present = column.array().isFinite();
        const auto n = present.count();
        if (n == 0) continue;
        const double mean = present.select(column.array(), 0.0).sum() / double(n);
        const double var = present.select((column.array() - mean).square(), 0.0).sum() / double(n);
        spec.mean[j] = mean;
        spec.stddev[j] = std::sqrt(var);
    }
    return spec;
}

Eigen::MatrixXd standardize(const FeatureSpec& spec, const Eigen::MatrixXd& raw) {
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const auto column = raw.col(j).array();
        if (!spec.scaled[std::size_t(j)]) {
            out.col(j) = column.isFinite().select(column, 0.0);
        } else if (spec.stddev[j] == 0.0) {
            out.col(j).setZero();
        } else {
            out.col(j) = column.isFinite().select((column - spec.mean[j]) / spec.stddev[j], 0.0);
        }
    }
    return out;
}

Eigen::MatrixXd inverse_standardize(const FeatureSpec& spec, const Eigen::MatrixXd& standardized) {
    Eigen::MatrixXd out = standardized;
    for (Eigen::Index j = 0; j < standardized.cols(); ++j) {
        if (!spec.scaled[std::size_t(j)]) continue;
        out.col(j) = (standardized.col(j).array() * spec.stddev[j] + spec.mean[j]).matrix();
    }
    return out;
}

Eigen::VectorXd FeatureTable::label_vector() const {
    Eigen::VectorXd y(Eigen::Index(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) y[Eigen::Index(i)] = labels[i];
    return y;
}

FeatureTable FeatureTable::subset(const std::set<std::string>& cases) const {
    FeatureTable out;
    out.spec = spec;
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < case_ids.size(); ++i) {
        if (!cases.contains(case_ids[i])) continue;
        keep.push_back(Eigen::Index(i));
        out.prefix_ids.push_back(prefix_ids[i]);
        out.case_ids.push_back(case_ids[i]);
        out.lengths.push_back(lengths[i]);
        out.labels.push_back(labels[i]);
    }
    out.values = values(keep, Eigen::all);
    return out;
}

FeatureTable build_feature_table(const PrefixDataset& dataset, const EventLog& log, const FeatureSpec& spec) {
    std::vector<std::size_t> order(dataset.prefixes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = dataset.prefixes[a];
        const auto& pb = dataset.prefixes[b];
        return std::tie(pa.case_id, pa.length) < std::tie(pb.case_id, pb.length);
    });

    FeatureTable table;
    table.spec = spec;
    const SpecIndex index(spec);
    Eigen::MatrixXd raw(Eigen::Index(order.size()), spec.width());
    Eigen::VectorXd row(spec.width());
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& p = dataset.prefixes[order[r]];
        fill_raw(p, trace_for(log, p), spec, index, row.data(), &table.invalid_observations);
        raw.row(Eigen::Index(r)) = row.transpose();
        table.prefix_ids.push_back(p.prefix_id);
        table.case_ids.push_back(p.case_id);
        table.lengths.push_back(p.length);
        table.labels.push_back(p.label);
    }
    table.values = standardize(spec, raw);
    return table;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

json eigen_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

}  // namespace

std::string spec_to_json(const FeatureSpec& spec) {
    json j;
    j["format"] = "pathmon-feature-spec";
    j["version"] = 1;
    j["admission_activity"] = spec.config.admission_activity;
    j["signals"] = json::array();
    for (const auto& s : spec.config.signals) {
        json aggs = json::array();
        for (auto a : s.aggregations) aggs.push_back(to_string(a));
        j["signals"].push_back({{"name", s.name}, {"aggregations", aggs}});
    }
    j["case_attributes"] = json::array();
    for (const auto& c : spec.config.case_attributes) {
        j["case_attributes"].push_back(
            {{"name", c.name}, {"encoding", c.encoding == CaseEncoding::Numeric ? "numeric" : "one_hot"}});
    }
    j["activity_vocabulary"] = spec.activity_vocabulary;
    j["transition_vocabulary"] = json::array();
    for (const auto& [a, b] : spec.transition_vocabulary) j["transition_vocabulary"].push_back({a, b});
    j["categorical_levels"] = spec.categorical_levels;
    j["columns"] = spec.column_names;
    j["scaled"] = spec.scaled;
    j["mean"] = eigen_to_json(spec.mean);
    j["stddev"] = eigen_to_json(spec.stddev);
    return j.dump(2) + "\n";
}

FeatureSpec spec_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("malformed_spec", std::string("feature spec: ") + e.what());
    }
    if (j.value("format", "") != "pathmon-feature-spec") throw Error("malformed_spec", "not a feature spec document");
    try {
        FeatureSpec spec;
        spec.config.admission_activity = j.at("admission_activity").get<std::string>();
        for (const auto& s : j.at("signals")) {
            SignalSpec sig;
            sig.name = s.at("name").get<std::string>();
            sig.aggregations.clear();
            for (const auto& a : s.at("aggregations")) sig.aggregations.push_back(parse_signal_aggregate(a.get<std::string>()));
            spec.config.signals.push_back(std::move(sig));
        }
        for (const auto& c : j.at("case_attributes")) {
            spec.config.case_attributes.push_back(
                {c.at("name").get<std::string>(),
                 c.at("encoding").get<std::string>() == "one_hot" ? CaseEncoding::OneHot : CaseEncoding::Numeric});
        }
        spec.activity_vocabulary = j.at("activity_vocabulary").get<std::vector<std::string>>();
        for (const auto& t : j.at("transition_vocabulary")) {
            spec.transition_vocabulary.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::string>());
        }
        spec.categorical_levels = j.at("categorical_levels").get<std::map<std::string, std::vector<std::string>>>();
        spec.column_names = j.at("columns").get<std::vector<std::string>>();
        spec.scaled = j.at("scaled").get<std::vector<bool>>();
        const auto mean = j.at("mean").get<std::vector<double>>();
        const auto sd = j.at("stddev").get<std::vector<double>>();
        spec.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), Eigen::Index(mean.size()));
        spec.stddev = Eigen::Map<const Eigen::VectorXd>(sd.data(), Eigen::Index(sd.size()));

        std::vector<std::string> expected;
        for (const auto& c : all_columns(spec)) expected.push_back(c.name);
        if (expected != spec.column_names || spec.scaled.size() != expected.size() ||
            spec.mean.size() != spec.width() || spec.stddev.size() != spec.width()) {
            throw Error("malformed_spec", "feature spec columns are inconsistent with its vocabularies");
        }
        return spec;
    } catch (const json::exception& e) {
        throw Error("malformed_spec", std::string("feature spec: ") + e.what());
    }
}

std::string FeatureSpec::fingerprint() const { return sha256_hex(spec_to_json(*this)); }

bool operator==(const FeatureSpec& a, const FeatureSpec& b) {
    auto same_vec = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        if (x.size() != y.size()) return false;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (!same_bits(x[i], y[i])) return false;
        }
        return true;
    };
    return spec_to_json(a) == spec_to_json(b) && same_vec(a.mean, b.mean) && same_vec(a.stddev, b.stddev);
}

std::string feature_table_to_csv(const FeatureTable& table) {
    std::ostringstream out;
    csv::Row header{"prefix_id", "case_id", "length", "label"};
    header.insert(header.end(), table.spec.column_names.begin(), table.spec.column_names.end());
    csv::write_row(out, header);
    csv::Row row;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        const auto r = std::size_t(i);
        row.assign({table.prefix_ids[r], table.case_ids[r], std::to_string(table.lengths[r]),
                    std::to_string(table.labels[r])});
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) row.push_back(format_double(table.values(i, j)));
        csv::write_row(out, row);
    }
    return out.str();
}

void write_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    out << feature_table_to_csv(table);
}

FeatureTable read_feature_table(const std::filesystem::path& path, const FeatureSpec& spec) {
    auto doc = csv::read(path);
    csv::Row expected{"prefix_id", "case_id", "length", "label"};
    expected.insert(expected.end(), spec.column_names.begin(), spec.column_names.end());
    if (doc.header != expected) {
        throw Error("spec_mismatch", path.string() + ": feature columns do not match the feature spec");
    }
    FeatureTable table;
    table.spec = spec;
    table.values.resize(Eigen::Index(doc.rows.size()), spec.width());
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto& row = doc.rows[r];
        table.prefix_ids.push_back(row[0]);
        table.case_ids.push_back(row[1]);
        std::size_t length = 0;
        int label = 0;
        std::from_chars(row[2].data(), row[2].data() + row[2].size(), length);
        std::from_chars(row[3].data(), row[3].data() + row[3].size(), label);
        table.lengths.push_back(length);
        table.labels.push_back(label);
        for (std::size_t c = 4; c < row.size(); ++c) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(row[c].data(), row[c].data() + row[c].size(), v);
            if (ec != std::errc{} || ptr != row[c].data() + row[c].size() || !std::isfinite(v)) {
                throw Error("malformed_features", path.string() + ": line " + std::to_string(doc.lines[r]) +
                                                      " has a non-numeric feature value");
            }
            table.values(Eigen::Index(r), Eigen::Index(c - 4)) = v;
        }
    }
    return table;
}

}  // namespace pathmon
