#include "pathmon/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "pathmon/digest.hpp"
#include "pathmon/evaluate.hpp"
#include "pathmon/learn.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace pathmon {

Stage parse_stage(std::string_view name) {
    if (name == "lift") return Stage::Lift;
    if (name == "log") return Stage::Log;
    if (name == "prefixes") return Stage::Prefixes;
    if (name == "features") return Stage::Features;
    if (name == "train") return Stage::Train;
    if (name == "evaluate") return Stage::Evaluate;
    if (name == "synth") return Stage::Synth;
    if (name == "all") return Stage::All;
    throw Error("bad_stage", "unknown stage '" + std::string(name) + "'");
}

const char* to_string(Stage stage) {
    switch (stage) {
        case Stage::Lift: return "lift";
        case Stage::Log: return "log";
        case Stage::Prefixes: return "prefixes";
        case Stage::Features: return "features";
        case Stage::Train: return "train";
        case Stage::Evaluate: return "evaluate";
        case Stage::Synth: return "synth";
        case Stage::All: return "all";
    }
    return "?";
}

std::string PipelineConfig::fingerprint() const { return sha256_hex(effective_json); }

// ---------------------------------------------------------------- config

namespace {

std::string text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("write_failed", "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write_failed", "error while writing '" + path.string() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error("bad_config", std::string("config key '") + key + "' has the wrong type");
    }
}

std::vector<std::string> strings(const json& j, const char* key) {
    return get_or(j, key, std::vector<std::string>{});
}

const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) throw Error("bad_config", where + ": missing '" + key + "'");
    return *it;
}

TableSchema parse_table(const json& j, const fs::path& base) {
    TableSchema t;
    t.name = require(j, "name", "table").get<std::string>();
    const auto where = "table '" + t.name + "'";
    t.path = base / require(j, "path", where).get<std::string>();
    t.case_column = require(j, "case_column", where).get<std::string>();
    auto delim = get_or<std::string>(j, "delimiter", ",");
    if (delim.size() != 1) throw Error("bad_config", where + ": delimiter must be one character");
    t.delimiter = delim[0];
    t.timezone = UtcOffset::parse(get_or<std::string>(j, "timezone", "UTC"));
    for (const auto& [col, type] : get_or(j, "column_types", std::map<std::string, std::string>{})) {
        t.column_types[col] = parse_column_type(type);
    }
    for (auto& c : strings(j, "nullable")) t.nullable.insert(std::move(c));
    if (auto it = j.find("timestamp"); it != j.end() && !it->is_null()) {
        TimestampSource ts;
        ts.date_column = require(*it, "date", where + " timestamp").get<std::string>();
        if (auto time = it->find("time"); time != it->end() && !time->is_null()) ts.time_column = time->get<std::string>();
        t.timestamp = ts;
    }
    if (j.contains("activity")) t.activity = j["activity"].get<std::string>();
    if (j.contains("activity_column")) t.activity_column = j["activity_column"].get<std::string>();
    t.compress_keys = strings(j, "compress_keys");
    if (t.is_event_table() && !t.activity && !t.activity_column) {
        throw Error("bad_config", where + ": event tables need 'activity' or 'activity_column'");
    }
    return t;
}

CollectorSpec parse_collector(const json& j) {
    CollectorSpec c;
    c.name = require(j, "name", "collector").get<std::string>();
    c.mode = parse_collector_mode(get_or<std::string>(j, "mode", "single_table"));
    c.source_tables = strings(j, "tables");
    c.timestamp_column = get_or<std::string>(j, "timestamp_column", kTimestampColumn);
    if (j.contains("activity")) c.activity = j["activity"].get<std::string>();
    if (j.contains("activity_column")) c.activity_column = j["activity_column"].get<std::string>();
    for (const auto& [col, name] : get_or(j, "attributes", std::map<std::string, std::string>{})) {
        c.attributes.emplace_back(col, name);
    }
    c.join_keys = strings(j, "join_keys");
    c.group_keys = strings(j, "group_keys");
    for (const auto& [col, agg] : get_or(j, "aggregations", std::map<std::string, std::string>{})) {
        c.aggregations[col] = parse_aggregation(agg);
    }
    c.validate();
    return c;
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir, const ConfigOverrides& overrides) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error("bad_config", std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error("bad_config", "config must be a JSON object");
    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.output_dir) doc["output_dir"] = overrides.output_dir->string();
    if (overrides.model) doc["model"] = *overrides.model;

    PipelineConfig c;
    c.effective_json = doc.dump(2);
    c.seed = get_or<std::uint64_t>(doc, "seed", 42);
    {
        fs::path out = get_or<std::string>(doc, "output_dir", "out");
        // --out is taken as given (relative to the working directory); a path
        // in the document is relative to the document.
        c.output_dir = (overrides.output_dir || out.is_absolute() ? out : base_dir / out).lexically_normal();
    }

    const auto source = get_or<std::string>(doc, "source", "tables");
    if (source != "tables" && source != "synthetic") {
        throw Error("bad_config", "source must be 'tables' or 'synthetic'");
    }
    c.synthetic = source == "synthetic";
    const auto synth = get_or(doc, "synth", json::object());
    c.synth.n_cases = get_or<std::size_t>(synth, "n_cases", c.synth.n_cases);
    c.synth.positive_rate = get_or<double>(synth, "positive_rate", c.synth.positive_rate);
    c.synth.mean_trace_length = get_or<double>(synth, "mean_trace_length", c.synth.mean_trace_length);
    c.synth.signal_onset_position = get_or<std::size_t>(synth, "signal_onset_position", c.synth.signal_onset_position);
    c.synth.noise_level = get_or<double>(synth, "noise_level", c.synth.noise_level);
    c.synth.seed = c.seed;
    c.synth.validate();

    for (const auto& t : get_or(doc, "tables", json::array())) c.lift.tables.push_back(parse_table(t, base_dir));
    for (const auto& r : get_or(doc, "rules", json::array())) {
        CorrectionRule rule;
        rule.id = require(r, "id", "rule").get<std::string>();
        rule.subject_activity = require(r, "subject", "rule '" + rule.id + "'").get<std::string>();
        rule.reference_activity = require(r, "reference", "rule '" + rule.id + "'").get<std::string>();
        rule.condition = parse_rule_condition(get_or<std::string>(r, "condition", "precedes_within_window"));
        rule.window_seconds = get_or<std::int64_t>(r, "window_seconds", 900);
        rule.action = parse_rule_action(get_or<std::string>(r, "action", "shift_to_reference"));
        rule.validate();
        c.lift.rules.push_back(rule);
    }
    for (const auto& a : get_or(doc, "anchors", json::array())) {
        AnchorDefinition def;
        def.name = require(a, "name", "anchor").get<std::string>();
        def.source = require(a, "table", "anchor '" + def.name + "'").get<std::string>();
        const auto agg = get_or<std::string>(a, "aggregate", "min");
        if (agg != "min" && agg != "max") throw Error("bad_config", "anchor '" + def.name + "': aggregate must be min or max");
        def.aggregate = agg == "min" ? AnchorAggregate::Min : AnchorAggregate::Max;
        c.lift.anchors.push_back(def);
    }
    for (const auto& pair : get_or(doc, "anchor_order", json::array())) {
        if (!pair.is_array() || pair.size() != 2) throw Error("bad_config", "anchor_order entries are [earlier, later]");
        c.lift.anchor_order.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
    }
    for (const auto& [activity, label] : get_or(doc, "ordering_labels", std::map<std::string, std::string>{})) {
        c.lift.labels[activity] = parse_ordering_label(label);
    }

    for (const auto& col : get_or(doc, "collectors", json::array())) c.collectors.push_back(parse_collector(col));
    if (doc.contains("case_attributes_table")) c.case_attributes_table = doc["case_attributes_table"].get<std::string>();
    if (doc.contains("tie_break")) c.tie_break.activity_priority = strings(doc, "tie_break");
    if (!c.synthetic && (c.lift.tables.empty() || c.collectors.empty())) {
        throw Error("bad_config", "a table-sourced config needs 'tables' and 'collectors'");
    }

    const auto target = get_or(doc, "target", json::object());
    c.target.activity = get_or<std::string>(target, "activity", c.target.activity);
    c.target.exclude_target_suffix = get_or<bool>(target, "exclude_target_suffix", true);
    c.target.truncate_at = strings(target, "truncate_at");
    if (doc.contains("max_prefix_length") && !doc["max_prefix_length"].is_null()) {
        c.max_prefix_length = doc["max_prefix_length"].get<std::size_t>();
        if (*c.max_prefix_length == 0) throw Error("bad_config", "max_prefix_length must be positive");
    }

    const auto features = get_or(doc, "features", json::object());
    c.features.admission_activity = get_or<std::string>(features, "admission_activity", "Admission");
    for (const auto& s : get_or(features, "signals", json::array())) {
        SignalSpec spec;
        if (s.is_string()) {
            spec.name = s.get<std::string>();
        } else {
            spec.name = require(s, "name", "signal").get<std::string>();
            if (s.contains("aggregations")) {
                spec.aggregations.clear();
                for (const auto& a : strings(s, "aggregations")) spec.aggregations.push_back(parse_signal_aggregate(a));
            }
        }
        c.features.signals.push_back(spec);
    }
    for (const auto& a : get_or(features, "case_attributes", json::array())) {
        CaseAttributeSpec spec;
        if (a.is_string()) {
            spec.name = a.get<std::string>();
        } else {
            spec.name = require(a, "name", "case attribute").get<std::string>();
            const auto enc = get_or<std::string>(a, "encoding", "numeric");
            if (enc != "numeric" && enc != "one_hot") {
                throw Error("bad_config", "case attribute '" + spec.name + "': encoding must be numeric or one_hot");
            }
            spec.encoding = enc == "numeric" ? CaseEncoding::Numeric : CaseEncoding::OneHot;
        }
        c.features.case_attributes.push_back(spec);
    }

    c.test_fraction = get_or<double>(get_or(doc, "split", json::object()), "test_fraction", 0.2);
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw Error("bad_config", "split.test_fraction must lie in (0, 1)");

    c.model = get_or<std::string>(doc, "model", "logreg");
    if (c.model != "logreg" && c.model != "rf") throw Error("bad_config", "model must be 'logreg' or 'rf'");
    const auto lr = get_or(doc, "logreg", json::object());
    c.logreg.l2_lambda = get_or<double>(lr, "l2_lambda", c.logreg.l2_lambda);
    c.logreg.max_iters = get_or<int>(lr, "max_iters", c.logreg.max_iters);
    c.logreg.tolerance = get_or<double>(lr, "tolerance", c.logreg.tolerance);
    c.logreg.balanced_class_weight = get_or<bool>(lr, "balanced_class_weight", false);
    c.logreg.seed = c.seed;
    const auto rf = get_or(doc, "rf", json::object());
    c.rf.n_trees = get_or<int>(rf, "n_trees", c.rf.n_trees);
    c.rf.max_depth = get_or<int>(rf, "max_depth", c.rf.max_depth);
    c.rf.min_samples_leaf = get_or<int>(rf, "min_samples_leaf", c.rf.min_samples_leaf);
    c.rf.features_per_split = get_or<int>(rf, "features_per_split", c.rf.features_per_split);
    c.rf.bootstrap = get_or<bool>(rf, "bootstrap", true);
    c.rf.threads = get_or<int>(rf, "threads", 0);
    c.rf.seed = c.seed;

    const auto ev = get_or(doc, "evaluation", json::object());
    c.threshold = get_or<double>(ev, "threshold", 0.5);
    c.eval_lengths = get_or(ev, "lengths", c.eval_lengths);
    return c;
}

PipelineConfig load_config(const fs::path& path, const ConfigOverrides& overrides) {
    if (!fs::exists(path)) throw Error("missing_file", "config '" + path.string() + "' not found");
    return parse_config(text_file(path), path.parent_path(), overrides);
}

// ---------------------------------------------------------------- manifest

namespace {

constexpr const char* kLiftReport = "lift_report.json";
constexpr const char* kEventLog = "event_log.csv";
constexpr const char* kPrefixes = "prefixes.csv";
constexpr const char* kFeatures = "features.csv";
constexpr const char* kFeatureSpec = "feature_spec.json";

std::string model_file(const std::string& kind) { return "model_" + kind + ".json"; }
std::string predictions_file(const std::string& kind) { return "predictions_" + kind + ".csv"; }
std::string metrics_file(const std::string& kind) { return "metrics_" + kind + ".json"; }
fs::path lifted_file(const std::string& table) { return fs::path("lifted") / (table + ".csv"); }

int stage_rank(Stage s) {
    switch (s) {
        case Stage::Lift: return 0;
        case Stage::Log:
        case Stage::Synth: return 1;
        case Stage::Prefixes: return 2;
        case Stage::Features: return 3;
        case Stage::Train: return 4;
        case Stage::Evaluate: return 5;
        case Stage::All: return -1;
    }
    return -1;
}

// Config sections each stage depends on, upstream included.
std::vector<std::string> stage_sections(Stage s, const PipelineConfig& c) {
    std::vector<std::string> keys;
    auto add = [&](std::initializer_list<const char*> more) { keys.insert(keys.end(), more.begin(), more.end()); };
    const bool synth_log = s == Stage::Synth || (s != Stage::Lift && s != Stage::Log && c.synthetic);
    if (synth_log) {
        add({"source", "seed", "synth"});
    } else {
        add({"source", "tables", "rules", "anchors", "anchor_order", "ordering_labels"});
        if (s != Stage::Lift) add({"collectors", "case_attributes_table", "tie_break"});
    }
    if (stage_rank(s) >= 2) add({"target", "max_prefix_length"});
    if (stage_rank(s) >= 3) add({"features", "split", "seed"});
    if (stage_rank(s) >= 4) add({"model", c.model == "rf" ? "rf" : "logreg"});
    if (stage_rank(s) >= 5) add({"evaluation"});
    return keys;
}

std::string stage_fingerprint(Stage s, const PipelineConfig& c) {
    const auto doc = json::parse(c.effective_json);
    json sub;
    sub["stage"] = stage_rank(s) == 1 ? "event_log" : to_string(s);
    for (const auto& key : stage_sections(s, c)) {
        auto it = doc.find(key);
        sub[key] = it == doc.end() ? json(nullptr) : *it;
    }
    return sha256_hex(sub.dump());
}

std::string now_iso() {
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        return Timestamp(std::strtoll(epoch, nullptr, 10)).to_iso();
    }
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    return Timestamp(secs).to_iso();
}

class Manifest {
public:
    explicit Manifest(fs::path out) : out_(std::move(out)) {
        const auto path = out_ / kManifestFile;
        if (fs::exists(path)) {
            try {
                doc_ = json::parse(text_file(path));
            } catch (const json::exception& e) {
                throw Error("bad_manifest", path.string() + ": " + e.what());
            }
        } else {
            doc_ = {{"format", "pathmon-manifest"}, {"version", 1}};
        }
        if (!doc_.contains("artifacts")) doc_["artifacts"] = json::object();
        if (!doc_.contains("runs")) doc_["runs"] = json::array();
    }

    const json* artifact(const std::string& rel) const {
        const auto& arts = doc_.at("artifacts");
        auto it = arts.find(rel);
        return it == arts.end() ? nullptr : &*it;
    }
    const json& artifacts() const { return doc_.at("artifacts"); }

    void record(const PipelineConfig& c, Stage stage, const std::string& stage_fp, const std::string& started,
                const std::map<std::string, std::string>& inputs, const std::vector<fs::path>& outputs,
                std::size_t warnings) {
        json run;
        run["stage"] = to_string(stage);
        run["config_fingerprint"] = c.fingerprint();
        run["stage_fingerprint"] = stage_fp;
        run["seed"] = c.seed;
        run["started"] = started;
        run["finished"] = now_iso();
        run["inputs"] = json::object();
        for (const auto& [k, v] : inputs) run["inputs"][k] = v;
        run["outputs"] = json::object();
        std::map<std::string, json> arts;
        for (const auto& [k, v] : doc_["artifacts"].items()) arts[k] = v;
        for (const auto& rel : outputs) {
            const auto digest = sha256_file(out_ / rel);
            run["outputs"][rel.generic_string()] = digest;
            json a = {{"stage", to_string(stage)}, {"stage_fingerprint", stage_fp}, {"sha256", digest}};
            if (stage_rank(stage) >= 4) a["model"] = c.model;
            arts[rel.generic_string()] = a;
        }
        run["warnings"] = warnings;
        doc_["artifacts"] = json::object();
        for (auto& [k, v] : arts) doc_["artifacts"][k] = std::move(v);
        doc_["runs"].push_back(std::move(run));
        doc_["config_fingerprint"] = c.fingerprint();
        doc_["seed"] = c.seed;
        doc_["effective_config"] = json::parse(c.effective_json);

        // Stable key order regardless of history.
        json ordered;
        for (const char* key : {"format", "version", "config_fingerprint", "seed", "effective_config", "artifacts", "runs"}) {
            ordered[key] = doc_[key];
        }
        doc_ = std::move(ordered);
        write_text(out_ / kManifestFile, doc_.dump(2) + "\n");
    }

private:
    fs::path out_;
    json doc_;
};

Stage producer_of(const std::string& rel, const PipelineConfig& c) {
    if (rel == kLiftReport || rel.starts_with("lifted/")) return Stage::Lift;
    if (rel == kEventLog) return c.synthetic ? Stage::Synth : Stage::Log;
    if (rel == kPrefixes) return Stage::Prefixes;
    if (rel == kFeatures || rel == kFeatureSpec) return Stage::Features;
    if (rel.starts_with("model_")) return Stage::Train;
    return Stage::Evaluate;
}

struct StageContext {
    const PipelineConfig& config;
    const RunOptions& options;
    Manifest& manifest;
    fs::path out;
    Diagnostics diagnostics;
    std::map<std::string, std::string> input_digests;

    // Checks an in-directory input: present, intact, and built under the
    // current configuration.
    fs::path input(const std::string& rel) {
        const auto path = out / rel;
        const auto producer = producer_of(rel, config);
        const std::string hint =
            producer == Stage::Train || producer == Stage::Evaluate ? std::string(" --model ") + config.model : "";
        if (!fs::exists(path)) {
            throw Error("missing_prerequisite", "missing artifact '" + rel + "'; run `" + to_string(producer) + hint +
                                                    "` first");
        }
        const auto digest = sha256_file(path);
        if (const json* a = manifest.artifact(rel); a && !options.force) {
            if (a->at("sha256") != digest) {
                throw Error("digest_mismatch", "artifact '" + rel + "' changed since the manifest recorded it; rerun `" +
                                                   to_string(producer) + "` or pass --force");
            }
            if (a->at("stage_fingerprint") != stage_fingerprint(producer, config)) {
                throw Error("fingerprint_mismatch", "artifact '" + rel +
                                                        "' was built under a different configuration; rerun `" +
                                                        to_string(producer) + "` or pass --force");
            }
        }
        input_digests[rel] = digest;
        return path;
    }

    void external_input(const fs::path& path) {
        if (!fs::exists(path)) throw Error("missing_file", "input '" + path.string() + "' not found");
        input_digests[path.generic_string()] = sha256_file(path);
    }
};

// Refuse to run when artifacts from this stage or later ones were produced
// under a different configuration.
void check_downstream(Stage stage, const PipelineConfig& c, const Manifest& manifest, const fs::path& out, bool force) {
    if (force) return;
    for (const auto& [rel, a] : manifest.artifacts().items()) {
        const auto producer = parse_stage(a.at("stage").get<std::string>());
        if (stage_rank(producer) < stage_rank(stage)) continue;
        if (a.contains("model") && a.at("model") != c.model) continue;
        if (!fs::exists(out / rel)) continue;
        if (stage_rank(producer) == 1 && producer != (c.synthetic ? Stage::Synth : Stage::Log)) {
            // the log came from the other source kind
        } else if (a.at("stage_fingerprint") == stage_fingerprint(producer, c)) {
            continue;
        }
        throw Error("fingerprint_mismatch", "existing artifact '" + rel + "' was built under a different configuration; "
                                            "pass --force to overwrite");
    }
}

void flush_warnings(const Diagnostics& d, std::ostream* out) {
    if (!out) return;
    std::map<std::string, std::size_t> shown;
    for (const auto& e : d.entries()) {
        if (++shown[e.code] <= 5) *out << "warning " << e.code << ": " << e.message << "\n";
    }
    for (const auto& [code, n] : shown) {
        if (n > 5) *out << "warning " << code << ": " << (n - 5) << " more\n";
    }
}

// ---------------------------------------------------------------- stages

std::vector<fs::path> stage_lift(StageContext& ctx) {
    const auto& c = ctx.config;
    if (c.lift.tables.empty()) throw Error("bad_config", "lift needs source tables; this config has none (run `synth`)");
    std::vector<SourceTable> tables;
    for (const auto& schema : c.lift.tables) {
        ctx.external_input(schema.path);
        tables.push_back(load_table(schema.path, schema));
    }
    auto result = lift_tables(std::move(tables), c.lift);
    for (const auto& d : result.diagnostics.entries()) ctx.diagnostics.warn(d.code, d.message);

    std::vector<fs::path> outputs;
    for (std::size_t t = 0; t < result.tables.size(); ++t) {
        const auto rel = lifted_file(c.lift.tables[t].name);
        fs::create_directories((ctx.out / rel).parent_path());
        write_table(result.tables[t], ctx.out / rel);
        outputs.push_back(rel);
    }
    write_text(ctx.out / kLiftReport, lift_report_json(result.report));
    outputs.emplace_back(kLiftReport);
    return outputs;
}

std::vector<fs::path> stage_log(StageContext& ctx) {
    const auto& c = ctx.config;
    if (c.synthetic) throw Error("bad_config", "this config is synthetic; run `synth` to produce the event log");
    std::map<std::string, SourceTable> tables;
    for (const auto& schema : c.lift.tables) {
        const auto path = ctx.input(lifted_file(schema.name).generic_string());
        tables.emplace(schema.name, load_table(path, lifted_schema(schema, path)));
    }
    std::vector<EventRecord> events;
    for (const auto& collector : c.collectors) {
        auto got = collect_events(collector, tables);
        if (got.excluded_missing_timestamp) {
            ctx.diagnostics.warn("missing_timestamp", "collector '" + collector.name + "' skipped " +
                                                          std::to_string(got.excluded_missing_timestamp) + " rows");
        }
        if (got.invalid_values) {
            ctx.diagnostics.warn("invalid_value", "collector '" + collector.name + "' found " +
                                                      std::to_string(got.invalid_values) + " unparsable values");
        }
        for (auto& e : got.events) events.push_back(std::move(e));
    }
    std::map<std::string, AttributeMap> case_attributes;
    if (c.case_attributes_table) {
        auto it = tables.find(*c.case_attributes_table);
        if (it == tables.end()) throw Error("bad_config", "case_attributes_table '" + *c.case_attributes_table + "' is not a table");
        case_attributes = propagate_case_attributes(events, it->second, &ctx.diagnostics);
    }
    const auto log = build_traces(std::move(events), std::move(case_attributes), c.tie_break);
    write_csv(log, ctx.out / kEventLog);
    return {kEventLog};
}

std::vector<fs::path> stage_synth(StageContext& ctx) {
    auto synth = generate_log(ctx.config.synth);
    write_csv(synth.log, ctx.out / kEventLog);
    return {kEventLog};
}

std::vector<fs::path> stage_prefixes(StageContext& ctx) {
    const auto log = read_csv(ctx.input(kEventLog));
    const auto build = build_prefix_dataset(log, ctx.config.target, ctx.config.max_prefix_length, &ctx.diagnostics);
    write_prefixes_csv(build.dataset, ctx.out / kPrefixes);
    return {kPrefixes};
}

json split_json(const CaseSplit& split) {
    return {{"seed", split.seed},
            {"test_fraction", split.test_fraction},
            {"train_cases", split.train_cases},
            {"test_cases", split.test_cases}};
}

struct SpecDocument {
    FeatureSpec spec;
    std::set<std::string> train_cases;
    std::set<std::string> test_cases;
};

SpecDocument read_spec_document(const fs::path& path) {
    try {
        const auto j = json::parse(text_file(path));
        SpecDocument d;
        d.spec = spec_from_json(j.at("spec").dump());
        d.train_cases = j.at("split").at("train_cases").get<std::set<std::string>>();
        d.test_cases = j.at("split").at("test_cases").get<std::set<std::string>>();
        return d;
    } catch (const json::exception& e) {
        throw Error("bad_artifact", path.string() + ": " + e.what());
    }
}

std::vector<fs::path> stage_features(StageContext& ctx) {
    const auto& c = ctx.config;
    const auto log = read_csv(ctx.input(kEventLog));
    const auto dataset = read_prefixes_csv(ctx.input(kPrefixes), log);
    const auto split = case_level_split(dataset.case_labels, c.test_fraction, c.seed);

    PrefixDataset train;
    train.max_length = dataset.max_length;
    for (const auto& p : dataset.prefixes) {
        if (split.train_cases.contains(p.case_id)) train.prefixes.push_back(p);
    }
    for (const auto& id : split.train_cases) train.case_labels[id] = dataset.case_labels.at(id);

    const auto spec = fit_spec(train, log, c.features);
    const auto table = build_feature_table(dataset, log, spec);
    if (table.invalid_observations) {
        ctx.diagnostics.warn("invalid_value", std::to_string(table.invalid_observations) +
                                                  " non-numeric signal observations treated as missing");
    }
    write_feature_table(table, ctx.out / kFeatures);

    json doc;
    doc["split"] = split_json(split);
    doc["spec"] = json::parse(spec_to_json(spec));
    doc["spec_fingerprint"] = spec.fingerprint();
    write_text(ctx.out / kFeatureSpec, doc.dump(2) + "\n");
    return {kFeatures, kFeatureSpec};
}

std::vector<fs::path> stage_train(StageContext& ctx) {
    const auto& c = ctx.config;
    const auto doc = read_spec_document(ctx.input(kFeatureSpec));
    const auto table = read_feature_table(ctx.input(kFeatures), doc.spec).subset(doc.train_cases);
    auto file = c.model == "rf" ? make_model_file(train_rf(table, c.rf), doc.spec)
                                : make_model_file(train_logreg(table, c.logreg), doc.spec);
    if (const auto* lr = std::get_if<LogRegModel<double>>(&file.model); lr && !lr->converged) {
        ctx.diagnostics.warn("not_converged", "logistic regression stopped after " + std::to_string(lr->iterations) +
                                                  " iterations without meeting the tolerance");
    }
    const auto rel = model_file(c.model);
    save_model(file, ctx.out / rel);
    return {rel};
}

std::vector<fs::path> stage_evaluate(StageContext& ctx) {
    const auto& c = ctx.config;
    const auto model = load_model(ctx.input(model_file(c.model)));
    const auto doc = read_spec_document(ctx.input(kFeatureSpec));
    check_compatible(model, doc.spec);
    const auto table = read_feature_table(ctx.input(kFeatures), doc.spec).subset(doc.test_cases);
    const auto predictions = predict(model, table);
    const auto report = evaluate_predictions(predictions, c.eval_lengths, c.threshold, c.model);

    write_predictions_csv(predictions, ctx.out / predictions_file(c.model));
    write_text(ctx.out / metrics_file(c.model), metrics_to_json(report));
    if (ctx.options.report) *ctx.options.report << metrics_to_text(report);
    return {predictions_file(c.model), metrics_file(c.model)};
}

StageResult run_one(Stage stage, const PipelineConfig& c, const RunOptions& options) {
    const auto out = c.output_dir;
    fs::create_directories(out);
    Manifest manifest(out);
    check_downstream(stage, c, manifest, out, options.force);

    StageContext ctx{c, options, manifest, out, {}, {}};
    const auto started = now_iso();
    std::vector<fs::path> outputs;
    switch (stage) {
        case Stage::Lift: outputs = stage_lift(ctx); break;
        case Stage::Log: outputs = stage_log(ctx); break;
        case Stage::Synth: outputs = stage_synth(ctx); break;
        case Stage::Prefixes: outputs = stage_prefixes(ctx); break;
        case Stage::Features: outputs = stage_features(ctx); break;
        case Stage::Train: outputs = stage_train(ctx); break;
        case Stage::Evaluate: outputs = stage_evaluate(ctx); break;
        case Stage::All: break;
    }
    flush_warnings(ctx.diagnostics, options.warnings);
    manifest.record(c, stage, stage_fingerprint(stage, c), started, ctx.input_digests, outputs,
                    ctx.diagnostics.entries().size());
    return {stage, outputs};
}

}  // namespace

std::vector<StageResult> run_stage(Stage stage, const PipelineConfig& config, const RunOptions& options) {
    if (stage != Stage::All) return {run_one(stage, config, options)};
    std::vector<Stage> chain;
    if (config.synthetic) {
        chain = {Stage::Synth};
    } else {
        chain = {Stage::Lift, Stage::Log};
    }
    chain.insert(chain.end(), {Stage::Prefixes, Stage::Features, Stage::Train, Stage::Evaluate});
    std::vector<StageResult> results;
    for (auto s : chain) results.push_back(run_one(s, config, options));
    return results;
}

}  // namespace pathmon
