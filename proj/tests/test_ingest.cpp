#include "doctest.h"

#include <algorithm>
#include <random>

#include "pathmon/ingest.hpp"
#include "support.hpp"

using namespace pathmon;
using testing_support::scratch_dir;
using testing_support::write_file;

namespace {

Timestamp at(int h, int m, int s = 0) { return Timestamp::from_civil(2020, 3, 10, h, m, s); }

CandidateEvent ev(std::string activity, std::optional<Timestamp> t, std::string source = "src", std::size_t row = 0) {
    return {std::move(activity), t, false, std::move(source), row};
}

TableSchema vitals_schema(const std::filesystem::path& path) {
    TableSchema s;
    s.name = "vitals";
    s.path = path;
    s.case_column = "patient_id";
    s.column_types = {{"temp", ColumnType::Float}};
    return s;
}

}  // namespace

TEST_CASE("load_table keeps raw values and row order") {
    auto dir = scratch_dir("ingest_load");
    auto path = write_file(dir / "v.csv", "patient_id,temp\np1,36.6\np2,0\np1,\n");
    auto t = load_table(path, vitals_schema(path));
    CHECK(t.rows.size() == 3);
    CHECK(t.columns.size() == 2);
    CHECK(t.rows[1][1] == "0");
    CHECK(t.rows[2][0] == "p1");

    auto empty = write_file(dir / "e.csv", "patient_id,temp\n");
    CHECK(load_table(empty, vitals_schema(empty)).rows.empty());
}

TEST_CASE("load_table errors") {
    auto dir = scratch_dir("ingest_errors");
    auto schema = vitals_schema(dir / "missing.csv");
    try {
        load_table(dir / "missing.csv", schema);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "missing_file");
    }
    auto no_case = write_file(dir / "n.csv", "id,temp\np1,1\n");
    try {
        load_table(no_case, vitals_schema(no_case));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "missing_case_column");
    }
    auto dup = write_file(dir / "d.csv", "patient_id,temp,temp\np1,1,2\n");
    try {
        load_table(dup, vitals_schema(dup));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "duplicate_column");
    }
    auto blank_id = write_file(dir / "b.csv", "patient_id,temp\n,1\n");
    CHECK_THROWS_AS(load_table(blank_id, vitals_schema(blank_id)), Error);
}

TEST_CASE("normalize_missing turns zeros and blanks into missing in numeric columns") {
    SourceTable t;
    t.name = "vitals";
    t.columns = {"patient_id", "temp", "note"};
    t.case_id_column = "patient_id";
    t.column_types = {{"temp", ColumnType::Float}};
    t.rows = {{"0", "0", "0"}, {"p1", "", "x"}, {"p2", "72", ""}, {"p3", "0.0", "y"}};
    auto n = normalize_missing(t);
    CHECK(n.rows[0][0] == "0");  // case id exempt
    CHECK_FALSE(n.rows[0][1]);
    CHECK(n.rows[0][2] == "0");  // undeclared text column untouched
    CHECK_FALSE(n.rows[1][1]);
    CHECK(n.rows[2][1] == "72");
    CHECK_FALSE(n.rows[3][1]);

    t.nullable.insert("note");
    auto m = normalize_missing(t);
    CHECK_FALSE(m.rows[0][2]);
    CHECK_FALSE(m.rows[2][2]);
    CHECK(normalize_missing(m) == m);
}

TEST_CASE("compress_high_frequency keeps the first row per key") {
    SourceTable t;
    t.name = "v";
    t.columns = {"case", "ts", "value"};
    t.case_id_column = "case";
    t.rows = {{"p1", "t1", "a"}, {"p1", "t1", "b"}, {"p1", "t2", "c"}};
    auto c = compress_high_frequency(t, {"case", "ts"});
    REQUIRE(c.rows.size() == 2);
    CHECK(c.rows[0][2] == "a");
    CHECK(c.rows[1][2] == "c");

    auto distinct = compress_high_frequency(c, {"case", "ts"});
    CHECK(distinct == c);

    SourceTable empty = t;
    empty.rows.clear();
    CHECK(compress_high_frequency(empty, {"case", "ts"}).rows.empty());
    CHECK_THROWS_AS(compress_high_frequency(t, {"case", "nope"}), Error);
}

TEST_CASE("shift_to_reference inside and outside the window") {
    CorrectionRule rule{"triage_before_admission", "Triage", "Admission"};
    auto inside = apply_correction_rules({ev("Triage", at(9, 58)), ev("Admission", at(10, 0))}, {rule});
    CHECK(*inside.events[0].timestamp == at(10, 0));
    CHECK(inside.applied["triage_before_admission"] == 1);

    auto outside = apply_correction_rules({ev("Triage", at(8, 0)), ev("Admission", at(10, 0))}, {rule});
    CHECK(*outside.events[0].timestamp == at(8, 0));

    auto twice = apply_correction_rules(inside.events, {rule});
    CHECK(twice.events == inside.events);
}

TEST_CASE("rules on absent activities are skipped with a warning") {
    Diagnostics d;
    CorrectionRule rule{"r", "Triage", "Admission"};
    auto out = apply_correction_rules({ev("Triage", at(9, 58))}, {rule}, &d);
    CHECK(*out.events[0].timestamp == at(9, 58));
    CHECK(d.count("rule_skipped") == 1);
}

TEST_CASE("swap_order exchanges the timestamps") {
    CorrectionRule rule{"swap", "Triage", "Admission", RuleCondition::Precedes, 900, RuleAction::SwapOrder};
    auto out = apply_correction_rules({ev("Triage", at(9, 0)), ev("Admission", at(10, 0))}, {rule});
    CHECK(*out.events[0].timestamp == at(10, 0));
    CHECK(*out.events[1].timestamp == at(9, 0));
}

TEST_CASE("rule validation") {
    CorrectionRule bad{"r", "A", "B", RuleCondition::PrecedesWithinWindow, 0};
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK(CorrectionRule{}.window_seconds == 900);
}

TEST_CASE("anchor table from min and max aggregates") {
    std::vector<AnchorDefinition> defs{{"first_vital", "vitals", AnchorAggregate::Min},
                                       {"last_vital", "vitals", AnchorAggregate::Max},
                                       {"last_lab", "labs", AnchorAggregate::Max}};
    auto a = build_anchor_table("p1", {ev("HR", at(11, 0), "vitals"), ev("HR", at(10, 0), "vitals")}, defs);
    CHECK(a.anchors.at("first_vital") == at(10, 0));
    CHECK(a.anchors.at("last_vital") == at(11, 0));
    CHECK_FALSE(a.anchors.contains("last_lab"));
    CHECK(a.earliest() == at(10, 0));
    CHECK(a.latest() == at(11, 0));
}

TEST_CASE("anchor ordering violations are reported, untimestamped cases rejected") {
    Diagnostics d;
    std::vector<AnchorDefinition> defs{{"admission", "adm"}, {"icu_discharge", "icu"}};
    build_anchor_table("p1", {ev("Admission", at(10, 0), "adm"), ev("ICU Discharge", at(9, 0), "icu")}, defs,
                       {{"admission", "icu_discharge"}}, &d);
    CHECK(d.count("anchor_order") == 1);
    try {
        build_anchor_table("p2", {ev("X", std::nullopt)}, defs);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "untimestamped_case");
    }
}

TEST_CASE("infer_timestamps follows the ordering labels") {
    AnchorTable anchors{"p1", {{"admission", at(10, 0)}, {"discharge", at(18, 0)}}};
    std::map<std::string, OrderingLabel> labels{
        {"Registration", OrderingLabel::First}, {"Summary", OrderingLabel::Last}, {"Lab", OrderingLabel::NotFirst}};
    auto out = infer_timestamps({ev("Registration", std::nullopt), ev("Summary", std::nullopt),
                                 ev("Lab", std::nullopt, "labs")},
                                anchors, labels);
    REQUIRE(out.events.size() == 3);
    CHECK(*out.events[0].timestamp == at(10, 0));
    CHECK(*out.events[1].timestamp == at(18, 0));
    CHECK(*out.events[2].timestamp == at(10, 0, 1));
    CHECK(out.events[2].time_inferred);
    CHECK(out.inferred == 3);

    // NOT_FIRST chains after the previous event of the same source.
    auto chained = infer_timestamps({ev("Lab", at(12, 0), "labs"), ev("Lab", std::nullopt, "labs")}, anchors, labels);
    CHECK(*chained.events[1].timestamp == at(12, 0));

    Diagnostics d;
    auto dropped = infer_timestamps({ev("Unknown", std::nullopt), ev("Lab", at(19, 0), "labs")}, anchors, labels, &d);
    CHECK(dropped.events.empty());
    CHECK(dropped.dropped["missing_timestamp_unlabeled"] == 1);
    CHECK(dropped.dropped["outside_anchor_range"] == 1);
    CHECK(d.count("event_dropped") == 2);
}

TEST_CASE("randomized temporal-rule properties") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> acts{"Triage", "Admission", "Lab", "Vital"};
    std::map<std::string, OrderingLabel> labels{{"Lab", OrderingLabel::NotFirst}, {"Triage", OrderingLabel::First},
                                                {"Vital", OrderingLabel::Last}};
    std::vector<CorrectionRule> rules{{"shift", "Triage", "Admission", RuleCondition::PrecedesWithinWindow, 900}};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<CandidateEvent> events;
        const int n = 1 + int(rng() % 12);
        for (int i = 0; i < n; ++i) {
            std::optional<Timestamp> t;
            if (rng() % 4) t = at(9, 30) + std::int64_t(rng() % 7200);
            events.push_back(ev(acts[rng() % acts.size()], t, rng() % 2 ? "a" : "b", std::size_t(i)));
        }
        if (std::none_of(events.begin(), events.end(), [](auto& e) { return e.timestamp.has_value(); })) continue;

        auto once = apply_correction_rules(events, rules);
        auto twice = apply_correction_rules(once.events, rules);
        CHECK(once.events == twice.events);

        auto anchors = build_anchor_table("c", once.events, {});
        auto inferred = infer_timestamps(once.events, anchors, labels);
        for (const auto& e : inferred.events) {
            REQUIRE(e.timestamp);
            CHECK(*e.timestamp >= anchors.earliest());
            CHECK(*e.timestamp <= anchors.latest());
        }
    }
}

TEST_CASE("lift_tables end to end") {
    auto dir = scratch_dir("ingest_lift");
    TableSchema adm;
    adm.name = "admissions";
    adm.path = write_file(dir / "adm.csv", "pid,date,time\np1,2020-03-10,10:00\np2,2020-03-11,08:00\n");
    adm.case_column = "pid";
    adm.timestamp = TimestampSource{"date", "time"};
    adm.activity = "Admission";

    TableSchema tri = adm;
    tri.name = "triage";
    tri.path = write_file(dir / "tri.csv", "pid,date,time\np1,2020-03-10,09:58\np2,2020-03-11,06:00\n");
    tri.activity = "Triage";

    TableSchema lab;
    lab.name = "labs";
    lab.path = write_file(dir / "lab.csv",
                          "pid,date,time,crp\np1,2020-03-10,12:00,5\np1,2020-03-10,12:00,6\np1,,,0\np1,2020-03-10,,3\n"
                          "p3,,,1\n");
    lab.case_column = "pid";
    lab.timestamp = TimestampSource{"date", "time"};
    lab.activity = "Lab";
    lab.column_types = {{"crp", ColumnType::Float}};
    lab.compress_keys = {"pid", "date", "time"};

    TableSchema demo;
    demo.name = "demographics";
    demo.path = write_file(dir / "demo.csv", "pid,age\np1,70\np2,0\np3,50\n");
    demo.case_column = "pid";
    demo.column_types = {{"age", ColumnType::Int}};

    LiftConfig config;
    config.tables = {adm, tri, lab, demo};
    config.rules = {{"triage_shift", "Triage", "Admission"}};
    config.anchors = {{"admission", "admissions", AnchorAggregate::Min}, {"last_lab", "labs", AnchorAggregate::Max}};
    config.labels = {{"Lab", OrderingLabel::NotFirst}};

    std::vector<SourceTable> tables;
    for (const auto& s : config.tables) tables.push_back(load_table(s.path, s));
    auto result = lift_tables(std::move(tables), config);

    CHECK(result.report.rows_compressed == 1);
    CHECK(result.report.corrections["triage_shift"] == 1);
    CHECK(result.report.untimestamped_cases == std::vector<std::string>{"p3"});
    CHECK(result.report.cells_missing >= 2);
    REQUIRE(result.anchors.size() == 2);
    CHECK(result.anchors[0].case_id == "p1");

    const auto& labs = result.tables[2];
    const auto ts = labs.column_index(kTimestampColumn);
    const auto flag = labs.column_index(kTimeInferredColumn);
    // Lab rows for p1: 12:00, the date-only row at midnight falls before
    // admission and is dropped, the untimed-undated row is inferred.
    for (const auto& row : labs.rows) {
        REQUIRE(row[ts]);
        auto t = *Timestamp::parse_iso(*row[ts]);
        CHECK(t >= Timestamp::from_civil(2020, 3, 10, 10, 0));
    }
    CHECK(std::any_of(labs.rows.begin(), labs.rows.end(), [&](auto& r) { return r[flag] == "true"; }));

    const auto& triage = result.tables[1];
    CHECK(triage.rows[0][triage.column_index(kTimestampColumn)] == "2020-03-10T10:00:00Z");
    CHECK(result.report.dropped.contains("outside_anchor_range"));
    CHECK_FALSE(lift_report_json(result.report).empty());
}
