#include "doctest.h"

#include <cmath>
#include <random>

#include "pathmon/featurize.hpp"
#include "random_log.hpp"
#include "support.hpp"

using namespace pathmon;

namespace {

struct Ev {
    std::string activity;
    int minute;
    AttributeMap attrs = {};
};

Trace trace(const std::string& id, const std::vector<Ev>& evs, AttributeMap case_attrs = {}) {
    std::vector<EventRecord> events;
    for (const auto& v : evs) {
        EventRecord e;
        e.case_id = id;
        e.activity = v.activity;
        e.timestamp = Timestamp::from_civil(2020, 3, 10, 10) + v.minute * 60;
        e.attributes = v.attrs;
        e.source_index = events.size();
        events.push_back(std::move(e));
    }
    auto log = build_traces(std::move(events), {{id, std::move(case_attrs)}});
    return log.traces.at(0);
}

Prefix prefix_of(const Trace& t, std::size_t k) { return generate_prefixes(t).at(k - 1); }

FeatureSpec spec_with(std::vector<std::string> activities, std::vector<std::pair<std::string, std::string>> transitions,
                      FeatureConfig config = {}) {
    FeatureSpec spec;
    spec.config = std::move(config);
    spec.activity_vocabulary = std::move(activities);
    spec.transition_vocabulary = std::move(transitions);
    return spec;
}

}  // namespace

TEST_CASE("temporal features") {
    auto spec = spec_with({}, {});
    auto t = trace("p", {{"A", 0}, {"B", 5}});
    auto f = temporal_features(prefix_of(t, 2), spec);
    CHECK(f.at("elapsed_total") == 300);
    CHECK(f.at("gap_last") == 300);
    CHECK(f.at("gap_mean") == 300);
    CHECK(f.at("has_inferred_time") == 0);

    auto one = temporal_features(prefix_of(t, 1), spec);
    CHECK(one.at("elapsed_total") == 0);
    CHECK(std::isnan(one.at("gap_mean")));
    CHECK(one.at("gaps_missing") == 1);
    CHECK(one.at("time_since_admission_missing") == 1);

    auto adm = trace("q", {{"Admission", 0}, {"X", 120}});
    CHECK(temporal_features(prefix_of(adm, 2), spec).at("time_since_admission") == 7200);

    auto inferred = trace("r", {{"A", 0}, {"B", 1, {{kTimeInferredAttribute, true}}}});
    CHECK(temporal_features(prefix_of(inferred, 1), spec).at("has_inferred_time") == 0);
    CHECK(temporal_features(prefix_of(inferred, 2), spec).at("has_inferred_time") == 1);
}

TEST_CASE("activity features with out-of-vocabulary slot") {
    auto spec = spec_with({"A", "B"}, {});
    auto t = trace("p", {{"A", 0}, {"B", 1}, {"A", 2}, {"C", 3}});
    auto f = activity_features(prefix_of(t, 3), spec);
    CHECK(f.at("act_count[A]") == 2);
    CHECK(f.at("act_count[B]") == 1);
    CHECK(f.at("act_freq[A]") == doctest::Approx(2.0 / 3));
    CHECK(f.at("act_freq[B]") == doctest::Approx(1.0 / 3));
    CHECK(f.at("last_act[A]") == 1);
    CHECK(f.at("last_act[B]") == 0);

    auto oov = activity_features(prefix_of(t, 4), spec);
    CHECK(oov.at("last_act[__oov__]") == 1);
    CHECK(oov.at("last_act[A]") == 0);
    CHECK(oov.at("act_freq[A]") + oov.at("act_freq[B]") + oov.at("act_freq[__oov__]") == doctest::Approx(1.0));

    auto b = trace("q", {{"B", 0}});
    auto fb = activity_features(prefix_of(b, 1), spec);
    CHECK(fb.at("act_count[A]") == 0);
    CHECK(fb.at("act_count[B]") == 1);
    CHECK(fb.at("last_act[B]") == 1);
}

TEST_CASE("transition features") {
    auto spec = spec_with({"A", "B"}, {{"A", "B"}, {"B", "A"}});
    auto t = trace("p", {{"A", 0}, {"B", 1}, {"A", 2}, {"B", 3}, {"C", 4}});
    auto f = transition_features(prefix_of(t, 4), spec);
    CHECK(f.at("trans[A->B]") == 2);
    CHECK(f.at("trans[B->A]") == 1);
    CHECK(f.at("trans[__oov__]") == 0);
    CHECK(transition_features(prefix_of(t, 5), spec).at("trans[__oov__]") == 1);
    auto one = transition_features(prefix_of(t, 1), spec);
    for (double v : one.values) CHECK(v == 0);
}

TEST_CASE("clinical aggregates") {
    FeatureConfig config;
    config.signals = {{"temp"}};
    auto spec = spec_with({}, {}, config);
    auto t = trace("p", {{"V", 0, {{"temp", 37.0}}}, {"L", 1}, {"V", 2, {{"temp", 39.0}}},
                         {"V", 3, {{"temp", std::string("high")}}}});
    auto f = clinical_aggregates(prefix_of(t, 3), spec);
    CHECK(f.at("temp_latest") == 39.0);
    CHECK(f.at("temp_min") == 37.0);
    CHECK(f.at("temp_max") == 39.0);
    CHECK(f.at("temp_mean") == 38.0);
    CHECK(f.at("temp_missing") == 0);

    auto none = clinical_aggregates(prefix_of(trace("q", {{"L", 0}}), 1), spec);
    CHECK(std::isnan(none.at("temp_latest")));
    CHECK(std::isnan(none.at("temp_mean")));
    CHECK(none.at("temp_missing") == 1);

    auto single = clinical_aggregates(prefix_of(trace("r", {{"V", 0, {{"temp", 37.5}}}}), 1), spec);
    for (const char* n : {"temp_latest", "temp_min", "temp_max", "temp_mean"}) CHECK(single.at(n) == 37.5);

    std::size_t invalid = 0;
    raw_feature_row(prefix_of(t, 4), t, spec, &invalid);
    CHECK(invalid == 1);
}

TEST_CASE("case features") {
    FeatureConfig config;
    config.case_attributes = {{"age", CaseEncoding::Numeric}, {"sex", CaseEncoding::OneHot}};
    auto spec = spec_with({}, {}, config);
    spec.categorical_levels["sex"] = {"F", "M"};
    auto t = trace("p", {{"A", 0}}, {{"age", std::int64_t(60)}, {"sex", std::string("F")}});
    auto f = case_features(prefix_of(t, 1), t, spec);
    CHECK(f.at("case_age") == 60);
    CHECK(f.at("case_age_missing") == 0);
    CHECK(f.at("case_sex=F") == 1);
    CHECK(f.at("case_sex=M") == 0);

    auto u = trace("q", {{"A", 0}}, {{"sex", std::string("X")}});
    auto g = case_features(prefix_of(u, 1), u, spec);
    CHECK(g.at("case_sex=__oov__") == 1);
    CHECK(g.at("case_age_missing") == 1);
}

namespace {

struct Fixture {
    EventLog log;
    PrefixDataset train;
    PrefixDataset all;
    FeatureConfig config;
};

Fixture fixture() {
    Fixture f;
    f.config.signals = {{"hr"}};
    f.config.case_attributes = {{"age", CaseEncoding::Numeric}, {"sex", CaseEncoding::OneHot}};
    std::vector<Trace> traces{
        trace("c1", {{"A", 0, {{"hr", 80.0}}}, {"B", 10, {{"hr", 90.0}}}, {"A", 30}}, {{"age", std::int64_t(50)}, {"sex", std::string("F")}}),
        trace("c2", {{"A", 0}, {"A", 5, {{"hr", 70.0}}}}, {{"age", std::int64_t(70)}, {"sex", std::string("M")}}),
        trace("c3", {{"A", 0}, {"C", 5, {{"hr", 120.0}}}, {"B", 9}}, {{"age", std::int64_t(40)}, {"sex", std::string("X")}}),
    };
    f.log.traces = traces;
    for (const auto& t : f.log.traces) {
        for (const auto& e : t.events) f.log.activity_alphabet.insert(e.activity);
    }
    std::vector<Prefix> train_ps;
    std::vector<Prefix> all_ps;
    for (const auto& t : f.log.traces) {
        for (auto& p : generate_prefixes(t)) {
            if (t.case_id != "c3") train_ps.push_back(p);
            all_ps.push_back(p);
        }
    }
    f.train = attach_labels(train_ps, {{"c1", 1}, {"c2", 0}});
    f.all = attach_labels(all_ps, {{"c1", 1}, {"c2", 0}, {"c3", 1}});
    return f;
}

}  // namespace

TEST_CASE("fit_spec uses training cases only") {
    auto f = fixture();
    auto spec = fit_spec(f.train, f.log, f.config);
    CHECK(spec.activity_vocabulary == std::vector<std::string>{"A", "B"});
    CHECK(spec.categorical_levels.at("sex") == std::vector<std::string>{"F", "M"});
    CHECK(spec.column_names.size() == std::size_t(spec.width()));
    CHECK(spec.mean.size() == spec.width());

    auto table = build_feature_table(f.all, f.log, spec);
    CHECK(table.rows() == 8);
    CHECK(table.values.cols() == spec.width());
    CHECK(table.values.allFinite());
    CHECK(fit_spec(f.train, f.log, f.config) == spec);

    // A constant column standardizes to zero.
    const auto& names = spec.column_names;
    auto oov_col = std::find(names.begin(), names.end(), "case_sex=__oov__") - names.begin();
    CHECK(spec.stddev[oov_col] == 0.0);
    for (Eigen::Index r = 0; r < 5; ++r) CHECK(table.values(r, oov_col) == 0.0);

    PrefixDataset empty;
    try {
        fit_spec(empty, f.log, f.config);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "empty_training_set");
    }
}

TEST_CASE("standardize round trip and transform determinism") {
    auto f = fixture();
    auto spec = fit_spec(f.train, f.log, f.config);
    Eigen::MatrixXd raw(Eigen::Index(f.train.prefixes.size()), spec.width());
    for (std::size_t i = 0; i < f.train.prefixes.size(); ++i) {
        const auto& p = f.train.prefixes[i];
        raw.row(Eigen::Index(i)) = raw_feature_row(p, *f.log.find(p.case_id), spec).transpose();
    }
    auto z = standardize(spec, raw);
    auto back = inverse_standardize(spec, z);
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            if (std::isnan(raw(r, c)) || spec.stddev[c] == 0.0) continue;
            CHECK(std::abs(back(r, c) - raw(r, c)) < 1e-9);
        }
    }
    auto t1 = build_feature_table(f.train, f.log, spec);
    auto t2 = build_feature_table(f.train, f.log, spec);
    CHECK(t1.values == t2.values);
    auto fp = spec.fingerprint();
    build_feature_table(f.all, f.log, spec);
    CHECK(spec.fingerprint() == fp);
}

TEST_CASE("feature table and spec serialization") {
    auto f = fixture();
    auto spec = fit_spec(f.train, f.log, f.config);
    auto parsed = spec_from_json(spec_to_json(spec));
    CHECK(parsed == spec);
    CHECK(parsed.fingerprint() == spec.fingerprint());

    auto table = build_feature_table(f.all, f.log, spec);
    auto dir = testing_support::scratch_dir("feature_table");
    write_feature_table(table, dir / "f.csv");
    CHECK(testing_support::read_file(dir / "f.csv").starts_with("prefix_id,case_id,length,label,"));
    auto back = read_feature_table(dir / "f.csv", spec);
    CHECK(back.values == table.values);
    CHECK(back.prefix_ids == table.prefix_ids);
    CHECK(back.labels == table.labels);

    auto sub = table.subset({"c3"});
    CHECK(sub.rows() == 3);
    CHECK(sub.case_ids == std::vector<std::string>(3, "c3"));

    auto other = spec;
    other.config.signals.clear();
    other = fit_spec(f.train, f.log, other.config);
    try {
        read_feature_table(dir / "f.csv", other);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "spec_mismatch");
    }
}

TEST_CASE("suffix mutation never changes earlier prefix rows") {
    std::mt19937_64 rng(17);
    FeatureConfig config;
    config.signals = {{"hr"}, {"count"}};
    for (int trial = 0; trial < 30; ++trial) {
        auto log = testing_support::random_log(rng, 8, 12);
        PrefixDataset all;
        for (const auto& t : log.traces) {
            for (auto& p : generate_prefixes(t)) {
                p.label = 0;
                all.prefixes.push_back(p);
            }
            all.case_labels[t.case_id] = 0;
        }
        auto spec = fit_spec(all, log, config);
        for (const auto& t : log.traces) {
            if (t.events.size() < 2) continue;
            const std::size_t k = 1 + rng() % (t.events.size() - 1);
            Trace mutated = t;
            for (std::size_t i = k; i < mutated.events.size(); ++i) {
                auto& e = mutated.events[i];
                e.activity = "Mutated" + std::to_string(rng() % 3);
                e.attributes["hr"] = double(rng() % 1000);
                e.timestamp = e.timestamp + std::int64_t(rng() % 100000);
            }
            auto before = raw_feature_row(generate_prefixes(t).at(k - 1), t, spec);
            auto after = raw_feature_row(generate_prefixes(mutated).at(k - 1), mutated, spec);
            for (Eigen::Index c = 0; c < before.size(); ++c) {
                CHECK(((std::isnan(before[c]) && std::isnan(after[c])) || before[c] == after[c]));
            }
        }
    }
}
