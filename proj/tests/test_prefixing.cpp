#include "doctest.h"

#include <random>

#include "pathmon/prefixing.hpp"
#include "random_log.hpp"
#include "support.hpp"

using namespace pathmon;

namespace {

Trace trace(const std::string& id, std::vector<std::string> activities) {
    std::vector<EventRecord> events;
    auto t = Timestamp::from_civil(2020, 3, 10, 10);
    for (auto& a : activities) {
        EventRecord e;
        e.case_id = id;
        e.activity = std::move(a);
        e.timestamp = t;
        t = t + 60;
        events.push_back(std::move(e));
    }
    return build_traces(std::move(events)).traces.at(0);
}

}  // namespace

TEST_CASE("generate_prefixes enumerates leading subsequences") {
    auto t = trace("p1", {"a", "b", "c"});
    auto ps = generate_prefixes(t);
    REQUIRE(ps.size() == 3);
    CHECK(ps[0].prefix_id == "p1:1");
    CHECK(ps[2].prefix_id == "p1:3");
    CHECK(ps[1].events.size() == 2);
    CHECK(ps[1].events[1].activity == "b");
    CHECK(ps[2].events.data() == t.events.data());

    CHECK(generate_prefixes(trace("p2", {"a"})).size() == 1);
    CHECK(generate_prefixes(trace("p3", {"a", "b", "c", "d", "e"}), 3).size() == 3);

    Trace empty;
    empty.case_id = "x";
    try {
        generate_prefixes(empty);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "empty_trace");
    }
}

TEST_CASE("attach_labels propagates case labels") {
    auto p1 = trace("p1", {"a", "b"});
    auto p2 = trace("p2", {"a", "b", "c"});
    auto n1 = trace("n1", {"a", "b", "c", "d", "e"});
    std::vector<Prefix> all;
    for (const auto* t : {&p1, &p2, &n1}) {
        auto ps = generate_prefixes(*t);
        all.insert(all.end(), ps.begin(), ps.end());
    }
    auto ds = attach_labels(all, {{"p1", 1}, {"p2", 1}, {"n1", 0}});
    CHECK(ds.positive_rate() == doctest::Approx(0.5));
    for (const auto& p : ds.prefixes) CHECK(p.label == ds.case_labels.at(p.case_id));

    try {
        attach_labels(all, {{"p1", 1}});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "unlabeled_case");
        CHECK(std::string(e.what()).find("n1") != std::string::npos);
    }
}

TEST_CASE("case labels and target-suffix exclusion") {
    TargetSpec target;
    auto pos = trace("p", {"Admission", "Vital Signs", "ICU Admission", "ICU Discharge", "Discharge"});
    auto neg = trace("n", {"Admission", "Vital Signs", "Discharge"});
    CHECK(derive_case_label(pos, target) == 1);
    CHECK(derive_case_label(neg, target) == 0);
    CHECK(observable_length(pos, target) == 2);
    CHECK(observable_length(neg, target) == 3);

    target.truncate_at = {"Discharge"};
    CHECK(observable_length(neg, target) == 2);

    target.exclude_target_suffix = false;
    target.truncate_at.clear();
    CHECK(observable_length(pos, target) == 5);

    EventLog log;
    log.traces = {neg, pos};
    Diagnostics d;
    TargetSpec nothing{"No Such Activity"};
    auto build = build_prefix_dataset(log, nothing, std::nullopt, &d);
    CHECK(build.dataset.positive_rate() == 0.0);
    CHECK(d.count("degenerate_target") == 1);
}

TEST_CASE("prefix count conservation on random logs") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto log = testing_support::random_log(rng, 20, 30);
        std::size_t total = 0;
        std::size_t capped = 0;
        const std::size_t cap = 1 + rng() % 10;
        for (const auto& t : log.traces) {
            total += generate_prefixes(t).size();
            capped += generate_prefixes(t, cap).size();
        }
        std::size_t expect_capped = 0;
        for (const auto& t : log.traces) expect_capped += std::min(t.events.size(), cap);
        CHECK(total == log.event_count());
        CHECK(capped == expect_capped);
    }
}

TEST_CASE("prefix csv round trip") {
    auto log = build_traces({});
    log.traces = {trace("a", {"Admission", "X"}), trace("b", {"Admission", "ICU Admission"})};
    auto build = build_prefix_dataset(log, TargetSpec{});
    CHECK(build.dataset.prefixes.size() == 3);
    auto dir = testing_support::scratch_dir("prefix_csv");
    write_prefixes_csv(build.dataset, dir / "p.csv");
    CHECK(testing_support::read_file(dir / "p.csv").starts_with("prefix_id,case_id,length,label\n"));
    auto back = read_prefixes_csv(dir / "p.csv", log);
    REQUIRE(back.prefixes.size() == 3);
    CHECK(back.case_labels == build.dataset.case_labels);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.prefixes[i].prefix_id == build.dataset.prefixes[i].prefix_id);
        CHECK(back.prefixes[i].label == build.dataset.prefixes[i].label);
        CHECK(back.prefixes[i].events.size() == build.dataset.prefixes[i].events.size());
    }

    testing_support::write_file(dir / "q.csv", "prefix_id,case_id,length,label\nzz:1,zz,1,0\n");
    CHECK_THROWS_AS(read_prefixes_csv(dir / "q.csv", log), Error);
}
