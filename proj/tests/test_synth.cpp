#include "doctest.h"

#include "pathmon/prefixing.hpp"
#include "pathmon/synth.hpp"

using namespace pathmon;

TEST_CASE("synthetic logs hit the requested positive count") {
    SynthConfig c;
    c.n_cases = 100;
    c.positive_rate = 0.12;
    c.seed = 3;
    auto s = generate_log(c);
    CHECK(s.log.traces.size() == 100);
    int positives = 0;
    for (const auto& [id, y] : s.case_labels) positives += y;
    CHECK(positives == 12);

    TargetSpec target;
    for (const auto& t : s.log.traces) {
        CHECK(derive_case_label(t, target) == s.case_labels.at(t.case_id));
        CHECK(t.events.front().activity == "Admission");
        CHECK(t.events.back().activity == "Discharge");
        for (std::size_t i = 1; i < t.events.size(); ++i) CHECK(t.events[i - 1].timestamp <= t.events[i].timestamp);
    }
}

TEST_CASE("synthetic generation is deterministic in the seed") {
    SynthConfig c;
    c.n_cases = 200;
    auto a = to_csv(generate_log(c).log);
    CHECK(a == to_csv(generate_log(c).log));
    c.seed = 43;
    CHECK(a != to_csv(generate_log(c).log));
}

TEST_CASE("noise level removes label-dependent alerts") {
    SynthConfig c;
    c.n_cases = 400;
    c.positive_rate = 0.5;
    auto count_alerts = [](const SynthLog& s, int label) {
        std::size_t n = 0;
        for (const auto& t : s.log.traces) {
            if (s.case_labels.at(t.case_id) != label) continue;
            for (const auto& e : t.events) n += e.activity == "Deterioration Alert";
        }
        return n;
    };
    auto clean = generate_log(c);
    CHECK(count_alerts(clean, 1) > 2 * count_alerts(clean, 0));
}

TEST_CASE("infeasible synthetic configurations are rejected") {
    for (auto mutate : std::vector<void (*)(SynthConfig&)>{
             [](SynthConfig& c) { c.positive_rate = 0.0; },
             [](SynthConfig& c) { c.positive_rate = 1.0; },
             [](SynthConfig& c) { c.n_cases = 5; c.positive_rate = 0.01; },
             [](SynthConfig& c) { c.noise_level = 1.5; },
             [](SynthConfig& c) { c.mean_trace_length = 0.5; },
         }) {
        SynthConfig c;
        mutate(c);
        try {
            generate_log(c);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(!std::string(e.code()).empty());
        }
    }
}
