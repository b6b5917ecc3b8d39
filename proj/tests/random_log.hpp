#pragma once

#include <random>
#include <string>
#include <vector>

#include "pathmon/eventlog.hpp"

namespace testing_support {

// Random valid log: fixed attribute typing per name, awkward strings, full
// precision floats, optional attributes, ties on timestamps.
inline pathmon::EventLog random_log(std::mt19937_64& rng, std::size_t max_cases = 50, std::size_t max_events = 15) {
    using namespace pathmon;
    static const std::vector<std::string> activities{"Admission", "Triage",        "Vital Signs", "Lab Test",
                                                     "Medication", "ICU Admission", "Discharge",  "Imaging, CT"};
    static const std::vector<std::string> notes{"plain", "with,comma", "quote \"q\"", "<tag> & amp", "multi\nline",
                                                "ünïcödé", " padded "};
    auto pick = [&](std::size_t n) { return std::size_t(rng() % n); };
    std::uniform_real_distribution<double> real(-1000.0, 1000.0);

    const auto n_cases = 1 + pick(max_cases);
    std::vector<EventRecord> events;
    std::map<std::string, AttributeMap> case_attrs;
    for (std::size_t c = 0; c < n_cases; ++c) {
        const auto id = "case" + std::to_string(c * 7 + pick(5));
        if (case_attrs.contains(id)) continue;
        auto& attrs = case_attrs[id];
        attrs["age"] = std::int64_t(18 + pick(80));
        if (pick(3)) attrs["sex"] = std::string(pick(2) ? "F" : "M");
        auto t = Timestamp::from_civil(2020, 1, 1) + std::int64_t(pick(86400 * 365));
        const auto n = 1 + pick(max_events);
        for (std::size_t i = 0; i < n; ++i) {
            EventRecord e;
            e.case_id = id;
            e.activity = activities[pick(activities.size())];
            if (pick(4)) t = t + std::int64_t(1 + pick(7200));
            e.timestamp = t;
            if (pick(2)) e.attributes["hr"] = real(rng);
            if (pick(3) == 0) e.attributes["count"] = std::int64_t(pick(1000)) - 500;
            if (pick(3) == 0) e.attributes["flag"] = bool(pick(2));
            if (pick(3) == 0) e.attributes["note"] = notes[pick(notes.size())];
            if (pick(5) == 0) e.attributes["seen"] = t + std::int64_t(pick(600));
            e.source = "gen";
            e.source_index = i;
            events.push_back(std::move(e));
        }
    }
    return build_traces(std::move(events), std::move(case_attrs));
}

}  // namespace testing_support
