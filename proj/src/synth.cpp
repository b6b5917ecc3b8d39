#include "pathmon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace pathmon {

void SynthConfig::validate() const {
    if (n_cases == 0) throw Error("bad_config", "synth.n_cases must be positive");
    if (!(positive_rate > 0.0 && positive_rate < 1.0)) {
        throw Error("bad_config", "synth.positive_rate must lie strictly between 0 and 1");
    }
    if (signal_onset_position < 1) throw Error("bad_config", "synth.signal_onset_position must be at least 1");
    if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw Error("bad_config", "synth.noise_level must lie in [0, 1]");
    if (!(mean_trace_length >= 1.0)) throw Error("bad_config", "synth.mean_trace_length must be at least 1");
}

namespace {

struct CaseDraw {
    std::vector<EventRecord> events;
    AttributeMap attributes;
};

// Drift is in "units": one unit is +4 bpm heart rate and -0.6 % SpO2.
constexpr double kProdromeSlope = 0.2;  // units per event up to the onset
constexpr double kOnsetSlope = 1.0;     // units per event after it
constexpr double kMaxPastOnset = 8.0;

double tenth(double x) { return std::round(x * 10.0) / 10.0; }

CaseDraw generate_case(const SynthConfig& cfg, const std::string& case_id, std::size_t index, bool positive) {
    std::seed_seq seq{std::uint32_t(cfg.seed), std::uint32_t(cfg.seed >> 32), std::uint32_t(index),
                      std::uint32_t(index >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double strength = 1.0 - cfg.noise_level;
    const double effect = positive ? strength : 0.0;

    CaseDraw out;
    out.attributes["age"] = std::int64_t(std::lround(std::clamp(62.0 + 15.0 * normal(rng), 18.0, 99.0)));
    out.attributes["sex"] = std::string(unit(rng) < 0.5 ? "F" : "M");

    // Observable length uniform on 1..(2m - 1), mean m.
    const auto max_len = std::max<std::int64_t>(1, std::llround(2.0 * cfg.mean_trace_length - 1.0));
    const auto length = std::size_t(std::uniform_int_distribution<std::int64_t>(1, max_len)(rng));

    const double hr_base = 80.0 + 3.0 * normal(rng);
    const double spo2_base = 96.5 + 0.5 * normal(rng);

    auto t = Timestamp::from_civil(2020, 1, 1) + std::int64_t(unit(rng) * 365.0 * 86400.0);
    auto push = [&](std::string activity, AttributeMap attrs = {}) {
        EventRecord e;
        e.case_id = case_id;
        e.activity = std::move(activity);
        e.timestamp = t;
        e.attributes = std::move(attrs);
        e.source = "synth";
        e.source_index = out.events.size();
        out.events.push_back(std::move(e));
        t = t + 60 + std::int64_t(std::exponential_distribution<double>(1.0 / 7200.0)(rng));
    };
    auto vitals = [&](double drift) -> AttributeMap {
        return {{"heart_rate", tenth(hr_base + 4.0 * drift + 6.0 * normal(rng))},
                {"spo2", tenth(std::min(100.0, spo2_base - 0.6 * drift + 1.2 * normal(rng)))}};
    };

    push("Admission", vitals(0.0));
    for (std::size_t pos = 2; pos <= length; ++pos) {
        const double past = pos > cfg.signal_onset_position ? double(pos - cfg.signal_onset_position) : 0.0;
        // A faint prodrome buried in measurement noise, then a steep climb.
        const double drift = effect * (kProdromeSlope * double(std::min(pos, cfg.signal_onset_position)) +
                                       kOnsetSlope * std::min(past, kMaxPastOnset));
        const double alert_rate = 0.04 + (past > 0 ? 0.30 * effect : 0.0);
        const double u = unit(rng);
        if (unit(rng) < alert_rate) {
            push("Deterioration Alert");
        } else if (u < 0.45) {
            push("Vital Signs", vitals(drift));
        } else if (u < 0.70) {
            push("Lab Test", {{"crp", tenth(std::max(0.0, 20.0 + 10.0 * normal(rng)))}});
        } else if (u < 0.90) {
            push("Medication");
        } else {
            push("Imaging");
        }
    }
    if (positive) {
        push("ICU Admission");
        push("ICU Discharge");
    }
    push("Discharge");
    return out;
}

}  // namespace

SynthLog generate_log(const SynthConfig& config) {
    config.validate();
    const auto n_pos = std::size_t(std::llround(config.positive_rate * double(config.n_cases)));
    if (n_pos == 0 || n_pos == config.n_cases) {
        throw Error("infeasible_config", "positive_rate " + std::to_string(config.positive_rate) + " with " +
                                             std::to_string(config.n_cases) + " cases yields a single class");
    }

    // Exactly n_pos positives, placed by a seeded permutation.
    std::vector<std::size_t> order(config.n_cases);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> positive(config.n_cases, 0);
    for (std::size_t i = 0; i < n_pos; ++i) positive[order[i]] = 1;

    const auto width = std::to_string(config.n_cases).size();
    std::vector<std::string> ids(config.n_cases);
    for (std::size_t i = 0; i < config.n_cases; ++i) {
        auto digits = std::to_string(i + 1);
        ids[i] = "S" + std::string(width - digits.size(), '0') + digits;
    }

    std::vector<CaseDraw> draws(config.n_cases);
    {
        const auto workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < config.n_cases; i += workers) {
                    draws[i] = generate_case(config, ids[i], i, positive[i] != 0);
                }
            });
        }
    }

    SynthLog out;
    std::vector<EventRecord> events;
    std::map<std::string, AttributeMap> case_attributes;
    for (std::size_t i = 0; i < config.n_cases; ++i) {
        for (auto& e : draws[i].events) events.push_back(std::move(e));
        case_attributes[ids[i]] = std::move(draws[i].attributes);
        out.case_labels[ids[i]] = positive[i];
    }
    out.log = build_traces(std::move(events), std::move(case_attributes));
    return out;
}

}  // namespace pathmon
