#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "pathmon/eventlog.hpp"

namespace pathmon {

struct SynthConfig {
    std::size_t n_cases = 1000;
    double positive_rate = 0.126;
    double mean_trace_length = 10.5;
    std::size_t signal_onset_position = 10;
    double noise_level = 0.0;  // 1 removes every label-dependent effect
    std::uint64_t seed = 42;

    void validate() const;
};

struct SynthLog {
    EventLog log;
    std::map<std::string, int> case_labels;
};

// Observable pathway: Admission, then a mix of vital-sign, lab, medication,
// imaging and alert events. Positive cases end with ICU Admission / ICU
// Discharge / Discharge, negatives with Discharge. In positives heart rate
// and SpO2 drift faintly up to the onset position and steeply after it, where
// "Deterioration Alert" events also become frequent. Every label effect is
// scaled by (1 - noise_level).
SynthLog generate_log(const SynthConfig& config);

}  // namespace pathmon
