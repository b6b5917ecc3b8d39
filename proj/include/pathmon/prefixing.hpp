#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathmon/eventlog.hpp"

namespace pathmon {

// The first `length` events of a trace. `events` views into the owning
// EventLog, which must outlive the prefix.
struct Prefix {
    std::string prefix_id;  // "<case_id>:<length>"
    std::string case_id;
    std::size_t length = 0;
    std::span<const EventRecord> events;
    int label = 0;
};

std::string make_prefix_id(const std::string& case_id, std::size_t length);

struct PrefixDataset {
    std::vector<Prefix> prefixes;  // ordered by (case id, length)
    std::map<std::string, int> case_labels;
    std::optional<std::size_t> max_length;

    double positive_rate() const;
};

// Prefixes of lengths 1..min(n, max_length), unlabeled. Throws on an empty trace.
std::vector<Prefix> generate_prefixes(const Trace& trace, std::optional<std::size_t> max_length = std::nullopt);

// Throws "unlabeled_case" listing every case id without a label.
PrefixDataset attach_labels(std::vector<Prefix> prefixes, const std::map<std::string, int>& case_labels,
                            std::optional<std::size_t> max_length = std::nullopt);

struct TargetSpec {
    std::string activity = "ICU Admission";
    // Drop the target event and everything after it from positive traces
    // before prefixing.
    bool exclude_target_suffix = true;
    // Further activities whose first occurrence closes the observable part of
    // any trace (e.g. a discharge that reveals the case outcome).
    std::vector<std::string> truncate_at;
};

// 1 iff some event of the full trace has the target activity.
int derive_case_label(const Trace& trace, const TargetSpec& target);

// Number of leading events of `trace` that prefixes may draw on under the
// target spec.
std::size_t observable_length(const Trace& trace, const TargetSpec& target);

struct PrefixBuild {
    PrefixDataset dataset;
    std::size_t cases_without_prefix = 0;  // traces whose observable part is empty
};

// Labels every trace, then decomposes its observable part into prefixes.
// Warns ("degenerate_target") when no trace contains the target activity.
PrefixBuild build_prefix_dataset(const EventLog& log, const TargetSpec& target,
                                 std::optional<std::size_t> max_length = std::nullopt,
                                 Diagnostics* diagnostics = nullptr);

// Prefix dataset CSV: prefix_id,case_id,length,label
void write_prefixes_csv(const PrefixDataset& dataset, const std::filesystem::path& path);
std::string prefixes_to_csv(const PrefixDataset& dataset);

// Re-attaches prefix rows to the events of `log`; throws "unknown_prefix" when
// a row points past the end of its trace or at an unknown case.
PrefixDataset read_prefixes_csv(const std::filesystem::path& path, const EventLog& log);

}  // namespace pathmon
