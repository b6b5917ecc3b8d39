#include "pathmon/prefixing.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pathmon/csv.hpp"

namespace pathmon {

std::string make_prefix_id(const std::string& case_id, std::size_t length) {
    return case_id + ":" + std::to_string(length);
}

double PrefixDataset::positive_rate() const {
    if (prefixes.empty()) return 0.0;
    std::size_t pos = 0;
    for (const auto& p : prefixes) pos += p.label == 1;
    return double(pos) / double(prefixes.size());
}

std::vector<Prefix> generate_prefixes(const Trace& trace, std::optional<std::size_t> max_length) {
    if (trace.events.empty()) throw Error("empty_trace", "trace '" + trace.case_id + "' has no events");
    std::size_t n = trace.events.size();
    if (max_length) n = std::min(n, *max_length);

    std::vector<Prefix> out;
    out.reserve(n);
    const std::span<const EventRecord> all(trace.events);
    for (std::size_t k = 1; k <= n; ++k) {
        out.push_back(Prefix{make_prefix_id(trace.case_id, k), trace.case_id, k, all.first(k), 0});
    }
    return out;
}

PrefixDataset attach_labels(std::vector<Prefix> prefixes, const std::map<std::string, int>& case_labels,
                            std::optional<std::size_t> max_length) {
    std::vector<std::string> missing;
    for (auto& p : prefixes) {
        auto it = case_labels.find(p.case_id);
        if (it == case_labels.end()) {
            if (missing.empty() || missing.back() != p.case_id) missing.push_back(p.case_id);
            continue;
        }
        p.label = it->second;
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw Error("unlabeled_case", "no label for case(s): " + list);
    }
    PrefixDataset ds;
    ds.prefixes = std::move(prefixes);
    ds.case_labels = case_labels;
    ds.max_length = max_length;
    return ds;
}

int derive_case_label(const Trace& trace, const TargetSpec& target) {
    return std::any_of(trace.events.begin(), trace.events.end(),
                       [&](const EventRecord& e) { return e.activity == target.activity; })
               ? 1
               : 0;
}

std::size_t observable_length(const Trace& trace, const TargetSpec& target) {
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const auto& a = trace.events[i].activity;
        if (target.exclude_target_suffix && a == target.activity) return i;
        if (std::find(target.truncate_at.begin(), target.truncate_at.end(), a) != target.truncate_at.end()) {
            return i;
        }
    }
    return trace.events.size();
}

PrefixBuild build_prefix_dataset(const EventLog& log, const TargetSpec& target,
                                 std::optional<std::size_t> max_length, Diagnostics* diagnostics) {
    PrefixBuild build;
    std::map<std::string, int> labels;
    std::vector<Prefix> prefixes;
    for (const auto& trace : log.traces) {
        const int label = derive_case_label(trace, target);
        const auto n = observable_length(trace, target);
        if (n == 0) {
            ++build.cases_without_prefix;
            continue;
        }
        labels[trace.case_id] = label;
        auto ps = generate_prefixes(trace, max_length ? std::min(*max_length, n) : n);
        for (auto& p : ps) prefixes.push_back(std::move(p));
    }
    const bool any_positive = std::any_of(labels.begin(), labels.end(), [](const auto& kv) { return kv.second == 1; });
    if (!any_positive && diagnostics) {
        diagnostics->warn("degenerate_target", "no trace contains target activity '" + target.activity + "'");
    }
    build.dataset = attach_labels(std::move(prefixes), labels, max_length);
    return build;
}

std::string prefixes_to_csv(const PrefixDataset& dataset) {
    std::ostringstream out;
    csv::write_row(out, {"prefix_id", "case_id", "length", "label"});
    for (const auto& p : dataset.prefixes) {
        csv::write_row(out, {p.prefix_id, p.case_id, std::to_string(p.length), std::to_string(p.label)});
    }
    return out.str();
}

void write_prefixes_csv(const PrefixDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    out << prefixes_to_csv(dataset);
}

PrefixDataset read_prefixes_csv(const std::filesystem::path& path, const EventLog& log) {
    auto doc = csv::read(path);
    if (doc.header != csv::Row{"prefix_id", "case_id", "length", "label"}) {
        throw Error("malformed_prefixes", path.string() + ": expected header prefix_id,case_id,length,label");
    }
    PrefixDataset ds;
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto& row = doc.rows[r];
        const auto where = path.string() + ": line " + std::to_string(doc.lines[r]);
        std::size_t length = 0;
        int label = -1;
        std::from_chars(row[2].data(), row[2].data() + row[2].size(), length);
        std::from_chars(row[3].data(), row[3].data() + row[3].size(), label);
        if (length == 0 || (label != 0 && label != 1)) throw Error("malformed_prefixes", where + ": bad length or label");
        const Trace* trace = log.find(row[1]);
        if (!trace || length > trace->events.size()) {
            throw Error("unknown_prefix", where + ": prefix '" + row[0] + "' references events absent from the log");
        }
        if (row[0] != make_prefix_id(row[1], length)) {
            throw Error("malformed_prefixes", where + ": prefix id '" + row[0] + "' does not match case and length");
        }
        auto [it, inserted] = ds.case_labels.emplace(row[1], label);
        if (!inserted && it->second != label) {
            throw Error("malformed_prefixes", where + ": inconsistent label for case '" + row[1] + "'");
        }
        ds.prefixes.push_back(Prefix{row[0], row[1], length, std::span<const EventRecord>(trace->events).first(length), label});
    }
    return ds;
}

}  // namespace pathmon
