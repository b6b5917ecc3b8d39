#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pathmon/eventlog.hpp"

namespace pathmon {

// XES subset: log/trace/event elements with string, int, float, boolean and
// date attributes, plus the concept and time extensions. The case id is the
// trace's concept:name, the activity the event's concept:name and the
// timestamp the event's time:timestamp. Lists, containers, ids and nested
// attributes are rejected on read.
std::string to_xes(const EventLog& log);
void write_xes(const EventLog& log, const std::filesystem::path& path);

EventLog parse_xes(std::string_view text, std::string_view origin = "<memory>");
EventLog read_xes(const std::filesystem::path& path);

}  // namespace pathmon
