#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pathmon {

// Every failure raised by the library carries a short machine-readable code
// ("missing_file", "untimestamped_case", ...) next to the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct Diagnostic {
    std::string code;
    std::string message;
};

// Non-fatal findings (skipped rules, dropped events, absent demographics).
class Diagnostics {
public:
    void warn(std::string code, std::string message) {
        entries_.push_back({std::move(code), std::move(message)});
    }

    const std::vector<Diagnostic>& entries() const noexcept { return entries_; }
    std::size_t count(const std::string& code) const {
        std::size_t n = 0;
        for (const auto& d : entries_) n += d.code == code;
        return n;
    }
    bool empty() const noexcept { return entries_.empty(); }

private:
    std::vector<Diagnostic> entries_;
};

}  // namespace pathmon
