#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pathmon::csv {

using Row = std::vector<std::string>;

struct Document {
    Row header;
    std::vector<Row> rows;
    // 1-based source line of each row, for error messages.
    std::vector<std::size_t> lines;
};

// RFC 4180 style: quoted fields may contain the delimiter, doubled quotes and
// newlines. A UTF-8 BOM on the first line is skipped. Every data row must have
// the header's width.
Document read(const std::filesystem::path& path, char delimiter = ',');
Document parse(std::string_view text, char delimiter = ',', std::string_view origin = "<memory>");

void write_row(std::ostream& out, const Row& row, char delimiter = ',');
std::string escape(std::string_view field, char delimiter = ',');

}  // namespace pathmon::csv
