#include "pathmon/csv.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "pathmon/error.hpp"

namespace pathmon::csv {

Document read(const std::filesystem::path& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), delimiter, path.string());
}

Document parse(std::string_view text, char delimiter, std::string_view origin) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

    Document doc;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool have_header = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
        // Skip blank lines.
        if (row.size() == 1 && row[0].empty()) {
            row.clear();
            return;
        }
        if (!have_header) {
            doc.header = std::move(row);
            have_header = true;
        } else {
            if (row.size() != doc.header.size()) {
                throw Error("malformed_row", std::string(origin) + ": line " + std::to_string(row_line) +
                                                 " has " + std::to_string(row.size()) + " fields, expected " +
                                                 std::to_string(doc.header.size()));
            }
            doc.rows.push_back(std::move(row));
            doc.lines.push_back(row_line);
        }
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == delimiter) {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\r') {
            // CRLF handled at '\n'
        } else if (c == '\n') {
            end_row();
            ++line;
            row_line = line;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) {
        throw Error("malformed_row", std::string(origin) + ": unterminated quote starting on line " +
                                         std::to_string(row_line));
    }
    if (field_started || !field.empty() || !row.empty()) end_row();
    if (!have_header) throw Error("malformed_row", std::string(origin) + ": missing header row");
    return doc;
}

std::string escape(std::string_view field, char delimiter) {
    const bool quote = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
    if (!quote) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.put(delimiter);
        out << escape(row[i], delimiter);
    }
    out.put('\n');
}

}  // namespace pathmon::csv
