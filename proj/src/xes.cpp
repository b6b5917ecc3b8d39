#include "pathmon/xes.hpp"

#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace pathmon {
namespace {

std::string xml_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            case '\n': out += "&#10;"; break;
            case '\r': out += "&#13;"; break;
            case '\t': out += "&#9;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

const char* xes_tag(ColumnType type) {
    switch (type) {
        case ColumnType::Int: return "int";
        case ColumnType::Float: return "float";
        case ColumnType::Boolean: return "boolean";
        case ColumnType::String: return "string";
        case ColumnType::Datetime: return "date";
    }
    return "string";
}

std::string xes_date(Timestamp ts) {
    auto iso = ts.to_iso();  // YYYY-MM-DDTHH:MM:SSZ
    iso.pop_back();
    return iso + ".000+00:00";
}

void write_attribute(std::ostream& out, const std::string& indent, const std::string& key, const AttrValue& v) {
    const auto type = type_of(v);
    const std::string value = type == ColumnType::Datetime ? xes_date(std::get<Timestamp>(v)) : format_value(v);
    out << indent << '<' << xes_tag(type) << " key=\"" << xml_escape(key) << "\" value=\"" << xml_escape(value)
        << "\"/>\n";
}

void check_key(const std::string& key) {
    if (key == "concept:name" || key == "time:timestamp") {
        throw Error("reserved_attribute", "attribute key '" + key + "' is reserved in XES output");
    }
}

struct XmlNode {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<std::unique_ptr<XmlNode>> children;
    std::size_t line = 0;

    const std::string* attr(std::string_view key) const {
        for (const auto& [k, v] : attributes) {
            if (k == key) return &v;
        }
        return nullptr;
    }
};

// Enough XML for the subset: prolog, comments, elements, attributes, entity
// references. No DTDs, CDATA or mixed content.
class XmlReader {
public:
    XmlReader(std::string_view text, std::string_view origin) : text_(text), origin_(origin) {}

    std::unique_ptr<XmlNode> parse_document() {
        if (text_.starts_with("\xEF\xBB\xBF")) pos_ = 3;
        skip_misc();
        if (eof() || peek() != '<') fail("expected root element");
        auto root = parse_element();
        skip_misc();
        if (!eof()) fail("content after root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error("xml", std::string(origin_) + ":" + std::to_string(line_) + ": " + what);
    }
    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }
    bool starts(std::string_view s) const { return text_.substr(pos_).starts_with(s); }
    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r')) advance();
    }
    void skip_until(std::string_view terminator) {
        auto end = text_.find(terminator, pos_);
        if (end == std::string_view::npos) fail("unterminated construct, expected '" + std::string(terminator) + "'");
        advance(end + terminator.size() - pos_);
    }
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts("<?")) {
                skip_until("?>");
            } else if (starts("<!--")) {
                skip_until("-->");
            } else if (starts("<!")) {
                fail("DTD and CDATA are not supported");
            } else {
                return;
            }
        }
    }
    static bool name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == ':' || c == '_' || c == '-' || c == '.';
    }
    std::string parse_name() {
        const auto start = pos_;
        while (!eof() && name_char(peek())) advance();
        if (start == pos_) fail("expected a name");
        return std::string(text_.substr(start, pos_ - start));
    }
    std::string decode(std::string_view raw) const {
        std::string out;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                if (raw[i] == '<') fail("'<' in attribute value");
                out.push_back(raw[i]);
                continue;
            }
            auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail("unterminated entity reference");
            auto ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out.push_back('&');
            else if (ent == "lt") out.push_back('<');
            else if (ent == "gt") out.push_back('>');
            else if (ent == "quot") out.push_back('"');
            else if (ent == "apos") out.push_back('\'');
            else if (ent.starts_with("#")) {
                unsigned long code = 0;
                try {
                    code = ent.starts_with("#x") ? std::stoul(std::string(ent.substr(2)), nullptr, 16)
                                                 : std::stoul(std::string(ent.substr(1)));
                } catch (const std::exception&) {
                    fail("bad character reference '&" + std::string(ent) + ";'");
                }
                append_utf8(out, code);
            } else {
                fail("unknown entity '&" + std::string(ent) + ";'");
            }
            i = semi;
        }
        return out;
    }
    static void append_utf8(std::string& out, unsigned long cp) {
        if (cp < 0x80) {
            out.push_back(char(cp));
        } else if (cp < 0x800) {
            out.push_back(char(0xC0 | (cp >> 6)));
            out.push_back(char(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(char(0xE0 | (cp >> 12)));
            out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(char(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(char(0xF0 | (cp >> 18)));
            out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(char(0x80 | (cp & 0x3F)));
        }
    }

    std::unique_ptr<XmlNode> parse_element() {
        auto node = std::make_unique<XmlNode>();
        node->line = line_;
        advance();  // '<'
        node->name = parse_name();
        for (;;) {
            skip_ws();
            if (eof()) fail("unterminated start tag <" + node->name + ">");
            if (starts("/>")) {
                advance(2);
                return node;
            }
            if (peek() == '>') {
                advance();
                break;
            }
            auto key = parse_name();
            skip_ws();
            if (eof() || peek() != '=') fail("expected '=' after attribute " + key);
            advance();
            skip_ws();
            if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted value for " + key);
            const char quote = peek();
            advance();
            auto end = text_.find(quote, pos_);
            if (end == std::string_view::npos) fail("unterminated attribute value");
            auto value = decode(text_.substr(pos_, end - pos_));
            advance(end + 1 - pos_);
            if (node->attr(key)) fail("duplicate attribute " + key);
            node->attributes.emplace_back(std::move(key), std::move(value));
        }
        // Content: child elements and whitespace only.
        for (;;) {
            skip_ws();
            if (eof()) fail("missing </" + node->name + ">");
            if (starts("<!--")) {
                skip_until("-->");
            } else if (starts("</")) {
                advance(2);
                auto name = parse_name();
                if (name != node->name) fail("mismatched </" + name + ">, expected </" + node->name + ">");
                skip_ws();
                if (eof() || peek() != '>') fail("malformed end tag");
                advance();
                return node;
            } else if (peek() == '<') {
                if (starts("<!") || starts("<?")) fail("unsupported markup inside <" + node->name + ">");
                node->children.push_back(parse_element());
            } else {
                fail("unexpected text content inside <" + node->name + ">");
            }
        }
    }

    std::string_view text_;
    std::string_view origin_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

ColumnType type_for_tag(const XmlNode& node, std::string_view origin) {
    const auto& n = node.name;
    if (n == "string") return ColumnType::String;
    if (n == "int") return ColumnType::Int;
    if (n == "float") return ColumnType::Float;
    if (n == "boolean") return ColumnType::Boolean;
    if (n == "date") return ColumnType::Datetime;
    throw Error("xes_unsupported", std::string(origin) + ":" + std::to_string(node.line) + ": element <" + n +
                                       "> is outside the supported XES subset");
}

std::pair<std::string, AttrValue> read_attribute(const XmlNode& node, std::string_view origin) {
    const auto type = type_for_tag(node, origin);
    const auto where = std::string(origin) + ":" + std::to_string(node.line);
    const auto* key = node.attr("key");
    const auto* value = node.attr("value");
    if (!key || !value) throw Error("xes_malformed", where + ": attribute element needs key and value");
    if (!node.children.empty()) throw Error("xes_unsupported", where + ": nested attributes are not supported");
    if (type == ColumnType::String) return {*key, *value};
    auto parsed = parse_value(*value, type);
    if (!parsed) {
        throw Error("xes_malformed", where + ": value '" + *value + "' is not a valid " + xes_tag(type));
    }
    return {*key, std::move(*parsed)};
}

}  // namespace

std::string to_xes(const EventLog& log) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<log xes.version=\"1.0\" xes.features=\"\" xmlns=\"http://www.xes-standard.org/\">\n"
           "  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n"
           "  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n";
    for (const auto& trace : log.traces) {
        out << "  <trace>\n";
        write_attribute(out, "    ", "concept:name", trace.case_id);
        for (const auto& [k, v] : trace.case_attributes) {
            check_key(k);
            write_attribute(out, "    ", k, v);
        }
        for (const auto& e : trace.events) {
            out << "    <event>\n";
            write_attribute(out, "      ", "concept:name", e.activity);
            write_attribute(out, "      ", "time:timestamp", e.timestamp);
            for (const auto& [k, v] : e.attributes) {
                check_key(k);
                write_attribute(out, "      ", k, v);
            }
            out << "    </event>\n";
        }
        out << "  </trace>\n";
    }
    out << "</log>\n";
    return out.str();
}

void write_xes(const EventLog& log, const std::filesystem::path& path) {
    const auto text = to_xes(log);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    out << text;
}

EventLog parse_xes(std::string_view text, std::string_view origin) {
    auto root = XmlReader(text, origin).parse_document();
    if (root->name != "log") throw Error("xes_malformed", std::string(origin) + ": root element must be <log>");

    std::map<std::string, Trace> traces;
    for (const auto& child : root->children) {
        const auto where = std::string(origin) + ":" + std::to_string(child->line);
        if (child->name == "extension" || child->name == "global" || child->name == "classifier") continue;
        if (child->name != "trace") {
            // Log-level attributes are accepted and ignored; anything else is not XES we handle.
            type_for_tag(*child, origin);
            continue;
        }
        Trace trace;
        std::optional<std::string> case_id;
        for (const auto& item : child->children) {
            if (item->name != "event") {
                auto [key, value] = read_attribute(*item, origin);
                if (key == "concept:name") {
                    auto* s = std::get_if<std::string>(&value);
                    if (!s) throw Error("xes_malformed", where + ": trace concept:name must be a string");
                    case_id = *s;
                } else {
                    trace.case_attributes[key] = std::move(value);
                }
                continue;
            }
            EventRecord e;
            std::optional<std::string> activity;
            std::optional<Timestamp> ts;
            for (const auto& attr : item->children) {
                auto [key, value] = read_attribute(*attr, origin);
                if (key == "concept:name" && std::holds_alternative<std::string>(value)) {
                    activity = std::get<std::string>(value);
                } else if (key == "time:timestamp" && std::holds_alternative<Timestamp>(value)) {
                    ts = std::get<Timestamp>(value);
                } else if (key == "concept:name" || key == "time:timestamp") {
                    throw Error("xes_malformed", where + ": " + key + " has the wrong attribute type");
                } else {
                    e.attributes[key] = std::move(value);
                }
            }
            if (!activity || !ts) {
                throw Error("xes_malformed", std::string(origin) + ":" + std::to_string(item->line) +
                                                 ": event lacks concept:name or time:timestamp");
            }
            e.activity = *activity;
            e.timestamp = *ts;
            e.source_index = trace.events.size();
            trace.events.push_back(std::move(e));
        }
        if (!case_id) throw Error("xes_malformed", where + ": trace lacks concept:name");
        trace.case_id = *case_id;
        for (auto& e : trace.events) e.case_id = *case_id;
        std::stable_sort(trace.events.begin(), trace.events.end(),
                         [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
        if (!traces.emplace(*case_id, std::move(trace)).second) {
            throw Error("xes_malformed", where + ": duplicate trace '" + *case_id + "'");
        }
    }

    EventLog log;
    for (auto& [_, trace] : traces) {
        for (const auto& e : trace.events) log.activity_alphabet.insert(e.activity);
        log.traces.push_back(std::move(trace));
    }
    return log;
}

EventLog read_xes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_xes(buf.str(), path.string());
}

}  // namespace pathmon
