#include "scarcegrad/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

std::int64_t TomlValue::as_int() const {
    if (!is_int()) throw ContractError("TomlValue: not an integer");
    return std::get<std::int64_t>(data);
}

double TomlValue::as_float() const {
    if (is_int()) return static_cast<double>(std::get<std::int64_t>(data));
    if (!is_float()) throw ContractError("TomlValue: not a number");
    return std::get<double>(data);
}

bool TomlValue::as_bool() const {
    if (!is_bool()) throw ContractError("TomlValue: not a boolean");
    return std::get<bool>(data);
}

const std::string& TomlValue::as_string() const {
    if (!is_string()) throw ContractError("TomlValue: not a string");
    return std::get<std::string>(data);
}

std::vector<std::int64_t> TomlValue::as_int_array() const {
    if (std::holds_alternative<std::vector<std::int64_t>>(data))
        return std::get<std::vector<std::int64_t>>(data);
    if (is_int()) return {std::get<std::int64_t>(data)};
    throw ContractError("TomlValue: not an integer array");
}

std::vector<double> TomlValue::as_float_array() const {
    if (std::holds_alternative<std::vector<double>>(data))
        return std::get<std::vector<double>>(data);
    if (std::holds_alternative<std::vector<std::int64_t>>(data)) {
        std::vector<double> out;
        for (std::int64_t v : std::get<std::vector<std::int64_t>>(data))
            out.push_back(static_cast<double>(v));
        return out;
    }
    if (is_int() || is_float()) return {as_float()};
    throw ContractError("TomlValue: not a numeric array");
}

const TomlValue& TomlTable::at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ContractError("Toml: missing key " + key);
    return it->second;
}

std::optional<TomlValue> TomlTable::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

const TomlTable& TomlDocument::table(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end()) throw ContractError("Toml: missing table [" + name + "]");
    return it->second;
}

namespace {

std::string strip(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// strips comments outside of quoted strings
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

TomlValue parse_scalar(const std::string& token, long line_no) {
    if (token.empty()) throw ParseError("toml: empty value", line_no);
    if (token.front() == '"') {
        if (token.size() < 2 || token.back() != '"')
            throw ParseError("toml: unterminated string", line_no);
        return TomlValue{token.substr(1, token.size() - 2)};
    }
    if (token == "true") return TomlValue{true};
    if (token == "false") return TomlValue{false};
    // integer if it parses fully without float markers
    const bool looks_float = token.find_first_of(".eE") != std::string::npos &&
                             token.find("0x") == std::string::npos;
    try {
        std::size_t used = 0;
        if (!looks_float) {
            const std::int64_t v = std::stoll(token, &used);
            if (used == token.size()) return TomlValue{v};
        }
        const double d = std::stod(token, &used);
        if (used == token.size()) return TomlValue{d};
    } catch (const std::exception&) {
        // fall through to the error below
    }
    throw ParseError("toml: cannot parse value '" + token + "'", line_no);
}

TomlValue parse_value(const std::string& raw, long line_no) {
    const std::string token = strip(raw);
    if (token.empty()) throw ParseError("toml: empty value", line_no);
    if (token.front() != '[') return parse_scalar(token, line_no);
    if (token.back() != ']') throw ParseError("toml: unterminated array", line_no);

    std::vector<std::string> parts;
    std::string cur;
    bool in_string = false;
    for (std::size_t i = 1; i + 1 < token.size(); ++i) {
        const char ch = token[i];
        if (ch == '"') in_string = !in_string;
        if (ch == ',' && !in_string) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!strip(cur).empty()) parts.push_back(cur);

    std::vector<TomlValue> items;
    for (const auto& part : parts) items.push_back(parse_scalar(strip(part), line_no));
    if (items.empty()) return TomlValue{std::vector<std::int64_t>{}};

    if (items.front().is_string()) {
        std::vector<std::string> out;
        for (const auto& item : items) out.push_back(item.as_string());
        return TomlValue{std::move(out)};
    }
    bool all_int = true;
    for (const auto& item : items) all_int = all_int && item.is_int();
    if (all_int) {
        std::vector<std::int64_t> out;
        for (const auto& item : items) out.push_back(item.as_int());
        return TomlValue{std::move(out)};
    }
    std::vector<double> out;
    for (const auto& item : items) out.push_back(item.as_float());
    return TomlValue{std::move(out)};
}

}  // namespace

TomlDocument parse_toml(const std::string& text) {
    TomlDocument doc;
    std::istringstream in(text);
    std::string line;
    std::string current;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = strip(strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ParseError("toml: unterminated table header", line_no);
            current = strip(body.substr(1, body.size() - 2));
            if (current.empty()) throw ParseError("toml: empty table name", line_no);
            doc.table_or_create(current);
            continue;
        }
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("toml: expected key = value", line_no);
        const std::string key = strip(body.substr(0, eq));
        if (key.empty()) throw ParseError("toml: empty key", line_no);
        doc.table_or_create(current).set(key, parse_value(body.substr(eq + 1), line_no));
    }
    return doc;
}

TomlDocument parse_toml_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("toml: cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_toml(buffer.str());
}

void TomlDocument::set_dotted(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ParseError("override: expected section.key=value in '" + assignment + "'");
    const std::string path = strip(assignment.substr(0, eq));
    const std::size_t dot = path.find('.');
    if (dot == std::string::npos)
        throw ParseError("override: expected section.key in '" + assignment + "'");
    const std::string section = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    table_or_create(section).set(key, parse_value(assignment.substr(eq + 1), 0));
}

}  // namespace scarcegrad
