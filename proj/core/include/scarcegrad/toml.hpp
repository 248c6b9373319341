#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace scarcegrad {

// Minimal TOML subset sufficient for experiment configs: [tables],
// key = value with strings, integers, floats, booleans, and flat arrays.
struct TomlValue {
    std::variant<std::int64_t, double, bool, std::string, std::vector<std::int64_t>,
                 std::vector<double>, std::vector<std::string>>
        data;

    bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
    bool is_float() const { return std::holds_alternative<double>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }

    std::int64_t as_int() const;
    double as_float() const;  // accepts integers
    bool as_bool() const;
    const std::string& as_string() const;
    std::vector<std::int64_t> as_int_array() const;
    std::vector<double> as_float_array() const;
};

class TomlTable {
public:
    bool contains(const std::string& key) const { return values_.count(key) > 0; }
    const TomlValue& at(const std::string& key) const;
    std::optional<TomlValue> get(const std::string& key) const;
    void set(const std::string& key, TomlValue v) { values_[key] = std::move(v); }
    const std::map<std::string, TomlValue>& items() const { return values_; }

private:
    std::map<std::string, TomlValue> values_;
};

class TomlDocument {
public:
    bool has_table(const std::string& name) const { return tables_.count(name) > 0; }
    const TomlTable& table(const std::string& name) const;
    TomlTable& table_or_create(const std::string& name) { return tables_[name]; }
    const std::map<std::string, TomlTable>& tables() const { return tables_; }

    // "section.key=value" assignment, used for CLI overrides.
    void set_dotted(const std::string& assignment);

private:
    std::map<std::string, TomlTable> tables_;
};

TomlDocument parse_toml(const std::string& text);
TomlDocument parse_toml_file(const std::filesystem::path& path);

}  // namespace scarcegrad
