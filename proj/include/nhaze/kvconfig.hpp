#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nhaze {

/// A flat key/value document in TOML syntax: `key = value` lines, `#`
/// comments, optional `[table]` headers (keys become `table.key`). Values are
/// numbers, booleans, quoted strings or single-line arrays of numbers.
class KeyValueFile {
public:
    using Value = std::variant<double, bool, std::string, std::vector<double>>;

    static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, Value>& values() const { return values_; }

    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    bool boolean(const std::string& key) const;
    std::string string(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;

    void set(const std::string& key, Value v) { values_[key] = std::move(v); }

    /// Throws if any key is not in `allowed`.
    void require_known(const std::vector<std::string>& allowed) const;

    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

private:
    const Value& get(const std::string& key) const;

    std::string origin_;
    std::map<std::string, Value> values_;
};

}  // namespace nhaze
