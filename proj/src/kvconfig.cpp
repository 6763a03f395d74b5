#include "nhaze/kvconfig.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nhaze {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

bool parse_double(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") {
        out = INFINITY;
        return true;
    }
    if (t == "-inf") {
        out = -INFINITY;
        return true;
    }
    const char* begin = t.data();
    if (!t.empty() && t[0] == '+') ++begin;
    const char* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && begin != end;
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string s = os.str();
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string raw;
    std::string table;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated table header");
            table = trim(std::string_view(line).substr(1, line.size() - 2));
            if (table.empty()) fail("empty table name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) fail("empty key");
        if (!table.empty()) key = table + "." + key;
        if (kv.values_.count(key)) fail("duplicate key '" + key + "'");

        if (value.empty()) fail("missing value for '" + key + "'");
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') fail("unterminated string");
            kv.values_[key] = value.substr(1, value.size() - 2);
        } else if (value.front() == '[') {
            if (value.back() != ']') fail("arrays must fit on one line");
            std::vector<double> items;
            std::stringstream ss(value.substr(1, value.size() - 2));
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (trim(item).empty()) continue;
                double d = 0.0;
                if (!parse_double(item, d)) fail("bad number '" + trim(item) + "' in array");
                items.push_back(d);
            }
            kv.values_[key] = std::move(items);
        } else if (value == "true" || value == "false") {
            kv.values_[key] = (value == "true");
        } else {
            double d = 0.0;
            if (!parse_double(value, d)) fail("bad value '" + value + "'");
            kv.values_[key] = d;
        }
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const KeyValueFile::Value& KeyValueFile::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error(origin_ + ": missing key '" + key + "'");
    return it->second;
}

double KeyValueFile::number(const std::string& key) const {
    const auto& v = get(key);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw std::runtime_error(origin_ + ": key '" + key + "' is not a number");
}

double KeyValueFile::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

bool KeyValueFile::boolean(const std::string& key) const {
    const auto& v = get(key);
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw std::runtime_error(origin_ + ": key '" + key + "' is not a boolean");
}

std::string KeyValueFile::string(const std::string& key) const {
    const auto& v = get(key);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw std::runtime_error(origin_ + ": key '" + key + "' is not a string");
}

std::vector<double> KeyValueFile::numbers(const std::string& key) const {
    const auto& v = get(key);
    if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
    if (const auto* d = std::get_if<double>(&v)) return {*d};
    throw std::runtime_error(origin_ + ": key '" + key + "' is not a number list");
}

void KeyValueFile::require_known(const std::vector<std::string>& allowed) const {
    for (const auto& [key, _] : values_) {
        bool ok = false;
        for (const auto& a : allowed) ok = ok || a == key;
        if (!ok) throw std::runtime_error(origin_ + ": unknown key '" + key + "'");
    }
}

std::string KeyValueFile::serialize() const {
    // Keys with a dot are grouped under their table header.
    std::ostringstream os;
    std::string current;
    auto emit = [&os](const std::string& key, const Value& v) {
        os << key << " = ";
        if (const auto* d = std::get_if<double>(&v)) {
            os << format_double(*d);
        } else if (const auto* b = std::get_if<bool>(&v)) {
            os << (*b ? "true" : "false");
        } else if (const auto* s = std::get_if<std::string>(&v)) {
            os << '"' << *s << '"';
        } else {
            const auto& a = std::get<std::vector<double>>(v);
            os << '[';
            for (std::size_t i = 0; i < a.size(); ++i) os << (i ? ", " : "") << format_double(a[i]);
            os << ']';
        }
        os << '\n';
    };
    for (const auto& [key, v] : values_)
        if (key.find('.') == std::string::npos) emit(key, v);
    for (const auto& [key, v] : values_) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) continue;
        const std::string table = key.substr(0, dot);
        if (table != current) {
            os << "\n[" << table << "]\n";
            current = table;
        }
        emit(key.substr(dot + 1), v);
    }
    return os.str();
}

void KeyValueFile::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << serialize();
}

}  // namespace nhaze
