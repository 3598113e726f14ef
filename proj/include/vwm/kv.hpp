#pragma once

// Flat key/value text blocks: one `key = value` per line, `#` starts a comment.
// Used for display descriptors, agent parameter files and run manifests.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vwm {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Shortest text form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, end);
}

inline double parse_double(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return v;
}

inline long long parse_int(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError("not an integer: '" + std::string(text) + "'");
    return v;
}

class KeyValues {
public:
    KeyValues() = default;

    static KeyValues parse(std::string_view text) {
        KeyValues kv;
        std::size_t line_no = 0;
        while (!text.empty()) {
            ++line_no;
            const auto nl = text.find('\n');
            std::string_view line = text.substr(0, nl);
            text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            const auto trim = [](std::string_view s) {
                while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
                while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                    s.remove_suffix(1);
                return s;
            };
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
            auto key = trim(line.substr(0, eq));
            auto value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError("line " + std::to_string(line_no) + ": empty key");
            kv.values_[std::string(key)] = std::string(value);
        }
        return kv;
    }

    static KeyValues load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool contains(const std::string& key) const { return values_.count(key) != 0; }

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    void set(const std::string& key, double value) { values_[key] = format_double(value); }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key: " + key);
        return it->second;
    }

    /// Reads `key` into `out` when present; unknown keys are left to the caller.
    void read(const std::string& key, double& out) const {
        if (auto it = values_.find(key); it != values_.end()) {
            try {
                out = parse_double(it->second);
            } catch (const ConfigError&) {
                throw ConfigError(key + ": not a number: '" + it->second + "'");
            }
        }
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string str() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

/// Throws if `kv` has keys outside `known`; typos in parameter files should not pass silently.
template <typename Range>
void reject_unknown_keys(const KeyValues& kv, const Range& known) {
    for (const auto& [k, v] : kv.entries()) {
        bool found = false;
        for (const auto& name : known) found = found || k == name;
        if (!found) throw ConfigError("unknown key: " + k);
    }
}

}  // namespace vwm
