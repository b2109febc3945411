#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "asac/array.hpp"

namespace asac {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Flat key-value configuration with dotted keys, e.g. `training.lambda = 0.1`.
/// One file fully reproduces a run; CLI flags write into the same store.
/// Reads are tracked so a run can reject keys nothing consumed (usually typos).
class KeyValues {
public:
    static KeyValues parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open '" + path + "'");
        KeyValues kv;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = detail::trim(line);
            if (s.empty() || s[0] == '#') continue;
            std::size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
            std::string key = detail::trim(s.substr(0, eq));
            std::string value = detail::trim(s.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
            kv.set(key, value);
        }
        return kv;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    /// Later entries win; used for flag overrides on top of a file.
    void merge(const KeyValues& overrides) {
        for (const auto& [k, v] : overrides.values_) values_[k] = v;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        touched_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        touched_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("config: missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        touched_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(key, it->second);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        touched_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_u64(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        touched_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "on") return true;
        if (it->second == "false" || it->second == "0" || it->second == "off") return false;
        throw ConfigError("config: key '" + key + "' expects a boolean, got '" + it->second + "'");
    }

    /// Comma-separated doubles.
    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
        touched_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_double(key, detail::trim(item)));
        if (out.empty()) throw ConfigError("config: key '" + key + "' expects at least one value");
        return out;
    }

    /// Every key must have been read by the time a run starts.
    void reject_unknown_keys() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : values_) {
            (void)v;
            if (!touched_.count(k)) unknown.push_back(k);
        }
        if (!unknown.empty()) {
            std::string msg = "config: unknown key(s):";
            for (const auto& k : unknown) msg += " '" + k + "'";
            throw ConfigError(msg);
        }
    }

    /// Canonical `key = value` lines, sorted; embedded in reports.
    std::string echo() const {
        std::ostringstream os;
        for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
        return os.str();
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static double parse_double(const std::string& key, const std::string& s) {
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' expects a number, got '" + s + "'");
        }
    }

    static std::uint64_t parse_u64(const std::string& key, const std::string& s) {
        try {
            std::size_t pos = 0;
            unsigned long long v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' expects a nonnegative integer, got '" + s + "'");
        }
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> touched_;
};

}  // namespace asac
