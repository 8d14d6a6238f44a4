#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fdd/error.hpp"

namespace fdd {

/// Flat `key = value` text: one pair per line, `#` starts a comment, lists are comma-separated.
/// Every key must be consumed by some reader; leftovers are reported as typos.
class KeyValues {
public:
    static KeyValues parse(std::istream& in, const std::string& source = "<config>")
    {
        KeyValues kv;
        kv.source_ = source;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) {
                line.erase(hash);
            }
            const auto trimmed = trim(line);
            if (trimmed.empty()) {
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw InputError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
            }
            const auto key = trim(trimmed.substr(0, eq));
            const auto value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw InputError(source + ":" + std::to_string(line_no) + ": empty key");
            }
            if (!kv.values_.emplace(key, value).second) {
                throw InputError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
            }
        }
        return kv;
    }

    static KeyValues load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) {
            throw IoError("cannot open '" + path + "'");
        }
        return parse(in, path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::optional<std::string> take_string(const std::string& key)
    {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return std::nullopt;
        }
        used_.insert(key);
        return it->second;
    }

    template <class T>
    void read(const std::string& key, T& target)
    {
        if (auto s = take_string(key)) {
            target = convert<T>(key, *s);
        }
    }

    template <class T>
    void read_list(const std::string& key, std::vector<T>& target)
    {
        if (auto s = take_string(key)) {
            target.clear();
            std::stringstream ss(*s);
            std::string item;
            while (std::getline(ss, item, ',')) {
                target.push_back(convert<T>(key, trim(item)));
            }
        }
    }

    /// Throws if any key was never read.
    void ensure_consumed() const
    {
        std::string unknown;
        for (const auto& [k, v] : values_) {
            if (used_.count(k) == 0) {
                unknown += (unknown.empty() ? "" : ", ") + k;
            }
        }
        if (!unknown.empty()) {
            throw InputError(source_ + ": unknown keys: " + unknown);
        }
    }

private:
    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) {
            return {};
        }
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    template <class T>
    T convert(const std::string& key, const std::string& s) const
    {
        if constexpr (std::is_same_v<T, std::string>) {
            return s;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (s == "true" || s == "1" || s == "yes") {
                return true;
            }
            if (s == "false" || s == "0" || s == "no") {
                return false;
            }
            throw InputError(source_ + ": key '" + key + "': expected a boolean, got '" + s + "'");
        } else {
            T v{};
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
                throw InputError(source_ + ": key '" + key + "': cannot parse '" + s + "'");
            }
            return v;
        }
    }

    std::string source_;
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

} // namespace fdd
