#include "tucksum/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tucksum {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

double parse_real(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not a number: " + text);
    }
    if (used != text.size()) {
        throw std::invalid_argument("config: key '" + key + "' has trailing text: " + text);
    }
    return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not an integer: " + text);
    }
    if (used != text.size()) {
        throw std::invalid_argument("config: key '" + key + "' has trailing text: " + text);
    }
    return v;
}

} // namespace

KeyValues KeyValues::from_stream(std::istream& is) {
    KeyValues out;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                            " names an empty section");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not 'key = value': " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " has an empty key");
        }
        out.kv_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return out;
}

KeyValues KeyValues::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("config: cannot open " + path);
    }
    return from_stream(is);
}

KeyValues KeyValues::from_text(const std::string& text) {
    std::istringstream is(text);
    return from_stream(is);
}

void KeyValues::set(const std::string& key, std::string value) { kv_[key] = std::move(value); }

KeyValues KeyValues::scoped(const std::string& section) const {
    KeyValues out;
    const std::string prefix = section + ".";
    for (const auto& [key, value] : kv_) {
        if (key.compare(0, prefix.size(), prefix) == 0) {
            out.kv_[key.substr(prefix.size())] = value;
        }
    }
    return out;
}

bool KeyValues::has(const std::string& key) const { return kv_.count(key) != 0; }

const std::string& KeyValues::raw(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) {
        throw std::invalid_argument("config: missing key '" + key + "'");
    }
    return it->second;
}

std::string KeyValues::str(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
}

double KeyValues::real(const std::string& key, double fallback) const {
    return has(key) ? parse_real(key, raw(key)) : fallback;
}

Index KeyValues::integer(const std::string& key, Index fallback) const {
    return has(key) ? static_cast<Index>(parse_integer(key, raw(key))) : fallback;
}

std::uint64_t KeyValues::uint(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) {
        return fallback;
    }
    const long long v = parse_integer(key, raw(key));
    if (v < 0) {
        throw std::invalid_argument("config: key '" + key + "' must be nonnegative");
    }
    return static_cast<std::uint64_t>(v);
}

bool KeyValues::flag(const std::string& key, bool fallback) const {
    if (!has(key)) {
        return fallback;
    }
    std::string v = raw(key);
    for (char& c : v) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (v == "1" || v == "true" || v == "on" || v == "yes") {
        return true;
    }
    if (v == "0" || v == "false" || v == "off" || v == "no") {
        return false;
    }
    throw std::invalid_argument("config: key '" + key + "' is not a boolean: " + v);
}

std::vector<Index> KeyValues::integers(const std::string& key, std::vector<Index> fallback) const {
    if (!has(key)) {
        return fallback;
    }
    std::vector<Index> out;
    for (const std::string& item : split_commas(raw(key))) {
        out.push_back(static_cast<Index>(parse_integer(key, item)));
    }
    return out;
}

std::vector<double> KeyValues::reals(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) {
        return fallback;
    }
    std::vector<double> out;
    for (const std::string& item : split_commas(raw(key))) {
        out.push_back(parse_real(key, item));
    }
    return out;
}

std::vector<std::string> KeyValues::strings(const std::string& key,
                                            std::vector<std::string> fallback) const {
    if (!has(key)) {
        return fallback;
    }
    return split_commas(raw(key));
}

} // namespace tucksum
