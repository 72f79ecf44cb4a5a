#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tucksum/types.hpp"

namespace tucksum {

// "key = value" configuration text: one pair per line, '#' starts a comment,
// blank lines are skipped. A "[section]" line prefixes every following key as
// "section.key"; scoped() recovers one section as a flat KeyValues. Values
// keep their raw text; the typed getters parse on demand and throw
// std::invalid_argument on malformed input.
class KeyValues {
public:
    KeyValues() = default;

    [[nodiscard]] static KeyValues from_stream(std::istream& is);
    [[nodiscard]] static KeyValues from_file(const std::string& path);
    [[nodiscard]] static KeyValues from_text(const std::string& text);

    void set(const std::string& key, std::string value);
    [[nodiscard]] bool has(const std::string& key) const;
    // Raw text of a key that must exist.
    [[nodiscard]] const std::string& raw(const std::string& key) const;

    [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] double real(const std::string& key, double fallback) const;
    [[nodiscard]] Index integer(const std::string& key, Index fallback) const;
    [[nodiscard]] std::uint64_t uint(const std::string& key, std::uint64_t fallback) const;
    [[nodiscard]] bool flag(const std::string& key, bool fallback) const;

    // Comma-separated lists.
    [[nodiscard]] std::vector<Index> integers(const std::string& key,
                                              std::vector<Index> fallback) const;
    [[nodiscard]] std::vector<double> reals(const std::string& key,
                                            std::vector<double> fallback) const;
    [[nodiscard]] std::vector<std::string> strings(const std::string& key,
                                                   std::vector<std::string> fallback) const;

    // Entries under "section." with that prefix removed.
    [[nodiscard]] KeyValues scoped(const std::string& section) const;

    [[nodiscard]] const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

} // namespace tucksum
