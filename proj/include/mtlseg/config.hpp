#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mtlseg {

// Line-oriented `key = value` configuration with `[section]` headers and `#`
// comments. Every consumer declares the keys it understands up front; any key
// or section outside that set is a hard error, so typos never pass silently.
class Config {
public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");

    // Throws ConfigError when the file mentions a section or key outside
    // `allowed` (map of section -> allowed keys).
    void check_allowed(const std::map<std::string, std::set<std::string>>& allowed) const;

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    double get_real(const std::string& section, const std::string& key,
                    double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    // Comma-separated lists.
    std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                  const std::vector<int>& fallback) const;
    std::vector<double> get_real_list(const std::string& section, const std::string& key,
                                      const std::vector<double>& fallback) const;

private:
    std::string origin_;
    std::map<std::string, std::map<std::string, std::string>> sections_;

    const std::string* find(const std::string& section, const std::string& key) const;
    [[noreturn]] void bad_value(const std::string& section, const std::string& key,
                                const std::string& value, const char* want) const;
};

}  // namespace mtlseg
