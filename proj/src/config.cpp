#include "mtlseg/config.hpp"

#include <fstream>
#include <sstream>

#include "mtlseg/common.hpp"

namespace mtlseg {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) out.push_back(trim(item));
    return out;
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_string(buf.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config c;
    c.origin_ = origin;

    std::istringstream is(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            c.sections_[section];  // remember even if empty
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (section.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                              "' appears before any [section] header");
        }
        if (!c.sections_[section].emplace(key, value).second) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                              key + "' in [" + section + "]");
        }
    }
    return c;
}

void Config::check_allowed(const std::map<std::string, std::set<std::string>>& allowed) const {
    for (const auto& [section, entries] : sections_) {
        const auto it = allowed.find(section);
        if (it == allowed.end()) {
            throw ConfigError(origin_ + ": unknown section [" + section + "]");
        }
        for (const auto& [key, value] : entries) {
            if (!it->second.contains(key)) {
                throw ConfigError(origin_ + ": unknown key '" + key + "' in [" + section +
                                  "]");
            }
        }
    }
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
    const auto sit = sections_.find(section);
    if (sit == sections_.end()) return nullptr;
    const auto kit = sit->second.find(key);
    return kit == sit->second.end() ? nullptr : &kit->second;
}

void Config::bad_value(const std::string& section, const std::string& key,
                       const std::string& value, const char* want) const {
    throw ConfigError(origin_ + ": [" + section + "] " + key + " = '" + value +
                      "' is not a valid " + want);
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v ? *v : fallback;
}

long Config::get_int(const std::string& section, const std::string& key,
                     long fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const long parsed = std::stol(*v, &used);
        if (used != v->size()) bad_value(section, key, *v, "integer");
        return parsed;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(section, key, *v, "integer");
    }
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const std::uint64_t parsed = std::stoull(*v, &used);
        if (used != v->size()) bad_value(section, key, *v, "unsigned integer");
        return parsed;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(section, key, *v, "unsigned integer");
    }
}

double Config::get_real(const std::string& section, const std::string& key,
                        double fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const double parsed = std::stod(*v, &used);
        if (used != v->size()) bad_value(section, key, *v, "real number");
        return parsed;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(section, key, *v, "real number");
    }
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    bad_value(section, key, *v, "boolean");
}

std::vector<int> Config::get_int_list(const std::string& section, const std::string& key,
                                      const std::vector<int>& fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const std::string& item : split_commas(*v)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) bad_value(section, key, *v, "integer list");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad_value(section, key, *v, "integer list");
        }
    }
    if (out.empty()) bad_value(section, key, *v, "integer list");
    return out;
}

std::vector<double> Config::get_real_list(const std::string& section, const std::string& key,
                                          const std::vector<double>& fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const std::string& item : split_commas(*v)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) bad_value(section, key, *v, "number list");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad_value(section, key, *v, "number list");
        }
    }
    if (out.empty()) bad_value(section, key, *v, "number list");
    return out;
}

}  // namespace mtlseg
