#include "apnea/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace apnea {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

}  // namespace

TomlConfig TomlConfig::parse(const std::string& text) {
    TomlConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": empty section name");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": empty key or value");
        std::string full = section.empty() ? key : section + "." + key;
        cfg.values_[full] = value;
    }
    return cfg;
}

TomlConfig TomlConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<std::string> TomlConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = it->second;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

std::optional<double> TomlConfig::get_double(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(it->second, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != it->second.size())
        throw std::runtime_error("config key " + key + ": not a number: " + it->second);
    return v;
}

std::optional<long> TomlConfig::get_int(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(it->second, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != it->second.size())
        throw std::runtime_error("config key " + key + ": not an integer: " + it->second);
    return v;
}

std::optional<bool> TomlConfig::get_bool(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw std::runtime_error("config key " + key + ": not a boolean: " + it->second);
}

std::optional<std::vector<double>> TomlConfig::get_double_array(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const std::string& v = it->second;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw std::runtime_error("config key " + key + ": not an array: " + v);
    std::vector<double> out;
    std::string body = v.substr(1, v.size() - 2);
    std::istringstream is(body);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size())
            throw std::runtime_error("config key " + key + ": bad array element: " + item);
    }
    return out;
}

}  // namespace apnea
