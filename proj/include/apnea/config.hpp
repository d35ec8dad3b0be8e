#ifndef APNEA_CONFIG_HPP
#define APNEA_CONFIG_HPP

// Minimal TOML subset for --config files: [section] headers, key = value
// with string/number/boolean scalars and flat arrays of numbers, plus
// '#' comments. Keys are exposed as "section.key".

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace apnea {

class TomlConfig {
public:
    static TomlConfig parse(const std::string& text);
    static TomlConfig parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::optional<std::string> get_string(const std::string& key) const;
    std::optional<double> get_double(const std::string& key) const;
    std::optional<long> get_int(const std::string& key) const;
    std::optional<bool> get_bool(const std::string& key) const;
    std::optional<std::vector<double>> get_double_array(const std::string& key) const;

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    std::map<std::string, std::string> values_;  // raw value text per dotted key
};

}  // namespace apnea

#endif
