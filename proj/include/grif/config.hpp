#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace grif {

// Flat `key = value` configuration with a fixed schema. Unknown keys, type
// errors, and bad enum values are rejected with the offending line number.
// Every run's resolved configuration is reproducible from resolved_text().
class Config {
public:
    // All defaults, no overrides.
    Config();

    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    int64_t get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_str(const std::string& key) const;  // string and enum keys

    void set(const std::string& key, const std::string& value);  // validated like a file line

    // Deterministic `key = value` dump of the fully resolved config.
    std::string resolved_text() const;
    uint64_t hash() const;
    void save_resolved(const std::string& path) const;

private:
    std::map<std::string, std::string> values_;
};

std::vector<std::string> split_csv(const std::string& s);

}  // namespace grif
