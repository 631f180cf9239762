// Run configuration as flat key=value settings, with a fixed registry of
// keys, defaults and help text shared by the config-file reader, the C API
// and the command line.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tracks/experiment.hpp"

namespace tracks {

struct ConfigKey {
    const char* name;
    const char* default_value;
    const char* doc;
};

const std::vector<ConfigKey>& config_keys();
const ConfigKey* find_config_key(const std::string& name);

class Config {
  public:
    Config();

    /// Throws ConfigError for unknown keys. Values are validated by
    /// to_experiment().
    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    /// `key = value` lines, `#` comments, and `include <path>` (relative to
    /// the including file).
    void load_file(const std::string& path);

    /// All keys in registry order.
    const std::vector<std::pair<std::string, std::string>>& items() const { return values_; }
    std::uint64_t hash() const;

    /// Typed, validated view; throws ConfigError.
    ExperimentConfig to_experiment() const;

  private:
    void load_file(const std::string& path, int depth);

    std::vector<std::pair<std::string, std::string>> values_;
};

bool parse_bool(const std::string& key, const std::string& v);
std::uint64_t parse_u64(const std::string& key, const std::string& v);
double parse_f64(const std::string& key, const std::string& v);

}  // namespace tracks
