#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fusevid {

// Flat key = value run configuration.
//
// Every key lives in a registry with a type, a default, and a one-line
// description; unknown keys are rejected at parse time so typos fail fast.
// Files are plain text: one "key = value" per line, '#' starts a comment,
// blank lines are ignored. A RunConfig always holds a value for every
// registered key.

enum class ConfigType { u64, f64, boolean, text };

struct ConfigKey {
    std::string name;
    ConfigType type;
    std::string default_value;
    std::string doc;
};

// All recognized keys, in canonical (render) order.
const std::vector<ConfigKey>& config_registry();

class RunConfig {
  public:
    RunConfig();  // every key at its default

    // Validates the key against the registry and the raw text against the
    // key's type. `where` names the source location for error messages.
    void set(const std::string& key, const std::string& raw,
             const std::string& where = "");

    std::uint64_t get_u64(const std::string& key) const;
    double get_f64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_text(const std::string& key) const;

    bool operator==(const RunConfig& other) const {
        return values_ == other.values_;
    }

  private:
    const std::string& raw(const std::string& key, ConfigType want) const;
    std::map<std::string, std::string> values_;
};

// Parses config text; `origin` names the source in errors (e.g. file path).
RunConfig parse_config_text(const std::string& text,
                            const std::string& origin = "config");
RunConfig load_config(const std::string& path);

// Canonical "key = value" listing of the fully resolved config, one line per
// registered key in registry order. parse_config_text inverts it.
std::string render_config(const RunConfig& cfg);

// Registry listing with types, defaults and descriptions, for --help output.
std::string config_help();

// Shortest decimal text that parses back to exactly the same double.
std::string format_f64(double v);

}  // namespace fusevid
