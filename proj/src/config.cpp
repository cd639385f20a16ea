#include "fusevid/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fusevid/errors.hpp"

namespace fusevid {
namespace {

const char* type_name(ConfigType t) {
    switch (t) {
        case ConfigType::u64: return "integer";
        case ConfigType::f64: return "number";
        case ConfigType::boolean: return "flag";
        case ConfigType::text: return "text";
    }
    return "?";
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

bool parse_f64(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1") return out = true, true;
    if (s == "false" || s == "0") return out = false, true;
    return false;
}

// Validates and returns the canonical spelling, so two configs holding the
// same values always compare and render identically.
std::string canonical_value(const ConfigKey& key, const std::string& raw,
                            const std::string& where) {
    if (key.type == ConfigType::u64) {
        std::uint64_t v;
        if (parse_u64(raw, v)) return std::to_string(v);
    } else if (key.type == ConfigType::f64) {
        double v;
        if (parse_f64(raw, v)) return format_f64(v);
    } else if (key.type == ConfigType::boolean) {
        bool v;
        if (parse_bool(raw, v)) return v ? "true" : "false";
    } else {
        return raw;
    }
    throw ConfigError(where + "value for '" + key.name + "' is not " +
                      (key.type == ConfigType::u64 ? "an " : "a ") +
                      type_name(key.type) + ": '" + raw + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_registry() {
    static const std::vector<ConfigKey> keys = {
        {"seed", ConfigType::u64, "42",
         "master seed for parameter init and all training streams"},
        {"schedule.timesteps", ConfigType::u64, "50",
         "number of diffusion timesteps T"},
        {"schedule.beta_start", ConfigType::f64, "0.00085",
         "first beta of the scaled-linear schedule"},
        {"schedule.beta_end", ConfigType::f64, "0.012",
         "last beta of the scaled-linear schedule"},
        {"schedule.mode", ConfigType::text, "v",
         "prediction parameterization: v or epsilon"},
        {"schedule.zero_snr", ConfigType::boolean, "true",
         "rescale so the terminal step has exactly zero signal"},
        {"media.channels", ConfigType::u64, "8", "latent channel count"},
        {"media.patch_p", ConfigType::u64, "2", "spatial patch size"},
        {"media.patch_q", ConfigType::u64, "1", "temporal patch size"},
        {"text.width", ConfigType::u64, "32",
         "embedding width of the text token simulators"},
        {"text.encoder_seed", ConfigType::u64, "1234",
         "seed of the encoder-branch token simulator"},
        {"fuser.alpha", ConfigType::f64, "1",
         "scale on the pooled decoder-branch contribution"},
        {"fuser.gamma_init", ConfigType::f64, "0.01",
         "initial per-channel scale of the decoder-branch norm"},
        {"fuser.eps", ConfigType::f64, "1e-05",
         "layer-norm epsilon inside the fuser"},
        {"fuser.use_decoder", ConfigType::boolean, "true",
         "feed decoder-branch tokens through the fuser"},
        {"fuser.use_norm", ConfigType::boolean, "true",
         "normalize decoder tokens before fusing"},
        {"fuser.use_zero_conv", ConfigType::boolean, "true",
         "route both branches through zero-initialized projections"},
        {"fuser.use_ss", ConfigType::boolean, "true",
         "append stabilizer tokens to the conditioning sequence"},
        {"model.d_model", ConfigType::u64, "64", "transformer width"},
        {"model.depth", ConfigType::u64, "2", "transformer block count"},
        {"model.heads", ConfigType::u64, "4", "attention head count"},
        {"train.steps", ConfigType::u64, "200", "optimizer steps"},
        {"train.batch", ConfigType::u64, "2", "items per step"},
        {"train.lr", ConfigType::f64, "0.001", "Adam learning rate"},
        {"train.clips", ConfigType::u64, "8",
         "number of synthetic clips in the training set"},
        {"train.data_seed", ConfigType::u64, "7",
         "seed of the synthetic dataset"},
        {"train.answer_seed", ConfigType::u64, "99",
         "base seed of the per-step decoder answer resampling"},
        {"train.checkpoint_every", ConfigType::u64, "0",
         "checkpoint period in steps; 0 keeps only the final checkpoint"},
    };
    return keys;
}

namespace {

const ConfigKey* find_key(const std::string& name) {
    for (const ConfigKey& k : config_registry())
        if (k.name == name) return &k;
    return nullptr;
}

}  // namespace

std::string format_f64(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

RunConfig::RunConfig() {
    for (const ConfigKey& k : config_registry())
        values_[k.name] =
            canonical_value(k, k.default_value, "config registry: ");
}

void RunConfig::set(const std::string& key, const std::string& raw,
                    const std::string& where) {
    const ConfigKey* k = find_key(key);
    if (!k) throw ConfigError(where + "unknown key '" + key + "'");
    values_[key] = canonical_value(*k, raw, where);
}

const std::string& RunConfig::raw(const std::string& key,
                                  ConfigType want) const {
    const ConfigKey* k = find_key(key);
    if (!k) throw ConfigError("config: unknown key '" + key + "'");
    if (k->type != want)
        throw ConfigError("config: key '" + key + "' holds " +
                          std::string(type_name(k->type)) + ", not " +
                          type_name(want));
    return values_.at(key);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    std::uint64_t v = 0;
    parse_u64(raw(key, ConfigType::u64), v);
    return v;
}

double RunConfig::get_f64(const std::string& key) const {
    double v = 0.0;
    parse_f64(raw(key, ConfigType::f64), v);
    return v;
}

bool RunConfig::get_bool(const std::string& key) const {
    bool v = false;
    parse_bool(raw(key, ConfigType::boolean), v);
    return v;
}

const std::string& RunConfig::get_text(const std::string& key) const {
    return raw(key, ConfigType::text);
}

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where =
            origin + ": line " + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + "expected 'key = value', got '" + line +
                              "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + "missing key before '='");
        if (seen.count(key))
            throw ConfigError(where + "duplicate key '" + key +
                              "' (first set on line " +
                              std::to_string(seen[key]) + ")");
        seen[key] = line_no;
        cfg.set(key, value, where);
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream body;
    body << in.rdbuf();
    return parse_config_text(body.str(), path);
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream out;
    for (const ConfigKey& k : config_registry()) {
        out << k.name << " = ";
        if (k.type == ConfigType::u64)
            out << cfg.get_u64(k.name);
        else if (k.type == ConfigType::boolean)
            out << (cfg.get_bool(k.name) ? "true" : "false");
        else if (k.type == ConfigType::text)
            out << cfg.get_text(k.name);
        else
            out << format_f64(cfg.get_f64(k.name));
        out << "\n";
    }
    return out.str();
}

std::string config_help() {
    std::ostringstream out;
    for (const ConfigKey& k : config_registry())
        out << k.name << " (" << type_name(k.type) << ", default "
            << k.default_value << "): " << k.doc << "\n";
    return out.str();
}

}  // namespace fusevid
