#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pdfd/errors.hpp"
#include "pdfd/objectives.hpp"

namespace pdfd {

/// Merged run configuration: defaults, then the `key = value` config file,
/// then flag overrides, then the PDFD_SEED environment variable.
struct RunConfig {
    // paths
    std::string features;
    std::string split;
    std::string wordvecs;
    std::string taxonomy;
    std::string out;
    std::string checkpoint;

    // semantic embedding
    std::string hierarchy = "jiang-conrath"; // or "path"

    // model
    int d_ret = 64;
    int hidden = 256;
    bool progressive = true;

    // training
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.99;
    double epsilon = 1e-8;
    int batch_size = 32;
    int epochs = 10;
    std::uint64_t seed = 1;
    int disc_steps = 1;
    double clip_norm = 5.0;
    bool non_saturating = false;
    int checkpoint_every = 0; // epochs; 0 = final only
    long max_steps = 0;       // 0 = no cap
    LossWeights weights;      // Sketchy defaults

    // evaluation
    std::string metric = "cosine";
    bool binary = false;
    int itq_iters = 50;
    int bits = 64;

    // synthesis
    int n_classes = 16;
    int per_class = 40;
    int d_vis = 64;
    int latent_dim = 8;
    double offset_scale = 1.0;
    double noise_scale = 0.05;
    double seen_fraction = 0.75;
    std::string feature_format = "text"; // or "binary"
    bool create = false;                 // create the output directory

    void apply(const std::string& key, const std::string& value);
    void apply_file(const std::string& path);
    void apply_overrides(const std::map<std::string, std::string>& overrides);
    void apply_env();
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

inline long long parse_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long out;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
    if (pos != v.size())
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a real number, got '" + v + "'");
    }
    if (pos != v.size())
        throw ConfigError("config: '" + key + "' expects a real number, got '" + v + "'");
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace detail

inline void RunConfig::apply(const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_int;
    using detail::parse_real;
    if (key == "features") features = value;
    else if (key == "split") split = value;
    else if (key == "wordvecs") wordvecs = value;
    else if (key == "taxonomy") taxonomy = value;
    else if (key == "out") out = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "hierarchy") {
        if (value != "path" && value != "jiang-conrath")
            throw ConfigError("config: hierarchy must be 'path' or 'jiang-conrath'");
        hierarchy = value;
    } else if (key == "d_ret") d_ret = static_cast<int>(parse_int(key, value));
    else if (key == "hidden") hidden = static_cast<int>(parse_int(key, value));
    else if (key == "progressive") progressive = parse_bool(key, value);
    else if (key == "lr") lr = parse_real(key, value);
    else if (key == "beta1") beta1 = parse_real(key, value);
    else if (key == "beta2") beta2 = parse_real(key, value);
    else if (key == "epsilon") epsilon = parse_real(key, value);
    else if (key == "batch_size") batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "epochs") epochs = static_cast<int>(parse_int(key, value));
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "disc_steps") disc_steps = static_cast<int>(parse_int(key, value));
    else if (key == "clip_norm") clip_norm = parse_real(key, value);
    else if (key == "non_saturating") non_saturating = parse_bool(key, value);
    else if (key == "checkpoint_every")
        checkpoint_every = static_cast<int>(parse_int(key, value));
    else if (key == "max_steps") max_steps = parse_int(key, value);
    else if (key == "lambda_adv") weights.lambda_adv = parse_real(key, value);
    else if (key == "lambda_ccls") weights.lambda_ccls = parse_real(key, value);
    else if (key == "lambda_rec") weights.lambda_rec = parse_real(key, value);
    else if (key == "lambda_mcls") weights.lambda_mcls = parse_real(key, value);
    else if (key == "metric") metric = value;
    else if (key == "binary") binary = parse_bool(key, value);
    else if (key == "itq_iters") itq_iters = static_cast<int>(parse_int(key, value));
    else if (key == "bits") bits = static_cast<int>(parse_int(key, value));
    else if (key == "n_classes") n_classes = static_cast<int>(parse_int(key, value));
    else if (key == "per_class") per_class = static_cast<int>(parse_int(key, value));
    else if (key == "d_vis") d_vis = static_cast<int>(parse_int(key, value));
    else if (key == "latent_dim") latent_dim = static_cast<int>(parse_int(key, value));
    else if (key == "offset_scale") offset_scale = parse_real(key, value);
    else if (key == "noise_scale") noise_scale = parse_real(key, value);
    else if (key == "seen_fraction") seen_fraction = parse_real(key, value);
    else if (key == "feature_format") {
        if (value != "text" && value != "binary")
            throw ConfigError("config: feature_format must be 'text' or 'binary'");
        feature_format = value;
    } else if (key == "create") create = parse_bool(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline void RunConfig::apply_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        apply(key, value);
    }
}

inline void RunConfig::apply_overrides(const std::map<std::string, std::string>& overrides) {
    for (const auto& [key, value] : overrides) apply(key, value);
}

inline void RunConfig::apply_env() {
    if (const char* env = std::getenv("PDFD_SEED")) {
        seed = static_cast<std::uint64_t>(detail::parse_int("PDFD_SEED", env));
    }
}

/// Assemble a config: defaults <- file <- flags <- PDFD_SEED.
inline RunConfig make_run_config(const std::string& config_path,
                                 const std::map<std::string, std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply_file(config_path);
    cfg.apply_overrides(overrides);
    cfg.apply_env();
    return cfg;
}

/// Check that every input path a command needs exists right now.
inline void require_readable(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("config: missing required path '" + what + "'");
    if (!std::filesystem::exists(path))
        throw ConfigError("config: " + what + " path '" + path + "' does not exist");
}

inline void require_out_dir(const RunConfig& cfg) {
    if (cfg.out.empty()) throw ConfigError("config: missing required path 'out'");
    if (std::filesystem::exists(cfg.out)) {
        if (!std::filesystem::is_directory(cfg.out))
            throw ConfigError("config: out path '" + cfg.out + "' is not a directory");
        return;
    }
    if (!cfg.create)
        throw ConfigError("config: output directory '" + cfg.out +
                          "' does not exist (pass create = true or --create)");
    std::filesystem::create_directories(cfg.out);
}

} // namespace pdfd
