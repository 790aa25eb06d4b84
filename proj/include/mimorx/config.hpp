#pragma once

// LinkConfig: every system dimension and experiment knob, plus the flat
// `key = value` text format used for config files and dataset headers.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace mimorx {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SnrMode { fixed, mixed };

struct LinkConfig {
    // system dimensions
    Index M = 64;        // subcarriers
    Index L = 16;        // channel taps
    Index L_cp = 16;     // cyclic prefix length
    Index Nt = 2;
    Index Nr = 4;
    Index M_p = 32;      // pilots per antenna; must equal Nt * L
    Index K = 8;         // carriers per network

    // signal levels
    double snr_db = 15.0;
    double clipping_db = 7.0;
    double delta = 5.0;  // Rapp smoothness
    double rho = 1.0;    // per-antenna average transmit power
    bool linear_pa = false;

    // channel generator
    Index max_paths = 10;
    Index max_delay = 6;

    std::uint64_t seed = 1;

    // dataset / training
    Index train_samples = 50000;
    Index test_samples = 2000;
    Index batch_size = 300;
    Index epochs = 50;
    double learning_rate = 1e-2;
    double validation_fraction = 0.2;
    SnrMode snr_mode = SnrMode::mixed;
    std::vector<double> train_snr_db{5, 10, 15, 20, 25};
    std::vector<Index> train_groups{0, 1, 8, 9};
    double lr_decay = 0.93;    // per-epoch learning-rate multiplier
    Index patience = 12;       // early-stopping patience in epochs; 0 disables
    // multipliers on the reference hidden widths, per receiver kind
    double width_scale_type1 = 0.125;
    double width_scale_data_driven = 0.25;
    double width_scale_type2 = 0.125;
    bool augment = true;       // random receive-side symmetry draws on each training batch

    // benchmarks
    Index k_mld = 2;
    Index mld_budget = 65536;

    Index groups_total() const { return Nt * M / K; }
    double sigma2() const { return static_cast<double>(Nt) * rho / std::pow(10.0, snr_db / 10.0); }

    /// Throws DimensionError on the first violated invariant.
    void validate() const {
        auto need = [](bool ok, const std::string& what) {
            if (!ok) throw DimensionError("LinkConfig: " + what);
        };
        need(M >= 1 && L >= 1 && Nt >= 1 && Nr >= 1 && K >= 1, "dimensions must be positive");
        need(L <= M, "L must not exceed M");
        need(L_cp >= L - 1, "L_cp >= L-1 required");
        need(L_cp <= M, "L_cp must not exceed M");
        need(M_p == Nt * L, "M_p must equal Nt*L");
        need(M_p <= M && M % M_p == 0, "M must be divisible by M_p");
        need(M % K == 0, "K must divide M");
        need(rho > 0.0, "rho must be positive");
        need(delta > 0.0, "delta must be positive");
        need(std::isfinite(snr_db) && std::isfinite(clipping_db), "snr/clipping must be finite");
        need(max_paths >= 1 && max_delay >= 0 && max_delay < L, "channel generator needs 0 <= max_delay < L");
        need(batch_size >= 2, "batch_size must be >= 2");
        need(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction in [0,1)");
        need(width_scale_type1 > 0.0 && width_scale_data_driven > 0.0 && width_scale_type2 > 0.0,
             "width scales must be positive");
        need(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay in (0,1]");
        need(patience >= 0, "patience must be nonnegative");
        for (auto g : train_groups) need(g >= 0 && g < groups_total(), "train_groups entry out of range");
        need(!train_snr_db.empty(), "train_snr_db must be nonempty");
        need(k_mld >= 1 && k_mld <= M, "k_mld out of range");
    }
};

/// Desk-scale profile (default-constructed LinkConfig).
inline LinkConfig desk_profile() { return LinkConfig{}; }

/// Full-size system dimensions; training at this size is a long-running job.
inline LinkConfig paper_profile() {
    LinkConfig c;
    c.M = 128;
    c.L = 16;
    c.L_cp = 16;
    c.Nt = 2;
    c.Nr = 8;
    c.M_p = 32;
    c.K = 8;
    c.train_samples = 240000;
    c.width_scale_type1 = c.width_scale_data_driven = c.width_scale_type2 = 1.0;
    c.epochs = 20;
    c.learning_rate = 1e-3;
    c.lr_decay = 1.0;
    c.patience = 0;
    c.train_groups.clear();
    for (Index g = 0; g < c.groups_total(); ++g) c.train_groups.push_back(g);
    return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
    }
}

template <class T, class F>
std::vector<T> parse_list(const std::string& s, F&& conv) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(conv(item));
    }
    return out;
}

}  // namespace detail

/// Binds each documented key to a LinkConfig field.
struct ConfigField {
    std::function<void(LinkConfig&, const std::string&)> set;
    std::function<std::string(const LinkConfig&)> get;
};

inline const std::map<std::string, ConfigField>& config_fields() {
    using namespace detail;
    static const std::map<std::string, ConfigField> fields = [] {
        std::map<std::string, ConfigField> f;
        auto idx = [&f](const char* key, Index LinkConfig::*m) {
            f[key] = {[key, m](LinkConfig& c, const std::string& v) { c.*m = static_cast<Index>(parse_int(key, v)); },
                      [m](const LinkConfig& c) { return std::to_string(c.*m); }};
        };
        auto dbl = [&f](const char* key, double LinkConfig::*m) {
            f[key] = {[key, m](LinkConfig& c, const std::string& v) { c.*m = parse_double(key, v); },
                      [m](const LinkConfig& c) {
                          std::ostringstream os;
                          os.precision(17);
                          os << c.*m;
                          return os.str();
                      }};
        };
        idx("M", &LinkConfig::M);
        idx("L", &LinkConfig::L);
        idx("L_cp", &LinkConfig::L_cp);
        idx("Nt", &LinkConfig::Nt);
        idx("Nr", &LinkConfig::Nr);
        idx("M_p", &LinkConfig::M_p);
        idx("K", &LinkConfig::K);
        dbl("snr_db", &LinkConfig::snr_db);
        dbl("clipping_db", &LinkConfig::clipping_db);
        dbl("delta", &LinkConfig::delta);
        dbl("rho", &LinkConfig::rho);
        f["linear_pa"] = {[](LinkConfig& c, const std::string& v) {
                              if (v != "0" && v != "1" && v != "true" && v != "false")
                                  throw ConfigError("config key 'linear_pa': expected true/false, got '" + v + "'");
                              c.linear_pa = (v == "1" || v == "true");
                          },
                          [](const LinkConfig& c) { return std::string(c.linear_pa ? "true" : "false"); }};
        idx("max_paths", &LinkConfig::max_paths);
        idx("max_delay", &LinkConfig::max_delay);
        f["seed"] = {[](LinkConfig& c, const std::string& v) {
                         try {
                             std::size_t pos = 0;
                             c.seed = std::stoull(v, &pos);
                             if (pos != v.size()) throw std::invalid_argument(v);
                         } catch (const std::exception&) {
                             throw ConfigError("config key 'seed': expected an unsigned integer, got '" + v + "'");
                         }
                     },
                     [](const LinkConfig& c) { return std::to_string(c.seed); }};
        idx("train_samples", &LinkConfig::train_samples);
        idx("test_samples", &LinkConfig::test_samples);
        idx("batch_size", &LinkConfig::batch_size);
        idx("epochs", &LinkConfig::epochs);
        dbl("learning_rate", &LinkConfig::learning_rate);
        dbl("validation_fraction", &LinkConfig::validation_fraction);
        f["snr_mode"] = {[](LinkConfig& c, const std::string& v) {
                             if (v == "fixed")
                                 c.snr_mode = SnrMode::fixed;
                             else if (v == "mixed")
                                 c.snr_mode = SnrMode::mixed;
                             else
                                 throw ConfigError("config key 'snr_mode': expected fixed|mixed, got '" + v + "'");
                         },
                         [](const LinkConfig& c) { return std::string(c.snr_mode == SnrMode::fixed ? "fixed" : "mixed"); }};
        f["train_snr_db"] = {[](LinkConfig& c, const std::string& v) {
                                 c.train_snr_db = parse_list<double>(v, [](const std::string& s) { return parse_double("train_snr_db", s); });
                             },
                             [](const LinkConfig& c) { return join(c.train_snr_db); }};
        f["train_groups"] = {[](LinkConfig& c, const std::string& v) {
                                 c.train_groups = parse_list<Index>(
                                     v, [](const std::string& s) { return static_cast<Index>(parse_int("train_groups", s)); });
                             },
                             [](const LinkConfig& c) { return join(c.train_groups); }};
        dbl("lr_decay", &LinkConfig::lr_decay);
        idx("patience", &LinkConfig::patience);
        dbl("width_scale_type1", &LinkConfig::width_scale_type1);
        dbl("width_scale_data_driven", &LinkConfig::width_scale_data_driven);
        dbl("width_scale_type2", &LinkConfig::width_scale_type2);
        f["augment"] = {[](LinkConfig& c, const std::string& v) {
                            if (v != "0" && v != "1" && v != "true" && v != "false")
                                throw ConfigError("config key 'augment': expected true/false, got '" + v + "'");
                            c.augment = (v == "1" || v == "true");
                        },
                        [](const LinkConfig& c) { return std::string(c.augment ? "true" : "false"); }};
        idx("k_mld", &LinkConfig::k_mld);
        idx("mld_budget", &LinkConfig::mld_budget);
        return f;
    }();
    return fields;
}

/// Applies `key = value` lines on top of `base`. Blank lines and `#` comments
/// are ignored; unknown keys raise ConfigError naming the key.
inline LinkConfig parse_config(const std::string& text, LinkConfig base = {}) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        const auto& fields = config_fields();
        auto it = fields.find(key);
        if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second.set(base, value);
    }
    return base;
}

inline LinkConfig load_config(const std::string& path, LinkConfig base = {}) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

inline std::string format_config(const LinkConfig& c) {
    std::ostringstream os;
    for (const auto& [key, field] : config_fields()) os << key << " = " << field.get(c) << "\n";
    return os.str();
}

}  // namespace mimorx
