#pragma once

// Experiment configuration: a flat `key = value` text format with `#`
// comments, overridable by QUACK_<KEY> environment variables (key upper-cased).
// Every key has a default, so an empty file describes the reference
// experiment: 240-step synthetic series, window 5, 25 + 25 tuner evaluations.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "quack/error.hpp"
#include "quack/kernels.hpp"
#include "quack/qkernel.hpp"
#include "quack/timeseries.hpp"

namespace quack::config {

struct Bounds {
    double lower;
    double upper;
};

struct ExperimentConfig {
    timeseries::GenSpec gen{};
    std::string series_csv;  ///< if set, load this series instead of generating

    std::size_t window = 5;
    std::size_t train_overlap = 2;
    double train_frac = 0.75;

    kernels::Kind kernel = kernels::Kind::IQP;
    double matern_nu = 2.5;
    bool matern_all = false;

    Bounds alpha{0.0, 1.0};
    Bounds mean{-1.0, 1.0};
    Bounds noise{0.0, 1.0};
    Bounds lengthscale{0.1, 30.0};
    Bounds rq_beta{0.1, 10.0};
    Bounds period{5.0, 35.0};

    std::size_t n_init = 25;
    std::size_t n_query = 25;
    std::size_t restarts = 16;
    std::uint64_t seed_bo = 0;

    std::string out_dir = "quack_out";
    int qubit_ceiling = qkernel::kDefaultQubitCeiling;

    std::size_t landscape_points = 61;
    double landscape_alpha = -1.0;  ///< negative: take alpha from the tuned IQP model

    std::vector<std::size_t> ablation_qubits{5, 6, 7, 8, 9, 10};
    std::size_t ablation_steps = 480;
    std::size_t ablation_overlap = 4;

    std::uint64_t seed_data() const noexcept { return gen.seed; }

    void validate() const {
        if (window < 1) throw ConfigError("window must be positive");
        if (train_overlap >= window) throw ConfigError("train_overlap must be smaller than window");
        if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
        if (n_init < 1 || n_query < 1) throw ConfigError("n_init and n_query must be >= 1");
        if (restarts < 1) throw ConfigError("restarts must be >= 1");
        for (const auto* b : {&alpha, &mean, &noise, &lengthscale, &rq_beta, &period}) {
            if (!(b->lower < b->upper)) throw ConfigError("every bound pair needs lower < upper");
        }
        if (alpha.lower < 0.0 || alpha.upper > 1.0) throw ConfigError("alpha bounds must lie within [0, 1]");
        if (noise.lower < 0.0) throw ConfigError("noise variance bounds must be >= 0");
        if (lengthscale.lower <= 0.0 || rq_beta.lower <= 0.0 || period.lower <= 0.0)
            throw ConfigError("lengthscale, beta and period bounds must be positive");
        if (landscape_points < 2) throw ConfigError("landscape_points must be >= 2");
        if (ablation_qubits.empty()) throw ConfigError("ablation_qubits must not be empty");
        kernels::nu_from_value(matern_nu);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': integer out of range");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    using C = ExperimentConfig;
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto size_key = [&t](const std::string& k, std::size_t C::*m) {
            t[k] = [k, m](C& c, const std::string& v) { c.*m = static_cast<std::size_t>(to_uint(k, v)); };
        };
        auto real_key = [&t](const std::string& k, double C::*m) {
            t[k] = [k, m](C& c, const std::string& v) { c.*m = to_double(k, v); };
        };
        auto bounds_key = [&t](const std::string& k, Bounds C::*m) {
            t[k + "_lower"] = [k, m](C& c, const std::string& v) { (c.*m).lower = to_double(k + "_lower", v); };
            t[k + "_upper"] = [k, m](C& c, const std::string& v) { (c.*m).upper = to_double(k + "_upper", v); };
        };

        t["n_steps"] = [](C& c, const std::string& v) { c.gen.n_steps = to_uint("n_steps", v); };
        t["n_trend_changes"] = [](C& c, const std::string& v) { c.gen.n_trend_changes = to_uint("n_trend_changes", v); };
        t["slope"] = [](C& c, const std::string& v) { c.gen.slope = to_double("slope", v); };
        t["sine1_period"] = [](C& c, const std::string& v) { c.gen.sine1.period = to_double("sine1_period", v); };
        t["sine1_amplitude"] = [](C& c, const std::string& v) { c.gen.sine1.amplitude = to_double("sine1_amplitude", v); };
        t["sine2_period"] = [](C& c, const std::string& v) { c.gen.sine2.period = to_double("sine2_period", v); };
        t["sine2_amplitude"] = [](C& c, const std::string& v) { c.gen.sine2.amplitude = to_double("sine2_amplitude", v); };
        t["noise_sd"] = [](C& c, const std::string& v) { c.gen.noise_sd = to_double("noise_sd", v); };
        t["seed_data"] = [](C& c, const std::string& v) { c.gen.seed = to_uint("seed_data", v); };
        t["series_csv"] = [](C& c, const std::string& v) { c.series_csv = v; };

        size_key("window", &C::window);
        size_key("train_overlap", &C::train_overlap);
        real_key("train_frac", &C::train_frac);
        t["kernel"] = [](C& c, const std::string& v) { c.kernel = kernels::parse_kind(v); };
        real_key("matern_nu", &C::matern_nu);
        t["matern_all"] = [](C& c, const std::string& v) { c.matern_all = to_bool("matern_all", v); };

        bounds_key("alpha", &C::alpha);
        bounds_key("mean", &C::mean);
        bounds_key("noise", &C::noise);
        bounds_key("lengthscale", &C::lengthscale);
        bounds_key("rq_beta", &C::rq_beta);
        bounds_key("period", &C::period);

        size_key("n_init", &C::n_init);
        size_key("n_query", &C::n_query);
        size_key("restarts", &C::restarts);
        t["seed_bo"] = [](C& c, const std::string& v) { c.seed_bo = to_uint("seed_bo", v); };
        t["out_dir"] = [](C& c, const std::string& v) { c.out_dir = v; };
        t["qubit_ceiling"] = [](C& c, const std::string& v) { c.qubit_ceiling = static_cast<int>(to_uint("qubit_ceiling", v)); };

        size_key("landscape_points", &C::landscape_points);
        real_key("landscape_alpha", &C::landscape_alpha);
        t["ablation_qubits"] = [](C& c, const std::string& v) {
            c.ablation_qubits.clear();
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (!item.empty()) c.ablation_qubits.push_back(static_cast<std::size_t>(to_uint("ablation_qubits", item)));
            }
        };
        size_key("ablation_steps", &C::ablation_steps);
        size_key("ablation_overlap", &C::ablation_overlap);
        return t;
    }();
    return table;
}

}  // namespace detail

inline std::vector<std::string> keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : detail::setters()) out.push_back(k);
    return out;
}

inline void set(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, detail::trim(value));
}

inline void apply_text(ExperimentConfig& cfg, std::istream& in, const std::string& origin = "<config>") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        try {
            set(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    apply_text(cfg, in, path);
}

/// QUACK_N_STEPS=480 sets n_steps, and so on for every key.
inline void apply_env(ExperimentConfig& cfg) {
    for (const auto& key : keys()) {
        std::string var = "QUACK_";
        for (char ch : key) var += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (const char* v = std::getenv(var.c_str())) {
            try {
                set(cfg, key, v);
            } catch (const ConfigError& e) {
                throw ConfigError(var + ": " + e.what());
            }
        }
    }
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["n_steps"] = c.gen.n_steps;
    j["n_trend_changes"] = c.gen.n_trend_changes;
    j["slope"] = c.gen.slope;
    j["sine1_period"] = c.gen.sine1.period;
    j["sine1_amplitude"] = c.gen.sine1.amplitude;
    j["sine2_period"] = c.gen.sine2_period();
    j["sine2_amplitude"] = c.gen.sine2.amplitude;
    j["noise_sd"] = c.gen.noise_sd;
    j["seed_data"] = c.gen.seed;
    j["series_csv"] = c.series_csv;
    j["window"] = c.window;
    j["train_overlap"] = c.train_overlap;
    j["train_frac"] = c.train_frac;
    j["kernel"] = std::string(kernels::kind_name(c.kernel));
    j["matern_nu"] = c.matern_nu;
    j["matern_all"] = c.matern_all;
    auto b = [&j](const char* k, const Bounds& v) { j[k] = {v.lower, v.upper}; };
    b("alpha", c.alpha);
    b("mean", c.mean);
    b("noise", c.noise);
    b("lengthscale", c.lengthscale);
    b("rq_beta", c.rq_beta);
    b("period", c.period);
    j["n_init"] = c.n_init;
    j["n_query"] = c.n_query;
    j["restarts"] = c.restarts;
    j["seed_bo"] = c.seed_bo;
    j["qubit_ceiling"] = c.qubit_ceiling;
    j["landscape_points"] = c.landscape_points;
    j["landscape_alpha"] = c.landscape_alpha;
    j["ablation_qubits"] = c.ablation_qubits;
    j["ablation_steps"] = c.ablation_steps;
    j["ablation_overlap"] = c.ablation_overlap;
    return j;
}

}  // namespace quack::config
