#pragma once

// Univariate series, synthetic generation, standardization and sliding
// windows.
//
// Time indices in the public API are 1-based (t = 1..T); storage is 0-based,
// so value at time t lives at values[t - 1].

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "quack/error.hpp"

namespace quack::timeseries {

struct Standardization {
    double mean = 0.0;
    double sd = 1.0;
};

struct Series {
    std::vector<double> values;
    std::optional<Standardization> stats;  ///< set once standardized

    std::size_t size() const noexcept { return values.size(); }
    double at(std::size_t t) const { return values.at(t - 1); }  // 1-based
};

struct SineComponent {
    double period;
    double amplitude;
};

struct GenSpec {
    std::size_t n_steps = 240;
    std::size_t n_trend_changes = 4;
    double slope = 0.02;
    SineComponent sine1{10.0, 1.0};
    /// Period 0 means n_steps / n_trend_changes.
    SineComponent sine2{0.0, 0.5};
    double noise_sd = 0.5;
    std::uint64_t seed = 0;
    std::size_t min_steps = 10;  ///< generation refuses shorter series; callers set 2 * window

    double sine2_period() const {
        return sine2.period > 0.0 ? sine2.period
                                  : static_cast<double>(n_steps) / static_cast<double>(n_trend_changes);
    }
};

/// Continuous piecewise-linear trend at 1-based time t: n_trend_changes equal
/// segments (remainder steps extend the last one), slopes alternating
/// +slope, -slope, ... starting upward, zero at t = 1.
inline double trend(const GenSpec& spec, std::size_t t) {
    const std::size_t segments = std::max<std::size_t>(1, spec.n_trend_changes);
    const std::size_t seg_len = std::max<std::size_t>(1, spec.n_steps / segments);
    const std::size_t u = t - 1;
    const std::size_t seg = std::min(u / seg_len, segments - 1);
    double level = 0.0;
    for (std::size_t s = 0; s < seg; ++s) level += (s % 2 == 0 ? 1.0 : -1.0) * spec.slope * static_cast<double>(seg_len);
    return level + (seg % 2 == 0 ? 1.0 : -1.0) * spec.slope * static_cast<double>(u - seg * seg_len);
}

/// Noise-free part of the generator at 1-based time t.
inline double deterministic_component(const GenSpec& spec, std::size_t t) {
    const double tt = static_cast<double>(t);
    return trend(spec, t) + spec.sine1.amplitude * std::sin(2.0 * std::numbers::pi * tt / spec.sine1.period) +
           spec.sine2.amplitude * std::sin(2.0 * std::numbers::pi * tt / spec.sine2_period());
}

inline Series generate(const GenSpec& spec) {
    if (spec.n_steps < spec.min_steps)
        throw ConfigError("series of " + std::to_string(spec.n_steps) + " steps is shorter than the minimum " +
                          std::to_string(spec.min_steps));
    if (spec.n_trend_changes < 1) throw ConfigError("need at least one trend segment");
    if (!(spec.sine1.period > 0.0) || !(spec.sine2_period() > 0.0)) throw ConfigError("sine periods must be positive");
    if (!(spec.noise_sd >= 0.0)) throw ConfigError("noise sd must be >= 0");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Series s;
    s.values.reserve(spec.n_steps);
    for (std::size_t t = 1; t <= spec.n_steps; ++t) {
        const double eps = noise(rng);
        s.values.push_back(deterministic_component(spec, t) + spec.noise_sd * eps);
    }
    return s;
}

/// Population-sd standardization; the statistics are kept for inversion.
inline Series standardize(const Series& series) {
    if (series.size() < 2) throw DataError("standardization needs at least two observations");
    const auto n = static_cast<double>(series.size());
    double mean = 0.0;
    for (double v : series.values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : series.values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw DataError("cannot standardize a constant series");
    Series out;
    out.values.reserve(series.size());
    for (double v : series.values) out.values.push_back((v - mean) / sd);
    out.stats = Standardization{mean, sd};
    return out;
}

inline Series destandardize(const Series& series) {
    if (!series.stats) throw DataError("series carries no standardization statistics");
    Series out;
    out.values.reserve(series.size());
    for (double v : series.values) out.values.push_back(v * series.stats->sd + series.stats->mean);
    return out;
}

struct WindowedDataset {
    Eigen::MatrixXd X;  ///< w x c, one lookback window per column
    Eigen::VectorXd y;  ///< value right after each window
    std::vector<std::size_t> starts;  ///< 1-based start time of each window
    std::size_t window = 0;
    std::size_t stride = 0;

    std::size_t size() const noexcept { return starts.size(); }
    std::size_t target_time(std::size_t j) const { return starts.at(j) + window; }
};

/// Windows of length w starting at `first` and stepping by w - overlap, kept
/// while their target time is <= `last` (1-based, inclusive).
inline WindowedDataset make_windows(const Series& series, std::size_t w, std::size_t overlap, std::size_t first,
                                    std::size_t last) {
    if (w < 1) throw ConfigError("window length must be positive");
    if (overlap >= w) throw ConfigError("overlap must be smaller than the window length");
    if (first < 1 || last > series.size() || first > last)
        throw ConfigError("window range [" + std::to_string(first) + ", " + std::to_string(last) +
                          "] outside the series of length " + std::to_string(series.size()));
    WindowedDataset ds;
    ds.window = w;
    ds.stride = w - overlap;
    for (std::size_t s = first; s + w <= last; s += ds.stride) ds.starts.push_back(s);
    if (ds.starts.empty()) throw DataError("window range yields no complete (window, target) pair");
    const auto c = static_cast<Eigen::Index>(ds.starts.size());
    ds.X.resize(static_cast<Eigen::Index>(w), c);
    ds.y.resize(c);
    for (Eigen::Index j = 0; j < c; ++j) {
        const std::size_t s = ds.starts[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < w; ++i) ds.X(static_cast<Eigen::Index>(i), j) = series.at(s + i);
        ds.y[j] = series.at(s + w);
    }
    return ds;
}

struct Split {
    WindowedDataset train;
    WindowedDataset test;
};

/// Training windows (overlap `train_overlap`) cover targets up to
/// floor(train_frac * T); the test set then walks with stride 1 from the time
/// right after the last training target to the end of the series.
inline Split split(const Series& series, std::size_t w, double train_frac, std::size_t train_overlap = 2) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    const auto T = series.size();
    const auto boundary = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(T)));
    if (boundary < w + 1) throw DataError("training segment too short for one window");
    Split out{make_windows(series, w, train_overlap, 1, boundary), {}};
    const std::size_t last_train_target = out.train.target_time(out.train.size() - 1);
    if (last_train_target + 1 > T) throw DataError("no time points left for testing");
    out.test = make_windows(series, w, w - 1, last_train_target + 1 - w, T);
    return out;
}

namespace detail {
inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}
inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}
}  // namespace detail

/// Reads a single-column or (time, value) CSV. A non-numeric first line is
/// treated as a header; any later non-numeric row is an error.
inline Series parse_csv(std::istream& in, const std::string& origin = "<stream>") {
    Series s;
    std::string line;
    std::size_t lineno = 0;
    bool seen_content = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view row = detail::trim(line);
        if (row.empty()) continue;
        const bool header_allowed = !seen_content;
        seen_content = true;
        std::string_view field = row;
        if (const auto comma = row.find(','); comma != std::string_view::npos) {
            const auto rest = row.substr(comma + 1);
            if (rest.find(',') != std::string_view::npos)
                throw DataError(origin + ":" + std::to_string(lineno) + ": expected one or two columns");
            field = rest;
        }
        const auto v = detail::parse_number(field);
        if (!v) {
            if (header_allowed) continue;
            throw DataError(origin + ":" + std::to_string(lineno) + ": non-numeric value '" + std::string(field) + "'");
        }
        if (std::isnan(*v) || std::isinf(*v))
            throw DataError(origin + ":" + std::to_string(lineno) + ": value is not finite");
        s.values.push_back(*v);
    }
    if (s.values.empty()) throw DataError(origin + ": no numeric rows");
    return s;
}

inline Series load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return parse_csv(in, path);
}

}  // namespace quack::timeseries
