#pragma once

// End-to-end forecasting runs: tune a kernel's hyperparameters on the
// training MLL, predict the test walk, score it, and persist everything.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "quack/bayesopt.hpp"
#include "quack/config.hpp"
#include "quack/error.hpp"
#include "quack/gpr.hpp"
#include "quack/kernels.hpp"
#include "quack/metrics.hpp"
#include "quack/qkernel.hpp"
#include "quack/timeseries.hpp"

namespace quack::experiment {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Data

inline timeseries::Series prepare_series(const config::ExperimentConfig& cfg) {
    if (!cfg.series_csv.empty()) return timeseries::standardize(timeseries::load_csv(cfg.series_csv));
    timeseries::GenSpec gen = cfg.gen;
    gen.min_steps = 2 * cfg.window;
    return timeseries::standardize(timeseries::generate(gen));
}

inline timeseries::Split prepare_split(const config::ExperimentConfig& cfg, const timeseries::Series& s) {
    return timeseries::split(s, cfg.window, cfg.train_frac, cfg.train_overlap);
}

// ---------------------------------------------------------------------------
// Model parameterization: theta = (kernel parameters..., noise variance, mean)

inline kernels::KernelModel base_model(const config::ExperimentConfig& cfg, kernels::Kind kind,
                                       std::optional<kernels::MaternNu> nu = std::nullopt) {
    using kernels::KernelModel;
    KernelModel m = KernelModel::of_kind(kind);
    switch (kind) {
        case kernels::Kind::IQP:
            m = KernelModel::iqp(0.5, cfg.qubit_ceiling);
            m.set_bounds("alpha", cfg.alpha.lower, cfg.alpha.upper);
            break;
        case kernels::Kind::RBF: m.set_bounds("l_r", cfg.lengthscale.lower, cfg.lengthscale.upper); break;
        case kernels::Kind::Matern:
            m = KernelModel::matern(nu.value_or(kernels::nu_from_value(cfg.matern_nu)));
            m.set_bounds("l_m", cfg.lengthscale.lower, cfg.lengthscale.upper);
            break;
        case kernels::Kind::RQ:
            m.set_bounds("beta", cfg.rq_beta.lower, cfg.rq_beta.upper);
            m.set_bounds("l_q", cfg.lengthscale.lower, cfg.lengthscale.upper);
            break;
        case kernels::Kind::Periodic:
            m.set_bounds("p", cfg.period.lower, cfg.period.upper);
            m.set_bounds("l_p", cfg.lengthscale.lower, cfg.lengthscale.upper);
            break;
    }
    return m;
}

inline bayesopt::SearchSpace search_space(const config::ExperimentConfig& cfg, const kernels::KernelModel& model) {
    std::vector<bayesopt::Dimension> dims;
    for (const auto& p : model.parameters()) dims.push_back({p.name, p.lower, p.upper});
    dims.push_back({"noise_var", cfg.noise.lower, cfg.noise.upper});
    dims.push_back({"mean", cfg.mean.lower, cfg.mean.upper});
    return bayesopt::SearchSpace(std::move(dims));
}

inline gpr::GprHyperparams unpack(const kernels::KernelModel& base, const Eigen::VectorXd& theta) {
    const auto k = static_cast<Eigen::Index>(base.size());
    if (theta.size() != k + 2) throw InputError("hyperparameter vector has wrong length");
    gpr::GprHyperparams hp{theta[k + 1], theta[k], base};
    hp.kernel.set_values(theta.head(k));
    return hp;
}

// ---------------------------------------------------------------------------
// Persistence helpers

inline json trial_json(const bayesopt::SearchSpace& space, const bayesopt::Trial& t) {
    json j;
    j["phase"] = bayesopt::phase_name(t.phase);
    json theta = json::object();
    for (std::size_t i = 0; i < space.size(); ++i) theta[space.dims()[i].name] = t.theta[static_cast<Eigen::Index>(i)];
    j["theta"] = theta;
    j["value"] = t.value;
    j["elapsed_seconds"] = t.elapsed_seconds;
    return j;
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Tuning

struct TuneResult {
    kernels::KernelModel base;
    bayesopt::SearchSpace space;
    bayesopt::TuneTrace trace;
    gpr::GprHyperparams best;
    double seconds = 0.0;
};

/// Maximizes the training MLL over (kernel parameters, noise, mean). When
/// `trace_path` is given, trials are appended as JSON lines while running.
inline TuneResult tune_kernel(const config::ExperimentConfig& cfg, const kernels::KernelModel& base,
                              const timeseries::WindowedDataset& train, const std::optional<fs::path>& trace_path = {}) {
    const auto space = search_space(cfg, base);
    const auto objective = [&](const Eigen::VectorXd& theta) { return gpr::mll(train.X, train.y, unpack(base, theta)); };

    std::optional<std::ofstream> trace_out;
    if (trace_path) {
        if (trace_path->has_parent_path()) fs::create_directories(trace_path->parent_path());
        trace_out.emplace(*trace_path, std::ios::binary | std::ios::trunc);
        if (!*trace_out) throw ConfigError("cannot write " + trace_path->string());
    }
    const auto on_trial = [&](const bayesopt::Trial& t) {
        if (trace_out) *trace_out << trial_json(space, t).dump() << '\n' << std::flush;
    };

    bayesopt::TuneOptions opts;
    opts.n_init = cfg.n_init;
    opts.n_query = cfg.n_query;
    opts.seed = cfg.seed_bo;
    opts.proposal.restarts = cfg.restarts;

    const auto t0 = std::chrono::steady_clock::now();
    auto trace = bayesopt::tune(objective, space, opts, on_trial);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto best = unpack(base, trace.best_theta);
    return {base, space, std::move(trace), std::move(best), secs};
}

inline json tuned_json(const kernels::KernelModel& base, const gpr::GprHyperparams& hp, double best_value) {
    json j;
    j["kernel"] = std::string(kernels::kind_name(base.kind()));
    j["label"] = base.label();
    if (base.kind() == kernels::Kind::Matern) j["matern_nu"] = kernels::nu_value(base.nu());
    json theta = json::object();
    for (const auto& p : hp.kernel.parameters()) theta[p.name] = p.value;
    theta["noise_var"] = hp.noise_var;
    theta["mean"] = hp.mean;
    j["theta"] = theta;
    j["mll"] = best_value;
    return j;
}

/// Rebuilds hyperparameters from a tuned-model document.
inline gpr::GprHyperparams hyperparams_from_json(const config::ExperimentConfig& cfg, const json& j) {
    const auto kind = kernels::parse_kind(j.at("kernel").get<std::string>());
    std::optional<kernels::MaternNu> nu;
    if (j.contains("matern_nu")) nu = kernels::nu_from_value(j.at("matern_nu").get<double>());
    auto model = base_model(cfg, kind, nu);
    const auto& theta = j.at("theta");
    gpr::GprHyperparams hp{theta.at("mean").get<double>(), theta.at("noise_var").get<double>(), model};
    for (const auto& p : model.parameters()) {
        const double v = theta.at(p.name).get<double>();
        hp.kernel.set_bounds(p.name, std::min(p.lower, v), std::max(p.upper, v));
        hp.kernel.set(p.name, v);
    }
    return hp;
}

// ---------------------------------------------------------------------------
// Prediction

struct PointForecast {
    std::size_t time = 0;  ///< 1-based target time
    double target = 0.0;
    double mean = 0.0;
    double latent_var = 0.0;
    double predictive_var = 0.0;
    double lower95 = 0.0;
    double upper95 = 0.0;
};

struct PredictResult {
    std::vector<PointForecast> points;
    std::size_t clamped = 0;
    double seconds = 0.0;
};

inline PredictResult predict_test(const gpr::GprHyperparams& hp, const timeseries::Split& split) {
    const auto t0 = std::chrono::steady_clock::now();
    const gpr::FittedGpr model(split.train.X, split.train.y, hp);
    PredictResult r;
    r.points.reserve(split.test.size());
    for (std::size_t j = 0; j < split.test.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const auto post = model.predict(split.test.X.col(col));
        if (post.clamped) ++r.clamped;
        PointForecast p;
        p.time = split.test.target_time(j);
        p.target = split.test.y[col];
        p.mean = post.mean;
        p.latent_var = post.var;
        p.predictive_var = post.var + hp.noise_var;
        const double half = kZ95 * std::sqrt(p.predictive_var);
        p.lower95 = p.mean - half;
        p.upper95 = p.mean + half;
        r.points.push_back(p);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline metrics::Evaluation evaluate(const std::vector<PointForecast>& pts) {
    std::vector<double> mean, var, target;
    for (const auto& p : pts) {
        mean.push_back(p.mean);
        var.push_back(p.predictive_var);
        target.push_back(p.target);
    }
    return metrics::evaluate(mean, var, target);
}

inline std::string predictions_csv(const std::vector<PointForecast>& pts) {
    std::ostringstream out;
    out << "t,target,mean,latent_var,predictive_var,lower95,upper95\n";
    for (const auto& p : pts) {
        out << p.time << ',' << format_double(p.target) << ',' << format_double(p.mean) << ','
            << format_double(p.latent_var) << ',' << format_double(p.predictive_var) << ','
            << format_double(p.lower95) << ',' << format_double(p.upper95) << '\n';
    }
    return out.str();
}

inline json evaluation_json(const metrics::Evaluation& e) {
    json j;
    j["smape"] = e.smape;
    j["wape"] = e.wape;
    j["mape"] = e.mape;
    j["rmse"] = e.rmse;
    j["mae"] = e.mae;
    j["mse"] = e.mse;
    j["mcrps"] = e.mcrps;
    j["ll_mean"] = e.ll_mean;
    j["ll_total"] = e.ll_total;
    j["mape_skipped"] = e.mape_skipped;
    j["smape_skipped"] = e.smape_skipped;
    return j;
}

// ---------------------------------------------------------------------------
// Full run for one kernel

struct RunRecord {
    std::string label;
    gpr::GprHyperparams hp;
    std::optional<TuneResult> tuning;
    PredictResult prediction;
    metrics::Evaluation evaluation;
};

inline json run_record_json(const config::ExperimentConfig& cfg, const RunRecord& r) {
    json j;
    j["config"] = config::to_json(cfg);
    j["label"] = r.label;
    json theta = json::object();
    for (const auto& p : r.hp.kernel.parameters()) theta[p.name] = p.value;
    theta["noise_var"] = r.hp.noise_var;
    theta["mean"] = r.hp.mean;
    j["theta"] = theta;
    j["trace_file"] = "trace_" + r.label + ".jsonl";
    j["evaluation"] = evaluation_json(r.evaluation);
    j["clamped_variances"] = r.prediction.clamped;
    json post = json::array();
    for (const auto& p : r.prediction.points) {
        post.push_back({{"t", p.time},
                        {"target", p.target},
                        {"mean", p.mean},
                        {"latent_var", p.latent_var},
                        {"predictive_var", p.predictive_var}});
    }
    j["posteriors"] = post;
    // Wall-clock data lives under its own key so the rest is reproducible.
    j["timings"] = {{"tune_seconds", r.tuning ? r.tuning->seconds : 0.0}, {"predict_seconds", r.prediction.seconds}};
    return j;
}

inline RunRecord run_kernel(const config::ExperimentConfig& cfg, const kernels::KernelModel& base,
                            const timeseries::Split& split, const std::optional<fs::path>& out_dir = {}) {
    RunRecord r;
    r.label = base.label();
    std::optional<fs::path> trace_path;
    if (out_dir) trace_path = *out_dir / ("trace_" + r.label + ".jsonl");
    r.tuning = tune_kernel(cfg, base, split.train, trace_path);
    r.hp = r.tuning->best;
    r.prediction = predict_test(r.hp, split);
    r.evaluation = evaluate(r.prediction.points);
    if (out_dir) {
        write_text(*out_dir / ("tuned_" + r.label + ".json"),
                   tuned_json(base, r.hp, r.tuning->trace.best_value).dump(2) + "\n");
        write_text(*out_dir / ("predictions_" + r.label + ".csv"), predictions_csv(r.prediction.points));
        write_text(*out_dir / ("run_" + r.label + ".json"), run_record_json(cfg, r).dump(2) + "\n");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Kernel comparison

inline constexpr std::array<const char*, 8> kMetricColumns{"smape", "wape", "mape", "rmse", "mae", "mse", "mcrps", "ll"};

struct ComparisonRow {
    std::string kernel;
    std::optional<metrics::Evaluation> evaluation;
    std::string error;

    double metric(std::size_t col) const {
        const auto& e = *evaluation;
        const double v[] = {e.smape, e.wape, e.mape, e.rmse, e.mae, e.mse, e.mcrps, e.ll_total};
        return v[col];
    }
};

/// Rank markers per metric column: "best", "second" or "". Lower is better
/// for every column except the log likelihood.
inline std::vector<std::array<std::string, 8>> rank_flags(const std::vector<ComparisonRow>& rows) {
    std::vector<std::array<std::string, 8>> flags(rows.size());
    for (std::size_t col = 0; col < kMetricColumns.size(); ++col) {
        const bool higher_better = col == 7;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].evaluation && std::isfinite(rows[i].metric(col))) idx.push_back(i);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return higher_better ? rows[a].metric(col) > rows[b].metric(col) : rows[a].metric(col) < rows[b].metric(col);
        });
        if (!idx.empty()) flags[idx[0]][col] = "best";
        if (idx.size() > 1) flags[idx[1]][col] = "second";
    }
    return flags;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream out;
    out << "kernel";
    for (const char* c : kMetricColumns) out << ',' << c;
    out << ",error\n";
    for (const auto& r : rows) {
        out << r.kernel;
        for (std::size_t c = 0; c < kMetricColumns.size(); ++c) out << ',' << (r.evaluation ? format_double(r.metric(c)) : "");
        out << ',' << r.error << '\n';
    }
    return out.str();
}

inline std::string flags_csv(const std::vector<ComparisonRow>& rows) {
    const auto flags = rank_flags(rows);
    std::ostringstream out;
    out << "kernel";
    for (const char* c : kMetricColumns) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << rows[i].kernel;
        for (const auto& f : flags[i]) out << ',' << f;
        out << '\n';
    }
    return out.str();
}

inline std::vector<ComparisonRow> compare(const config::ExperimentConfig& cfg, const std::optional<fs::path>& out_dir = {}) {
    const auto series = prepare_series(cfg);
    const auto split = prepare_split(cfg, series);
    std::vector<ComparisonRow> rows;
    for (kernels::Kind kind : {kernels::Kind::IQP, kernels::Kind::RBF, kernels::Kind::Matern, kernels::Kind::RQ,
                               kernels::Kind::Periodic}) {
        ComparisonRow row{std::string(kernels::kind_name(kind)), std::nullopt, {}};
        std::vector<std::optional<kernels::MaternNu>> variants{std::nullopt};
        if (kind == kernels::Kind::Matern && cfg.matern_all)
            variants = {kernels::MaternNu::Half, kernels::MaternNu::ThreeHalves, kernels::MaternNu::FiveHalves};
        for (const auto& nu : variants) {
            try {
                const auto rec = run_kernel(cfg, base_model(cfg, kind, nu), split, out_dir);
                if (!row.evaluation || rec.evaluation.ll_total > row.evaluation->ll_total) row.evaluation = rec.evaluation;
            } catch (const Error& e) {
                if (!row.error.empty()) row.error += "; ";
                row.error += e.what();
            }
        }
        for (char& ch : row.error)
            if (ch == ',' || ch == '\n') ch = ' ';
        rows.push_back(std::move(row));
    }
    if (out_dir) {
        write_text(*out_dir / "comparison.csv", comparison_csv(rows));
        write_text(*out_dir / "comparison_flags.csv", flags_csv(rows));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Fidelity landscape around the origin

struct LandscapePoint {
    double x1;
    double x2;
    double value;
};

/// Fidelity between the origin and points varying in the first two
/// coordinates (the rest held at zero). The axis range is [-R, R] with
/// R = max(|min|, |max|) of the series, so the grid covers the data range and
/// its centre is the origin when the point count is odd.
inline std::vector<LandscapePoint> landscape(const timeseries::Series& series, std::size_t window, double alpha,
                                             std::size_t points, int qubit_ceiling = qkernel::kDefaultQubitCeiling) {
    if (window < 2) throw ConfigError("landscape needs a window of at least 2");
    if (points < 2) throw ConfigError("landscape needs at least two grid points per axis");
    const auto [lo, hi] = std::minmax_element(series.values.begin(), series.values.end());
    const double radius = std::max(std::abs(*lo), std::abs(*hi));
    const qkernel::IqpParams params{alpha, static_cast<int>(window), qubit_ceiling};
    const auto origin = qkernel::embed(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(window)), params);

    std::vector<double> axis(points);
    for (std::size_t i = 0; i < points; ++i) {
        axis[i] = -radius + 2.0 * radius * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    if (points % 2 == 1) axis[points / 2] = 0.0;

    std::vector<LandscapePoint> out;
    out.reserve(points * points);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(window));
    for (double a : axis) {
        for (double b : axis) {
            x[0] = a;
            x[1] = b;
            out.push_back({a, b, qkernel::fidelity(origin, qkernel::embed(x, params))});
        }
    }
    return out;
}

inline std::string landscape_csv(const std::vector<LandscapePoint>& pts) {
    std::ostringstream out;
    out << "x1,x2,fidelity\n";
    for (const auto& p : pts) out << format_double(p.x1) << ',' << format_double(p.x2) << ',' << format_double(p.value) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Qubit-count ablation

struct AblationRow {
    std::size_t qubits = 0;
    std::optional<metrics::Evaluation> evaluation;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

inline config::ExperimentConfig ablation_config(const config::ExperimentConfig& cfg, std::size_t qubits) {
    auto c = cfg;
    c.gen.n_steps = cfg.ablation_steps;
    c.window = qubits;
    c.train_overlap = cfg.ablation_overlap;
    c.kernel = kernels::Kind::IQP;
    return c;
}

inline std::vector<AblationRow> ablate(const config::ExperimentConfig& cfg, const std::optional<fs::path>& out_dir = {}) {
    std::vector<AblationRow> rows;
    for (std::size_t q : cfg.ablation_qubits) {
        AblationRow row;
        row.qubits = q;
        try {
            const auto c = ablation_config(cfg, q);
            c.validate();
            const auto series = prepare_series(c);
            const auto split = prepare_split(c, series);
            std::optional<fs::path> dir;
            if (out_dir) dir = *out_dir / ("qubits_" + std::to_string(q));
            const auto rec = run_kernel(c, base_model(c, kernels::Kind::IQP), split, dir);
            row.evaluation = rec.evaluation;
            row.alpha = rec.hp.kernel.get("alpha");
        } catch (const Error& e) {
            row.error = e.what();
            for (char& ch : row.error)
                if (ch == ',' || ch == '\n') ch = ' ';
        }
        rows.push_back(std::move(row));
    }
    if (out_dir) {
        std::ostringstream out;
        out << "qubits,ll_total,ll_mean,mae,alpha,error\n";
        for (const auto& r : rows) {
            out << r.qubits << ',';
            if (r.evaluation) {
                out << format_double(r.evaluation->ll_total) << ',' << format_double(r.evaluation->ll_mean) << ','
                    << format_double(r.evaluation->mae) << ',' << format_double(r.alpha);
            } else {
                out << ",,,";
            }
            out << ',' << r.error << '\n';
        }
        write_text(*out_dir / "ablation.csv", out.str());
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Series export

inline std::string series_csv(const timeseries::Series& s) {
    std::ostringstream out;
    out << "t,value\n";
    for (std::size_t t = 1; t <= s.size(); ++t) out << t << ',' << format_double(s.at(t)) << '\n';
    return out.str();
}

inline json series_stats_json(const config::ExperimentConfig& cfg, const timeseries::Series& s) {
    json j;
    j["n_steps"] = s.size();
    j["seed_data"] = cfg.gen.seed;
    j["mean"] = s.stats ? s.stats->mean : 0.0;
    j["sd"] = s.stats ? s.stats->sd : 1.0;
    return j;
}

}  // namespace quack::experiment
