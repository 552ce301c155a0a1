#pragma once

// Gradient-free maximization of an expensive objective: a Sobol design
// followed by sequential proposals that maximize log expected improvement
// under a Matern-5/2 surrogate GP.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quack/box_minimizer.hpp"
#include "quack/error.hpp"
#include "quack/gpr.hpp"
#include "quack/kernels.hpp"
#include "quack/normal.hpp"
#include "quack/sobol.hpp"

namespace quack::bayesopt {

struct Dimension {
    std::string name;
    double lower;
    double upper;
};

class SearchSpace {
public:
    SearchSpace() = default;
    explicit SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw ConfigError("search space needs at least one dimension");
        for (const auto& d : dims_) {
            if (!(d.lower < d.upper) || !std::isfinite(d.lower) || !std::isfinite(d.upper))
                throw ConfigError("search dimension '" + d.name + "' needs finite lower < upper");
        }
    }

    std::size_t size() const noexcept { return dims_.size(); }
    const std::vector<Dimension>& dims() const noexcept { return dims_; }

    Eigen::VectorXd lower() const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(dims_.size()));
        for (std::size_t i = 0; i < dims_.size(); ++i) v[static_cast<Eigen::Index>(i)] = dims_[i].lower;
        return v;
    }
    Eigen::VectorXd upper() const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(dims_.size()));
        for (std::size_t i = 0; i < dims_.size(); ++i) v[static_cast<Eigen::Index>(i)] = dims_[i].upper;
        return v;
    }

    Eigen::VectorXd to_unit(const Eigen::VectorXd& theta) const {
        return ((theta - lower()).array() / (upper() - lower()).array()).matrix();
    }
    /// Affine map from [0,1]^d, clamped so rounding never leaves the box.
    Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const {
        const Eigen::VectorXd lo = lower();
        const Eigen::VectorXd hi = upper();
        Eigen::VectorXd t = lo + (u.array() * (hi - lo).array()).matrix();
        return t.cwiseMax(lo).cwiseMin(hi);
    }
    bool contains(const Eigen::VectorXd& theta) const {
        return theta.size() == static_cast<Eigen::Index>(dims_.size()) && (theta.array() >= lower().array()).all() &&
               (theta.array() <= upper().array()).all();
    }

private:
    std::vector<Dimension> dims_;
};

inline std::vector<Eigen::VectorXd> sobol_init(const SearchSpace& space, std::size_t n0, std::uint64_t seed) {
    if (n0 < 1) throw ConfigError("initial design needs at least one point");
    sobol::Sampler sampler(static_cast<int>(space.size()), seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(n0);
    for (std::size_t i = 0; i < n0; ++i) out.push_back(space.from_unit(sampler.next()));
    return out;
}

// ---------------------------------------------------------------------------
// Expected improvement

/// Returned by log_ei where the improvement is exactly zero.
inline constexpr double kLogEiFloor = -1e300;

namespace detail {

/// log(phi(z) + z Phi(z)), the standardized improvement.
inline double log_h(double z) {
    if (z > -1.0) return std::log(z * normal::cdf(z) + normal::pdf(z));
    // phi(z) + z Phi(z) = phi(z) (1 - t R(t)) with t = -z and R the Mills ratio.
    const double t = -z;
    double tail;
    if (t > 1e4) {
        const double r = 1.0 / (t * t);
        tail = std::log(r) + std::log1p(r * (-3.0 + r * (15.0 - 105.0 * r)));
    } else {
        tail = std::log1p(-t * normal::mills_ratio(t));
    }
    return normal::log_pdf(z) + tail;
}

inline double h(double z) {
    if (z > -1.0) return z * normal::cdf(z) + normal::pdf(z);
    return std::exp(log_h(z));
}

}  // namespace detail

/// E[max(0, Y - best)] for Y ~ N(mean, sd^2).
inline double expected_improvement(double mean, double sd, double best) {
    if (!(sd > 0.0)) return std::max(0.0, mean - best);
    return sd * detail::h((mean - best) / sd);
}

/// log of expected_improvement without underflow for far-below-incumbent
/// means; kLogEiFloor when the improvement is exactly zero.
inline double log_ei(double mean, double sd, double best) {
    if (!(sd > 0.0)) return mean > best ? std::log(mean - best) : kLogEiFloor;
    return std::log(sd) + detail::log_h((mean - best) / sd);
}

// ---------------------------------------------------------------------------
// Trials and surrogate

enum class Phase { Sobol, Query };

inline const char* phase_name(Phase p) { return p == Phase::Sobol ? "sobol" : "query"; }

struct Trial {
    Eigen::VectorXd theta;
    double value = 0.0;
    Phase phase = Phase::Sobol;
    double elapsed_seconds = 0.0;  ///< wall clock since the tune started
};

struct TuneTrace {
    std::vector<Trial> trials;
    Eigen::VectorXd best_theta;
    double best_value = -std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;

    void record(Trial t) {
        if (trials.empty() || t.value > best_value) {
            best_value = t.value;
            best_theta = t.theta;
            best_index = trials.size();
        }
        trials.push_back(std::move(t));
    }
};

struct SurrogateOptions {
    double lengthscale_lower = 0.05;
    double lengthscale_upper = 4.0;
    double noise_lower = 1e-6;
    double noise_upper = 1e-1;
    std::size_t grid_points = 128;
};

/// Matern-5/2 GP over unit-cube inputs and standardized objective values.
class Surrogate {
public:
    struct Prediction {
        double mean;  ///< standardized units
        double sd;
    };

    bool is_fallback() const noexcept { return !gp_.has_value(); }
    double lengthscale() const noexcept { return lengthscale_; }
    double noise_var() const noexcept { return noise_; }
    double value_mean() const noexcept { return value_mean_; }
    double value_sd() const noexcept { return value_sd_; }
    const Eigen::MatrixXd& inputs() const noexcept { return inputs_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }

    double standardize(double value) const { return (value - value_mean_) / value_sd_; }

    Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& unit_theta) const {
        if (!gp_) return {0.0, 1.0};
        const auto p = gp_->predict(unit_theta);
        return {p.mean, std::sqrt(p.var)};
    }

    friend Surrogate fit_surrogate(const SearchSpace&, const std::vector<Trial>&, const SurrogateOptions&);

private:
    Eigen::MatrixXd inputs_;
    Eigen::VectorXd values_;
    double value_mean_ = 0.0;
    double value_sd_ = 1.0;
    double lengthscale_ = 1.0;
    double noise_ = 0.0;
    std::optional<gpr::FittedGpr> gp_;
};

inline Surrogate fit_surrogate(const SearchSpace& space, const std::vector<Trial>& trials,
                               const SurrogateOptions& opts = {}) {
    Surrogate s;
    const auto n = static_cast<Eigen::Index>(trials.size());
    const auto d = static_cast<Eigen::Index>(space.size());
    s.inputs_.resize(d, n);
    Eigen::VectorXd raw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s.inputs_.col(i) = space.to_unit(trials[static_cast<std::size_t>(i)].theta);
        raw[i] = trials[static_cast<std::size_t>(i)].value;
    }
    if (n == 0) {
        s.values_ = raw;
        return s;
    }
    s.value_mean_ = raw.mean();
    const double sd = std::sqrt((raw.array() - s.value_mean_).square().mean());
    if (n < 2 || !(sd > 1e-12 * std::max(1.0, std::abs(s.value_mean_)))) {
        s.value_sd_ = 1.0;
        s.values_ = raw.array() - s.value_mean_;
        return s;  // prior-only fallback
    }
    s.value_sd_ = sd;
    s.values_ = (raw.array() - s.value_mean_) / sd;

    const double log_l0 = std::log(opts.lengthscale_lower), log_l1 = std::log(opts.lengthscale_upper);
    const double log_n0 = std::log(opts.noise_lower), log_n1 = std::log(opts.noise_upper);
    sobol::Sampler grid(2);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < opts.grid_points; ++g) {
        const Eigen::VectorXd u = grid.next();
        const double l = std::exp(log_l0 + u[0] * (log_l1 - log_l0));
        const double noise = std::exp(log_n0 + u[1] * (log_n1 - log_n0));
        auto km = kernels::KernelModel::matern(kernels::MaternNu::FiveHalves);
        km.set_bounds("l_m", opts.lengthscale_lower, opts.lengthscale_upper);
        km.set("l_m", l);
        try {
            gpr::FittedGpr gp(s.inputs_, s.values_, {0.0, noise, km});
            const double ll = gp.log_marginal_likelihood();
            if (std::isfinite(ll) && ll > best) {
                best = ll;
                s.lengthscale_ = l;
                s.noise_ = noise;
                s.gp_.emplace(std::move(gp));
            }
        } catch (const NumericalError&) {
        }
    }
    return s;
}

struct ProposalOptions {
    std::size_t restarts = 16;
    std::size_t candidates_per_restart = 32;
    opt::BoxMinimizerOptions minimizer{};
};

struct Proposal {
    Eigen::VectorXd theta;
    double log_ei = kLogEiFloor;
    bool fell_back = false;  ///< every restart failed; best raw candidate returned
};

/// argmax of log EI over the box, in normalized coordinates.
inline Proposal propose_next(const Surrogate& surrogate, const SearchSpace& space, double incumbent,
                             std::uint64_t seed, const ProposalOptions& opts = {}) {
    const auto d = static_cast<int>(space.size());
    const double best_std = surrogate.standardize(incumbent);
    auto neg_acq = [&](const Eigen::VectorXd& u) {
        const auto p = surrogate.predict(u);
        return -log_ei(p.mean, p.sd, best_std);
    };

    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
    sobol::Sampler sampler(d, seed == 0 ? 1 : seed);
    const auto candidates = sampler.take(restarts * std::max<std::size_t>(1, opts.candidates_per_restart));
    std::vector<double> scores(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = neg_acq(candidates[i]);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    const Eigen::VectorXd lo = Eigen::VectorXd::Zero(d);
    const Eigen::VectorXd hi = Eigen::VectorXd::Ones(d);
    Proposal out;
    bool any_ok = false;
    double best_val = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_u;
    for (std::size_t r = 0; r < restarts && r < order.size(); ++r) {
        const auto res = opt::minimize_in_box(neg_acq, candidates[order[r]], lo, hi, opts.minimizer);
        const bool failed = res.line_search_failed && res.iterations == 0;
        if (failed || !std::isfinite(res.value)) continue;
        any_ok = true;
        if (res.value < best_val) {
            best_val = res.value;
            best_u = res.x;
        }
    }
    if (!any_ok) {
        best_u = candidates[order.front()];
        best_val = scores[order.front()];
        out.fell_back = true;
    }
    out.theta = space.from_unit(best_u);
    out.log_ei = -best_val;
    return out;
}

// ---------------------------------------------------------------------------
// Tuning loop

struct TuneOptions {
    std::size_t n_init = 25;
    std::size_t n_query = 25;
    std::uint64_t seed = 0;
    SurrogateOptions surrogate{};
    ProposalOptions proposal{};
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using TrialCallback = std::function<void(const Trial&)>;

/// Maximizes `objective`. Calls it exactly n_init + n_query times; the
/// callback sees every trial as soon as it is recorded, so a failing objective
/// leaves the partial trace with the caller before the exception propagates.
inline TuneTrace tune(const Objective& objective, const SearchSpace& space, const TuneOptions& opts,
                      const TrialCallback& on_trial = {}) {
    if (opts.n_init < 1) throw ConfigError("tuner needs at least one initial point");
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    TuneTrace trace;
    auto run = [&](const Eigen::VectorXd& theta, Phase phase) {
        const double value = objective(theta);
        if (!std::isfinite(value)) throw NumericalError("objective returned a non-finite value");
        Trial t{theta, value, phase, elapsed()};
        trace.record(t);
        if (on_trial) on_trial(t);
    };

    for (const auto& theta : sobol_init(space, opts.n_init, opts.seed)) run(theta, Phase::Sobol);
    for (std::size_t j = 0; j < opts.n_query; ++j) {
        const Surrogate s = fit_surrogate(space, trace.trials, opts.surrogate);
        const std::uint64_t proposal_seed = (opts.seed + 1) * 0x9E3779B97F4A7C15ULL + j + 1;
        const Proposal p = propose_next(s, space, trace.best_value, proposal_seed, opts.proposal);
        run(p.theta, Phase::Query);
    }
    return trace;
}

}  // namespace quack::bayesopt
