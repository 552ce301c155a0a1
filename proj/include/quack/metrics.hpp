#pragma once

// Point-forecast losses and proper scoring rules for Gaussian forecasts.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "quack/error.hpp"
#include "quack/normal.hpp"

namespace quack::metrics {

/// Denominators smaller than this in magnitude make a percentage term
/// undefined; such points are skipped and counted.
inline constexpr double kDenominatorFloor = 1e-12;

struct PointLosses {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
};

struct PercentageLosses {
    double mape = 0.0;
    double smape = 0.0;
    double wape = 0.0;
    std::size_t mape_skipped = 0;
    std::size_t smape_skipped = 0;
};

namespace detail {
inline void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw InputError("prediction and target counts differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    if (a == 0) throw InputError("metrics need at least one point");
}
}  // namespace detail

inline PointLosses point_losses(std::span<const double> preds, std::span<const double> targets) {
    detail::check_lengths(preds.size(), targets.size());
    double sq = 0.0;
    double abs = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double e = preds[i] - targets[i];
        sq += e * e;
        abs += std::abs(e);
    }
    const auto n = static_cast<double>(preds.size());
    PointLosses out;
    out.mse = sq / n;
    out.rmse = std::sqrt(out.mse);
    out.mae = abs / n;
    return out;
}

/// MAPE = mean |(y - f) / y|; sMAPE = mean |y - f| / ((y + f) / 2) with the
/// signed denominator; WAPE = sum |y - f| / sum |y|.
inline PercentageLosses percentage_losses(std::span<const double> preds, std::span<const double> targets) {
    detail::check_lengths(preds.size(), targets.size());
    PercentageLosses out;
    double mape_sum = 0.0;
    double smape_sum = 0.0;
    double abs_err = 0.0;
    double abs_target = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double y = targets[i];
        const double f = preds[i];
        const double err = std::abs(y - f);
        abs_err += err;
        abs_target += std::abs(y);
        if (std::abs(y) < kDenominatorFloor) {
            ++out.mape_skipped;
        } else {
            mape_sum += err / std::abs(y);
        }
        const double half_sum = 0.5 * (y + f);
        if (std::abs(half_sum) < kDenominatorFloor) {
            ++out.smape_skipped;
        } else {
            smape_sum += err / half_sum;
        }
    }
    if (abs_target == 0.0) throw InputError("WAPE undefined: all targets are zero");
    const std::size_t n = preds.size();
    out.mape = n > out.mape_skipped ? mape_sum / static_cast<double>(n - out.mape_skipped) : 0.0;
    out.smape = n > out.smape_skipped ? smape_sum / static_cast<double>(n - out.smape_skipped) : 0.0;
    out.wape = abs_err / abs_target;
    return out;
}

/// CRPS of N(mean, sd^2) against an observation. Degenerates to the absolute
/// error when sd <= 0.
inline double crps_normal(double mean, double sd, double target) {
    if (!(sd > 0.0)) return std::abs(target - mean);
    const double w = (target - mean) / sd;
    return sd * (w * (2.0 * normal::cdf(w) - 1.0) + 2.0 * normal::pdf(w) - 1.0 / std::sqrt(std::numbers::pi));
}

struct LogLikelihood {
    double mean = 0.0;
    double total = 0.0;
};

/// Gaussian log-density of each target under its own forecast variance.
inline LogLikelihood log_likelihood(std::span<const double> means, std::span<const double> variances,
                                    std::span<const double> targets) {
    detail::check_lengths(means.size(), targets.size());
    detail::check_lengths(variances.size(), targets.size());
    LogLikelihood out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double v = variances[i];
        if (!(v > 0.0)) throw NumericalError("log likelihood needs positive variance at point " + std::to_string(i));
        const double e = means[i] - targets[i];
        out.total += -0.5 * std::log(2.0 * std::numbers::pi * v) - e * e / (2.0 * v);
    }
    out.mean = out.total / static_cast<double>(targets.size());
    return out;
}

struct Evaluation {
    double smape = 0.0;
    double wape = 0.0;
    double mape = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double mse = 0.0;
    double mcrps = 0.0;
    double ll_mean = 0.0;
    double ll_total = 0.0;
    std::size_t mape_skipped = 0;
    std::size_t smape_skipped = 0;
};

/// Full metric set. Point losses use `means`; CRPS and log likelihood use
/// N(means, variances), so pass predictive (observation) variances there.
inline Evaluation evaluate(std::span<const double> means, std::span<const double> variances,
                           std::span<const double> targets) {
    detail::check_lengths(variances.size(), targets.size());
    const PointLosses pl = point_losses(means, targets);
    const PercentageLosses pc = percentage_losses(means, targets);
    const LogLikelihood ll = log_likelihood(means, variances, targets);
    double crps = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) crps += crps_normal(means[i], std::sqrt(variances[i]), targets[i]);

    Evaluation e;
    e.smape = pc.smape;
    e.wape = pc.wape;
    e.mape = pc.mape;
    e.rmse = pl.rmse;
    e.mae = pl.mae;
    e.mse = pl.mse;
    e.mcrps = crps / static_cast<double>(targets.size());
    e.ll_mean = ll.mean;
    e.ll_total = ll.total;
    e.mape_skipped = pc.mape_skipped;
    e.smape_skipped = pc.smape_skipped;
    return e;
}

}  // namespace quack::metrics
