#pragma once

// Bound-constrained limited-memory BFGS with gradient projection. Gradients
// come from central finite differences, clipped to the box at the edges.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <utility>

#include "quack/error.hpp"

namespace quack::opt {

struct BoxMinimizerOptions {
    int memory = 10;
    int max_iterations = 200;
    double fd_step = 1e-6;
    double projected_gradient_tol = 1e-9;
    double relative_decrease_tol = 1e-13;
    double armijo = 1e-4;
    int max_backtracks = 40;
};

struct BoxMinimizerResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool line_search_failed = false;
};

namespace detail {

inline Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

template <typename F>
Eigen::VectorXd fd_gradient(F& f, const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            double h, int& evals) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double up = std::min(x[i] + h, hi[i]);
        const double down = std::max(x[i] - h, lo[i]);
        if (up == down) {
            g[i] = 0.0;
            continue;
        }
        probe[i] = up;
        const double fu = f(probe);
        probe[i] = down;
        const double fd = f(probe);
        probe[i] = x[i];
        evals += 2;
        g[i] = (fu - fd) / (up - down);
        if (!std::isfinite(g[i])) g[i] = 0.0;
    }
    return g;
}

/// Components pinned at a bound with the gradient pushing outward.
inline Eigen::Array<bool, Eigen::Dynamic, 1> active_set(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::Array<bool, Eigen::Dynamic, 1> active(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) active[i] = (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0);
    return active;
}

}  // namespace detail

/// Minimizes `f` over the box [lower, upper] starting from `start`
/// (projected into the box first).
template <typename F>
BoxMinimizerResult minimize_in_box(F&& f, const Eigen::VectorXd& start, const Eigen::VectorXd& lower,
                                   const Eigen::VectorXd& upper, const BoxMinimizerOptions& opts = {}) {
    if (start.size() != lower.size() || start.size() != upper.size()) throw InputError("box dimension mismatch");
    if ((lower.array() > upper.array()).any()) throw InputError("box lower bound exceeds upper bound");

    BoxMinimizerResult res;
    Eigen::VectorXd x = detail::project(start, lower, upper);
    double fx = f(x);
    res.evaluations = 1;
    Eigen::VectorXd g = detail::fd_gradient(f, x, lower, upper, opts.fd_step, res.evaluations);

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y)

    for (; res.iterations < opts.max_iterations; ++res.iterations) {
        const Eigen::VectorXd pg = x - detail::project(x - g, lower, upper);
        if (pg.lpNorm<Eigen::Infinity>() < opts.projected_gradient_tol) {
            res.converged = true;
            break;
        }
        const auto active = detail::active_set(x, g, lower, upper);

        // Two-loop recursion restricted to the free variables.
        Eigen::VectorXd q = g;
        for (Eigen::Index i = 0; i < q.size(); ++i)
            if (active[i]) q[i] = 0.0;
        std::vector<double> rho(history.size()), a(history.size());
        for (std::size_t k = history.size(); k-- > 0;) {
            const auto& [s, y] = history[k];
            rho[k] = 1.0 / y.dot(s);
            a[k] = rho[k] * s.dot(q);
            q -= a[k] * y;
        }
        if (!history.empty()) {
            const auto& [s, y] = history.back();
            q *= s.dot(y) / y.squaredNorm();
        }
        for (std::size_t k = 0; k < history.size(); ++k) {
            const auto& [s, y] = history[k];
            const double b = rho[k] * y.dot(q);
            q += (a[k] - b) * s;
        }
        Eigen::VectorXd dir = -q;
        for (Eigen::Index i = 0; i < dir.size(); ++i)
            if (active[i]) dir[i] = 0.0;
        if (!(dir.dot(g) < 0.0)) {
            history.clear();
            dir = -g;
            for (Eigen::Index i = 0; i < dir.size(); ++i)
                if (active[i]) dir[i] = 0.0;
        }

        double step = history.empty() ? std::min(1.0, 1.0 / std::max(dir.lpNorm<Eigen::Infinity>(), 1e-300)) : 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = 0.0;
        for (int bt = 0; bt < opts.max_backtracks; ++bt, step *= 0.5) {
            x_new = detail::project(x + step * dir, lower, upper);
            f_new = f(x_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= fx + opts.armijo * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!history.empty()) {
                history.clear();
                continue;
            }
            res.line_search_failed = true;
            break;
        }

        const Eigen::VectorXd g_new = detail::fd_gradient(f, x_new, lower, upper, opts.fd_step, res.evaluations);
        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        const double decrease = fx - f_new;
        x = std::move(x_new);
        g = g_new;
        const double f_old = fx;
        fx = f_new;
        if (s.dot(y) > 1e-12 * std::max(1.0, y.squaredNorm())) {
            history.emplace_back(std::move(s), std::move(y));
            if (static_cast<int>(history.size()) > opts.memory) history.pop_front();
        }
        if (decrease <= opts.relative_decrease_tol * std::max({std::abs(f_old), std::abs(fx), 1.0})) {
            res.converged = true;
            ++res.iterations;
            break;
        }
    }
    res.x = std::move(x);
    res.value = fx;
    return res;
}

}  // namespace quack::opt
