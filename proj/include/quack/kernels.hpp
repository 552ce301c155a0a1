#pragma once

// Classical stationary kernels plus a tagged KernelModel that dispatches
// between them and the IQP fidelity kernel. None of the kernels carries an
// output-scale factor; every one equals 1 at zero distance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quack/error.hpp"
#include "quack/qkernel.hpp"

namespace quack::kernels {

using Vec = Eigen::Ref<const Eigen::VectorXd>;

namespace detail {
inline double squared_distance(const Vec& x, const Vec& x2) {
    if (x.size() != x2.size()) throw InputError("kernel arguments differ in length");
    return (x - x2).squaredNorm();
}
inline void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be positive and finite");
}
}  // namespace detail

inline double rbf(const Vec& x, const Vec& x2, double lengthscale) {
    detail::require_positive(lengthscale, "RBF lengthscale");
    return std::exp(-detail::squared_distance(x, x2) / (2.0 * lengthscale * lengthscale));
}

enum class MaternNu { Half, ThreeHalves, FiveHalves };

inline double nu_value(MaternNu nu) {
    switch (nu) {
        case MaternNu::Half: return 0.5;
        case MaternNu::ThreeHalves: return 1.5;
        case MaternNu::FiveHalves: return 2.5;
    }
    return 0.0;
}

inline MaternNu nu_from_value(double nu) {
    if (nu == 0.5) return MaternNu::Half;
    if (nu == 1.5) return MaternNu::ThreeHalves;
    if (nu == 2.5) return MaternNu::FiveHalves;
    throw ParameterError("Matern smoothness must be one of 1/2, 3/2, 5/2, got " + std::to_string(nu));
}

/// Matern correlation as a function of the scaled distance d = |x - x'| / l.
inline double matern_of_scaled_distance(double d, MaternNu nu) {
    switch (nu) {
        case MaternNu::Half: return std::exp(-d);
        case MaternNu::ThreeHalves: {
            const double r = std::sqrt(3.0) * d;
            return (1.0 + r) * std::exp(-r);
        }
        case MaternNu::FiveHalves: {
            const double r = std::sqrt(5.0) * d;
            return (1.0 + r + 5.0 * d * d / 3.0) * std::exp(-r);
        }
    }
    return 0.0;
}

inline double matern(const Vec& x, const Vec& x2, MaternNu nu, double lengthscale) {
    detail::require_positive(lengthscale, "Matern lengthscale");
    return matern_of_scaled_distance(std::sqrt(detail::squared_distance(x, x2)) / lengthscale, nu);
}

inline double matern(const Vec& x, const Vec& x2, double nu, double lengthscale) {
    return matern(x, x2, nu_from_value(nu), lengthscale);
}

inline double rq(const Vec& x, const Vec& x2, double beta, double lengthscale) {
    detail::require_positive(beta, "RQ beta");
    detail::require_positive(lengthscale, "RQ lengthscale");
    const double d2 = detail::squared_distance(x, x2);
    return std::pow(1.0 + d2 / (2.0 * beta * lengthscale * lengthscale), -beta);
}

/// exp(-2 sum_i sin^2(pi (x_i - x'_i) / p) / l). The lengthscale enters
/// linearly, not squared.
inline double periodic(const Vec& x, const Vec& x2, double period, double lengthscale) {
    detail::require_positive(period, "periodic period");
    detail::require_positive(lengthscale, "periodic lengthscale");
    if (x.size() != x2.size()) throw InputError("kernel arguments differ in length");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double s = std::sin(std::numbers::pi * (x[i] - x2[i]) / period);
        acc += s * s;
    }
    return std::exp(-2.0 * acc / lengthscale);
}

enum class Kind { IQP, RBF, Matern, RQ, Periodic };

inline std::string_view kind_name(Kind k) {
    switch (k) {
        case Kind::IQP: return "iqp";
        case Kind::RBF: return "rbf";
        case Kind::Matern: return "matern";
        case Kind::RQ: return "rq";
        case Kind::Periodic: return "periodic";
    }
    return "?";
}

inline Kind parse_kind(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (Kind k : {Kind::IQP, Kind::RBF, Kind::Matern, Kind::RQ, Kind::Periodic})
        if (lower == kind_name(k)) return k;
    throw ConfigError("unknown kernel kind '" + std::string(s) + "'");
}

struct Parameter {
    std::string name;
    double value;
    double lower;
    double upper;
};

/// Kernel kind with its named, bounded hyperparameters. Matern smoothness is
/// discrete and therefore held outside the tunable parameter list.
class KernelModel {
public:
    static KernelModel iqp(double alpha = 0.5, int qubit_ceiling = qkernel::kDefaultQubitCeiling) {
        KernelModel m(Kind::IQP, {{"alpha", alpha, 0.0, 1.0}});
        m.qubit_ceiling_ = qubit_ceiling;
        return m;
    }
    static KernelModel rbf(double lengthscale = 1.0) { return {Kind::RBF, {{"l_r", lengthscale, 0.1, 30.0}}}; }
    static KernelModel matern(MaternNu nu = MaternNu::FiveHalves, double lengthscale = 1.0) {
        KernelModel m(Kind::Matern, {{"l_m", lengthscale, 0.1, 30.0}});
        m.nu_ = nu;
        return m;
    }
    static KernelModel rq(double beta = 1.0, double lengthscale = 1.0) {
        return {Kind::RQ, {{"beta", beta, 0.1, 10.0}, {"l_q", lengthscale, 0.1, 30.0}}};
    }
    static KernelModel periodic(double period = 10.0, double lengthscale = 1.0) {
        return {Kind::Periodic, {{"p", period, 5.0, 35.0}, {"l_p", lengthscale, 0.1, 30.0}}};
    }
    static KernelModel of_kind(Kind k) {
        switch (k) {
            case Kind::IQP: return iqp();
            case Kind::RBF: return rbf();
            case Kind::Matern: return matern();
            case Kind::RQ: return rq();
            case Kind::Periodic: return periodic();
        }
        throw ConfigError("unknown kernel kind");
    }

    Kind kind() const noexcept { return kind_; }
    MaternNu nu() const noexcept { return nu_; }
    int qubit_ceiling() const noexcept { return qubit_ceiling_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }

    std::string label() const {
        std::string s(kind_name(kind_));
        if (kind_ == Kind::Matern) {
            switch (nu_) {
                case MaternNu::Half: s += "12"; break;
                case MaternNu::ThreeHalves: s += "32"; break;
                case MaternNu::FiveHalves: s += "52"; break;
            }
        }
        return s;
    }

    double get(std::string_view name) const { return find(name).value; }

    /// Sets a parameter value; rejects values outside the bounds.
    void set(std::string_view name, double value) {
        Parameter& p = find(name);
        if (!(value >= p.lower && value <= p.upper)) {
            throw ParameterError("parameter " + p.name + "=" + std::to_string(value) + " outside [" +
                                 std::to_string(p.lower) + ", " + std::to_string(p.upper) + "]");
        }
        p.value = value;
    }

    void set_bounds(std::string_view name, double lower, double upper) {
        if (!(lower <= upper)) throw ConfigError("inverted bounds for " + std::string(name));
        Parameter& p = find(name);
        p.lower = lower;
        p.upper = upper;
        p.value = std::clamp(p.value, lower, upper);
    }

    void set_values(const Eigen::Ref<const Eigen::VectorXd>& values) {
        if (static_cast<std::size_t>(values.size()) != params_.size())
            throw InputError("kernel parameter vector has wrong length");
        for (std::size_t i = 0; i < params_.size(); ++i) set(params_[i].name, values[static_cast<Eigen::Index>(i)]);
    }

    Eigen::VectorXd values() const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(params_.size()));
        for (std::size_t i = 0; i < params_.size(); ++i) v[static_cast<Eigen::Index>(i)] = params_[i].value;
        return v;
    }

    void validate() const {
        for (const auto& p : params_) {
            if (!(p.value >= p.lower && p.value <= p.upper))
                throw ParameterError("parameter " + p.name + " outside its bounds");
        }
    }

    qkernel::IqpParams iqp_params(int qubits) const {
        return {get("alpha"), qubits, qubit_ceiling_};
    }

private:
    KernelModel(Kind kind, std::vector<Parameter> params) : kind_(kind), params_(std::move(params)) {}

    const Parameter& find(std::string_view name) const {
        for (const auto& p : params_)
            if (p.name == name) return p;
        throw ParameterError("kernel " + std::string(kind_name(kind_)) + " has no parameter '" + std::string(name) + "'");
    }
    Parameter& find(std::string_view name) {
        return const_cast<Parameter&>(static_cast<const KernelModel&>(*this).find(name));
    }

    Kind kind_;
    std::vector<Parameter> params_;
    MaternNu nu_ = MaternNu::FiveHalves;
    int qubit_ceiling_ = qkernel::kDefaultQubitCeiling;
};

inline double evaluate(const KernelModel& model, const Vec& x, const Vec& x2) {
    model.validate();
    switch (model.kind()) {
        case Kind::IQP: return qkernel::kernel(x, x2, model.iqp_params(static_cast<int>(x.size())));
        case Kind::RBF: return rbf(x, x2, model.get("l_r"));
        case Kind::Matern: return matern(x, x2, model.nu(), model.get("l_m"));
        case Kind::RQ: return rq(x, x2, model.get("beta"), model.get("l_q"));
        case Kind::Periodic: return periodic(x, x2, model.get("p"), model.get("l_p"));
    }
    throw ParameterError("unknown kernel kind");
}

/// A kernel bound to a fixed training design. For the IQP kernel the training
/// embeddings are simulated once and reused for the Gram matrix and every
/// cross-covariance query.
class BoundKernel {
public:
    BoundKernel(KernelModel model, Eigen::MatrixXd train) : model_(std::move(model)), train_(std::move(train)) {
        model_.validate();
        if (model_.kind() == Kind::IQP) {
            states_ = qkernel::embed_columns(train_, model_.iqp_params(static_cast<int>(train_.rows())));
        }
    }

    const KernelModel& model() const noexcept { return model_; }
    const Eigen::MatrixXd& train() const noexcept { return train_; }

    Eigen::MatrixXd gram() const {
        if (model_.kind() == Kind::IQP) return qkernel::gram_from_states(states_);
        const Eigen::Index c = train_.cols();
        Eigen::MatrixXd k(c, c);
        for (Eigen::Index i = 0; i < c; ++i) {
            k(i, i) = evaluate(model_, train_.col(i), train_.col(i));
            for (Eigen::Index j = 0; j < i; ++j) {
                const double v = evaluate(model_, train_.col(i), train_.col(j));
                k(i, j) = v;
                k(j, i) = v;
            }
        }
        return k;
    }

    /// k(x_i, query) for every training column, plus k(query, query).
    std::pair<Eigen::VectorXd, double> cross(const Vec& query) const {
        if (query.size() != train_.rows()) throw InputError("query length does not match training window length");
        const Eigen::Index c = train_.cols();
        Eigen::VectorXd k(c);
        if (model_.kind() == Kind::IQP) {
            const auto q = qkernel::embed(query, model_.iqp_params(static_cast<int>(query.size())));
            for (Eigen::Index i = 0; i < c; ++i) k[i] = qkernel::fidelity(states_[static_cast<std::size_t>(i)], q);
            return {k, 1.0};
        }
        for (Eigen::Index i = 0; i < c; ++i) k[i] = evaluate(model_, train_.col(i), query);
        return {k, evaluate(model_, query, query)};
    }

private:
    KernelModel model_;
    Eigen::MatrixXd train_;
    std::vector<qkernel::StateVector> states_;
};

}  // namespace quack::kernels
