#pragma once

// Exact Gaussian process regression with a constant prior mean.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>

#include "quack/error.hpp"
#include "quack/kernels.hpp"

namespace quack::gpr {

/// Diagonal jitter tried in order until the Cholesky factorization succeeds.
inline constexpr std::array<double, 4> kJitterLadder{1e-10, 1e-8, 1e-6, 1e-4};

struct GprHyperparams {
    double mean = 0.0;
    double noise_var = 0.0;
    kernels::KernelModel kernel = kernels::KernelModel::rbf();

    void validate() const {
        if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) throw ParameterError("noise variance must be >= 0");
        if (!std::isfinite(mean)) throw ParameterError("mean constant must be finite");
        kernel.validate();
    }
};

struct Posterior {
    double mean = 0.0;
    double var = 0.0;      ///< latent variance, clamped at zero
    bool clamped = false;  ///< raw variance was negative before clamping
};

class FittedGpr {
public:
    FittedGpr(const Eigen::Ref<const Eigen::MatrixXd>& windows, const Eigen::Ref<const Eigen::VectorXd>& targets,
              GprHyperparams hp)
        : hp_(validated(std::move(hp))), kernel_(hp_.kernel, Eigen::MatrixXd(windows)), y_(targets) {
        if (windows.cols() < 1) throw InputError("GPR needs at least one training window");
        if (windows.cols() != targets.size())
            throw InputError("training windows (" + std::to_string(windows.cols()) + ") and targets (" +
                             std::to_string(targets.size()) + ") differ in count");
        if (!windows.allFinite() || !targets.allFinite()) throw InputError("training data must be finite");

        gram_ = kernel_.gram();
        const Eigen::Index c = gram_.rows();
        Eigen::MatrixXd a = gram_;
        a.diagonal().array() += hp_.noise_var;
        for (double jitter : kJitterLadder) {
            Eigen::MatrixXd shifted = a;
            shifted.diagonal().array() += jitter;
            llt_.compute(shifted);
            if (llt_.info() == Eigen::Success && llt_.matrixLLT().diagonal().minCoeff() > 0.0) {
                jitter_ = jitter;
                break;
            }
        }
        if (jitter_ < 0.0) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
            std::ostringstream msg;
            msg << "Cholesky factorization of the " << c << "x" << c
                << " covariance failed after jitter " << kJitterLadder.back() << " (eigenvalues in ["
                << eig.eigenvalues().minCoeff() << ", " << eig.eigenvalues().maxCoeff() << "])";
            throw NumericalError(msg.str());
        }
        centered_ = y_.array() - hp_.mean;
        weights_ = llt_.solve(centered_);
    }

    const GprHyperparams& hyperparams() const noexcept { return hp_; }
    const Eigen::MatrixXd& gram() const noexcept { return gram_; }
    const Eigen::VectorXd& targets() const noexcept { return y_; }
    double jitter() const noexcept { return jitter_; }
    Eigen::Index size() const noexcept { return y_.size(); }

    /// Lower-triangular L with L L^T = K + (noise + jitter) I.
    Eigen::MatrixXd cholesky() const { return llt_.matrixL(); }

    /// (K + sigma_n^2 I)^{-1} (y - m 1)
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    Posterior predict(const Eigen::Ref<const Eigen::VectorXd>& query) const {
        auto [k, prior] = kernel_.cross(query);
        Posterior p;
        p.mean = hp_.mean + k.dot(weights_);
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        const double var = prior - v.squaredNorm();
        p.clamped = var < 0.0;
        p.var = p.clamped ? 0.0 : var;
        return p;
    }

    /// log N(y; m 1, K + sigma_n^2 I), evaluated with the factor in hand.
    double log_marginal_likelihood() const {
        const double quad = centered_.dot(weights_);
        const double log_det = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
        const auto c = static_cast<double>(y_.size());
        return -0.5 * quad - 0.5 * log_det - 0.5 * c * std::log(2.0 * std::numbers::pi);
    }

private:
    static GprHyperparams validated(GprHyperparams hp) {
        hp.validate();
        return hp;
    }

    GprHyperparams hp_;
    kernels::BoundKernel kernel_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd gram_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd centered_;
    Eigen::VectorXd weights_;
    double jitter_ = -1.0;
};

inline FittedGpr fit(const Eigen::Ref<const Eigen::MatrixXd>& windows, const Eigen::Ref<const Eigen::VectorXd>& targets,
                     const GprHyperparams& hp) {
    return {windows, targets, hp};
}

inline Posterior predict(const FittedGpr& model, const Eigen::Ref<const Eigen::VectorXd>& query) {
    return model.predict(query);
}

inline double mll(const Eigen::Ref<const Eigen::MatrixXd>& windows, const Eigen::Ref<const Eigen::VectorXd>& targets,
                  const GprHyperparams& hp) {
    return FittedGpr(windows, targets, hp).log_marginal_likelihood();
}

}  // namespace quack::gpr
