#pragma once

// IQP fidelity kernel evaluated by exact statevector simulation.
//
// Bit convention: qubit j (0-based) is bit j of the amplitude index, so the
// basis state |b_{n-1} ... b_1 b_0> lives at index sum_j b_j 2^j. A bit value
// of 0 is the +1 eigenstate of Pauli-Z on that qubit.

#include <Eigen/Dense>

#include <bit>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quack/error.hpp"

namespace quack::qkernel {

using complex = std::complex<double>;

inline constexpr int kDefaultQubitCeiling = 24;

struct IqpParams {
    double alpha = 0.5;
    int qubits = 1;
    int qubit_ceiling = kDefaultQubitCeiling;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ParameterError("IQP bandwidth alpha must lie in [0, 1], got " + std::to_string(alpha));
        if (qubits < 1) throw ParameterError("IQP qubit count must be positive");
        if (qubits > qubit_ceiling)
            throw ResourceError("IQP embedding of " + std::to_string(qubits) +
                                " qubits exceeds the configured ceiling of " + std::to_string(qubit_ceiling));
    }
};

/// Normalized n-qubit statevector. Immutable once built.
class StateVector {
public:
    StateVector(Eigen::VectorXcd amplitudes, int qubits) : amps_(std::move(amplitudes)), qubits_(qubits) {
        if (qubits_ < 1 || qubits_ > 62 || amps_.size() != (Eigen::Index{1} << qubits_))
            throw InputError("statevector length must be 2^n");
    }

    static StateVector zero(int qubits) {
        Eigen::VectorXcd a = Eigen::VectorXcd::Zero(Eigen::Index{1} << qubits);
        a[0] = 1.0;
        return {std::move(a), qubits};
    }

    int qubits() const noexcept { return qubits_; }
    Eigen::Index dim() const noexcept { return amps_.size(); }
    const Eigen::VectorXcd& amplitudes() const noexcept { return amps_; }
    double norm() const { return amps_.norm(); }

private:
    Eigen::VectorXcd amps_;
    int qubits_;
};

/// In-place Walsh-Hadamard transform scaled by 2^{-n/2}, i.e. H^{(x)n}.
/// Length must be a power of two.
template <typename T>
void normalized_fwht(std::span<T> data) {
    const std::size_t n = data.size();
    if (n == 0 || !std::has_single_bit(n)) throw InputError("Walsh-Hadamard length must be a power of two");
    for (std::size_t h = 1; h < n; h <<= 1) {
        for (std::size_t i = 0; i < n; i += h << 1) {
            for (std::size_t j = i; j < i + h; ++j) {
                const T a = data[j];
                const T b = data[j + h];
                data[j] = a + b;
                data[j + h] = a - b;
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : data) v *= scale;
}

/// Phase angle of the diagonal layer on every basis state:
///   alpha * sum_j x_j z_j + alpha^2 * sum_{j'<j} x_j x_j' z_j z_j'
/// with z_j = +1 for bit j clear and -1 for bit j set.
///
/// Uses sum_{j'<j} x_j x_j' z_j z_j' = (S^2 - sum_j x_j^2) / 2 where
/// S = sum_j x_j z_j, and builds S for every index in O(2^n) by flipping one
/// bit relative to an already-computed index.
inline Eigen::VectorXd diagonal_phases(const Eigen::Ref<const Eigen::VectorXd>& x, double alpha, int qubits) {
    if (x.size() != qubits) {
        throw InputError("window length " + std::to_string(x.size()) + " does not match qubit count " +
                         std::to_string(qubits));
    }
    if (!x.allFinite()) throw InputError("IQP input must be finite");
    const std::size_t dim = std::size_t{1} << qubits;
    Eigen::VectorXd linear(static_cast<Eigen::Index>(dim));
    linear[0] = x.sum();
    for (std::size_t b = 1; b < dim; ++b) {
        const int top = std::bit_width(b) - 1;
        linear[static_cast<Eigen::Index>(b)] =
            linear[static_cast<Eigen::Index>(b ^ (std::size_t{1} << top))] - 2.0 * x[top];
    }
    const double sq = x.squaredNorm();
    Eigen::VectorXd phases(static_cast<Eigen::Index>(dim));
    for (Eigen::Index b = 0; b < phases.size(); ++b) {
        const double s = linear[b];
        phases[b] = alpha * s + alpha * alpha * 0.5 * (s * s - sq);
    }
    return phases;
}

inline Eigen::VectorXd diagonal_phases(const Eigen::Ref<const Eigen::VectorXd>& x, const IqpParams& params) {
    return diagonal_phases(x, params.alpha, params.qubits);
}

/// |phi(x)> = U_z H U_z H |0...0>, with U_z multiplying basis state b by
/// exp(i * phase_b).
inline StateVector embed(const Eigen::Ref<const Eigen::VectorXd>& x, const IqpParams& params) {
    params.validate();
    const Eigen::VectorXd phases = diagonal_phases(x, params);
    if ((phases.array() == 0.0).all()) return StateVector::zero(params.qubits);

    const Eigen::Index dim = phases.size();
    Eigen::VectorXcd rotor(dim);
    for (Eigen::Index b = 0; b < dim; ++b) rotor[b] = std::polar(1.0, phases[b]);

    const double amp = 1.0 / std::sqrt(static_cast<double>(dim));
    Eigen::VectorXcd psi = rotor * amp;
    normalized_fwht(std::span<complex>(psi.data(), static_cast<std::size_t>(dim)));
    psi.array() *= rotor.array();
    return {std::move(psi), params.qubits};
}

/// |<a|b>|^2
inline double fidelity(const StateVector& a, const StateVector& b) {
    if (a.dim() != b.dim()) throw InputError("fidelity between states of different qubit counts");
    return std::norm(a.amplitudes().dot(b.amplitudes()));  // dot conjugates the first argument
}

inline double kernel(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& x2,
                     const IqpParams& params) {
    if (x.size() != x2.size()) throw InputError("IQP kernel arguments differ in length");
    return fidelity(embed(x, params), embed(x2, params));
}

/// One embedding per column of `windows` (w x c).
inline std::vector<StateVector> embed_columns(const Eigen::Ref<const Eigen::MatrixXd>& windows,
                                              const IqpParams& params) {
    std::vector<StateVector> out;
    out.reserve(static_cast<std::size_t>(windows.cols()));
    for (Eigen::Index j = 0; j < windows.cols(); ++j) out.push_back(embed(windows.col(j), params));
    return out;
}

/// Symmetric Gram matrix over cached embeddings; each unordered pair is
/// evaluated once and the diagonal is exactly one.
inline Eigen::MatrixXd gram_from_states(std::span<const StateVector> states) {
    const auto c = static_cast<Eigen::Index>(states.size());
    Eigen::MatrixXd gram(c, c);
    for (Eigen::Index i = 0; i < c; ++i) {
        gram(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = fidelity(states[static_cast<std::size_t>(i)], states[static_cast<std::size_t>(j)]);
            gram(i, j) = v;
            gram(j, i) = v;
        }
    }
    return gram;
}

inline Eigen::MatrixXd gram_matrix(const Eigen::Ref<const Eigen::MatrixXd>& windows, const IqpParams& params) {
    const auto states = embed_columns(windows, params);
    return gram_from_states(states);
}

}  // namespace quack::qkernel
