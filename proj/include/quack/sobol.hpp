#pragma once

#include <boost/random/sobol.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "quack/error.hpp"

namespace quack::sobol {

inline constexpr int kMaxDimension = 16;

/// Sobol points in [0,1)^d using the Joe-Kuo direction numbers. The all-zero
/// point at index 0 is skipped, so the first point is (1/2, ..., 1/2). A
/// nonzero seed applies a random digital shift (XOR of every coordinate with
/// a seeded 32-bit mask), which keeps the net structure.
class Sampler {
public:
    Sampler(int dim, std::uint64_t seed = 0) : dim_(dim), engine_(check_dim(dim)), masks_(static_cast<std::size_t>(dim), 0u) {
        if (seed != 0) {
            std::mt19937_64 rng(seed);
            for (auto& m : masks_) m = static_cast<std::uint32_t>(rng() >> 32);
        }
    }

    int dim() const noexcept { return dim_; }

    Eigen::VectorXd next() {
        Eigen::VectorXd u(dim_);
        for (int i = 0; i < dim_; ++i) {
            const auto bits = static_cast<std::uint32_t>(engine_()) ^ masks_[static_cast<std::size_t>(i)];
            u[i] = static_cast<double>(bits) * 0x1p-32;
        }
        return u;
    }

    std::vector<Eigen::VectorXd> take(std::size_t n) {
        std::vector<Eigen::VectorXd> pts;
        pts.reserve(n);
        for (std::size_t i = 0; i < n; ++i) pts.push_back(next());
        return pts;
    }

private:
    static int check_dim(int dim) {
        if (dim < 1 || dim > kMaxDimension)
            throw ConfigError("Sobol dimension " + std::to_string(dim) + " outside supported range [1, " +
                              std::to_string(kMaxDimension) + "]");
        return dim;
    }

    int dim_;
    boost::random::sobol_engine<std::uint32_t, 32> engine_;
    std::vector<std::uint32_t> masks_;
};

}  // namespace quack::sobol
