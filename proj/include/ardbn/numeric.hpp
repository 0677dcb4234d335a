#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>

namespace ardbn {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// The single random engine used everywhere; every stochastic operation
/// takes one by reference so the whole pipeline flows from one seed.
using Rng = std::mt19937_64;

/// Logistic function, evaluated so that neither branch can overflow.
template <std::floating_point Scalar>
inline Scalar sigmoid(Scalar x)
{
    if (x >= Scalar(0)) {
        const Scalar z = std::exp(-x);
        return Scalar(1) / (Scalar(1) + z);
    }
    const Scalar z = std::exp(x);
    return z / (Scalar(1) + z);
}

/// ln(1 + e^x) without overflow for large |x|.
template <std::floating_point Scalar>
inline Scalar softplus(Scalar x)
{
    if (x > Scalar(0))
        return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Derived>
auto softplus(const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    return x.unaryExpr([](Scalar v) { return softplus(v); });
}

/// Uniform double in [0,1) built from the top 53 bits of one engine draw.
/// Unlike std::uniform_real_distribution this is identical across
/// standard library implementations.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Gaussian draw via Box-Muller on uniform01, consuming exactly two
/// engine outputs per call.
inline double gaussian(Rng& rng, double mean = 0.0, double stddev = 1.0)
{
    const double u1 = 1.0 - uniform01(rng); // (0,1]
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Uniform integer in [0, bound) by rejection; bound > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
        - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = rng();
    while (draw >= limit)
        draw = rng();
    return draw % bound;
}

template <typename Scalar>
Matrix<Scalar> random_gaussian(Index rows, Index cols, double stddev, Rng& rng)
{
    Matrix<Scalar> m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i)
            m(i, j) = static_cast<Scalar>(gaussian(rng, 0.0, stddev));
    return m;
}

/// Same shape and same bytes; distinguishes -0.0 from 0.0 and compares NaN payloads.
template <typename DA, typename DB>
bool bitwise_equal(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        return false;
    const auto ea = a.derived().eval();
    const auto eb = b.derived().eval();
    return std::memcmp(ea.data(), eb.data(), sizeof(typename DA::Scalar) * ea.size()) == 0;
}

} // namespace ardbn
