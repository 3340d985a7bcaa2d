#ifndef NCANM_RANDOM_HPP
#define NCANM_RANDOM_HPP

#include <ncanm/types.hpp>

#include <cmath>
#include <cstdint>
#include <random>

namespace ncanm
{

///
/// Seeded random source with fully specified output.
///
/// std::mt19937_64 is bit-exact across standard libraries, but the std::
/// distributions are not, so the uniform and normal transforms are done here.
///
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform()
    {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1].
    double uniform_open0() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal (Box-Muller, one value per call).
    double normal()
    {
        const double u1 = uniform_open0();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    /// Circular complex Gaussian with E|z|^2 = variance.
    Complex complex_normal(double variance)
    {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    /// +1 or -1 with equal probability.
    double sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

    /// Point uniformly distributed in the n-dimensional ball of given radius.
    RealVector in_ball(Index n, double radius)
    {
        RealVector v(n);
        for (Index i = 0; i < n; ++i)
            v[i] = normal();
        const double norm = v.norm();
        if (n == 0 || norm == 0.0)
            return RealVector::Zero(n);
        const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(n));
        return v * (r / norm);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// Independent seed for a named sub-stream of a trial (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace ncanm

#endif // NCANM_RANDOM_HPP
