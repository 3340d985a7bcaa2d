#ifndef NCANM_SIGNAL_MODEL_HPP
#define NCANM_SIGNAL_MODEL_HPP

#include <ncanm/random.hpp>
#include <ncanm/types.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ncanm
{

///
/// Positions of the IRS elements along the array axis, in wavelengths.
///
class ArrayGeometry
{
public:
    /// Uniform half-wavelength array of n elements.
    explicit ArrayGeometry(Index n = 32) : positions_(n)
    {
        if (n < 2)
            throw DomainError("ArrayGeometry: at least two elements required");
        for (Index i = 0; i < n; ++i)
            positions_[i] = 0.5 * static_cast<double>(i);
    }

    explicit ArrayGeometry(RealVector positions) : positions_(std::move(positions))
    {
        if (positions_.size() < 2)
            throw DomainError("ArrayGeometry: at least two elements required");
        for (Index i = 1; i < positions_.size(); ++i)
            if (!(positions_[i] > positions_[i - 1]))
                throw DomainError("ArrayGeometry: positions must be strictly increasing");
    }

    static ArrayGeometry uniform(Index n, double spacing = 0.5)
    {
        RealVector p(n);
        for (Index i = 0; i < n; ++i)
            p[i] = spacing * static_cast<double>(i);
        return ArrayGeometry(std::move(p));
    }

    Index size() const noexcept { return positions_.size(); }
    const RealVector& positions() const noexcept { return positions_; }

    /// Span of the element positions (last minus first), in wavelengths.
    double aperture() const { return positions_[size() - 1] - positions_[0]; }

private:
    RealVector positions_;
};

///
/// IRS reflection codes. Row p holds e(p), the complex reflection coefficient
/// of every element during measurement p.
///
struct IrsSchedule
{
    ComplexMatrix coefficients; // P x N
    double receiver_direction_deg = 0.0;

    Index measurements() const noexcept { return coefficients.rows(); }
    Index elements() const noexcept { return coefficients.cols(); }

    /// Random binary-phase (+1/-1) schedule drawn from the given generator.
    static IrsSchedule random_binary(Index measurements, Index elements, Rng& rng,
                                     double receiver_direction_deg = 0.0)
    {
        if (measurements < 1)
            throw ParameterError("IrsSchedule: at least one measurement required");
        IrsSchedule s;
        s.coefficients.resize(measurements, elements);
        for (Index p = 0; p < measurements; ++p)
            for (Index n = 0; n < elements; ++n)
                s.coefficients(p, n) = rng.sign();
        s.receiver_direction_deg = receiver_direction_deg;
        return s;
    }
};

struct SourceScene
{
    std::vector<double> angles_deg;
    std::vector<Complex> amplitudes;

    Index size() const noexcept { return static_cast<Index>(angles_deg.size()); }

    void validate() const
    {
        if (angles_deg.size() != amplitudes.size())
            throw ShapeError("SourceScene: angles and amplitudes differ in length");
        for (std::size_t i = 0; i < angles_deg.size(); ++i) {
            if (!(angles_deg[i] > -90.0 && angles_deg[i] < 90.0))
                throw DomainError("SourceScene: angle outside (-90, 90) degrees");
            for (std::size_t j = 0; j < i; ++j)
                if (angles_deg[i] == angles_deg[j])
                    throw DomainError("SourceScene: duplicate source angle");
        }
    }

    /// Unit-modulus amplitudes with independent uniform phases.
    static SourceScene unit_random_phase(std::vector<double> angles_deg, Rng& rng)
    {
        SourceScene s;
        s.amplitudes.reserve(angles_deg.size());
        for (std::size_t i = 0; i < angles_deg.size(); ++i)
            s.amplitudes.push_back(std::polar(1.0, rng.uniform(0.0, 2.0 * kPi)));
        s.angles_deg = std::move(angles_deg);
        return s;
    }
};

struct ReceivedSignal
{
    ComplexVector y;
    double noise_variance = 0.0;
    std::uint64_t seed = 0;

    Index size() const noexcept { return y.size(); }
};

namespace detail
{
inline void check_angle(double angle_deg)
{
    if (!(angle_deg >= -90.0 && angle_deg <= 90.0))
        throw DomainError("angle " + std::to_string(angle_deg) + " outside [-90, 90] degrees");
}
} // namespace detail

/// a(theta): element n is exp(j 2 pi d_n sin(theta)).
inline ComplexVector steering_vector(const ArrayGeometry& geometry, double angle_deg)
{
    detail::check_angle(angle_deg);
    const double u = 2.0 * kPi * std::sin(deg2rad(angle_deg));
    const RealVector& d = geometry.positions();
    ComplexVector a(d.size());
    for (Index n = 0; n < d.size(); ++n)
        a[n] = std::polar(1.0, u * d[n]);
    return a;
}

///
/// Derivative of the steering vector with respect to the angle in radians.
///
/// With paper_literal set the cos(theta) factor is dropped, which reproduces
/// the gamma = [0, j pi, ..., j (N-1) pi] weighting for half-wavelength
/// arrays. That form is not the true derivative.
///
inline ComplexVector steering_derivative(const ArrayGeometry& geometry, double angle_deg,
                                         bool paper_literal = false)
{
    detail::check_angle(angle_deg);
    const double rad = deg2rad(angle_deg);
    const double u = 2.0 * kPi * std::sin(rad);
    // cos(pi/2) rounds to about 6e-17; endfire has an exactly zero derivative.
    const double chain = paper_literal ? 1.0 : (std::abs(angle_deg) == 90.0 ? 0.0 : std::cos(rad));
    const RealVector& d = geometry.positions();
    ComplexVector da(d.size());
    for (Index n = 0; n < d.size(); ++n)
        da[n] = kJ * (2.0 * kPi * d[n] * chain) * std::polar(1.0, u * d[n]);
    return da;
}

/// Steering matrix with one column per angle.
inline ComplexMatrix steering_matrix(const ArrayGeometry& geometry, std::span<const double> angles_deg)
{
    ComplexMatrix a(geometry.size(), static_cast<Index>(angles_deg.size()));
    for (Index k = 0; k < a.cols(); ++k)
        a.col(k) = steering_vector(geometry, angles_deg[static_cast<std::size_t>(k)]);
    return a;
}

///
/// B (N x P): column p is a(phi) .* e(p).
///
inline ComplexMatrix measurement_matrix(const ArrayGeometry& geometry, const IrsSchedule& schedule)
{
    if (schedule.elements() != geometry.size())
        throw ShapeError("measurement_matrix: schedule has " + std::to_string(schedule.elements()) +
                         " elements, geometry has " + std::to_string(geometry.size()));
    if (schedule.measurements() < 1)
        throw ShapeError("measurement_matrix: schedule has no measurements");
    const ComplexVector a_phi = steering_vector(geometry, schedule.receiver_direction_deg);
    return a_phi.asDiagonal() * schedule.coefficients.transpose();
}

/// Noise-free measurements B^T sum_k s_k a(theta_k).
inline ComplexVector noiseless_measurements(const ArrayGeometry& geometry, const ComplexMatrix& B,
                                            const SourceScene& scene)
{
    scene.validate();
    if (B.rows() != geometry.size())
        throw ShapeError("noiseless_measurements: B rows differ from geometry size");
    ComplexVector z = ComplexVector::Zero(geometry.size());
    for (Index k = 0; k < scene.size(); ++k)
        z += scene.amplitudes[static_cast<std::size_t>(k)] *
             steering_vector(geometry, scene.angles_deg[static_cast<std::size_t>(k)]);
    return B.transpose() * z;
}

///
/// Average per-measurement signal power E||B^T A s||^2 / P, the expectation
/// taken over independent source phases.
///
inline double expected_signal_power(const ArrayGeometry& geometry, const ComplexMatrix& B,
                                    const SourceScene& scene)
{
    double total = 0.0;
    for (Index k = 0; k < scene.size(); ++k) {
        const double s2 = std::norm(scene.amplitudes[static_cast<std::size_t>(k)]);
        total += s2 * (B.transpose() * steering_vector(geometry, scene.angles_deg[static_cast<std::size_t>(k)]))
                          .squaredNorm();
    }
    return total / static_cast<double>(B.cols());
}

/// Noise variance giving the requested SNR (dB) for this scene and B.
inline double noise_variance_for_snr(const ArrayGeometry& geometry, const ComplexMatrix& B,
                                     const SourceScene& scene, double snr_db)
{
    return expected_signal_power(geometry, B, scene) / std::pow(10.0, snr_db / 10.0);
}

inline ReceivedSignal synthesize(const ArrayGeometry& geometry, const IrsSchedule& schedule,
                                 const SourceScene& scene, double noise_variance, std::uint64_t seed)
{
    if (!(noise_variance >= 0.0))
        throw DomainError("synthesize: noise variance must be non-negative");
    const ComplexMatrix B = measurement_matrix(geometry, schedule);
    ReceivedSignal out;
    out.y = noiseless_measurements(geometry, B, scene);
    out.noise_variance = noise_variance;
    out.seed = seed;
    Rng rng(seed);
    for (Index p = 0; p < out.y.size(); ++p) {
        const Complex w = rng.complex_normal(noise_variance);
        out.y[p] += w;
    }
    return out;
}

} // namespace ncanm

#endif // NCANM_SIGNAL_MODEL_HPP
