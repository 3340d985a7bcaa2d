#ifndef NCANM_TYPES_HPP
#define NCANM_TYPES_HPP

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ncanm
{

using Index   = Eigen::Index;
using Complex = std::complex<double>;

using RealVector    = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix    = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using BoolVector    = Eigen::Matrix<bool, Eigen::Dynamic, 1>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

inline constexpr Complex kJ{0.0, 1.0};

inline double deg2rad(double deg) { return deg * kDegToRad; }
inline double rad2deg(double rad) { return rad * kRadToDeg; }

//
// Error hierarchy. Every library error is an ncanm::Error so callers (the CLI
// in particular) can map families of failures onto exit codes.
//
struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Angle or other scalar outside its admissible domain.
struct DomainError : Error
{
    using Error::Error;
};

/// Inconsistent matrix/vector dimensions.
struct ShapeError : Error
{
    using Error::Error;
};

/// Invalid algorithm parameter (negative step, K larger than grid, ...).
struct ParameterError : Error
{
    using Error::Error;
};

/// Non-finite objective or a singular system where one must not occur.
struct NumericalError : Error
{
    using Error::Error;
};

/// The gradient iteration produced a non-finite objective.
struct DivergenceError : NumericalError
{
    DivergenceError(const std::string& what, Index iteration)
        : NumericalError(what), iteration_(iteration)
    {
    }
    Index iteration() const noexcept { return iteration_; }

private:
    Index iteration_;
};

/// Malformed or incomplete configuration.
struct ConfigError : Error
{
    using Error::Error;
};

} // namespace ncanm

#endif // NCANM_TYPES_HPP
