#ifndef NCANM_BASELINES_HPP
#define NCANM_BASELINES_HPP

#include <ncanm/signal_model.hpp>
#include <ncanm/types.hpp>

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ncanm
{

/// Uniform angle grid start, start + step, ..., up to stop (inclusive when on a step).
struct AngleGrid
{
    double start_deg = -50.0;
    double stop_deg = 50.0;
    double step_deg = 0.5;

    void validate() const
    {
        if (!(start_deg < stop_deg))
            throw ParameterError("AngleGrid: start must be below stop");
        if (!(step_deg > 0.0))
            throw ParameterError("AngleGrid: step must be positive");
        if (!(start_deg >= -90.0 && stop_deg <= 90.0))
            throw DomainError("AngleGrid: range must lie within [-90, 90] degrees");
    }

    Index size() const
    {
        validate();
        return static_cast<Index>(std::floor((stop_deg - start_deg) / step_deg + 1e-9)) + 1;
    }

    double at(Index i) const { return start_deg + static_cast<double>(i) * step_deg; }

    std::vector<double> points() const
    {
        std::vector<double> p(static_cast<std::size_t>(size()));
        for (Index i = 0; i < size(); ++i)
            p[static_cast<std::size_t>(i)] = at(i);
        return p;
    }

    bool contains(double angle_deg, double tol = 1e-9) const
    {
        const double k = std::round((angle_deg - start_deg) / step_deg);
        return k >= 0.0 && k < static_cast<double>(size()) && std::abs(at(static_cast<Index>(k)) - angle_deg) <= tol;
    }
};

struct BaselineEstimate
{
    std::vector<double> angles; // ascending, degrees
    bool degenerate = false;    // input carried no information (y = 0)
    bool fewer_peaks = false;   // fewer than K peaks were found
};

namespace detail
{

/// Indices of strict local maxima (v[i] > v[i-1], v[i] >= v[i+1]; ends use
/// their single neighbour), the K largest, ties toward the lower index.
inline std::vector<Index> pick_peaks(const RealVector& v, Index K)
{
    std::vector<Index> idx;
    const Index n = v.size();
    for (Index i = 0; i < n; ++i) {
        const bool left = i == 0 || v[i] > v[i - 1];
        const bool right = i == n - 1 || v[i] >= v[i + 1];
        if (left && right)
            idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&v](Index a, Index b) { return v[a] > v[b]; });
    if (static_cast<Index>(idx.size()) > K)
        idx.resize(static_cast<std::size_t>(K));
    return idx;
}

inline ComplexMatrix grid_dictionary(const ComplexMatrix& B, const ArrayGeometry& geometry, const AngleGrid& grid)
{
    const std::vector<double> pts = grid.points();
    return B.transpose() * steering_matrix(geometry, pts);
}

inline void check_inputs(const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& geometry)
{
    if (B.rows() != geometry.size())
        throw ShapeError("baseline: B rows differ from geometry size");
    if (B.cols() != y.size())
        throw ShapeError("baseline: B columns differ from the length of y");
}

/// z = pinv(B^T) y, the minimum-norm array-domain snapshot.
inline ComplexVector array_snapshot(const ComplexVector& y, const ComplexMatrix& B)
{
    const ComplexMatrix Bt = B.transpose();
    return Bt.completeOrthogonalDecomposition().solve(y);
}

inline BaselineEstimate from_grid_indices(const std::vector<Index>& idx, const AngleGrid& grid, Index K)
{
    BaselineEstimate e;
    for (Index i : idx)
        e.angles.push_back(grid.at(i));
    std::sort(e.angles.begin(), e.angles.end());
    e.fewer_peaks = static_cast<Index>(e.angles.size()) < K;
    return e;
}

} // namespace detail

///
/// Orthogonal matching pursuit over the grid dictionary B^T a(theta_g).
/// Each round selects the unit-normalized column best correlated with the
/// residual, then refits all selected columns by least squares.
///
inline BaselineEstimate omp_estimate(const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& geometry,
                                     const AngleGrid& grid, Index K)
{
    detail::check_inputs(y, B, geometry);
    if (K < 0)
        throw ParameterError("omp_estimate: K must be non-negative");
    if (K > grid.size())
        throw ParameterError("omp_estimate: K exceeds the grid size");
    BaselineEstimate e;
    if (K == 0)
        return e;
    const ComplexMatrix D = detail::grid_dictionary(B, geometry, grid);
    const RealVector inv_norm = D.colwise().norm().transpose().cwiseMax(1e-300).cwiseInverse();
    std::vector<Index> selected;
    ComplexVector r = y;
    for (Index k = 0; k < K; ++k) {
        const RealVector corr = (D.adjoint() * r).cwiseAbs().cwiseProduct(inv_norm);
        Index best = -1;
        for (Index g = 0; g < corr.size(); ++g) {
            if (std::find(selected.begin(), selected.end(), g) != selected.end())
                continue;
            if (best < 0 || corr[g] > corr[best])
                best = g;
        }
        selected.push_back(best);
        ComplexMatrix Ds(D.rows(), static_cast<Index>(selected.size()));
        for (std::size_t j = 0; j < selected.size(); ++j)
            Ds.col(static_cast<Index>(j)) = D.col(selected[j]);
        const ComplexVector x = Ds.completeOrthogonalDecomposition().solve(y);
        r = y - Ds * x;
    }
    e = detail::from_grid_indices(selected, grid, K);
    e.degenerate = !(y.norm() > 0.0);
    return e;
}

///
/// Minimum-norm least squares over the full grid dictionary, then the K
/// largest peaks of |s|. y = 0 returns the first K grid angles flagged as
/// degenerate.
///
inline BaselineEstimate ls_estimate(const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& geometry,
                                    const AngleGrid& grid, Index K)
{
    detail::check_inputs(y, B, geometry);
    if (K < 0)
        throw ParameterError("ls_estimate: K must be non-negative");
    BaselineEstimate e;
    if (K == 0)
        return e;
    const ComplexMatrix D = detail::grid_dictionary(B, geometry, grid);
    const ComplexVector s = D.completeOrthogonalDecomposition().solve(y);
    if (!(s.cwiseAbs().maxCoeff() > 0.0)) {
        for (Index i = 0; i < std::min(K, grid.size()); ++i)
            e.angles.push_back(grid.at(i));
        e.degenerate = true;
        e.fewer_peaks = static_cast<Index>(e.angles.size()) < K;
        return e;
    }
    return detail::from_grid_indices(detail::pick_peaks(s.cwiseAbs(), K), grid, K);
}

///
/// Zero-padded spectrum of z = pinv(B^T) y along u = sin(theta):
/// |sum_n z_n exp(-j 2 pi d_n u)| on pad * N points u_m = -1 + 2 m / (pad N),
/// K largest peaks mapped back through theta = asin(u).
///
inline BaselineEstimate fft_estimate(const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& geometry,
                                     Index K, Index zero_pad_factor = 16)
{
    detail::check_inputs(y, B, geometry);
    if (zero_pad_factor < 1)
        throw ParameterError("fft_estimate: zero_pad_factor must be at least 1");
    if (K < 0)
        throw ParameterError("fft_estimate: K must be non-negative");
    BaselineEstimate e;
    if (K == 0)
        return e;
    const ComplexVector z = detail::array_snapshot(y, B);
    const Index N = geometry.size();
    const Index M = zero_pad_factor * N;
    const RealVector& d = geometry.positions();
    RealVector spectrum(M);
    RealVector u(M);
    for (Index m = 0; m < M; ++m) {
        u[m] = -1.0 + 2.0 * static_cast<double>(m) / static_cast<double>(M);
        Complex acc = 0.0;
        for (Index n = 0; n < N; ++n)
            acc += z[n] * std::polar(1.0, -2.0 * kPi * d[n] * u[m]);
        spectrum[m] = std::abs(acc);
    }
    for (Index m : detail::pick_peaks(spectrum, K))
        e.angles.push_back(rad2deg(std::asin(u[m])));
    std::sort(e.angles.begin(), e.angles.end());
    e.fewer_peaks = static_cast<Index>(e.angles.size()) < K;
    e.degenerate = !(z.norm() > 0.0);
    return e;
}

///
/// Single-snapshot MUSIC: Hankel matrix of z = pinv(B^T) y with ceil(N/2)
/// rows, noise subspace from its SVD, K largest pseudospectrum peaks on the
/// grid. Assumes a uniform array (the Hankel rows share one shift structure).
///
inline BaselineEstimate music_ss_estimate(const ComplexVector& y, const ComplexMatrix& B,
                                          const ArrayGeometry& geometry, Index K, const AngleGrid& grid)
{
    detail::check_inputs(y, B, geometry);
    if (K < 0)
        throw ParameterError("music_ss_estimate: K must be non-negative");
    BaselineEstimate e;
    if (K == 0)
        return e;
    const Index N = geometry.size();
    const Index rows = (N + 1) / 2;
    const Index cols = N - rows + 1;
    if (N < 2 * K + 1 || rows <= K || cols < K)
        throw ParameterError("music_ss_estimate: Hankel matrix too small for " + std::to_string(K) + " sources");

    const ComplexVector z = detail::array_snapshot(y, B);
    ComplexMatrix H(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            H(i, j) = z[i + j];
    Eigen::JacobiSVD<ComplexMatrix> svd(H, Eigen::ComputeFullU);
    const ComplexMatrix Un = svd.matrixU().rightCols(rows - K);

    const RealVector& d = geometry.positions();
    const Index G = grid.size();
    RealVector pseudo(G);
    ComplexVector a(rows);
    for (Index g = 0; g < G; ++g) {
        const double u = 2.0 * kPi * std::sin(deg2rad(grid.at(g)));
        for (Index i = 0; i < rows; ++i)
            a[i] = std::polar(1.0, u * (d[i] - d[0]));
        const double den = (Un.adjoint() * a).squaredNorm();
        pseudo[g] = 1.0 / std::max(den, 1e-300);
    }
    e = detail::from_grid_indices(detail::pick_peaks(pseudo, K), grid, K);
    e.degenerate = !(z.norm() > 0.0);
    return e;
}

} // namespace ncanm

#endif // NCANM_BASELINES_HPP
