#ifndef NCANM_OBJECTIVE_HPP
#define NCANM_OBJECTIVE_HPP

#include <ncanm/signal_model.hpp>
#include <ncanm/types.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace ncanm
{

///
/// Solver state: S candidate atoms c_k e^{j beta_k} a(theta_k).
///
/// theta is in degrees, beta in radians. An atom is active iff its gain is
/// strictly positive.
///
struct AtomBank
{
    RealVector c;
    RealVector beta;
    RealVector theta;
    BoolVector active;

    AtomBank() = default;

    explicit AtomBank(Index size)
        : c(RealVector::Zero(size)), beta(RealVector::Zero(size)), theta(RealVector::Zero(size)),
          active(BoolVector::Constant(size, false))
    {
    }

    AtomBank(RealVector gains, RealVector phases, RealVector angles_deg)
        : c(std::move(gains)), beta(std::move(phases)), theta(std::move(angles_deg))
    {
        if (c.size() != beta.size() || c.size() != theta.size())
            throw ShapeError("AtomBank: c, beta and theta differ in length");
        active.resize(c.size());
        for (Index k = 0; k < c.size(); ++k) {
            if (c[k] < 0.0)
                c[k] = 0.0;
            active[k] = c[k] > 0.0;
        }
    }

    Index size() const noexcept { return c.size(); }

    Index active_count() const { return static_cast<Index>(active.count()); }

    std::vector<Index> active_indices() const
    {
        std::vector<Index> idx;
        for (Index k = 0; k < size(); ++k)
            if (active[k])
                idx.push_back(k);
        return idx;
    }

    void deactivate(Index k)
    {
        c[k] = 0.0;
        active[k] = false;
    }

    /// Re-derive the mask from the gains (c <= 0 means inactive, c clamped to 0).
    void sync_mask()
    {
        for (Index k = 0; k < size(); ++k) {
            if (!(c[k] > 0.0)) {
                c[k] = 0.0;
                active[k] = false;
            } else {
                active[k] = true;
            }
        }
    }

    /// Indices ordered by descending gain; ties keep the lower index first.
    std::vector<Index> order_by_gain() const
    {
        std::vector<Index> idx(static_cast<std::size_t>(size()));
        std::iota(idx.begin(), idx.end(), Index{0});
        std::stable_sort(idx.begin(), idx.end(), [this](Index a, Index b) { return c[a] > c[b]; });
        return idx;
    }

    bool operator==(const AtomBank& o) const
    {
        return c == o.c && beta == o.beta && theta == o.theta && active == o.active;
    }
};

/// Objective value and the three gradient blocks (theta block per radian).
struct Gradients
{
    double value = 0.0;
    RealVector c;
    RealVector beta;
    RealVector theta;

    double norm() const
    {
        return std::sqrt(c.squaredNorm() + beta.squaredNorm() + theta.squaredNorm());
    }
};

namespace detail
{

inline void check_problem(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                          const ArrayGeometry& geometry)
{
    if (bank.c.size() != bank.beta.size() || bank.c.size() != bank.theta.size() ||
        bank.active.size() != bank.c.size())
        throw ShapeError("AtomBank: field lengths differ");
    if (B.rows() != geometry.size())
        throw ShapeError("B has " + std::to_string(B.rows()) + " rows, geometry has " +
                         std::to_string(geometry.size()) + " elements");
    if (B.cols() != y.size())
        throw ShapeError("B has " + std::to_string(B.cols()) + " columns, y has length " +
                         std::to_string(y.size()));
}

/// Columns B^T a(theta_k) for the listed atoms.
inline ComplexMatrix atom_responses(const ComplexMatrix& B, const ArrayGeometry& geometry,
                                    const RealVector& theta, const std::vector<Index>& idx)
{
    ComplexMatrix a(geometry.size(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        a.col(static_cast<Index>(j)) = steering_vector(geometry, theta[idx[j]]);
    return B.transpose() * a;
}

inline ComplexMatrix atom_derivatives(const ComplexMatrix& B, const ArrayGeometry& geometry,
                                      const RealVector& theta, const std::vector<Index>& idx,
                                      bool paper_literal)
{
    ComplexMatrix da(geometry.size(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        da.col(static_cast<Index>(j)) = steering_derivative(geometry, theta[idx[j]], paper_literal);
    return B.transpose() * da;
}

inline ComplexVector atom_amplitudes(const AtomBank& bank, const std::vector<Index>& idx)
{
    ComplexVector z(static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        z[static_cast<Index>(j)] = bank.c[idx[j]] * std::polar(1.0, bank.beta[idx[j]]);
    return z;
}

} // namespace detail

/// Residual y - B^T sum_{active k} c_k e^{j beta_k} a(theta_k).
inline ComplexVector residual(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                              const ArrayGeometry& geometry)
{
    detail::check_problem(bank, y, B, geometry);
    const std::vector<Index> idx = bank.active_indices();
    if (idx.empty())
        return y;
    return y - detail::atom_responses(B, geometry, bank.theta, idx) * detail::atom_amplitudes(bank, idx);
}

/// F = ||y - B^T sum_{active k} c_k e^{j beta_k} a(theta_k)||^2.
inline double objective(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                        const ArrayGeometry& geometry)
{
    return residual(bank, y, B, geometry).squaredNorm();
}

///
/// Objective and all three gradient blocks in one pass. Inactive atoms get
/// zero gradient entries. The theta block is the derivative per radian.
///
inline Gradients evaluate(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                          const ArrayGeometry& geometry, bool paper_literal = false)
{
    detail::check_problem(bank, y, B, geometry);
    const Index S = bank.size();
    Gradients g;
    g.c = RealVector::Zero(S);
    g.beta = RealVector::Zero(S);
    g.theta = RealVector::Zero(S);

    const std::vector<Index> idx = bank.active_indices();
    if (idx.empty()) {
        g.value = y.squaredNorm();
        return g;
    }
    const ComplexMatrix G = detail::atom_responses(B, geometry, bank.theta, idx);
    const ComplexMatrix dG = detail::atom_derivatives(B, geometry, bank.theta, idx, paper_literal);
    const ComplexVector z = detail::atom_amplitudes(bank, idx);
    const ComplexVector r = y - G * z;
    g.value = r.squaredNorm();

    // r^H G and r^H dG, one entry per active atom.
    const ComplexVector rg = G.adjoint() * r;
    const ComplexVector rdg = dG.adjoint() * r;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const Index k = idx[j];
        const Index jj = static_cast<Index>(j);
        const Complex ph = std::polar(1.0, bank.beta[k]);
        // conj(rg) = r^H g; every block is 2 Re{ r^H (-d(model)/dx) }.
        const Complex rhg = std::conj(rg[jj]) * ph;
        g.c[k] = -2.0 * rhg.real();
        g.beta[k] = -2.0 * (kJ * bank.c[k] * rhg).real();
        g.theta[k] = -2.0 * (bank.c[k] * std::conj(rdg[jj]) * ph).real();
    }
    return g;
}

inline RealVector grad_c(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                         const ArrayGeometry& geometry)
{
    return evaluate(bank, y, B, geometry).c;
}

inline RealVector grad_beta(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                            const ArrayGeometry& geometry)
{
    return evaluate(bank, y, B, geometry).beta;
}

inline RealVector grad_theta(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                             const ArrayGeometry& geometry, bool paper_literal = false)
{
    return evaluate(bank, y, B, geometry, paper_literal).theta;
}

} // namespace ncanm

#endif // NCANM_OBJECTIVE_HPP
