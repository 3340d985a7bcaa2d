#ifndef NCANM_CONVERGENCE_HPP
#define NCANM_CONVERGENCE_HPP

#include <ncanm/objective.hpp>
#include <ncanm/random.hpp>
#include <ncanm/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace ncanm
{

///
/// Per-solve record of the iteration.
///
/// objective_trace[0] is F at the initial bank and objective_trace[q + 1] is F
/// after iteration q; active_count_trace is aligned with it. Entries of
/// perturbation_iters index objective_trace.
///
struct SolverDiagnostics
{
    std::vector<double> objective_trace;
    std::vector<Index> perturbation_iters;
    std::vector<Index> active_count_trace;
    Index iters_run = 0;
    double wall_time = 0.0;
    double lipschitz_estimate = 0.0;
    double step_size = 0.0;
    Index deferred_removals = 0;
    bool converged = false;
};

/// Which variable blocks a probe moves. theta is measured in degrees.
struct BlockMask
{
    bool c = true;
    bool beta = true;
    bool theta = true;
};

namespace detail
{

inline Index packed_size(const std::vector<Index>& idx, BlockMask m)
{
    const Index n = static_cast<Index>(idx.size());
    return n * ((m.c ? 1 : 0) + (m.beta ? 1 : 0) + (m.theta ? 1 : 0));
}

inline RealVector pack_state(const AtomBank& bank, const std::vector<Index>& idx, BlockMask m)
{
    RealVector x(packed_size(idx, m));
    Index p = 0;
    if (m.c)
        for (Index k : idx)
            x[p++] = bank.c[k];
    if (m.beta)
        for (Index k : idx)
            x[p++] = bank.beta[k];
    if (m.theta)
        for (Index k : idx)
            x[p++] = bank.theta[k];
    return x;
}

/// Writes x back without touching the active mask (probes may leave c <= 0).
inline void unpack_state(AtomBank& bank, const std::vector<Index>& idx, BlockMask m, const RealVector& x)
{
    Index p = 0;
    if (m.c)
        for (Index k : idx)
            bank.c[k] = x[p++];
    if (m.beta)
        for (Index k : idx)
            bank.beta[k] = x[p++];
    if (m.theta)
        for (Index k : idx)
            bank.theta[k] = x[p++];
}

/// Gradient in the packed coordinates (theta block per degree).
inline RealVector pack_gradient(const Gradients& g, const std::vector<Index>& idx, BlockMask m)
{
    RealVector x(packed_size(idx, m));
    Index p = 0;
    if (m.c)
        for (Index k : idx)
            x[p++] = g.c[k];
    if (m.beta)
        for (Index k : idx)
            x[p++] = g.beta[k];
    if (m.theta)
        for (Index k : idx)
            x[p++] = g.theta[k] * kDegToRad;
    return x;
}

/// Objective and packed gradient of F restricted to the probed coordinates.
class PackedObjective
{
public:
    PackedObjective(const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& geometry,
                    AtomBank base, BlockMask mask, bool paper_literal)
        : y_(y), B_(B), geometry_(geometry), bank_(std::move(base)), idx_(bank_.active_indices()),
          mask_(mask), paper_literal_(paper_literal)
    {
    }

    Index dimension() const { return packed_size(idx_, mask_); }
    RealVector point() const { return pack_state(bank_, idx_, mask_); }

    std::pair<double, RealVector> operator()(const RealVector& x)
    {
        unpack_state(bank_, idx_, mask_, x);
        const Gradients g = evaluate(bank_, y_, B_, geometry_, paper_literal_);
        return {g.value, pack_gradient(g, idx_, mask_)};
    }

private:
    const ComplexVector& y_;
    const ComplexMatrix& B_;
    const ArrayGeometry& geometry_;
    AtomBank bank_;
    std::vector<Index> idx_;
    BlockMask mask_;
    bool paper_literal_;
};

} // namespace detail

/// Half-widths of the box used to draw probe points around a bank.
struct ProbeBox
{
    double c = 0.1;      // absolute gain offset
    double beta = 0.25;  // radians
    double theta = 0.5;  // degrees
};

///
/// Empirical gradient Lipschitz constant: the maximum over n_samples random
/// pairs (x, x') of ||grad F(x) - grad F(x')|| / ||x - x'||.
///
/// Points are drawn uniformly in the box around the active atoms of center,
/// moving only the blocks selected by mask (theta in degrees). Pair i uses the
/// i-th draws of rng, so the estimate is a running maximum that is
/// nondecreasing in n_samples. Identical points are skipped.
///
inline double estimate_lipschitz(const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& geometry,
                                 const AtomBank& center, Index n_samples, Rng& rng, BlockMask mask = {},
                                 ProbeBox box = {}, bool paper_literal = false)
{
    if (n_samples < 2)
        throw ParameterError("estimate_lipschitz: n_samples must be at least 2");
    detail::PackedObjective f(y, B, geometry, center, mask, paper_literal);
    const std::vector<Index> idx = center.active_indices();
    const Index n = static_cast<Index>(idx.size());
    const RealVector x0 = f.point();
    if (x0.size() == 0)
        return 0.0;

    auto draw = [&] {
        RealVector x = x0;
        Index p = 0;
        if (mask.c)
            for (Index j = 0; j < n; ++j)
                x[p++] += rng.uniform(-box.c, box.c);
        if (mask.beta)
            for (Index j = 0; j < n; ++j)
                x[p++] += rng.uniform(-box.beta, box.beta);
        if (mask.theta)
            for (Index j = 0; j < n; ++j, ++p)
                x[p] = std::clamp(x[p] + rng.uniform(-box.theta, box.theta), -90.0, 90.0);
        return x;
    };

    double best = 0.0;
    for (Index s = 0; s < n_samples; ++s) {
        const RealVector x = draw();
        const RealVector xp = draw();
        const double dx = (x - xp).norm();
        if (dx == 0.0)
            continue;
        const RealVector gx = f(x).second;
        const RealVector gxp = f(xp).second;
        best = std::max(best, (gx - gxp).norm() / dx);
    }
    return best;
}

///
/// Power-iteration variant used by the solver for its step size. Each step
/// forms the pair (x, x + h d) with unit d, takes the difference quotient
/// q = (grad F(x + h d) - grad F(x)) / h, and continues along q. The return
/// value is the largest ||q|| seen, still a maximum of difference quotients.
///
inline double estimate_lipschitz_power(const ComplexVector& y, const ComplexMatrix& B,
                                       const ArrayGeometry& geometry, const AtomBank& at, Rng& rng,
                                       Index iterations = 20, double h = 1e-5, bool paper_literal = false)
{
    detail::PackedObjective f(y, B, geometry, at, BlockMask{}, paper_literal);
    const RealVector x = f.point();
    if (x.size() == 0)
        return 0.0;
    const RealVector g0 = f(x).second;
    RealVector d(x.size());
    for (Index i = 0; i < d.size(); ++i)
        d[i] = rng.normal();
    d.normalize();
    double best = 0.0;
    for (Index it = 0; it < iterations; ++it) {
        const RealVector q = (f(x + h * d).second - g0) / h;
        const double qn = q.norm();
        best = std::max(best, qn);
        if (!(qn > 0.0))
            break;
        d = q / qn;
    }
    return best;
}

///
/// True iff the trace never increases except at the listed perturbation
/// indices. An increase below tolerance * |previous value| is treated as
/// floating-point noise.
///
inline bool check_descent(const std::vector<double>& trace, const std::vector<Index>& perturbation_iters,
                          double tolerance = 1e-12)
{
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const Index ii = static_cast<Index>(i);
        if (std::find(perturbation_iters.begin(), perturbation_iters.end(), ii) != perturbation_iters.end())
            continue;
        if (trace[i] > trace[i - 1] + tolerance * std::abs(trace[i - 1]))
            return false;
    }
    return true;
}

inline bool check_descent(const SolverDiagnostics& diagnostics, double tolerance = 1e-12)
{
    return check_descent(diagnostics.objective_trace, diagnostics.perturbation_iters, tolerance);
}

struct Proposition1Report
{
    Index pairs = 0;
    Index skipped = 0;
    double l = 0.0;
    double L = 0.0;
    double zeta = 0.0;
    double rho = 0.0;
    Index quadratic_violations = 0;  // f(x) - f(y) <= <grad f(y), x - y> + (1 + rho)/(2 zeta) ||x - y||^2
    Index lipschitz_violations = 0;  // ||grad f(x) - grad f(y)|| <= L ||x - y||
    double worst_quadratic_margin = std::numeric_limits<double>::infinity();
    double worst_lipschitz_margin = std::numeric_limits<double>::infinity();

    bool passed() const { return quadratic_violations == 0 && lipschitz_violations == 0; }
};

///
/// A fixed sample of point pairs with function values and gradients, on
/// which l, L and the Proposition 1 inequalities are evaluated.
///
class Proposition1Sample
{
public:
    struct Pair
    {
        RealVector x, y, gx, gy;
        double fx = 0.0, fy = 0.0;
    };

    /// fg(x) returns {f(x), grad f(x)}; draw() returns one pair of points.
    template <class FuncGrad, class Draw>
    Proposition1Sample(FuncGrad&& fg, Draw&& draw, Index n_pairs)
    {
        pairs_.reserve(static_cast<std::size_t>(n_pairs));
        for (Index i = 0; i < n_pairs; ++i) {
            Pair p;
            std::tie(p.x, p.y) = draw();
            std::tie(p.fx, p.gx) = fg(p.x);
            std::tie(p.fy, p.gy) = fg(p.y);
            pairs_.push_back(std::move(p));
        }
    }

    /// Empirical {l, L}: min and max gradient difference quotients, l floored at 1e-6 L.
    std::pair<double, double> bounds() const
    {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (const Pair& p : pairs_) {
            const double dx = (p.x - p.y).norm();
            if (dx == 0.0)
                continue;
            const double q = (p.gx - p.gy).norm() / dx;
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        if (!(hi > 0.0))
            return {0.0, 0.0};
        return {std::max(lo, 1e-6 * hi), hi};
    }

    Proposition1Report check(double zeta) const { return check(zeta, bounds()); }

    Proposition1Report check(double zeta, std::pair<double, double> lL) const
    {
        Proposition1Report r;
        r.l = lL.first;
        r.L = lL.second;
        r.zeta = zeta;
        if (!(zeta >= 0.0) || (r.L > 0.0 && !(zeta < 2.0 * r.l / r.L)))
            throw ParameterError("check_proposition1: zeta must lie in [0, 2l/L)");
        r.rho = std::sqrt(std::max(0.0, 1.0 - 2.0 * zeta * r.l + zeta * zeta * r.L * r.L));
        const double coef = zeta > 0.0 ? (1.0 + r.rho) / (2.0 * zeta) : std::numeric_limits<double>::infinity();
        for (const Pair& p : pairs_) {
            const RealVector d = p.x - p.y;
            const double dx2 = d.squaredNorm();
            if (dx2 == 0.0) {
                ++r.skipped;
                continue;
            }
            ++r.pairs;
            const double roundoff = 1e-12 * (std::abs(p.fx) + std::abs(p.fy));
            const double lhs = p.fx - p.fy - p.gy.dot(d);
            const double rhs = std::isinf(coef) ? coef : coef * dx2;
            const double qm = rhs - lhs;
            r.worst_quadratic_margin = std::min(r.worst_quadratic_margin, qm);
            if (qm < -roundoff)
                ++r.quadratic_violations;
            const double dg = (p.gx - p.gy).norm();
            const double lm = r.L * std::sqrt(dx2) - dg;
            r.worst_lipschitz_margin = std::min(r.worst_lipschitz_margin, lm);
            if (lm < -1e-12 * std::max(dg, 1.0))
                ++r.lipschitz_violations;
        }
        return r;
    }

    const std::vector<Pair>& pairs() const { return pairs_; }

private:
    std::vector<Pair> pairs_;
};

///
/// Proposition 1 check on the NC-ANM objective, pairs drawn uniformly from the
/// box around the active atoms of center (solver coordinates, theta in degrees).
///
inline Proposition1Sample proposition1_sample(const ComplexVector& y, const ComplexMatrix& B,
                                              const ArrayGeometry& geometry, const AtomBank& center,
                                              Index n_pairs, Rng& rng, ProbeBox box = {})
{
    detail::PackedObjective f(y, B, geometry, center, BlockMask{}, false);
    const RealVector x0 = f.point();
    const Index n = center.active_count();
    auto draw_point = [&] {
        RealVector x = x0;
        for (Index j = 0; j < n; ++j)
            x[j] += rng.uniform(-box.c, box.c);
        for (Index j = n; j < 2 * n; ++j)
            x[j] += rng.uniform(-box.beta, box.beta);
        for (Index j = 2 * n; j < 3 * n; ++j)
            x[j] = std::clamp(x[j] + rng.uniform(-box.theta, box.theta), -90.0, 90.0);
        return x;
    };
    return Proposition1Sample([&](const RealVector& x) { return f(x); },
                              [&] {
                                  RealVector a = draw_point();
                                  RealVector b = draw_point();
                                  return std::pair<RealVector, RealVector>{std::move(a), std::move(b)};
                              },
                              n_pairs);
}

inline Proposition1Report check_proposition1(const ComplexVector& y, const ComplexMatrix& B,
                                             const ArrayGeometry& geometry, const AtomBank& center,
                                             Index n_pairs, double zeta, Rng& rng, ProbeBox box = {})
{
    return proposition1_sample(y, B, geometry, center, n_pairs, rng, box).check(zeta);
}

} // namespace ncanm

#endif // NCANM_CONVERGENCE_HPP
