#ifndef NCANM_SOLVER_HPP
#define NCANM_SOLVER_HPP

#include <ncanm/convergence.hpp>
#include <ncanm/objective.hpp>
#include <ncanm/random.hpp>
#include <ncanm/signal_model.hpp>
#include <ncanm/types.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ncanm
{

struct ThresholdRule
{
    enum class Kind
    {
        MedianOfSorted, // T = (S/2)-th largest gain
        FixedValue
    };

    Kind kind = Kind::MedianOfSorted;
    double value = 0.0;

    static ThresholdRule median_of_sorted() { return {}; }
    static ThresholdRule fixed(double t) { return {Kind::FixedValue, t}; }
};

///
/// Solver parameters. Gains and step sizes refer to the internally normalized
/// problem (y scaled so that ||y||^2 = P N); unset optionals take the
/// data-driven defaults described at each field.
///
struct SolverConfig
{
    Index sparsity = 300;                  // S, atoms in the bank
    Index max_iters = 2000;                // Q
    std::optional<double> step_size;       // eta; default 0.5 / empirical L
    std::optional<double> grad_epsilon;    // perturbation trigger; default 1e-3 ||y||
    std::optional<double> perturb_radius;  // default eta sqrt(ln^2(P) / P)
    ThresholdRule threshold_rule;
    double min_separation_deg = 1.0;
    std::uint64_t seed = 0;
    bool paper_literal_gradient = false;

    double relative_threshold = 0.2;  // gains below this fraction of the largest are also thresholded
    double resolution_cells = 1.0;    // prune radius in sin(theta), in units of 1 / aperture; 0 disables
    double init_gain = 0.01;
    double init_range_deg = 50.0;
    bool matched_phase_init = true;   // beta^0 = phase of the atom's correlation with y
    bool descent_guard = true;        // defer removals that would raise F
    double cluster_fraction = 0.1;    // keep clusters above this fraction of the strongest
    Index lipschitz_iterations = 20;

    void validate() const
    {
        if (sparsity < 1)
            throw ParameterError("SolverConfig: sparsity must be at least 1");
        if (max_iters < 1)
            throw ParameterError("SolverConfig: max_iters must be at least 1");
        if (step_size && !(*step_size > 0.0))
            throw ParameterError("SolverConfig: step_size must be positive");
        if (grad_epsilon && !(*grad_epsilon > 0.0))
            throw ParameterError("SolverConfig: grad_epsilon must be positive");
        if (perturb_radius && !(*perturb_radius >= 0.0))
            throw ParameterError("SolverConfig: perturb_radius must be non-negative");
        if (threshold_rule.kind == ThresholdRule::Kind::FixedValue && !(threshold_rule.value >= 0.0))
            throw ParameterError("SolverConfig: fixed threshold must be non-negative");
        if (!(min_separation_deg >= 0.0))
            throw ParameterError("SolverConfig: min_separation_deg must be non-negative");
        if (!(relative_threshold >= 0.0 && relative_threshold < 1.0))
            throw ParameterError("SolverConfig: relative_threshold must lie in [0, 1)");
        if (!(resolution_cells >= 0.0))
            throw ParameterError("SolverConfig: resolution_cells must be non-negative");
        if (!(init_gain > 0.0))
            throw ParameterError("SolverConfig: init_gain must be positive");
        if (!(init_range_deg > 0.0 && init_range_deg < 90.0))
            throw ParameterError("SolverConfig: init_range_deg must lie in (0, 90)");
        if (!(cluster_fraction >= 0.0 && cluster_fraction < 1.0))
            throw ParameterError("SolverConfig: cluster_fraction must lie in [0, 1)");
        if (lipschitz_iterations < 1)
            throw ParameterError("SolverConfig: lipschitz_iterations must be at least 1");
    }
};

struct DoaEstimate
{
    std::vector<double> angles; // degrees, strictly increasing
    std::vector<double> gains;
    SolverDiagnostics diagnostics;
    AtomBank bank;              // final atoms, gains in the units of y
};

/// xi = eta sqrt(ln^2(P) / P).
inline double default_perturb_radius(double eta, Index measurements)
{
    const double lp = std::log(static_cast<double>(measurements));
    return eta * std::sqrt(lp * lp / static_cast<double>(measurements));
}

///
/// One gradient step on the active atoms. theta is stepped in degrees with
/// the per-degree gradient (grad_theta * pi / 180). Gains that turn negative
/// are clamped to zero and deactivated; angles are clamped to [-90, 90] and
/// atoms that reach either end are deactivated.
///
inline AtomBank gradient_step(AtomBank bank, const Gradients& g, double eta)
{
    if (!(eta > 0.0))
        throw ParameterError("gradient_step: step size must be positive");
    for (Index k = 0; k < bank.size(); ++k) {
        if (!bank.active[k])
            continue;
        bank.c[k] -= eta * g.c[k];
        bank.beta[k] -= eta * g.beta[k];
        bank.theta[k] = std::clamp(bank.theta[k] - eta * g.theta[k] * kDegToRad, -90.0, 90.0);
        if (!(bank.c[k] > 0.0) || !(std::abs(bank.theta[k]) < 90.0))
            bank.deactivate(k);
    }
    return bank;
}

inline AtomBank gradient_step(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                              const ArrayGeometry& geometry, double eta, bool paper_literal = false)
{
    return gradient_step(bank, evaluate(bank, y, B, geometry, paper_literal), eta);
}

struct Perturbation
{
    bool fired = false;
    double norm_c = 0.0;
    double norm_beta = 0.0;
    double norm_theta = 0.0;
};

///
/// Adds independent uniform-in-ball draws of the given radius to the c, beta
/// and theta blocks of the active atoms when the gradient norm is at most
/// epsilon and the bank is not already converged and separated. c is
/// re-clamped at zero and theta into the open interval (-90, 90).
///
inline Perturbation maybe_perturb(AtomBank& bank, double gradient_norm, double epsilon, double radius,
                                  bool converged_and_separated, Rng& rng)
{
    Perturbation p;
    if (!(gradient_norm <= epsilon) || converged_and_separated || !(radius > 0.0))
        return p;
    const std::vector<Index> idx = bank.active_indices();
    const Index n = static_cast<Index>(idx.size());
    if (n == 0)
        return p;
    const RealVector dc = rng.in_ball(n, radius);
    const RealVector db = rng.in_ball(n, radius);
    const RealVector dt = rng.in_ball(n, radius);
    constexpr double edge = 90.0 - 1e-9;
    for (Index j = 0; j < n; ++j) {
        const Index k = idx[static_cast<std::size_t>(j)];
        bank.c[k] += dc[j];
        bank.beta[k] += db[j];
        bank.theta[k] = std::clamp(bank.theta[k] + dt[j], -edge, edge);
        if (!(bank.c[k] > 0.0))
            bank.deactivate(k);
    }
    p.fired = true;
    p.norm_c = dc.norm();
    p.norm_beta = db.norm();
    p.norm_theta = dt.norm();
    return p;
}

inline Perturbation maybe_perturb(AtomBank& bank, const Gradients& g, double epsilon, double radius,
                                  bool converged_and_separated, Rng& rng)
{
    return maybe_perturb(bank, g.norm(), epsilon, radius, converged_and_separated, rng);
}

/// The threshold T the rule yields for this bank.
inline double threshold_value(const AtomBank& bank, const ThresholdRule& rule)
{
    if (rule.kind == ThresholdRule::Kind::FixedValue)
        return rule.value;
    if (bank.size() == 0)
        return 0.0;
    RealVector mags = bank.c.cwiseAbs();
    const Index m = std::max<Index>(1, bank.size() / 2);
    std::nth_element(mags.data(), mags.data() + (m - 1), mags.data() + mags.size(), std::greater<double>());
    return mags[m - 1];
}

///
/// Keeps atoms with c >= T and zeroes the rest. With relative_floor > 0 the
/// threshold is raised to relative_floor * max(c).
///
inline AtomBank threshold_step(AtomBank bank, const ThresholdRule& rule, double relative_floor = 0.0)
{
    double t = threshold_value(bank, rule);
    if (relative_floor > 0.0 && bank.size() > 0)
        t = std::max(t, relative_floor * bank.c.maxCoeff());
    for (Index k = 0; k < bank.size(); ++k)
        if (!(bank.c[k] >= t) || !(bank.c[k] > 0.0))
            bank.deactivate(k);
    return bank;
}

///
/// Scanning atoms by descending gain, zeroes any atom within min_separation_deg
/// (or, when sine_separation > 0, within sine_separation in sin(theta)) of an
/// already kept stronger atom, and any atom outside (-90, 90) degrees.
///
inline AtomBank prune_step(AtomBank bank, double min_separation_deg, double sine_separation = 0.0)
{
    std::vector<Index> kept;
    std::vector<double> kept_sin;
    for (Index k : bank.order_by_gain()) {
        if (!bank.active[k])
            continue;
        const double th = bank.theta[k];
        if (!(th > -90.0 && th < 90.0)) {
            bank.deactivate(k);
            continue;
        }
        const double s = std::sin(deg2rad(th));
        bool close = false;
        for (std::size_t j = 0; j < kept.size() && !close; ++j)
            close = std::abs(th - bank.theta[kept[j]]) <= min_separation_deg ||
                    (sine_separation > 0.0 && std::abs(s - kept_sin[j]) <= sine_separation);
        if (close) {
            bank.deactivate(k);
        } else {
            kept.push_back(k);
            kept_sin.push_back(s);
        }
    }
    return bank;
}

/// Physically reorders the bank by descending gain (stable).
inline AtomBank sort_by_gain(const AtomBank& bank)
{
    const std::vector<Index> order = bank.order_by_gain();
    AtomBank out(bank.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Index d = static_cast<Index>(i);
        out.c[d] = bank.c[order[i]];
        out.beta[d] = bank.beta[order[i]];
        out.theta[d] = bank.theta[order[i]];
        out.active[d] = bank.active[order[i]];
    }
    return out;
}

struct AtomCluster
{
    double angle = 0.0; // gain-weighted mean angle
    double gain = 0.0;  // summed gain
};

///
/// Greedy clustering by descending gain: an atom joins the first cluster whose
/// seed lies within min_separation_deg (or sine_separation in sin(theta)).
/// Clusters with summed gain above fraction * strongest are returned, sorted
/// by angle; centers closer than min_separation_deg are merged.
///
inline std::vector<AtomCluster> cluster_atoms(const AtomBank& bank, double min_separation_deg,
                                              double sine_separation, double fraction)
{
    struct Group
    {
        double seed, seed_sin, weight = 0.0, moment = 0.0;
    };
    std::vector<Group> groups;
    for (Index k : bank.order_by_gain()) {
        if (!bank.active[k])
            continue;
        const double th = bank.theta[k];
        const double s = std::sin(deg2rad(th));
        Group* home = nullptr;
        for (Group& g : groups) {
            if (std::abs(th - g.seed) <= min_separation_deg ||
                (sine_separation > 0.0 && std::abs(s - g.seed_sin) <= sine_separation)) {
                home = &g;
                break;
            }
        }
        if (!home) {
            groups.push_back({th, s});
            home = &groups.back();
        }
        home->weight += bank.c[k];
        home->moment += bank.c[k] * th;
    }
    std::vector<AtomCluster> out;
    if (groups.empty())
        return out;
    double strongest = 0.0;
    for (const Group& g : groups)
        strongest = std::max(strongest, g.weight);
    for (const Group& g : groups)
        if (g.weight > fraction * strongest)
            out.push_back({g.moment / g.weight, g.weight});
    std::sort(out.begin(), out.end(), [](const AtomCluster& a, const AtomCluster& b) { return a.angle < b.angle; });
    std::vector<AtomCluster> merged;
    for (const AtomCluster& c : out) {
        if (!merged.empty() && !(c.angle - merged.back().angle > 0.0)) {
            AtomCluster& m = merged.back();
            m.angle = (m.angle * m.gain + c.angle * c.gain) / (m.gain + c.gain);
            m.gain += c.gain;
        } else {
            merged.push_back(c);
        }
    }
    return merged;
}

namespace detail
{

/// Atoms that one threshold + prune pass would remove.
inline std::vector<Index> removal_candidates(const AtomBank& bank, const SolverConfig& config,
                                             double sine_separation)
{
    const AtomBank after = prune_step(threshold_step(bank, config.threshold_rule, config.relative_threshold),
                                      config.min_separation_deg, sine_separation);
    std::vector<Index> out;
    for (Index k = 0; k < bank.size(); ++k)
        if (bank.active[k] && !after.active[k])
            out.push_back(k);
    return out;
}

/// Cached responses of the active atoms at the current point.
struct Evaluation
{
    std::vector<Index> idx;
    ComplexMatrix G;   // B^T a(theta_k)
    ComplexMatrix dG;  // B^T a'(theta_k), per radian
    ComplexVector z;   // c_k e^{j beta_k}
    ComplexVector r;   // residual
    double value = 0.0;

    void compute(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B,
                 const ArrayGeometry& geometry, bool paper_literal)
    {
        idx = bank.active_indices();
        G = atom_responses(B, geometry, bank.theta, idx);
        dG = atom_derivatives(B, geometry, bank.theta, idx, paper_literal);
        z = atom_amplitudes(bank, idx);
        r = idx.empty() ? y : ComplexVector(y - G * z);
        value = r.squaredNorm();
    }

    Gradients gradients(const AtomBank& bank) const
    {
        Gradients g;
        g.value = value;
        g.c = RealVector::Zero(bank.size());
        g.beta = RealVector::Zero(bank.size());
        g.theta = RealVector::Zero(bank.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const Index k = idx[j];
            if (!bank.active[k])
                continue;
            const Index jj = static_cast<Index>(j);
            const Complex ph = std::polar(1.0, bank.beta[k]);
            const Complex rhg = G.col(jj).dot(r);
            const Complex rhdg = dG.col(jj).dot(r);
            // dot() conjugates its first argument: rhg = g^H r, so r^H g = conj(rhg).
            g.c[k] = -2.0 * (std::conj(rhg) * ph).real();
            g.beta[k] = -2.0 * (kJ * bank.c[k] * std::conj(rhg) * ph).real();
            g.theta[k] = -2.0 * (bank.c[k] * std::conj(rhdg) * ph).real();
        }
        return g;
    }

    /// Removes atom k from the model, updating the residual.
    void remove(Index k)
    {
        for (std::size_t j = 0; j < idx.size(); ++j) {
            if (idx[j] == k) {
                r += z[static_cast<Index>(j)] * G.col(static_cast<Index>(j));
                z[static_cast<Index>(j)] = 0.0;
                break;
            }
        }
        value = r.squaredNorm();
    }

    double value_without(Index k) const
    {
        for (std::size_t j = 0; j < idx.size(); ++j)
            if (idx[j] == k)
                return (r + z[static_cast<Index>(j)] * G.col(static_cast<Index>(j))).squaredNorm();
        return value;
    }
};

/// Gradient norm in the units of the caller's y (theta per radian).
inline double unscaled_gradient_norm(const Gradients& g, double scale)
{
    const double s2 = scale * scale;
    return std::sqrt(scale * scale * g.c.squaredNorm() + s2 * s2 * (g.beta.squaredNorm() + g.theta.squaredNorm()));
}

} // namespace detail

///
/// Initial bank: angles uniform in [-range, range], equal gains, phases either
/// matched to each atom's correlation with y or uniform in [0, 2 pi).
///
inline AtomBank initial_bank(const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& geometry,
                             const SolverConfig& config, Rng& rng)
{
    const Index S = config.sparsity;
    AtomBank bank(S);
    for (Index k = 0; k < S; ++k)
        bank.theta[k] = rng.uniform(-config.init_range_deg, config.init_range_deg);
    for (Index k = 0; k < S; ++k)
        bank.beta[k] = rng.uniform(0.0, 2.0 * kPi);
    if (config.matched_phase_init) {
        std::vector<Index> all(static_cast<std::size_t>(S));
        for (Index k = 0; k < S; ++k)
            all[static_cast<std::size_t>(k)] = k;
        const ComplexVector corr = detail::atom_responses(B, geometry, bank.theta, all).adjoint() * y;
        for (Index k = 0; k < S; ++k)
            if (std::abs(corr[k]) > 0.0)
                bank.beta[k] = std::arg(corr[k]);
    }
    bank.c.setConstant(config.init_gain);
    bank.active.setConstant(true);
    return bank;
}

///
/// Perturbed gradient / hard-threshold iteration.
///
/// Each iteration takes a gradient step, perturbs when the gradient is small,
/// then applies threshold and prune. With descent_guard set, the atoms those
/// two steps remove are taken out cheapest first and only while F stays at or
/// below its value before the iteration; the others stay active and are
/// reconsidered next iteration. After the last iteration the surviving atoms
/// are clustered into the returned estimates.
///
inline DoaEstimate solve(const ReceivedSignal& signal, const ComplexMatrix& B, const ArrayGeometry& geometry,
                         const SolverConfig& config)
{
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const ComplexVector& y_in = signal.y;
    if (B.rows() != geometry.size())
        throw ShapeError("solve: B rows differ from geometry size");
    if (B.cols() != y_in.size())
        throw ShapeError("solve: B columns differ from the length of y");

    const Index P = y_in.size();
    const Index N = geometry.size();
    DoaEstimate out;
    SolverDiagnostics& diag = out.diagnostics;
    auto finish = [&] {
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        diag.wall_time = std::max(dt, 1e-9);
    };

    const double ynorm = y_in.norm();
    if (!std::isfinite(ynorm))
        throw NumericalError("solve: received signal is not finite");
    if (ynorm == 0.0) {
        out.bank = AtomBank(config.sparsity);
        diag.objective_trace.push_back(0.0);
        diag.active_count_trace.push_back(0);
        diag.converged = true;
        finish();
        return out;
    }

    // Work on y / scale so that ||y||^2 = P N; gains are rescaled on output.
    const double scale = ynorm / std::sqrt(static_cast<double>(P * N));
    const double scale2 = scale * scale;
    const ComplexVector y = y_in / scale;
    const double sine_sep = config.resolution_cells / geometry.aperture();
    const bool literal = config.paper_literal_gradient;
    const double epsilon = config.grad_epsilon.value_or(1e-3 * ynorm);

    Rng rng(config.seed);
    AtomBank bank = initial_bank(y, B, geometry, config, rng);

    double eta = 0.0;
    Index count_at_estimate = bank.active_count();
    auto estimate_step = [&] {
        diag.lipschitz_estimate =
            estimate_lipschitz_power(y, B, geometry, bank, rng, config.lipschitz_iterations, 1e-5, literal);
        if (config.step_size)
            eta = *config.step_size;
        else if (diag.lipschitz_estimate > 0.0)
            eta = 0.5 / diag.lipschitz_estimate;
        count_at_estimate = bank.active_count();
    };
    estimate_step();
    if (!(eta > 0.0))
        eta = 1.0 / static_cast<double>(P * N);
    double radius = config.perturb_radius.value_or(default_perturb_radius(eta, P));

    detail::Evaluation ev;
    ev.compute(bank, y, B, geometry, literal);
    diag.objective_trace.push_back(ev.value * scale2);
    diag.active_count_trace.push_back(bank.active_count());

    for (Index q = 0; q < config.max_iters; ++q) {
        const Index active = bank.active_count();
        if (active == 0) {
            diag.converged = true;
            break;
        }
        if (!config.step_size && 2 * active <= count_at_estimate) {
            estimate_step();
            if (!config.perturb_radius)
                radius = default_perturb_radius(eta, P);
        }

        const Gradients g = ev.gradients(bank);
        const double f_prev = ev.value;
        const double gnorm = detail::unscaled_gradient_norm(g, scale);
        if (!std::isfinite(gnorm) || !std::isfinite(ev.value))
            throw DivergenceError("solve: gradient is not finite at iteration " + std::to_string(q) +
                                      " (step size too large?)",
                                  q);
        const bool small_gradient = gnorm <= epsilon;
        const bool separated = small_gradient && detail::removal_candidates(bank, config, sine_sep).empty();
        if (small_gradient && separated) {
            diag.converged = true;
            break;
        }

        bank = gradient_step(bank, g, eta);
        const Perturbation pert = maybe_perturb(bank, gnorm, epsilon, radius, separated, rng);

        ev.compute(bank, y, B, geometry, literal);
        const std::vector<Index> remove = detail::removal_candidates(bank, config, sine_sep);
        if (!remove.empty()) {
            // Out-of-range atoms always go; the rest cheapest first under the guard.
            std::vector<std::pair<double, Index>> costs;
            for (Index k : remove) {
                if (!(bank.theta[k] > -90.0 && bank.theta[k] < 90.0)) {
                    ev.remove(k);
                    bank.deactivate(k);
                } else {
                    costs.emplace_back(ev.value_without(k), k);
                }
            }
            std::stable_sort(costs.begin(), costs.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [cost, k] : costs) {
                if (!config.descent_guard || ev.value_without(k) <= f_prev) {
                    ev.remove(k);
                    bank.deactivate(k);
                } else {
                    ++diag.deferred_removals;
                }
            }
        }

        if (!std::isfinite(ev.value))
            throw DivergenceError("solve: objective is not finite at iteration " + std::to_string(q) +
                                      " (step size too large?)",
                                  q);
        diag.objective_trace.push_back(ev.value * scale2);
        diag.active_count_trace.push_back(bank.active_count());
        if (pert.fired)
            diag.perturbation_iters.push_back(static_cast<Index>(diag.objective_trace.size()) - 1);
        diag.iters_run = q + 1;
    }
    diag.step_size = eta;

    for (const AtomCluster& cl : cluster_atoms(bank, config.min_separation_deg, sine_sep, config.cluster_fraction)) {
        out.angles.push_back(cl.angle);
        out.gains.push_back(cl.gain * scale);
    }
    bank.c *= scale;
    out.bank = std::move(bank);
    finish();
    return out;
}

} // namespace ncanm

#endif // NCANM_SOLVER_HPP
