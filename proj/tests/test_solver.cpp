#include <ncanm/convergence.hpp>
#include <ncanm/objective.hpp>
#include <ncanm/signal_model.hpp>
#include <ncanm/solver.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace ncanm;

namespace
{

struct Problem
{
    ArrayGeometry g;
    ComplexMatrix B;
    ReceivedSignal signal;
    std::vector<double> truth;
};

Problem scenario(std::vector<double> truth, double snr_db, std::uint64_t seed, Index N = 32, Index P = 32)
{
    Rng rng(seed);
    Problem p{ArrayGeometry(N), {}, {}, truth};
    const IrsSchedule s = IrsSchedule::random_binary(P, N, rng);
    p.B = measurement_matrix(p.g, s);
    const SourceScene scene = SourceScene::unit_random_phase(truth, rng);
    const double sigma2 = std::isinf(snr_db) ? 0.0 : noise_variance_for_snr(p.g, p.B, scene, snr_db);
    p.signal = synthesize(p.g, s, scene, sigma2, seed + 12345);
    return p;
}

AtomBank bank_of(std::vector<double> c, std::vector<double> theta)
{
    const Index n = static_cast<Index>(c.size());
    return AtomBank(Eigen::Map<RealVector>(c.data(), n), RealVector::Zero(n), Eigen::Map<RealVector>(theta.data(), n));
}

AtomBank random_bank(Index S, Rng& rng)
{
    RealVector c(S), b(S), t(S);
    for (Index k = 0; k < S; ++k) {
        c[k] = rng.uniform_open0();
        b[k] = rng.uniform(0, 2 * M_PI);
        t[k] = rng.uniform(-60, 60);
    }
    return AtomBank(c, b, t);
}

} // namespace

TEST(SolverConfig, Validation)
{
    SolverConfig c;
    EXPECT_NO_THROW(c.validate());
    c.step_size = -1.0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.max_iters = 0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.grad_epsilon = 0.0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.perturb_radius = -1e-3;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.sparsity = 0;
    EXPECT_THROW(c.validate(), ParameterError);
}

TEST(GradientStep, ZeroGradientLeavesBankUnchanged)
{
    Rng rng(1);
    const AtomBank bank = random_bank(6, rng);
    Gradients g;
    g.c = g.beta = g.theta = RealVector::Zero(6);
    EXPECT_EQ(gradient_step(bank, g, 0.1), bank);
}

TEST(GradientStep, ClampsNegativeGains)
{
    AtomBank bank = bank_of({0.01, 1.0}, {0.0, 10.0});
    Gradients g;
    g.c = RealVector::Zero(2);
    g.c[0] = 10.0;
    g.beta = g.theta = RealVector::Zero(2);
    const AtomBank out = gradient_step(bank, g, 0.01);
    EXPECT_FALSE(out.active[0]);
    EXPECT_EQ(out.c[0], 0.0);
    EXPECT_TRUE(out.active[1]);
    EXPECT_THROW(gradient_step(bank, g, 0.0), ParameterError);
}

TEST(GradientStep, DecreasesObjectiveOnNoiselessSingleSource)
{
    const Problem p = scenario({12.51}, INFINITY, 2);
    RealVector c(1), b(1), t(1);
    c << 0.5;
    b << 0.3;
    t << 12.0;
    const AtomBank bank(c, b, t);
    Rng rng(3);
    const double L = estimate_lipschitz(p.signal.y, p.B, p.g, bank, 50, rng);
    const double before = objective(bank, p.signal.y, p.B, p.g);
    const AtomBank after = gradient_step(bank, p.signal.y, p.B, p.g, 0.9 / L);
    EXPECT_LT(objective(after, p.signal.y, p.B, p.g), before);
}

TEST(MaybePerturb, NotTriggeredAboveEpsilon)
{
    Rng rng(4);
    AtomBank bank = random_bank(5, rng);
    const AtomBank orig = bank;
    const Perturbation pr = maybe_perturb(bank, 10.0, 1.0, 0.5, false, rng);
    EXPECT_FALSE(pr.fired);
    EXPECT_EQ(bank, orig);
}

TEST(MaybePerturb, ZeroRadiusIsIdentity)
{
    Rng rng(5);
    AtomBank bank = random_bank(5, rng);
    const AtomBank orig = bank;
    maybe_perturb(bank, 0.0, 1.0, 0.0, false, rng);
    EXPECT_EQ(bank, orig);
}

TEST(MaybePerturb, ConvergedBankIsLeftAlone)
{
    Rng rng(6);
    AtomBank bank = random_bank(5, rng);
    const AtomBank orig = bank;
    EXPECT_FALSE(maybe_perturb(bank, 0.0, 1.0, 0.5, true, rng).fired);
    EXPECT_EQ(bank, orig);
}

TEST(MaybePerturb, RadiusBoundAndDraws)
{
    const double xi = default_perturb_radius(0.01, 32);
    EXPECT_NEAR(xi, 0.01 * std::sqrt(std::log(32.0) * std::log(32.0) / 32.0), 1e-15);
    EXPECT_LE(xi, 0.00613);
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        AtomBank bank = random_bank(8, rng);
        bank.c.array() += 1.0;
        const AtomBank orig = bank;
        const Perturbation pr = maybe_perturb(bank, 0.0, 1.0, xi, false, rng);
        ASSERT_TRUE(pr.fired);
        EXPECT_LE(pr.norm_c, xi);
        EXPECT_LE(pr.norm_beta, xi);
        EXPECT_LE(pr.norm_theta, xi);
        EXPECT_LE((bank.c - orig.c).norm(), xi * (1 + 1e-12));
        EXPECT_LE((bank.beta - orig.beta).norm(), xi * (1 + 1e-12));
        EXPECT_LE((bank.theta - orig.theta).norm(), xi * (1 + 1e-12));
    }
}

TEST(MaybePerturb, KeepsAnglesInsideOpenInterval)
{
    AtomBank bank = bank_of({1.0, 1.0}, {89.9999999999, -89.9999999999});
    Rng rng(8);
    maybe_perturb(bank, 0.0, 1.0, 0.5, false, rng);
    for (Index k = 0; k < 2; ++k) {
        EXPECT_LT(bank.theta[k], 90.0);
        EXPECT_GT(bank.theta[k], -90.0);
    }
}

TEST(ThresholdStep, Examples)
{
    const AtomBank equal = bank_of({2, 2, 2, 2}, {0, 10, 20, 30});
    EXPECT_EQ(threshold_step(equal, ThresholdRule::median_of_sorted()).active_count(), 4);

    const AtomBank b = bank_of({4, 3, 2, 1}, {0, 10, 20, 30});
    const AtomBank t = threshold_step(b, ThresholdRule::median_of_sorted());
    EXPECT_TRUE(t.active[0]);
    EXPECT_TRUE(t.active[1]);
    EXPECT_FALSE(t.active[2]);
    EXPECT_FALSE(t.active[3]);
    EXPECT_EQ(t.c[2], 0.0);

    EXPECT_EQ(threshold_step(b, ThresholdRule::fixed(0.0)), b);
}

TEST(ThresholdStep, RelativeFloor)
{
    const AtomBank b = bank_of({10, 9, 3, 1.5}, {0, 10, 20, 30});
    const AtomBank t = threshold_step(b, ThresholdRule::fixed(0.0), 0.2);
    EXPECT_EQ(t.active_count(), 3);
}

TEST(PruneStep, Examples)
{
    const AtomBank close = bank_of({5, 1}, {20.0, 20.5});
    const AtomBank a = prune_step(close, 1.0);
    EXPECT_TRUE(a.active[0]);
    EXPECT_FALSE(a.active[1]);

    const AtomBank out = bank_of({1}, {95.0});
    EXPECT_FALSE(prune_step(out, 1.0).active[0]);

    const AtomBank sep = bank_of({1, 2, 3}, {-30.0, 12.5, 20.0});
    EXPECT_EQ(prune_step(sep, 1.0).active_count(), 3);

    // Sine-space exclusion: 1/aperture = 1/15.5 in sin(theta) is about 3.7 degrees near broadside.
    const AtomBank cell = bank_of({5, 1}, {0.0, 3.0});
    EXPECT_EQ(prune_step(cell, 1.0).active_count(), 2);
    EXPECT_EQ(prune_step(cell, 1.0, 1.0 / 15.5).active_count(), 1);
}

TEST(StructuralSteps, IdempotentAndSparsityMonotone)
{
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        AtomBank b = random_bank(30, rng);
        if (i % 3 == 0)
            b.c[5] = b.c[6]; // ties
        const Index before = b.active_count();
        const AtomBank t1 = threshold_step(b, ThresholdRule::median_of_sorted());
        EXPECT_LE(t1.active_count(), before);
        EXPECT_EQ(threshold_step(t1, ThresholdRule::median_of_sorted()), t1);
        const double T = threshold_value(b, ThresholdRule::median_of_sorted());
        const AtomBank f1 = threshold_step(b, ThresholdRule::fixed(T));
        EXPECT_EQ(threshold_step(f1, ThresholdRule::fixed(T)), f1);
        EXPECT_EQ(f1, t1);

        const AtomBank p1 = prune_step(b, 2.0, 0.02);
        EXPECT_EQ(prune_step(p1, 2.0, 0.02), p1);
        EXPECT_LE(p1.active_count(), before);
    }
}

TEST(ClusterAtoms, MergesNeighboursAndDropsWeakClusters)
{
    const AtomBank b = bank_of({4, 2, 3, 0.2}, {10.0, 10.6, -20.0, 40.0});
    const std::vector<AtomCluster> cl = cluster_atoms(b, 1.0, 0.0, 0.1);
    ASSERT_EQ(cl.size(), 2u);
    EXPECT_NEAR(cl[0].angle, -20.0, 1e-12);
    EXPECT_NEAR(cl[1].angle, (4 * 10.0 + 2 * 10.6) / 6.0, 1e-12);
    EXPECT_NEAR(cl[1].gain, 6.0, 1e-12);
}

TEST(Solve, ZeroInputGivesEmptyEstimate)
{
    const Problem p = scenario({10.0}, INFINITY, 11);
    ReceivedSignal zero{ComplexVector::Zero(32), 0.0, 0};
    const DoaEstimate e = solve(zero, p.B, p.g, SolverConfig{});
    EXPECT_TRUE(e.angles.empty());
    EXPECT_EQ(e.bank.active_count(), 0);
}

TEST(Solve, NoiselessSingleSource)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Problem p = scenario({12.51}, INFINITY, 100 + seed);
        SolverConfig cfg;
        cfg.seed = seed;
        const DoaEstimate e = solve(p.signal, p.B, p.g, cfg);
        ASSERT_EQ(e.angles.size(), 1u) << "seed " << seed;
        EXPECT_LT(std::abs(e.angles[0] - 12.51), 0.05) << "seed " << seed;
    }
}

TEST(Solve, SmallSparsityNoiselessSingleSource)
{
    // Random initialization needs enough atoms to seed the true basin.
    const Problem p = scenario({-7.3}, INFINITY, 5);
    int small_ok = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SolverConfig cfg;
        cfg.seed = seed;
        cfg.sparsity = 4;
        const DoaEstimate few = solve(p.signal, p.B, p.g, cfg);
        EXPECT_LE(few.angles.size(), 4u);
        small_ok += few.angles.size() == 1 && std::abs(few.angles[0] + 7.3) < 0.05;
        cfg.sparsity = 32;
        const DoaEstimate e = solve(p.signal, p.B, p.g, cfg);
        ASSERT_EQ(e.angles.size(), 1u) << "seed " << seed;
        EXPECT_LT(std::abs(e.angles[0] + 7.3), 0.05) << "seed " << seed;
    }
    EXPECT_GT(small_ok, 0);
}

TEST(Solve, Table1ScenarioSpotCheck)
{
    int good = 0;
    const int M = 10;
    for (int t = 0; t < M; ++t) {
        const Problem p = scenario({-30.01, 12.51, 20.0}, 20.0, 500 + static_cast<std::uint64_t>(t));
        SolverConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(t);
        const DoaEstimate e = solve(p.signal, p.B, p.g, cfg);
        bool ok = e.angles.size() == 3;
        for (std::size_t k = 0; ok && k < 3; ++k)
            ok = std::abs(e.angles[k] - p.truth[k]) < 0.5;
        good += ok;
        EXPECT_TRUE(std::is_sorted(e.angles.begin(), e.angles.end()));
        EXPECT_TRUE(check_descent(e.diagnostics));
    }
    EXPECT_GE(good, 9);
}

TEST(Solve, DiagnosticsLayout)
{
    const Problem p = scenario({-30.01, 12.51, 20.0}, 20.0, 42);
    SolverConfig cfg;
    cfg.max_iters = 50;
    const DoaEstimate e = solve(p.signal, p.B, p.g, cfg);
    const SolverDiagnostics& d = e.diagnostics;
    EXPECT_EQ(d.objective_trace.size(), static_cast<std::size_t>(d.iters_run + 1));
    EXPECT_EQ(d.active_count_trace.size(), d.objective_trace.size());
    EXPECT_EQ(d.active_count_trace[0], cfg.sparsity);
    EXPECT_GT(d.lipschitz_estimate, 0.0);
    EXPECT_GT(d.step_size, 0.0);
    EXPECT_GT(d.wall_time, 0.0);
    EXPECT_NEAR(d.objective_trace.back(),
                objective(e.bank, p.signal.y, p.B, p.g), 1e-9 * d.objective_trace.back());
    for (std::size_t i = 1; i < d.active_count_trace.size(); ++i)
        EXPECT_LE(d.active_count_trace[i], d.active_count_trace[i - 1]);
}

TEST(Solve, Deterministic)
{
    const Problem p = scenario({-30.01, 12.51, 20.0}, 20.0, 7);
    SolverConfig cfg;
    cfg.seed = 99;
    const DoaEstimate a = solve(p.signal, p.B, p.g, cfg);
    const DoaEstimate b = solve(p.signal, p.B, p.g, cfg);
    EXPECT_EQ(a.angles, b.angles);
    EXPECT_EQ(a.gains, b.gains);
    EXPECT_EQ(a.bank, b.bank);
    EXPECT_EQ(a.diagnostics.objective_trace, b.diagnostics.objective_trace);
    EXPECT_EQ(a.diagnostics.perturbation_iters, b.diagnostics.perturbation_iters);
}

TEST(Solve, PerturbationsAreRecordedAndExcused)
{
    // A large epsilon makes the perturbation trigger whenever removals are pending.
    const Problem p = scenario({-30.01, 12.51, 20.0}, 10.0, 8);
    SolverConfig cfg;
    cfg.grad_epsilon = 1e6;
    cfg.max_iters = 300;
    const DoaEstimate e = solve(p.signal, p.B, p.g, cfg);
    EXPECT_TRUE(check_descent(e.diagnostics));
    for (Index i : e.diagnostics.perturbation_iters) {
        EXPECT_GE(i, 1);
        EXPECT_LT(i, static_cast<Index>(e.diagnostics.objective_trace.size()));
    }
}

TEST(Solve, NonFiniteSignalIsNumericalError)
{
    Problem p = scenario({-30.01, 12.51, 20.0}, 20.0, 9);
    p.signal.y[3] = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
    EXPECT_THROW(solve(p.signal, p.B, p.g, SolverConfig{}), NumericalError);
    p.signal.y[3] = Complex(std::numeric_limits<double>::infinity(), 0.0);
    EXPECT_THROW(solve(p.signal, p.B, p.g, SolverConfig{}), NumericalError);
}

TEST(Solve, HugeStepStaysFinite)
{
    // Oversized steps push atoms to endfire where they are retired; nothing turns NaN.
    const Problem p = scenario({-30.01, 12.51, 20.0}, 20.0, 9);
    SolverConfig cfg;
    cfg.step_size = 1e30;
    cfg.descent_guard = false;
    const DoaEstimate e = solve(p.signal, p.B, p.g, cfg);
    for (double f : e.diagnostics.objective_trace)
        EXPECT_TRUE(std::isfinite(f));
    for (double a : e.angles)
        EXPECT_TRUE(std::isfinite(a));
}

TEST(Solve, ShapeErrors)
{
    const Problem p = scenario({10.0}, 20.0, 10);
    ReceivedSignal bad{p.signal.y.head(10), 0.0, 0};
    EXPECT_THROW(solve(bad, p.B, p.g, SolverConfig{}), ShapeError);
}
