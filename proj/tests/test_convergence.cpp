#include <ncanm/convergence.hpp>
#include <ncanm/signal_model.hpp>
#include <ncanm/solver.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace ncanm;

namespace
{

struct Problem
{
    ArrayGeometry g;
    ComplexMatrix B;
    ComplexVector y;
    std::vector<double> truth;
};

Problem table1(std::uint64_t seed, double snr_db = 20.0)
{
    Rng rng(seed);
    Problem p{ArrayGeometry(32), {}, {}, {-30.01, 12.51, 20.0}};
    const IrsSchedule s = IrsSchedule::random_binary(32, 32, rng);
    p.B = measurement_matrix(p.g, s);
    const SourceScene scene = SourceScene::unit_random_phase(p.truth, rng);
    p.y = synthesize(p.g, s, scene, noise_variance_for_snr(p.g, p.B, scene, snr_db), seed + 77).y;
    return p;
}

} // namespace

TEST(EstimateLipschitz, ExactForGainOnlySingleAtom)
{
    const Problem p = table1(1);
    RealVector c(1), b(1), t(1);
    c << 0.6;
    b << 0.9;
    t << 14.0;
    const AtomBank bank(c, b, t);
    Rng rng(2);
    const double L = estimate_lipschitz(p.y, p.B, p.g, bank, 10, rng, BlockMask{true, false, false});
    const double exact = 2.0 * (p.B.transpose() * steering_vector(p.g, 14.0) * std::polar(1.0, 0.9)).squaredNorm();
    EXPECT_NEAR(L, exact, 1e-9 * exact);
}

TEST(EstimateLipschitz, DuplicatePairsAreSkipped)
{
    const Problem p = table1(3);
    RealVector c(1), b(1), t(1);
    c << 0.6;
    b << 0.9;
    t << 14.0;
    const AtomBank bank(c, b, t);
    Rng rng(4);
    // A zero-width box makes every pair identical: nothing to divide, result 0.
    const double L = estimate_lipschitz(p.y, p.B, p.g, bank, 5, rng, BlockMask{}, ProbeBox{0.0, 0.0, 0.0});
    EXPECT_EQ(L, 0.0);
    EXPECT_THROW(estimate_lipschitz(p.y, p.B, p.g, bank, 1, rng), ParameterError);
}

TEST(EstimateLipschitz, NondecreasingInSamples)
{
    const Problem p = table1(5);
    Rng init(6);
    AtomBank bank(8);
    for (Index k = 0; k < 8; ++k) {
        bank.c[k] = init.uniform_open0();
        bank.beta[k] = init.uniform(0, 6.28);
        bank.theta[k] = init.uniform(-50, 50);
    }
    bank.sync_mask();
    double prev = 0.0;
    for (Index n : {2, 5, 10, 20, 40}) {
        Rng rng(7);
        const double L = estimate_lipschitz(p.y, p.B, p.g, bank, n, rng);
        EXPECT_GE(L, prev);
        prev = L;
    }
    Rng rng(8);
    EXPECT_GT(estimate_lipschitz_power(p.y, p.B, p.g, bank, rng), 0.0);
}

TEST(CheckDescent, Examples)
{
    EXPECT_TRUE(check_descent({10, 8, 8, 7.5}, {}));
    EXPECT_TRUE(check_descent({10, 8, 9}, {2}));
    EXPECT_FALSE(check_descent({10, 8, 9}, {}));
    EXPECT_TRUE(check_descent({}, {}));
    // Roundoff-level increases are tolerated, real ones are not.
    EXPECT_TRUE(check_descent({1.0, 1.0 + 1e-15}, {}));
    EXPECT_FALSE(check_descent({1.0, 1.0 + 1e-9}, {}));
    EXPECT_FALSE(check_descent({1.0, 1.0 + 1e-9}, {}, 0.0));
}

TEST(Proposition1, QuadraticClosedForm)
{
    Rng rng(9);
    auto fg = [](const RealVector& x) { return std::pair<double, RealVector>{x.squaredNorm(), 2.0 * x}; };
    auto draw = [&] {
        RealVector a(4), b(4);
        for (Index i = 0; i < 4; ++i) {
            a[i] = rng.uniform(-1, 1);
            b[i] = rng.uniform(-1, 1);
        }
        return std::pair<RealVector, RealVector>{a, b};
    };
    const Proposition1Sample sample(fg, draw, 200);
    const auto [l, L] = sample.bounds();
    EXPECT_NEAR(l, 2.0, 1e-12);
    EXPECT_NEAR(L, 2.0, 1e-12);
    const Proposition1Report r = sample.check(0.4, {2.0, 2.0});
    EXPECT_NEAR(r.rho, 0.2, 1e-12);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.pairs, 200);
}

TEST(Proposition1, IdenticalPairsAreHarmless)
{
    auto fg = [](const RealVector& x) { return std::pair<double, RealVector>{x.squaredNorm(), 2.0 * x}; };
    RealVector x(3);
    x << 1, 2, 3;
    auto draw = [&] { return std::pair<RealVector, RealVector>{x, x}; };
    const Proposition1Sample sample(fg, draw, 10);
    const Proposition1Report r = sample.check(0.4, {2.0, 2.0});
    EXPECT_EQ(r.skipped, 10);
    EXPECT_TRUE(r.passed());
}

TEST(Proposition1, ZetaOutOfRangeThrows)
{
    auto fg = [](const RealVector& x) { return std::pair<double, RealVector>{x.squaredNorm(), 2.0 * x}; };
    Rng rng(1);
    auto draw = [&] {
        RealVector a(2), b(2);
        a << rng.uniform(), rng.uniform();
        b << rng.uniform(), rng.uniform();
        return std::pair<RealVector, RealVector>{a, b};
    };
    const Proposition1Sample sample(fg, draw, 5);
    // 2l/L = 2 here, so zeta = 2 is the excluded boundary.
    EXPECT_THROW(sample.check(2.0, {2.0, 2.0}), ParameterError);
    EXPECT_THROW(sample.check(3.0, {2.0, 2.0}), ParameterError);
    EXPECT_NO_THROW(sample.check(1.0, {2.0, 2.0}));
    EXPECT_THROW(sample.check(-0.1, {2.0, 2.0}), ParameterError);
}

TEST(Proposition1, NcAnmSelfConsistent)
{
    const Problem p = table1(10);
    SolverConfig cfg;
    cfg.seed = 3;
    const DoaEstimate est = solve(ReceivedSignal{p.y, 0.0, 0}, p.B, p.g, cfg);
    ASSERT_GT(est.bank.active_count(), 0);
    Rng rng(11);
    const Proposition1Sample sample = proposition1_sample(p.y, p.B, p.g, est.bank, 1000, rng);
    const auto [l, L] = sample.bounds();
    ASSERT_GT(L, 0.0);
    ASSERT_LE(l, L);
    const Proposition1Report r = sample.check(l / L);
    EXPECT_EQ(r.pairs, 1000);
    EXPECT_EQ(r.lipschitz_violations, 0);
    EXPECT_EQ(r.quadratic_violations, 0);
    EXPECT_GE(r.rho, 0.0);
}
