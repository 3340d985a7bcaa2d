#include <ncanm/signal_model.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

using namespace ncanm;

namespace
{

// Scalar-loop oracle for one steering entry.
Complex steer_entry(double pos, double angle_deg)
{
    const double ph = 2.0 * M_PI * pos * std::sin(angle_deg * M_PI / 180.0);
    return {std::cos(ph), std::sin(ph)};
}

void expect_near(const Complex& a, const Complex& b, double tol)
{
    EXPECT_NEAR(a.real(), b.real(), tol);
    EXPECT_NEAR(a.imag(), b.imag(), tol);
}

} // namespace

TEST(ArrayGeometry, DefaultIsHalfWavelength)
{
    const ArrayGeometry g(5);
    ASSERT_EQ(g.size(), 5);
    for (Index n = 0; n < 5; ++n)
        EXPECT_DOUBLE_EQ(g.positions()[n], 0.5 * static_cast<double>(n));
    EXPECT_DOUBLE_EQ(g.aperture(), 2.0);
    EXPECT_EQ(ArrayGeometry().size(), 32);
}

TEST(ArrayGeometry, RejectsInvalid)
{
    EXPECT_THROW(ArrayGeometry(1), DomainError);
    RealVector p(3);
    p << 0.0, 0.5, 0.5;
    EXPECT_THROW(ArrayGeometry{p}, DomainError);
}

TEST(SteeringVector, Broadside)
{
    const ComplexVector a = steering_vector(ArrayGeometry(4), 0.0);
    for (Index n = 0; n < 4; ++n)
        expect_near(a[n], {1.0, 0.0}, 1e-15);
}

TEST(SteeringVector, ThirtyDegrees)
{
    const ComplexVector a = steering_vector(ArrayGeometry(4), 30.0);
    const Complex expect[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (Index n = 0; n < 4; ++n)
        expect_near(a[n], expect[n], 1e-12);
}

TEST(SteeringVector, SelfInnerProductIsN)
{
    const ComplexVector a = steering_vector(ArrayGeometry(32), 20.0);
    const Complex ip = a.dot(a);
    EXPECT_NEAR(ip.real(), 32.0, 1e-12);
    EXPECT_NEAR(ip.imag(), 0.0, 1e-12);
}

TEST(SteeringVector, DomainErrors)
{
    EXPECT_THROW(steering_vector(ArrayGeometry(4), 90.5), DomainError);
    EXPECT_THROW(steering_vector(ArrayGeometry(4), -91.0), DomainError);
    EXPECT_THROW(steering_derivative(ArrayGeometry(4), 100.0), DomainError);
    EXPECT_NO_THROW(steering_vector(ArrayGeometry(4), 90.0));
}

TEST(SteeringVector, PropertiesOverRandomDraws)
{
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const Index N = 2 + static_cast<Index>(rng.uniform() * 40);
        const double th = rng.uniform(-90.0, 90.0);
        const ArrayGeometry g(N);
        const ComplexVector a = steering_vector(g, th);
        const ComplexVector am = steering_vector(g, -th);
        for (Index n = 0; n < N; ++n) {
            EXPECT_NEAR(std::abs(a[n]), 1.0, 1e-14);
            expect_near(a[n], steer_entry(g.positions()[n], th), 1e-12);
            expect_near(am[n], std::conj(a[n]), 1e-12);
        }
    }
}

TEST(SteeringDerivative, ZeroAtEndfire)
{
    const ArrayGeometry g(6);
    for (double th : {90.0, -90.0}) {
        const ComplexVector d = steering_derivative(g, th);
        EXPECT_LT(d.norm(), 1e-12);
    }
}

TEST(SteeringDerivative, TwoElementsBroadside)
{
    const ComplexVector d = steering_derivative(ArrayGeometry(2), 0.0);
    expect_near(d[0], {0.0, 0.0}, 1e-15);
    expect_near(d[1], {0.0, M_PI}, 1e-15);
}

TEST(SteeringDerivative, MatchesFiniteDifference)
{
    const auto fd_check = [](const ArrayGeometry& g, double th_deg) {
        const double h = 1e-6; // radians
        const double hd = h * 180.0 / M_PI;
        const ComplexVector fd =
            (steering_vector(g, th_deg + hd) - steering_vector(g, th_deg - hd)) / (2.0 * h);
        const ComplexVector an = steering_derivative(g, th_deg);
        return (fd - an).norm() / std::max(an.norm(), 1e-300);
    };
    EXPECT_LT(fd_check(ArrayGeometry(8), 12.51), 1e-6);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const Index N = 2 + static_cast<Index>(rng.uniform() * 40);
        const double th = rng.uniform(-85.0, 85.0);
        EXPECT_LT(fd_check(ArrayGeometry(N), th), 1e-6) << "N=" << N << " theta=" << th;
    }
}

TEST(SteeringDerivative, PaperLiteralDropsCosine)
{
    const ArrayGeometry g(8);
    const double th = 40.0;
    const ComplexVector exact = steering_derivative(g, th, false);
    const ComplexVector lit = steering_derivative(g, th, true);
    EXPECT_LT((exact - std::cos(th * M_PI / 180.0) * lit).norm(), 1e-12);
    // Half-wavelength: entry n is j pi n a_n.
    const ComplexVector a = steering_vector(g, th);
    for (Index n = 0; n < 8; ++n)
        expect_near(lit[n], Complex(0.0, M_PI * static_cast<double>(n)) * a[n], 1e-12);
}

TEST(MeasurementMatrix, AllOnesBroadside)
{
    IrsSchedule s;
    s.coefficients = ComplexMatrix::Ones(3, 5);
    const ComplexMatrix B = measurement_matrix(ArrayGeometry(5), s);
    ASSERT_EQ(B.rows(), 5);
    ASSERT_EQ(B.cols(), 3);
    EXPECT_LT((B - ComplexMatrix::Ones(5, 3)).norm(), 1e-15);
}

TEST(MeasurementMatrix, BinaryCodesBroadsideIsTranspose)
{
    Rng rng(3);
    const IrsSchedule s = IrsSchedule::random_binary(7, 6, rng);
    const ComplexMatrix B = measurement_matrix(ArrayGeometry(6), s);
    EXPECT_LT((B - s.coefficients.transpose()).norm(), 1e-15);
    for (Index p = 0; p < 7; ++p)
        for (Index n = 0; n < 6; ++n)
            EXPECT_TRUE(s.coefficients(p, n) == Complex(1.0) || s.coefficients(p, n) == Complex(-1.0));
}

TEST(MeasurementMatrix, ThirtyDegreeReceiver)
{
    IrsSchedule s;
    s.coefficients.resize(2, 3);
    s.coefficients << 1, -1, 1, -1, 1, 1;
    s.receiver_direction_deg = 30.0;
    const ComplexMatrix B = measurement_matrix(ArrayGeometry(3), s);
    const Complex aphi[3] = {{1, 0}, {0, 1}, {-1, 0}};
    for (Index p = 0; p < 2; ++p)
        for (Index n = 0; n < 3; ++n)
            expect_near(B(n, p), aphi[n] * s.coefficients(p, n), 1e-12);
}

TEST(MeasurementMatrix, ShapeMismatch)
{
    IrsSchedule s;
    s.coefficients = ComplexMatrix::Ones(3, 4);
    EXPECT_THROW(measurement_matrix(ArrayGeometry(5), s), ShapeError);
}

TEST(SourceScene, Validation)
{
    SourceScene s{{10.0, 10.0}, {1.0, 1.0}};
    EXPECT_THROW(s.validate(), DomainError);
    SourceScene t{{95.0}, {1.0}};
    EXPECT_THROW(t.validate(), DomainError);
    SourceScene u{{1.0}, {}};
    EXPECT_THROW(u.validate(), ShapeError);
}

TEST(Synthesize, NoiselessSingleSource)
{
    Rng rng(1);
    const ArrayGeometry g(8);
    const IrsSchedule s = IrsSchedule::random_binary(6, 8, rng);
    const SourceScene scene{{17.0}, {1.0}};
    const ReceivedSignal r = synthesize(g, s, scene, 0.0, 99);
    const ComplexMatrix B = measurement_matrix(g, s);
    // Scalar oracle for B^T a(theta).
    for (Index p = 0; p < 6; ++p) {
        Complex acc = 0.0;
        for (Index n = 0; n < 8; ++n)
            acc += B(n, p) * steer_entry(g.positions()[n], 17.0);
        expect_near(r.y[p], acc, 1e-12);
    }
}

TEST(Synthesize, EmptySceneIsZero)
{
    Rng rng(1);
    const ArrayGeometry g(4);
    const IrsSchedule s = IrsSchedule::random_binary(5, 4, rng);
    const ReceivedSignal r = synthesize(g, s, SourceScene{}, 0.0, 0);
    EXPECT_EQ(r.y.size(), 5);
    EXPECT_EQ(r.y.norm(), 0.0);
}

TEST(Synthesize, DeterministicAndSeeded)
{
    Rng rng(2);
    const ArrayGeometry g(8);
    const IrsSchedule s = IrsSchedule::random_binary(8, 8, rng);
    const SourceScene scene{{-10.0, 25.0}, {1.0, Complex(0.0, 1.0)}};
    const ReceivedSignal a = synthesize(g, s, scene, 0.1, 7);
    const ReceivedSignal b = synthesize(g, s, scene, 0.1, 7);
    const ReceivedSignal c = synthesize(g, s, scene, 0.1, 8);
    EXPECT_EQ(a.y, b.y);
    EXPECT_NE(a.y, c.y);
    EXPECT_EQ(a.seed, 7u);
    EXPECT_THROW(synthesize(g, s, scene, -1.0, 7), DomainError);
}

TEST(Synthesize, Linearity)
{
    Rng rng(4);
    const ArrayGeometry g(8);
    const IrsSchedule s = IrsSchedule::random_binary(8, 8, rng);
    const SourceScene scene{{-10.0, 25.0}, {Complex(0.3, -1.0), Complex(0.0, 1.0)}};
    const Complex alpha(1.5, -0.5);
    SourceScene scaled = scene;
    for (Complex& v : scaled.amplitudes)
        v *= alpha;
    const ReceivedSignal a = synthesize(g, s, scene, 0.0, 1);
    const ReceivedSignal b = synthesize(g, s, scaled, 0.0, 1);
    EXPECT_LT((b.y - alpha * a.y).norm(), 1e-12);
}

TEST(Synthesize, Table1SnrCalibration)
{
    // ||y||^2 / (P sigma^2) should approach 1 + SNR = 101 on average.
    const ArrayGeometry g(32);
    double ratio = 0.0;
    const int M = 200;
    for (int t = 0; t < M; ++t) {
        Rng rng(1000 + static_cast<std::uint64_t>(t));
        const IrsSchedule s = IrsSchedule::random_binary(32, 32, rng);
        const SourceScene scene = SourceScene::unit_random_phase({-30.01, 12.51, 20.00}, rng);
        const ComplexMatrix B = measurement_matrix(g, s);
        const double sigma2 = noise_variance_for_snr(g, B, scene, 20.0);
        const ReceivedSignal r = synthesize(g, s, scene, sigma2, 5000 + static_cast<std::uint64_t>(t));
        ratio += r.y.squaredNorm() / (32.0 * sigma2);
    }
    ratio /= M;
    EXPECT_NEAR(ratio, 100.0, 20.0);
}
