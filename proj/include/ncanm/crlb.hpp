#ifndef NCANM_CRLB_HPP
#define NCANM_CRLB_HPP

#include <ncanm/signal_model.hpp>
#include <ncanm/types.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ncanm
{

/// One unknown nuisance parameter: a source power D_kk or the noise variance.
struct NuisanceParam
{
    enum class Kind
    {
        SourcePower,
        NoiseVariance
    };

    Kind kind = Kind::NoiseVariance;
    Index source = 0; // used by SourcePower

    static NuisanceParam source_power(Index k) { return {Kind::SourcePower, k}; }
    static NuisanceParam noise_variance() { return {Kind::NoiseVariance, 0}; }
};

///
/// Stochastic single-snapshot model y ~ CN(0, G) with
/// G = (B^T A) D (B^T A)^H + sigma^2 I.
///
struct CrlbModel
{
    ArrayGeometry geometry;
    ComplexMatrix B;                 // N x P
    std::vector<double> angles_deg;  // K
    ComplexMatrix source_covariance; // K x K, Hermitian PSD
    double noise_variance = 1.0;
    std::vector<NuisanceParam> nuisance;

    Index sources() const noexcept { return static_cast<Index>(angles_deg.size()); }

    /// All source powers and the noise variance unknown.
    static std::vector<NuisanceParam> full_nuisance(Index K)
    {
        std::vector<NuisanceParam> v;
        for (Index k = 0; k < K; ++k)
            v.push_back(NuisanceParam::source_power(k));
        v.push_back(NuisanceParam::noise_variance());
        return v;
    }

    /// Unit-power uncorrelated sources with every nuisance parameter unknown.
    static CrlbModel unit_power(ArrayGeometry geometry, ComplexMatrix B, std::vector<double> angles_deg,
                                double noise_variance)
    {
        CrlbModel m{std::move(geometry), std::move(B), std::move(angles_deg), {}, noise_variance, {}};
        const Index K = m.sources();
        m.source_covariance = ComplexMatrix::Identity(K, K);
        m.nuisance = full_nuisance(K);
        return m;
    }

    void validate() const
    {
        if (B.rows() != geometry.size())
            throw ShapeError("CrlbModel: B rows differ from geometry size");
        const Index K = sources();
        if (source_covariance.rows() != K || source_covariance.cols() != K)
            throw ShapeError("CrlbModel: source covariance must be K x K");
        if (!(noise_variance > 0.0))
            throw DomainError("CrlbModel: noise variance must be positive");
        if (K > 0) {
            const double scale = std::max(1.0, source_covariance.norm());
            if ((source_covariance - source_covariance.adjoint()).norm() > 1e-12 * scale)
                throw DomainError("CrlbModel: source covariance is not Hermitian");
            Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(source_covariance, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-12 * scale)
                throw DomainError("CrlbModel: source covariance is not positive semidefinite");
        }
        for (const NuisanceParam& p : nuisance)
            if (p.kind == NuisanceParam::Kind::SourcePower && (p.source < 0 || p.source >= K))
                throw ShapeError("CrlbModel: nuisance source index out of range");
    }
};

namespace detail
{
inline ComplexMatrix effective_steering(const CrlbModel& m)
{
    return m.B.transpose() * steering_matrix(m.geometry, m.angles_deg);
}
} // namespace detail

inline ComplexMatrix covariance_G(const CrlbModel& m)
{
    m.validate();
    const Index P = m.B.cols();
    ComplexMatrix G = m.noise_variance * ComplexMatrix::Identity(P, P);
    if (m.sources() > 0) {
        const ComplexMatrix BA = detail::effective_steering(m);
        G += BA * m.source_covariance * BA.adjoint();
    }
    return G;
}

/// dG / dtheta_k, theta in radians.
inline ComplexMatrix dG_dtheta(const CrlbModel& m, Index k)
{
    m.validate();
    if (k < 0 || k >= m.sources())
        throw ShapeError("dG_dtheta: source index " + std::to_string(k) + " out of range");
    const ComplexMatrix BA = detail::effective_steering(m);
    ComplexMatrix BdA = ComplexMatrix::Zero(BA.rows(), BA.cols());
    BdA.col(k) = m.B.transpose() * steering_derivative(m.geometry, m.angles_deg[static_cast<std::size_t>(k)]);
    const ComplexMatrix half = BdA * m.source_covariance * BA.adjoint();
    return half + half.adjoint();
}

/// dG / dpsi_j for the j-th entry of the model's nuisance list.
inline ComplexMatrix dG_dpsi(const CrlbModel& m, Index j)
{
    m.validate();
    if (j < 0 || j >= static_cast<Index>(m.nuisance.size()))
        throw ShapeError("dG_dpsi: nuisance index " + std::to_string(j) + " out of range");
    const NuisanceParam& p = m.nuisance[static_cast<std::size_t>(j)];
    const Index P = m.B.cols();
    if (p.kind == NuisanceParam::Kind::NoiseVariance)
        return ComplexMatrix::Identity(P, P);
    const ComplexVector g = detail::effective_steering(m).col(p.source);
    return g * g.adjoint();
}

enum class CrlbMethod
{
    SchurComplement,
    DiagonalBound
};

inline std::string to_string(CrlbMethod m)
{
    return m == CrlbMethod::SchurComplement ? "schur" : "diagonal";
}

struct CrlbReport
{
    RealMatrix fisher;              // (K + |psi|) square, theta block first, theta in radians
    RealVector crlb_theta_rad2;     // reported bound per angle
    RealVector crlb_theta_deg2;
    RealVector diagonal_bound_rad2; // 1 / F_kk
    double conditioning = 0.0;      // condition number of the full Fisher matrix
    CrlbMethod method = CrlbMethod::SchurComplement;

    /// sqrt(mean_k bound_k) in degrees, comparable to an RMSE.
    double rms_bound_deg() const
    {
        return crlb_theta_deg2.size() == 0 ? 0.0 : std::sqrt(crlb_theta_deg2.mean());
    }
};

///
/// Fisher information of y ~ CN(0, G): F_ij = Tr(G^-1 dG_i G^-1 dG_j) over
/// (theta, psi). G is inverted through its eigendecomposition with negative
/// eigenvalues floored at zero.
///
inline RealMatrix fisher_matrix(const CrlbModel& m)
{
    const ComplexMatrix G = covariance_G(m);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(G);
    RealVector ev = es.eigenvalues().cwiseMax(0.0);
    const double top = ev.maxCoeff();
    const double bottom = ev.minCoeff();
    if (!(bottom > 1e-14 * top))
        throw NumericalError("fisher_matrix: covariance is singular (eigenvalue " + std::to_string(bottom) + ")");
    const ComplexMatrix Ginv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();

    const Index K = m.sources();
    const Index J = static_cast<Index>(m.nuisance.size());
    std::vector<ComplexMatrix> W; // G^-1 dG_i
    W.reserve(static_cast<std::size_t>(K + J));
    for (Index k = 0; k < K; ++k)
        W.push_back(Ginv * dG_dtheta(m, k));
    for (Index j = 0; j < J; ++j)
        W.push_back(Ginv * dG_dpsi(m, j));

    const Index n = K + J;
    RealMatrix F(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i; j < n; ++j) {
            const Complex t = (W[static_cast<std::size_t>(i)] * W[static_cast<std::size_t>(j)]).trace();
            F(i, j) = F(j, i) = t.real();
        }
    return F;
}

///
/// Bound on var(theta_k): the diagonal of the inverted Schur complement
/// F_tt - F_tp F_pp^-1 F_pt, or 1 / F_kk when F_pp is numerically singular.
///
inline CrlbReport crlb(const CrlbModel& m)
{
    CrlbReport r;
    r.fisher = fisher_matrix(m);
    const Index K = m.sources();
    const Index J = static_cast<Index>(m.nuisance.size());
    if (K == 0)
        return r;

    Eigen::JacobiSVD<RealMatrix> svd(r.fisher);
    const RealVector sv = svd.singularValues();
    r.conditioning = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();

    const RealMatrix Ftt = r.fisher.topLeftCorner(K, K);
    r.diagonal_bound_rad2 = Ftt.diagonal().cwiseInverse();

    RealMatrix schur = Ftt;
    bool singular_nuisance = false;
    if (J > 0) {
        const RealMatrix Fpp = r.fisher.bottomRightCorner(J, J);
        const RealMatrix Ftp = r.fisher.topRightCorner(K, J);
        Eigen::JacobiSVD<RealMatrix> psvd(Fpp);
        const RealVector ps = psvd.singularValues();
        singular_nuisance = !(ps[J - 1] > 1e-12 * ps[0]);
        if (!singular_nuisance)
            schur -= Ftp * Fpp.ldlt().solve(Ftp.transpose());
    }

    if (singular_nuisance) {
        r.method = CrlbMethod::DiagonalBound;
        r.crlb_theta_rad2 = r.diagonal_bound_rad2;
    } else {
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (schur + schur.transpose()));
        if (!(es.eigenvalues().minCoeff() > 0.0))
            throw NumericalError("crlb: Schur complement is not positive definite (model misspecified?)");
        r.method = CrlbMethod::SchurComplement;
        r.crlb_theta_rad2 = schur.inverse().diagonal();
    }
    r.crlb_theta_deg2 = r.crlb_theta_rad2 * (kRadToDeg * kRadToDeg);
    return r;
}

} // namespace ncanm

#endif // NCANM_CRLB_HPP
