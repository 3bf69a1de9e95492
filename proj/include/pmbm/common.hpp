#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---- Errors ----

/// Operands with incompatible shapes.
struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine produced a result outside its domain (non-SPD matrix,
/// singular innovation, non-convergent Newton solve).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every hypothesis weight vanished, so the posterior cannot be normalized.
struct DegeneratePosterior : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Model parameters that cannot produce a valid filter step.
struct ModelError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const char* what) {
    if (!ok) throw DimensionMismatch(what);
}

// ---- Log-domain helpers ----

[[nodiscard]] inline double safe_log(double x) {
    return x > 0.0 ? std::log(x) : kNegInf;
}

/// Max-shifted log-sum-exp. Returns -inf for an empty or all -inf input.
[[nodiscard]] inline double log_sum_exp(std::span<const double> xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Normalizes log weights into linear weights summing to one.
[[nodiscard]] inline std::vector<double> normalize_log_weights(std::span<const double> log_w) {
    const double lse = log_sum_exp(log_w);
    if (lse == kNegInf || !std::isfinite(lse))
        throw DegeneratePosterior("all hypothesis weights are zero");
    std::vector<double> w(log_w.size());
    for (std::size_t i = 0; i < log_w.size(); ++i) w[i] = std::exp(log_w[i] - lse);
    return w;
}

// ---- Linear algebra ----

[[nodiscard]] inline Matrix symmetrize(const Matrix& m) {
    return 0.5 * (m + m.transpose());
}

namespace detail {

// Negative eigenvalues in [-tol, 0] are clamped to zero; below -tol is an error.
inline constexpr double kPsdTolerance = 1e-10;

inline Eigen::VectorXd clamped_eigenvalues(const Eigen::SelfAdjointEigenSolver<Matrix>& es,
                                           const char* what) {
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -kPsdTolerance)
            throw NumericalError(std::string(what) + ": matrix is not positive semidefinite");
        if (ev(i) < 0.0) ev(i) = 0.0;
    }
    return ev;
}

}  // namespace detail

/// Symmetric square root of a PSD matrix via eigendecomposition.
[[nodiscard]] inline Matrix sqrtm_psd(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
    if (es.info() != Eigen::Success) throw NumericalError("sqrtm_psd: eigendecomposition failed");
    const Eigen::VectorXd ev = detail::clamped_eigenvalues(es, "sqrtm_psd");
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// Inverse symmetric square root of an SPD matrix.
[[nodiscard]] inline Matrix inv_sqrtm_spd(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
    if (es.info() != Eigen::Success) throw NumericalError("inv_sqrtm_spd: eigendecomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues();
    if (ev.minCoeff() <= 0.0) throw NumericalError("inv_sqrtm_spd: matrix is not positive definite");
    return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

[[nodiscard]] inline bool is_symmetric(const Matrix& m, double tol = 1e-9) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

[[nodiscard]] inline bool is_spd(const Matrix& m) {
    if (!is_symmetric(m)) return false;
    Eigen::LLT<Matrix> llt(symmetrize(m));
    return llt.info() == Eigen::Success;
}

[[nodiscard]] inline bool is_psd(const Matrix& m, double tol = 1e-9) {
    if (!is_symmetric(m)) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return es.eigenvalues().minCoeff() >= -tol * scale;
}

/// log det of an SPD matrix through its Cholesky factor.
[[nodiscard]] inline double log_det_spd(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError("log_det_spd: matrix is not positive definite");
    const Matrix& l = llt.matrixL();
    return 2.0 * l.diagonal().array().log().sum();
}

/// Log density of N(x; mean, cov).
[[nodiscard]] inline double log_gaussian_pdf(const Vector& x, const Vector& mean, const Matrix& cov) {
    require_dims(x.size() == mean.size() && cov.rows() == x.size() && cov.cols() == x.size(),
                 "log_gaussian_pdf: dimension mismatch");
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("log_gaussian_pdf: covariance is singular");
    const Vector diff = x - mean;
    const Vector sol = llt.matrixL().solve(diff);
    const Matrix& l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const double n = static_cast<double>(x.size());
    return -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + sol.squaredNorm());
}

/// Squared Mahalanobis distance of x from N(mean, cov).
[[nodiscard]] inline double mahalanobis_sq(const Vector& x, const Vector& mean, const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("mahalanobis_sq: covariance is singular");
    return llt.matrixL().solve(x - mean).squaredNorm();
}

/// Log of the multivariate gamma function Gamma_d(a).
[[nodiscard]] inline double log_multigamma(double a, int d) {
    double r = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
    for (int j = 1; j <= d; ++j) r += std::lgamma(a + 0.5 * (1 - j));
    return r;
}

}  // namespace pmbm
