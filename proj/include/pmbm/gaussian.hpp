#pragma once

#include "pmbm/hybrid_state.hpp"

#include <span>
#include <utility>

namespace pmbm {

/// Linear Gaussian motion x' = F x + q, q ~ N(0, Q), with constant survival.
struct PointMotionModel {
    Matrix F;
    Matrix Q;
    double survival = 1.0;
};

/// Linear Gaussian point measurement z = H x + r, r ~ N(0, R).
struct PointMeasModel {
    Matrix H;
    Matrix R;
    double detection = 1.0;
};

/// Nearly-constant-velocity model on [px, vx, py, vy] with sampling time tau
/// and acceleration noise intensity q.
[[nodiscard]] inline PointMotionModel make_cv_model(double tau, double q, double survival) {
    Matrix f1(2, 2);
    f1 << 1.0, tau, 0.0, 1.0;
    Matrix q1(2, 2);
    q1 << tau * tau * tau / 3.0, tau * tau / 2.0, tau * tau / 2.0, tau;
    PointMotionModel m;
    m.F = Matrix::Zero(4, 4);
    m.Q = Matrix::Zero(4, 4);
    m.F.block(0, 0, 2, 2) = f1;
    m.F.block(2, 2, 2, 2) = f1;
    m.Q.block(0, 0, 2, 2) = q * q1;
    m.Q.block(2, 2, 2, 2) = q * q1;
    m.survival = survival;
    return m;
}

/// Position selection matrix for the [px, vx, py, vy] state.
[[nodiscard]] inline Matrix position_selector() {
    Matrix h = Matrix::Zero(2, 4);
    h(0, 0) = 1.0;
    h(1, 2) = 1.0;
    return h;
}

[[nodiscard]] inline GaussianDensity kalman_predict(const GaussianDensity& g, const PointMotionModel& m) {
    require_dims(m.F.cols() == g.mean.size() && m.F.rows() == m.F.cols() && m.Q.rows() == m.F.rows() &&
                     g.cov.rows() == g.mean.size(),
                 "kalman_predict: dimension mismatch");
    return {m.F * g.mean, symmetrize(m.F * g.cov * m.F.transpose() + m.Q)};
}

struct KalmanUpdateResult {
    GaussianDensity posterior;
    /// log N(z; H mean, H P H' + R); detection probability not included.
    double log_likelihood = 0.0;

    [[nodiscard]] double likelihood() const { return std::exp(log_likelihood); }
};

[[nodiscard]] inline KalmanUpdateResult kalman_update(const GaussianDensity& g, const Vector& z,
                                                      const PointMeasModel& m) {
    require_dims(m.H.cols() == g.mean.size() && m.H.rows() == z.size() && m.R.rows() == z.size() &&
                     m.R.cols() == z.size() && g.cov.rows() == g.mean.size(),
                 "kalman_update: dimension mismatch");
    const Vector zhat = m.H * g.mean;
    const Matrix pht = g.cov * m.H.transpose();
    const Matrix s = symmetrize(m.H * pht + m.R);
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("kalman_update: singular innovation covariance");
    const Vector innov = z - zhat;
    const Matrix k = llt.solve(pht.transpose()).transpose();

    KalmanUpdateResult out;
    out.posterior.mean = g.mean + k * innov;
    out.posterior.cov = symmetrize(g.cov - k * s * k.transpose());
    const Matrix& l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const double maha = llt.matrixL().solve(innov).squaredNorm();
    out.log_likelihood =
        -0.5 * (static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi) + logdet + maha);
    return out;
}

/// Mean and covariance of a Gaussian mixture, including the spread of means.
/// Weights are normalized internally.
[[nodiscard]] inline GaussianDensity gaussian_mixture_moments(
    std::span<const std::pair<double, GaussianDensity>> components) {
    if (components.empty()) throw ModelError("gaussian_mixture_moments: empty mixture");
    if (components.size() == 1) return components.front().second;
    double total = 0.0;
    for (const auto& [w, g] : components) {
        if (!(w > 0.0)) throw ModelError("gaussian_mixture_moments: weights must be positive");
        total += w;
    }
    const auto n = components.front().second.mean.size();
    Vector mean = Vector::Zero(n);
    for (const auto& [w, g] : components) {
        require_dims(g.mean.size() == n, "gaussian_mixture_moments: dimension mismatch");
        mean += (w / total) * g.mean;
    }
    Matrix cov = Matrix::Zero(n, n);
    for (const auto& [w, g] : components) {
        const Vector d = g.mean - mean;
        cov += (w / total) * (g.cov + d * d.transpose());
    }
    return {std::move(mean), symmetrize(cov)};
}

}  // namespace pmbm
