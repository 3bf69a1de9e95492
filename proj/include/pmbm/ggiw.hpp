#pragma once

#include "pmbm/gaussian.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <functional>
#include <span>
#include <tuple>

namespace pmbm {

/// Extended-target measurement model. A detected target generates a Poisson
/// number (rate gamma) of measurements z ~ N(H xi, X).
struct ExtendedMeasModel {
    Matrix H;
    double detection = 1.0;
};

/// Extended-target prediction constants. extent_decay is the time constant of
/// the inverse-Wishart dof decay; gamma_forget >= 1 divides alpha and beta.
struct GGIWPredictParams {
    double tau = 1.0;
    double extent_decay = 1e9;
    double gamma_forget = 1.0;
};

struct GGIWUpdateResult {
    GGIWParams posterior;
    /// Log marginal likelihood of the measurement set; detection probability not included.
    double log_likelihood = 0.0;

    [[nodiscard]] double likelihood() const { return std::exp(log_likelihood); }
};

/// Packs the selected measurements as the columns of a d x n matrix.
[[nodiscard]] inline Matrix gather_measurements(std::span<const Vector> z, std::span<const int> indices) {
    if (indices.empty()) return Matrix(z.empty() ? 0 : z.front().size(), 0);
    Matrix out(z[indices.front()].size(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = z[indices[j]];
    return out;
}

/// GGIW update with the measurements in the columns of w. Gamma part is the
/// exact Poisson-gamma conjugate update; kinematics and extent follow the
/// factorized random-matrix update with predicted extent V / (v - 2d - 2).
[[nodiscard]] inline GGIWUpdateResult ggiw_update(const GGIWParams& prior, const Matrix& w,
                                                  const ExtendedMeasModel& m) {
    const int d = prior.extent_dim();
    const auto n = w.cols();
    GGIWUpdateResult out;
    out.posterior = prior;
    out.posterior.beta = prior.beta + 1.0;
    if (n == 0) {
        out.log_likelihood = prior.alpha * (std::log(prior.beta) - std::log(prior.beta + 1.0));
        return out;
    }
    require_dims(w.rows() == d && m.H.rows() == d && m.H.cols() == prior.mean.size(),
                 "ggiw_update: dimension mismatch");
    const double dn = static_cast<double>(n);
    if (prior.dof <= 2.0 * d + 2.0) throw ModelError("ggiw_update: dof must exceed 2d+2 for a nonempty set");

    const Vector zbar = w.rowwise().mean();
    const Matrix centered = w.colwise() - zbar;
    const Matrix scatter = centered * centered.transpose();
    const Matrix xhat = prior.scale / (prior.dof - 2.0 * d - 2.0);
    const Vector eps = zbar - m.H * prior.mean;
    const Matrix pht = prior.cov * m.H.transpose();
    const Matrix s = symmetrize(m.H * pht + xhat / dn);
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("ggiw_update: singular innovation covariance");
    const Matrix k = llt.solve(pht.transpose()).transpose();

    const Matrix xhat_sqrt = sqrtm_psd(xhat);
    const Vector v = xhat_sqrt * (inv_sqrtm_spd(s) * eps);
    const Matrix nmat = v * v.transpose();

    GGIWParams& post = out.posterior;
    post.alpha = prior.alpha + dn;
    post.mean = prior.mean + k * eps;
    post.cov = symmetrize(prior.cov - k * m.H * prior.cov);
    post.dof = prior.dof + dn;
    post.scale = symmetrize(prior.scale + nmat + scatter);
    if (!is_spd(post.scale)) throw NumericalError("ggiw_update: updated scale matrix is not SPD");

    const double dd = static_cast<double>(d);
    const Matrix& l = llt.matrixL();
    const double logdet_s = 2.0 * l.diagonal().array().log().sum();
    out.log_likelihood = -0.5 * dd * (dn * std::log(std::numbers::pi) + std::log(dn)) +
                         0.5 * (prior.dof - dd - 1.0) * log_det_spd(prior.scale) -
                         0.5 * (post.dof - dd - 1.0) * log_det_spd(post.scale) +
                         log_multigamma(0.5 * (post.dof - dd - 1.0), d) -
                         log_multigamma(0.5 * (prior.dof - dd - 1.0), d) + 0.5 * log_det_spd(xhat) -
                         0.5 * logdet_s + std::lgamma(post.alpha) - std::lgamma(prior.alpha) +
                         prior.alpha * std::log(prior.beta) - post.alpha * std::log(post.beta);
    return out;
}

/// GGIW prediction: Kalman prediction of the kinematics, exponential decay of
/// the extent dof towards 2d+2 that keeps E[X] fixed, gamma forgetting.
[[nodiscard]] inline GGIWParams ggiw_predict(const GGIWParams& g, const PointMotionModel& motion,
                                             const GGIWPredictParams& p) {
    const double floor = 2.0 * g.extent_dim() + 2.0;
    if (g.dof <= floor) throw ModelError("ggiw_predict: dof must exceed 2d+2");
    if (!(p.extent_decay > 0.0) || !(p.gamma_forget >= 1.0))
        throw ModelError("ggiw_predict: invalid prediction parameters");
    GGIWParams out = g;
    const GaussianDensity kin = kalman_predict({g.mean, g.cov}, motion);
    out.mean = kin.mean;
    out.cov = kin.cov;
    const double decay = std::exp(-p.tau / p.extent_decay);
    if (decay != 1.0) {
        out.dof = floor + decay * (g.dof - floor);
        out.scale = symmetrize(((out.dof - floor) / (g.dof - floor)) * g.scale);
    }
    out.alpha = g.alpha / p.gamma_forget;
    out.beta = g.beta / p.gamma_forget;
    return out;
}

// ---- Mixture reduction ----

namespace detail {

inline constexpr int kMaxNewtonIterations = 100;
inline constexpr double kNewtonTolerance = 1e-10;

/// Finds x > 0 with f(x) = 0 for an increasing f, by Newton steps in log x
/// safeguarded with bisection on a bracketing interval.
inline double solve_increasing_positive(const std::function<std::pair<double, double>(double)>& f_df,
                                        double x0, const char* what) {
    double lo = std::log(1e-12);
    double hi = std::log(1e12);
    double u = std::log(std::clamp(x0, 1e-12, 1e12));
    for (int it = 0; it < kMaxNewtonIterations; ++it) {
        const double x = std::exp(u);
        const auto [fx, dfx] = f_df(x);
        if (std::abs(fx) < kNewtonTolerance) return x;
        if (fx < 0.0) lo = u;
        else hi = u;
        const double du = dfx * x;
        double next = (du > 0.0) ? u - fx / du : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        u = next;
    }
    throw NumericalError(std::string(what) + ": Newton iteration did not converge");
}

}  // namespace detail

struct GammaComponent {
    double weight = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
};

/// Gamma density closest in KL divergence to a Gamma mixture: matches E[gamma]
/// exactly and E[ln gamma] through a Newton solve on the digamma equation.
[[nodiscard]] inline std::pair<double, double> gamma_merge(std::span<const GammaComponent> comps) {
    using boost::math::digamma;
    using boost::math::trigamma;
    if (comps.empty()) throw ModelError("gamma_merge: empty mixture");
    bool identical = true;
    double total = 0.0;
    for (const auto& c : comps) {
        if (!(c.weight > 0.0) || !(c.alpha > 0.0) || !(c.beta > 0.0))
            throw ModelError("gamma_merge: weights and parameters must be positive");
        total += c.weight;
        identical = identical && c.alpha == comps.front().alpha && c.beta == comps.front().beta;
    }
    if (identical) return {comps.front().alpha, comps.front().beta};

    double mean = 0.0;
    double second = 0.0;
    double log_moment = 0.0;
    for (const auto& c : comps) {
        const double w = c.weight / total;
        const double m = c.alpha / c.beta;
        mean += w * m;
        second += w * (m / c.beta + m * m);
        log_moment += w * (digamma(c.alpha) - std::log(c.beta));
    }
    const double target = log_moment - std::log(mean);
    const double var = std::max(second - mean * mean, 1e-300);
    const double alpha = detail::solve_increasing_positive(
        [&](double a) {
            return std::pair{digamma(a) - std::log(a) - target, trigamma(a) - 1.0 / a};
        },
        mean * mean / var, "gamma_merge");
    return {alpha, alpha / mean};
}

/// E[ln |X|] for X ~ IW(v, V) with E[X] = V / (v - 2d - 2).
[[nodiscard]] inline double expected_log_det_extent(double dof, const Matrix& scale) {
    const int d = static_cast<int>(scale.rows());
    double s = log_det_spd(scale) - d * std::log(2.0);
    for (int j = 1; j <= d; ++j) s -= boost::math::digamma(0.5 * (dof - d - j));
    return s;
}

/// KL-minimizing GGIW for a GGIW mixture: gamma via gamma_merge, Gaussian via
/// moment matching, inverse-Wishart matching E[X] and E[ln |X|].
[[nodiscard]] inline GGIWParams ggiw_mixture_merge(std::span<const std::pair<double, GGIWParams>> comps) {
    using boost::math::digamma;
    using boost::math::trigamma;
    if (comps.empty()) throw ModelError("ggiw_mixture_merge: empty mixture");
    if (comps.size() == 1) return comps.front().second;
    const int d = comps.front().second.extent_dim();
    const double dd = static_cast<double>(d);

    double total = 0.0;
    bool identical = true;
    const GGIWParams& first = comps.front().second;
    for (const auto& [w, g] : comps) {
        if (!(w > 0.0)) throw ModelError("ggiw_mixture_merge: weights must be positive");
        require_dims(g.extent_dim() == d, "ggiw_mixture_merge: extent dimensions differ");
        if (g.dof <= 2.0 * dd + 2.0) throw ModelError("ggiw_mixture_merge: dof must exceed 2d+2");
        total += w;
        identical = identical && g.alpha == first.alpha && g.beta == first.beta && g.dof == first.dof &&
                    g.mean == first.mean && g.cov == first.cov && g.scale == first.scale;
    }
    if (identical) return first;

    std::vector<GammaComponent> gammas;
    std::vector<std::pair<double, GaussianDensity>> gaussians;
    gammas.reserve(comps.size());
    gaussians.reserve(comps.size());
    Matrix mean_extent = Matrix::Zero(d, d);
    double log_target = 0.0;
    for (const auto& [w, g] : comps) {
        const double wn = w / total;
        gammas.push_back({wn, g.alpha, g.beta});
        gaussians.emplace_back(wn, GaussianDensity{g.mean, g.cov});
        mean_extent += wn * g.scale / (g.dof - 2.0 * dd - 2.0);
        double t = log_det_spd(g.scale);
        for (int j = 1; j <= d; ++j) t -= digamma(0.5 * (g.dof - dd - j));
        log_target += wn * t;
    }
    mean_extent = symmetrize(mean_extent);

    GGIWParams out;
    std::tie(out.alpha, out.beta) = gamma_merge(gammas);
    const GaussianDensity kin = gaussian_mixture_moments(gaussians);
    out.mean = kin.mean;
    out.cov = kin.cov;

    // Unknown s = v - 2d - 2 > 0 with V = s * E[X]:
    //   d ln s - sum_j digamma((s + d + 2 - j) / 2) = target - ln |E[X]|
    const double rhs = log_target - log_det_spd(mean_extent);
    double s0 = 0.0;
    for (const auto& [w, g] : comps) s0 += (w / total) * (g.dof - 2.0 * dd - 2.0);
    const double s = detail::solve_increasing_positive(
        [&](double x) {
            double f = dd * std::log(x) - rhs;
            double df = dd / x;
            for (int j = 1; j <= d; ++j) {
                f -= digamma(0.5 * (x + dd + 2.0 - j));
                df -= 0.5 * trigamma(0.5 * (x + dd + 2.0 - j));
            }
            return std::pair{f, df};
        },
        s0, "ggiw_mixture_merge");
    out.dof = s + 2.0 * dd + 2.0;
    out.scale = symmetrize(s * mean_extent);
    return out;
}

}  // namespace pmbm
