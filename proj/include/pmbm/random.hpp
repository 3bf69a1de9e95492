#pragma once

#include "pmbm/common.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <cstdint>
#include <limits>

namespace pmbm {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based generator: output n is mix64(key + n * golden-ratio
/// increment), i.e. SplitMix64 addressed by counter. Identical on every
/// platform. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

    /// Independent stream for Monte Carlo run `run`: key = seed xor mix64(run).
    [[nodiscard]] static CounterRng substream(std::uint64_t seed, std::uint64_t run) noexcept {
        return CounterRng(seed ^ mix64(run));
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return mix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

[[nodiscard]] inline double uniform01(CounterRng& rng) { return boost::random::uniform_01<double>()(rng); }

[[nodiscard]] inline double uniform(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

[[nodiscard]] inline double standard_normal(CounterRng& rng) {
    return boost::random::normal_distribution<double>(0.0, 1.0)(rng);
}

[[nodiscard]] inline int poisson(CounterRng& rng, double mean) {
    if (!(mean > 0.0)) return 0;
    return boost::random::poisson_distribution<int, double>(mean)(rng);
}

/// Gamma with shape alpha and rate beta.
[[nodiscard]] inline double gamma_rate(CounterRng& rng, double alpha, double beta) {
    return boost::random::gamma_distribution<double>(alpha, 1.0 / beta)(rng);
}

[[nodiscard]] inline bool bernoulli(CounterRng& rng, double p) { return uniform01(rng) < p; }

[[nodiscard]] inline Vector sample_gaussian(CounterRng& rng, const Vector& mean, const Matrix& cov) {
    Vector u(mean.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = standard_normal(rng);
    return mean + sqrtm_psd(cov) * u;
}

/// Inverse-Wishart draw with E[X] = scale / (dof - 2d - 2): the inverse of a
/// Wishart(dof - d - 1, scale^-1) draw, generated by the Bartlett decomposition.
[[nodiscard]] inline Matrix sample_inverse_wishart(CounterRng& rng, double dof, const Matrix& scale) {
    const auto d = scale.rows();
    const double nu = dof - static_cast<double>(d) - 1.0;
    if (!(nu > static_cast<double>(d) - 1.0)) throw ModelError("sample_inverse_wishart: too few degrees of freedom");
    const Eigen::LLT<Matrix> llt(symmetrize(scale.inverse()));
    const Matrix l = llt.matrixL();
    Matrix a = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        a(i, i) = std::sqrt(2.0 * gamma_rate(rng, 0.5 * (nu - static_cast<double>(i)), 1.0));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = standard_normal(rng);
    }
    const Matrix la = l * a;
    return symmetrize((la * la.transpose()).inverse());
}

/// In-place Fisher-Yates shuffle driven by the counter generator.
template <typename T>
void shuffle(std::vector<T>& v, CounterRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = boost::random::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace pmbm
