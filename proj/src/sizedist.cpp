#include "gsr/sizedist.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "gsr/rng.hpp"

namespace gsr {

namespace {

inline bool lognormal_limit(double nu) { return std::isinf(nu); }

}  // namespace

void LogTParams::validate() const {
    if (!std::isfinite(mu)) throw std::invalid_argument("LogTParams: mu must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("LogTParams: sigma must be positive");
    if (!(nu > 0.0) || std::isnan(nu))
        throw std::invalid_argument("LogTParams: nu must be positive");
}

double logt_log_density(double a, const LogTParams& params) {
    params.validate();
    if (!(a > 0.0) || !std::isfinite(a))
        throw std::invalid_argument("logt_density: a must be positive");
    const double z = (std::log(a) - params.mu) / params.sigma;
    if (lognormal_limit(params.nu)) {
        return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(params.sigma) - std::log(a) -
               0.5 * z * z;
    }
    const double nu = params.nu;
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
           0.5 * std::log(nu * std::numbers::pi) - std::log(params.sigma) - std::log(a) -
           0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double logt_density(double a, const LogTParams& params) {
    return std::exp(logt_log_density(a, params));
}

double logt_cdf(double a, const LogTParams& params) {
    params.validate();
    if (!(a > 0.0)) return 0.0;
    const double z = (std::log(a) - params.mu) / params.sigma;
    if (lognormal_limit(params.nu)) return boost::math::cdf(boost::math::normal_distribution<>(), z);
    return boost::math::cdf(boost::math::students_t_distribution<>(params.nu), z);
}

double logt_quantile(double p, const LogTParams& params) {
    params.validate();
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("logt_quantile: p must be in (0,1)");
    const double z = lognormal_limit(params.nu)
                         ? boost::math::quantile(boost::math::normal_distribution<>(), p)
                         : boost::math::quantile(
                               boost::math::students_t_distribution<>(params.nu), p);
    return std::exp(params.mu + params.sigma * z);
}

std::vector<double> logt_sample(const LogTParams& params, std::int64_t n, std::uint64_t seed) {
    params.validate();
    if (n < 1) throw std::invalid_argument("logt_sample: n must be >= 1");
    auto eng = make_engine(seed, 0x51Dull);
    std::vector<double> out(static_cast<std::size_t>(n));
    if (lognormal_limit(params.nu)) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& a : out) a = std::exp(params.mu + params.sigma * normal(eng));
    } else {
        std::student_t_distribution<double> t(params.nu);
        for (auto& a : out) a = std::exp(params.mu + params.sigma * t(eng));
    }
    return out;
}

double lognormal_density(double a, double mu, double sigma) {
    return logt_density(a, LogTParams{mu, sigma, std::numeric_limits<double>::infinity()});
}

}  // namespace gsr
