#pragma once

#include <cstdint>
#include <vector>

namespace gsr {

// Parameters of the log-t size law: log A follows a Student-t with location
// mu, scale sigma and nu degrees of freedom. nu = +inf is accepted as the
// log-normal limit.
struct LogTParams {
    double mu;
    double sigma;
    double nu;

    void validate() const;
};

// Density of A (includes the 1/A Jacobian). Evaluated in log space and
// exponentiated on demand; a <= 0 is rejected.
double logt_log_density(double a, const LogTParams& params);
double logt_density(double a, const LogTParams& params);

// P(A <= a); a <= 0 yields 0.
double logt_cdf(double a, const LogTParams& params);

// Inverse CDF, p in (0, 1).
double logt_quantile(double p, const LogTParams& params);

// i.i.d. draws A = exp(mu + sigma * T); deterministic per seed.
std::vector<double> logt_sample(const LogTParams& params, std::int64_t n, std::uint64_t seed);

// nu -> inf limit, for convergence checks.
double lognormal_density(double a, double mu, double sigma);

}  // namespace gsr
