#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "gsr/inference.hpp"

namespace gsr {

// Empirical distribution of the number of characteristic particles per
// positive sample; support starts at n = 1.
struct CountDistribution {
    std::map<std::int64_t, double> pmf;
    std::int64_t n_max = 0;

    static CountDistribution from_counts(const std::vector<std::int64_t>& per_sample_counts);
    void validate() const;
};

struct CredibleValue {
    double mean;
    double lo90;
    double hi90;
};

struct FnsCurve {
    std::vector<double> px_values;
    std::vector<double> p_b0;
    std::vector<double> p_fns;
    std::vector<double> lower;
    std::vector<double> upper;
};

// P(FNS | q) = sum_n q^n P(n), exact finite sum over the observed support.
double fns_probability(double q, const CountDistribution& counts);

// Posterior of P(B = 0 | px): one quadrature per draw, mean and central 90%
// band. The table is dimensionless in A / px so a single unit table serves
// any pixel size.
CredibleValue p_b0_marginal(const PosteriorDraws& draws, const LikelihoodTable& table,
                            double pixel_area, std::size_t max_draws = 500);

FnsCurve fns_curve(const PosteriorDraws& draws, const CountDistribution& counts,
                   const std::vector<double>& px_list, const LikelihoodTable& table,
                   std::size_t max_draws = 500);

// Multi-resolution push-through: base-resolution areas treated as true A,
// registered at each coarser target pixel size with random offsets.
struct ResolutionHistogram {
    double pixel_area = 0.0;
    std::vector<double> predicted;         // relative frequency of b = 0, 1, ...
    std::vector<double> observed;          // empty when no data at this resolution
    double chi_square = -1.0;              // vs observed; -1 when absent
};

struct ValidationResult {
    std::vector<ResolutionHistogram> targets;
};

// Symmetric chi-square distance between two discrete histograms.
double chi_square_distance(const std::vector<double>& p, const std::vector<double>& q);

std::vector<double> predict_bhat_histogram(const std::vector<double>& base_areas_um2,
                                           double pixel_area, int reps_per_particle,
                                           std::uint64_t seed);

ValidationResult validate_multiresolution(
    const std::vector<double>& base_areas_um2, double px_min,
    const std::vector<double>& px_targets, int reps_per_particle, std::uint64_t seed,
    const std::vector<std::vector<double>>& observed_histograms = {});

}  // namespace gsr
