#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsr/likelihood.hpp"
#include "gsr/sizedist.hpp"

namespace gsr {

struct ObservedRecord {
    std::string sample_id;
    double b_area;      // um^2, on the pixel lattice up to rounding
    double pixel_area;  // um^2
    std::int64_t b_pixels;
};

// Validates lattice alignment and b_pixels >= 1 (B = 0 is unobservable).
ObservedRecord make_record(std::string sample_id, double b_area, double pixel_area);

struct ObservedDataset {
    std::vector<ObservedRecord> records;

    // Common pixel area; throws on mixed pixel sizes or empty data.
    double pixel_area() const;
};

struct PosteriorDraw {
    LogTParams params;
    int chain;
};

struct ChainDiagnostics {
    double rhat_mu = 0.0;
    double rhat_sigma = 0.0;
    double rhat_nu = 0.0;
    double ess_mu = 0.0;
    double ess_sigma = 0.0;
    double ess_nu = 0.0;
    bool converged = false;

    double max_rhat() const;
};

struct PosteriorDraws {
    std::vector<PosteriorDraw> draws;
    int chains = 0;
    ChainDiagnostics diagnostics;
};

struct FitOptions {
    int chains = 4;
    int iterations = 1000;  // kept draws per chain
    int warmup = 1000;
    std::uint64_t seed = 0;
    // The casework likelihood conditions on detection (B >= 1). The
    // untruncated mode additionally scores `zero_count` unobserved B = 0
    // events, for generators that report them.
    bool truncate = true;
    std::int64_t zero_count = 0;
};

struct FitSummary {
    double mu_mean, mu_sd;
    double sigma_mean, sigma_sd;
    double nu_mean, nu_sd;
    double r_squared;
    ChainDiagnostics diagnostics;
};

// Marginalizes the detection model over the size law: P(b | theta, px) =
// integral of P(b | A, px) logt(A | theta) dA. The table carries P(b | A) on
// its A grid (units of px); A-cell masses come from the log-t CDF so the pmf
// is consistent by construction. Above the table's A range the erosion-free
// limit b = floor(A / px) applies.
class MarginalModel {
public:
    MarginalModel(const LikelihoodTable& table, double pixel_area);

    double pixel_area() const { return px_; }
    const LikelihoodTable& table() const { return *table_; }

    // P(B = 0 | theta, px).
    double p_b0(const LogTParams& params) const;

    // Dense pmf over b = 0..b_top (inclusive), renormalized.
    std::vector<double> pmf(const LogTParams& params, std::int64_t b_top) const;

    // Sum over records of log P(b | theta, detection-conditioning per opts).
    double log_likelihood(const LogTParams& params,
                          const std::vector<std::pair<std::int64_t, std::int64_t>>& b_counts,
                          bool truncate, std::int64_t zero_count) const;

private:
    // Cell masses on the table grid plus below-grid and tail handling.
    void cell_masses(const LogTParams& params, std::vector<double>& w, double& below) const;

    const LikelihoodTable* table_;
    double px_;
    std::vector<double> edges_;  // cell edges in units of px, size rows + 1
};

// Convenience wrapper; b_top covers all but ~1e-9 of the mass.
std::vector<double> marginal_b_pmf(const LogTParams& params, const LikelihoodTable& table,
                                   double pixel_area);

// Adaptive random-walk Metropolis on (mu, log sigma, log nu); dispersed
// starts, one stream per chain, deterministic per seed for any worker count.
PosteriorDraws fit(const ObservedDataset& data, const LikelihoodTable& table,
                   const FitOptions& opts);

// R^2 = 1 - SS_res / SS_tot between two aligned histograms.
double r_squared_from_hist(const std::vector<double>& observed,
                           const std::vector<double>& predicted);

// R^2 between the observed b histogram (log-spaced bins) and the
// posterior-mean predicted pmf aggregated to the same bins.
double r_squared(const PosteriorDraws& draws, const ObservedDataset& data,
                 const LikelihoodTable& table, int bins = 25);

FitSummary goodness_of_fit(const PosteriorDraws& draws, const ObservedDataset& data,
                           const LikelihoodTable& table);

// Grouped (b, count) pairs sorted by b.
std::vector<std::pair<std::int64_t, std::int64_t>> count_by_b(const ObservedDataset& data);

}  // namespace gsr
