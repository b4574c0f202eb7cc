#include "gsr/fns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gsr/grid.hpp"
#include "gsr/parallel.hpp"
#include "gsr/rng.hpp"

namespace gsr {

CountDistribution CountDistribution::from_counts(const std::vector<std::int64_t>& counts) {
    if (counts.empty()) throw std::invalid_argument("CountDistribution: no counts");
    CountDistribution d;
    for (std::int64_t n : counts) {
        if (n < 1) throw std::invalid_argument("CountDistribution: counts must be >= 1");
        d.pmf[n] += 1.0;
        d.n_max = std::max(d.n_max, n);
    }
    const double total = static_cast<double>(counts.size());
    for (auto& [n, p] : d.pmf) p /= total;
    return d;
}

void CountDistribution::validate() const {
    if (pmf.empty()) throw std::invalid_argument("CountDistribution: empty pmf");
    double sum = 0.0;
    for (const auto& [n, p] : pmf) {
        if (n < 1) throw std::invalid_argument("CountDistribution: support must start at n >= 1");
        if (p < 0.0) throw std::invalid_argument("CountDistribution: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("CountDistribution: probabilities must sum to 1");
}

double fns_probability(double q, const CountDistribution& counts) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("fns_probability: q must be in [0,1]");
    counts.validate();
    double total = 0.0;
    for (const auto& [n, p] : counts.pmf) total += std::pow(q, static_cast<double>(n)) * p;
    return total;
}

namespace {

std::vector<double> per_draw_p_b0(const PosteriorDraws& draws, const MarginalModel& model,
                                  std::size_t max_draws) {
    if (draws.draws.empty()) throw std::invalid_argument("p_b0_marginal: no posterior draws");
    const std::size_t stride = std::max<std::size_t>(1, draws.draws.size() / max_draws);
    std::vector<double> q;
    for (std::size_t i = 0; i < draws.draws.size(); i += stride)
        q.push_back(model.p_b0(draws.draws[i].params));
    return q;
}

CredibleValue summarize(std::vector<double> values) {
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
        const double idx = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double t = idx - static_cast<double>(lo);
        return values[lo] * (1.0 - t) + values[hi] * t;
    };
    return CredibleValue{mean, quantile(0.05), quantile(0.95)};
}

}  // namespace

CredibleValue p_b0_marginal(const PosteriorDraws& draws, const LikelihoodTable& table,
                            double pixel_area, std::size_t max_draws) {
    const MarginalModel model(table, pixel_area);
    return summarize(per_draw_p_b0(draws, model, max_draws));
}

FnsCurve fns_curve(const PosteriorDraws& draws, const CountDistribution& counts,
                   const std::vector<double>& px_list, const LikelihoodTable& table,
                   std::size_t max_draws) {
    if (px_list.empty()) throw std::invalid_argument("fns_curve: empty pixel-size list");
    for (double px : px_list)
        if (!(px > 0.0)) throw std::invalid_argument("fns_curve: pixel sizes must be positive");
    counts.validate();
    if (draws.draws.empty()) throw std::invalid_argument("fns_curve: no posterior draws");
    MarginalModel(table, px_list.front());  // surface coverage errors before the parallel loop

    FnsCurve curve;
    curve.px_values = px_list;
    curve.p_b0.resize(px_list.size());
    curve.p_fns.resize(px_list.size());
    curve.lower.resize(px_list.size());
    curve.upper.resize(px_list.size());

    parallel_for(px_list.size(), [&](std::size_t i) {
        const MarginalModel model(table, px_list[i]);
        const auto q = per_draw_p_b0(draws, model, max_draws);
        std::vector<double> fns(q.size());
        for (std::size_t k = 0; k < q.size(); ++k) fns[k] = fns_probability(q[k], counts);
        const auto q_sum = summarize(q);
        const auto f_sum = summarize(fns);
        curve.p_b0[i] = q_sum.mean;
        curve.p_fns[i] = f_sum.mean;
        curve.lower[i] = f_sum.lo90;
        curve.upper[i] = f_sum.hi90;
    });
    return curve;
}

double chi_square_distance(const std::vector<double>& p, const std::vector<double>& q) {
    const std::size_t n = std::max(p.size(), q.size());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = i < p.size() ? p[i] : 0.0;
        const double b = i < q.size() ? q[i] : 0.0;
        if (a + b > 0.0) d += (a - b) * (a - b) / (a + b);
    }
    return d;
}

std::vector<double> predict_bhat_histogram(const std::vector<double>& base_areas_um2,
                                           double pixel_area, int reps_per_particle,
                                           std::uint64_t seed) {
    if (base_areas_um2.empty()) throw std::invalid_argument("predict_bhat: empty base data");
    if (reps_per_particle < 1) throw std::invalid_argument("predict_bhat: reps must be >= 1");
    auto eng = make_engine(seed, 0xB4A7ull);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    std::vector<std::int64_t> counts;
    std::int64_t b_max = 0;
    counts.assign(1, 0);
    for (double area : base_areas_um2) {
        const double ratio = area / pixel_area;
        for (int r = 0; r < reps_per_particle; ++r) {
            const std::int64_t b = covered_pixels_unit(ratio, uni(eng), uni(eng));
            if (b > b_max) {
                b_max = b;
                counts.resize(static_cast<std::size_t>(b_max) + 1, 0);
            }
            ++counts[static_cast<std::size_t>(b)];
        }
    }
    const double total = static_cast<double>(base_areas_um2.size()) * reps_per_particle;
    std::vector<double> hist(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        hist[i] = static_cast<double>(counts[i]) / total;
    return hist;
}

ValidationResult validate_multiresolution(const std::vector<double>& base_areas_um2,
                                          double px_min, const std::vector<double>& px_targets,
                                          int reps_per_particle, std::uint64_t seed,
                                          const std::vector<std::vector<double>>& observed) {
    if (base_areas_um2.empty())
        throw std::invalid_argument("validate_multiresolution: empty base data");
    if (!observed.empty() && observed.size() != px_targets.size())
        throw std::invalid_argument("validate_multiresolution: observed/targets size mismatch");
    for (double px : px_targets)
        if (!(px >= px_min))
            throw std::invalid_argument("validate_multiresolution: target finer than base");

    ValidationResult result;
    result.targets.resize(px_targets.size());
    parallel_for(px_targets.size(), [&](std::size_t i) {
        const double px = px_targets[i];
        ResolutionHistogram h;
        h.pixel_area = px;
        h.predicted = predict_bhat_histogram(base_areas_um2, px, reps_per_particle,
                                             derive_stream(seed, i));
        if (!observed.empty() && !observed[i].empty()) {
            h.observed = observed[i];
            h.chi_square = chi_square_distance(h.predicted, h.observed);
        }
        result.targets[i] = std::move(h);
    });
    return result;
}

}  // namespace gsr
