#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gsr/fns.hpp"
#include "gsr/ingest.hpp"
#include "gsr/likelihood.hpp"
#include "oracle.hpp"

using gsr::CountDistribution;
using gsr::GridSpec;
using gsr::LikelihoodTable;
using gsr::LogTParams;
using gsr::TableConfig;

namespace {

LikelihoodTable detection_table(std::int64_t offsets = 8192, std::uint64_t seed = 42) {
    TableConfig cfg;
    cfg.a_max = 12.0;
    cfg.a_steps = 600;
    cfg.offsets_per_a = offsets;
    cfg.seed = seed;
    return LikelihoodTable::build(GridSpec(1.0), cfg);
}

gsr::PosteriorDraws point_mass(const LogTParams& params, int n = 8) {
    gsr::PosteriorDraws d;
    d.chains = 1;
    for (int i = 0; i < n; ++i) d.draws.push_back(gsr::PosteriorDraw{params, 0});
    d.diagnostics.converged = true;
    return d;
}

const CountDistribution kCounts = [] {
    CountDistribution c;
    c.pmf = {{1, 0.5}, {2, 0.25}, {3, 0.25}};
    c.n_max = 3;
    return c;
}();

}  // namespace

TEST_CASE("count distribution") {
    const auto d = CountDistribution::from_counts({1, 2, 1});
    CHECK(d.pmf.at(1) == doctest::Approx(2.0 / 3.0));
    CHECK(d.pmf.at(2) == doctest::Approx(1.0 / 3.0));
    CHECK(d.n_max == 2);
    CHECK_THROWS_AS(CountDistribution::from_counts({0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(CountDistribution::from_counts({}), std::invalid_argument);

    CountDistribution bad;
    bad.pmf = {{1, 0.5}, {2, 0.4}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("fns probability closed forms") {
    CHECK(gsr::fns_probability(0.0, kCounts) == 0.0);
    CHECK(gsr::fns_probability(1.0, kCounts) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gsr::fns_probability(0.5, kCounts) == doctest::Approx(0.34375).epsilon(1e-12));
    CountDistribution single;
    single.pmf = {{1, 1.0}};
    single.n_max = 1;
    CHECK(gsr::fns_probability(0.3, single) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK_THROWS_AS(gsr::fns_probability(-0.1, kCounts), std::invalid_argument);
    CHECK_THROWS_AS(gsr::fns_probability(1.1, kCounts), std::invalid_argument);
}

TEST_CASE("fns probability is monotone in q") {
    double prev = 0.0;
    for (double q = 0.0; q <= 1.0; q += 0.01) {
        const double v = gsr::fns_probability(q, kCounts);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("p_b0_marginal limit regimes") {
    const auto table = detection_table(2048, 3);
    // all mass far above the guaranteed-hit bound
    const auto hi = gsr::p_b0_marginal(point_mass(LogTParams{8.0, 0.1, 76.0}), table, 1.0);
    CHECK(hi.mean < 1e-9);
    // all mass below the guaranteed-miss bound
    const auto lo = gsr::p_b0_marginal(point_mass(LogTParams{std::log(0.2), 0.1, 76.0}), table, 1.0);
    CHECK(lo.mean > 1.0 - 1e-9);
    CHECK(lo.lo90 <= lo.mean);
    CHECK(lo.hi90 >= lo.mean);
}

TEST_CASE("p_b0_marginal matches the forward oracle") {
    const LogTParams params{1.53, 1.17, 76.0};
    const double px = 0.16;
    const auto table = detection_table();
    const auto est = gsr::p_b0_marginal(point_mass(params), table, px);
    const std::int64_t n = 1000000;
    const double sim = oracle::forward_p_b0(params.mu, params.sigma, params.nu, n, px, 515);
    const double se = std::sqrt(sim * (1.0 - sim) / static_cast<double>(n));
    CHECK(std::abs(est.mean - sim) <= 3.0 * se + 5e-4);
}

TEST_CASE("fns curve shape") {
    const LogTParams params{1.53, 1.17, 76.0};
    const auto table = detection_table(2048, 5);
    const auto draws = point_mass(params);
    std::vector<double> px_list;
    for (int i = 1; i <= 10; ++i) px_list.push_back(0.004 + 0.44 * i / 10.0);
    const auto curve = gsr::fns_curve(draws, kCounts, px_list, table);
    for (std::size_t i = 0; i < curve.px_values.size(); ++i) {
        CHECK(curve.p_fns[i] >= 0.0);
        CHECK(curve.p_fns[i] <= 1.0);
        CHECK(curve.p_fns[i] <= curve.p_b0[i] + 1e-12);
        CHECK(curve.lower[i] <= curve.p_fns[i] + 1e-12);
        CHECK(curve.upper[i] >= curve.p_fns[i] - 1e-12);
        if (i > 0) CHECK(curve.p_fns[i] >= curve.p_fns[i - 1] - 1e-12);
    }
    // p_fns -> 0 as px -> 0
    const auto tiny = gsr::fns_curve(draws, kCounts, {1e-4}, table);
    CHECK(tiny.p_fns[0] < 1e-3);
    CHECK_THROWS_AS(gsr::fns_curve(draws, kCounts, {}, table), std::invalid_argument);
}

TEST_CASE("chi-square distance") {
    CHECK(gsr::chi_square_distance({0.5, 0.5}, {0.5, 0.5}) == 0.0);
    CHECK(gsr::chi_square_distance({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(2.0));
    CHECK(gsr::chi_square_distance({0.5, 0.5}, {0.5, 0.25, 0.25}) > 0.0);
}

TEST_CASE("multi-resolution push-through") {
    CHECK_THROWS_AS(gsr::validate_multiresolution({}, 0.01, {0.04}, 16, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(gsr::validate_multiresolution({1.0}, 0.04, {0.01}, 16, 1),
                    std::invalid_argument);

    // base areas all below the guaranteed-miss bound of the target
    const double px_t = 0.09;
    std::vector<double> small_areas(200, 0.4 * std::numbers::pi / 2.0 * px_t);
    const auto all_zero = gsr::validate_multiresolution(small_areas, 0.01, {px_t}, 32, 7);
    REQUIRE(all_zero.targets.size() == 1);
    CHECK(all_zero.targets[0].predicted.size() == 1);  // only b = 0
    CHECK(all_zero.targets[0].predicted[0] == 1.0);

    // identity: target at the base scale reproduces an independent
    // registration of the same areas up to offset randomness
    const auto areas = gsr::logt_sample(LogTParams{1.53, 1.17, 76.0}, 3000, 88);
    const auto pred = gsr::predict_bhat_histogram(areas, 0.16, 32, 5);
    const auto pred2 = gsr::predict_bhat_histogram(areas, 0.16, 32, 6);
    CHECK(gsr::chi_square_distance(pred, pred2) < 0.05);

    // observed histograms produce a distance statistic
    const auto res =
        gsr::validate_multiresolution(areas, 0.01, {0.04, 0.09}, 16, 9, {pred, pred});
    CHECK(res.targets[0].chi_square >= 0.0);
    CHECK(res.targets[1].chi_square >= 0.0);
}
