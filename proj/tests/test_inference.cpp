#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gsr/ingest.hpp"
#include "gsr/inference.hpp"
#include "gsr/likelihood.hpp"
#include "oracle.hpp"

using gsr::FitOptions;
using gsr::GridSpec;
using gsr::LikelihoodTable;
using gsr::LogTParams;
using gsr::MarginalModel;
using gsr::TableConfig;

namespace {

LikelihoodTable fit_table(double a_max = 1.0e4, std::int64_t offsets = 2048,
                          std::uint64_t seed = 42) {
    TableConfig cfg;
    cfg.grid = gsr::AGridScheme::log_spaced;
    cfg.a_min = 0.05;
    cfg.a_max = a_max;
    cfg.a_steps = static_cast<int>(std::ceil(std::log(a_max / cfg.a_min) / 0.01));
    cfg.offsets_per_a = offsets;
    cfg.seed = seed;
    return LikelihoodTable::build(GridSpec(0.16), cfg);
}

gsr::PosteriorDraws point_mass(const LogTParams& params, int n = 8) {
    gsr::PosteriorDraws d;
    d.chains = 1;
    for (int i = 0; i < n; ++i) d.draws.push_back(gsr::PosteriorDraw{params, 0});
    d.diagnostics.converged = true;
    return d;
}

}  // namespace

TEST_CASE("record validation") {
    CHECK_THROWS_AS(gsr::make_record("s", 0.0, 0.16), std::invalid_argument);
    CHECK_THROWS_AS(gsr::make_record("s", 0.04, 0.16), std::invalid_argument);  // rounds to 0
    CHECK(gsr::make_record("s", 0.25, 0.16).b_pixels == 2);  // within half-pixel tolerance
    const auto rec = gsr::make_record("s", 0.16, 0.16);
    CHECK(rec.b_pixels == 1);
    CHECK(gsr::make_record("s", 0.32, 0.16).b_pixels == 2);

    gsr::ObservedDataset mixed;
    mixed.records.push_back(gsr::make_record("a", 0.16, 0.16));
    mixed.records.push_back(gsr::make_record("b", 0.09, 0.09));
    CHECK_THROWS_AS(mixed.pixel_area(), std::invalid_argument);
}

TEST_CASE("marginal pmf sums to one and respects limits") {
    const auto table = fit_table(200.0, 512, 3);

    // mass far above pixel scale concentrates at b = exp(mu) / px
    const LogTParams big{10.0, 0.1, 76.0};
    const auto pmf_big = gsr::marginal_b_pmf(big, table, 1.0);
    CHECK(std::accumulate(pmf_big.begin(), pmf_big.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    const double target = std::exp(10.0);
    double mean_b = 0.0;
    for (std::size_t b = 0; b < pmf_big.size(); ++b) mean_b += static_cast<double>(b) * pmf_big[b];
    CHECK(std::abs(mean_b - target) / target < 0.01);

    // mass below the guaranteed-miss bound collapses onto b = 0
    const LogTParams tiny{std::log(0.2), 0.1, 76.0};
    const auto pmf_tiny = gsr::marginal_b_pmf(tiny, table, 1.0);
    CHECK(pmf_tiny[0] > 1.0 - 1e-6);
}

TEST_CASE("insufficient table coverage is reported") {
    TableConfig cfg;
    cfg.a_min = 3.0;  // starts above pi/2
    cfg.a_max = 12.0;
    cfg.a_steps = 50;
    cfg.offsets_per_a = 64;
    cfg.grid = gsr::AGridScheme::log_spaced;
    const auto bad = LikelihoodTable::build(GridSpec(1.0), cfg);
    CHECK_THROWS_AS(MarginalModel(bad, 1.0), std::runtime_error);

    TableConfig cfg2;
    cfg2.a_max = 4.0;  // below 2*pi
    cfg2.a_steps = 50;
    cfg2.offsets_per_a = 64;
    const auto bad2 = LikelihoodTable::build(GridSpec(1.0), cfg2);
    CHECK_THROWS_AS(MarginalModel(bad2, 1.0), std::runtime_error);
}

TEST_CASE("marginal pmf matches a forward simulation") {
    const LogTParams params{1.53, 1.17, 76.0};
    const double px = 0.16;
    const auto table = fit_table();
    const auto pmf = gsr::marginal_b_pmf(params, table, px);

    const std::int64_t n = 1000000;
    const auto sim = oracle::forward_b(params.mu, params.sigma, params.nu, n, px, 2024);

    // aggregate to log-spaced bins; compare within 3 combined standard errors
    const int bins = 20;
    const double b_hi = 20000.0;
    auto bin_of = [&](std::int64_t b) {
        if (b <= 0) return 0;
        const int k = 1 + static_cast<int>(std::floor(std::log(static_cast<double>(b)) /
                                                      std::log(b_hi) * (bins - 1)));
        return std::min(k, bins - 1);
    };
    std::vector<double> obs(bins, 0.0), model(bins, 0.0);
    std::int64_t used = 0;
    for (auto b : sim) {
        if (static_cast<double>(b) >= b_hi) continue;
        obs[bin_of(b)] += 1.0;
        ++used;
    }
    for (double& o : obs) o /= static_cast<double>(used);
    double model_total = 0.0;
    for (std::size_t b = 0; b < pmf.size(); ++b) {
        if (static_cast<double>(b) >= b_hi) break;
        model[bin_of(static_cast<std::int64_t>(b))] += pmf[b];
        model_total += pmf[b];
    }
    for (double& m : model) m /= model_total;
    for (int k = 0; k < bins; ++k) {
        const double se = std::sqrt(std::max(model[k] * (1.0 - model[k]), 1e-9) /
                                    static_cast<double>(used));
        CHECK(std::abs(obs[k] - model[k]) <= 3.0 * se + 2e-3);
    }
}

TEST_CASE("r_squared_from_hist basics") {
    CHECK(gsr::r_squared_from_hist({0.1, 0.5, 0.4}, {0.1, 0.5, 0.4}) == 1.0);
    CHECK(gsr::r_squared_from_hist({0.1, 0.5, 0.4}, {0.4, 0.1, 0.5}) < 1.0);
    CHECK_THROWS_AS(gsr::r_squared_from_hist({0.1}, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("goodness of fit: self-consistency and contrast") {
    const LogTParams params{1.53, 1.17, 76.0};
    const double px = 0.16;
    const auto table = fit_table();
    const auto draws = point_mass(params);

    const auto b = gsr::sample_detected_b(params, 100000, px, 99);
    const auto data = gsr::dataset_from_pixels(b, px);
    CHECK(gsr::r_squared(draws, data, table) >= 0.98);

    // grossly wrong data: uniform b on [1, 100]
    std::vector<std::int64_t> uniform_b;
    for (int i = 0; i < 20000; ++i) uniform_b.push_back(1 + (i * 37) % 100);
    const auto bad = gsr::dataset_from_pixels(uniform_b, px);
    CHECK(gsr::r_squared(draws, bad, table) < 0.5);
}

TEST_CASE("fit rejects bad inputs") {
    const auto table = fit_table(100.0, 256, 7);
    gsr::ObservedDataset empty;
    CHECK_THROWS_AS(gsr::fit(empty, table, FitOptions{}), std::invalid_argument);

    auto data = gsr::dataset_from_pixels({3, 4, 5}, 0.04);  // px mismatch vs table
    CHECK_THROWS_AS(gsr::fit(data, table, FitOptions{}), std::invalid_argument);
}

TEST_CASE("fit recovers generating parameters (smoke)") {
    const LogTParams truth{1.53, 1.17, 76.0};
    const double px = 0.16;
    const auto table = fit_table(5000.0, 1024, 11);
    const auto b = gsr::sample_detected_b(truth, 800, px, 4321);
    const auto data = gsr::dataset_from_pixels(b, px);

    FitOptions opts;
    opts.chains = 2;
    opts.iterations = 500;
    opts.warmup = 600;
    opts.seed = 5;
    const auto draws = gsr::fit(data, table, opts);
    REQUIRE_FALSE(draws.draws.empty());
    double mu = 0.0, sigma = 0.0;
    for (const auto& d : draws.draws) {
        mu += d.params.mu;
        sigma += d.params.sigma;
    }
    mu /= static_cast<double>(draws.draws.size());
    sigma /= static_cast<double>(draws.draws.size());
    CHECK(std::abs(mu - truth.mu) < 0.25);
    CHECK(std::abs(sigma - truth.sigma) < 0.25);

    // chain determinism regardless of worker scheduling
    setenv("GSR_FNS_THREADS", "1", 1);
    const auto again = gsr::fit(data, table, opts);
    unsetenv("GSR_FNS_THREADS");
    REQUIRE(again.draws.size() == draws.draws.size());
    for (std::size_t i = 0; i < draws.draws.size(); ++i) {
        CHECK(again.draws[i].params.mu == draws.draws[i].params.mu);
        CHECK(again.draws[i].params.sigma == draws.draws[i].params.sigma);
        CHECK(again.draws[i].params.nu == draws.draws[i].params.nu);
        CHECK(again.draws[i].chain == draws.draws[i].chain);
    }
}

TEST_CASE("truncated and untruncated fits agree on mu") {
    const LogTParams truth{1.0, 0.9, 50.0};
    const double px = 0.16;
    const auto table = fit_table(2000.0, 1024, 13);

    // generator with full bookkeeping of B = 0 events
    std::int64_t dropped = 0;
    const auto b = gsr::sample_detected_b(truth, 1200, px, 777, &dropped);
    const auto data = gsr::dataset_from_pixels(b, px);

    FitOptions trunc;
    trunc.chains = 2;
    trunc.iterations = 400;
    trunc.warmup = 500;
    trunc.seed = 21;
    const auto post_t = gsr::fit(data, table, trunc);

    FitOptions untrunc = trunc;
    untrunc.truncate = false;
    untrunc.zero_count = dropped;
    const auto post_u = gsr::fit(data, table, untrunc);

    auto mean_sd = [](const gsr::PosteriorDraws& d) {
        double m = 0.0, s = 0.0;
        for (const auto& x : d.draws) m += x.params.mu;
        m /= static_cast<double>(d.draws.size());
        for (const auto& x : d.draws) s += (x.params.mu - m) * (x.params.mu - m);
        return std::pair{m, std::sqrt(s / static_cast<double>(d.draws.size() - 1))};
    };
    const auto [mt, st] = mean_sd(post_t);
    const auto [mu_u, su] = mean_sd(post_u);
    CHECK(std::abs(mt - mu_u) < 2.0 * std::max(st, su) + 0.05);
}
