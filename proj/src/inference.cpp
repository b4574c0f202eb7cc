#include "gsr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "gsr/parallel.hpp"
#include "gsr/rng.hpp"

namespace gsr {

namespace {

constexpr double kLogFloor = 1e-300;

double safe_log(double p) { return std::log(std::max(p, kLogFloor)); }

}  // namespace

ObservedRecord make_record(std::string sample_id, double b_area, double pixel_area) {
    if (!(pixel_area > 0.0)) throw std::invalid_argument("record: pixel_area must be positive");
    if (!(b_area > 0.0)) throw std::invalid_argument("record: b_area must be positive");
    const auto b_pixels = static_cast<std::int64_t>(std::llround(b_area / pixel_area));
    if (b_pixels < 1) throw std::invalid_argument("record: b must round to >= 1 pixel");
    if (std::abs(b_area - static_cast<double>(b_pixels) * pixel_area) > 0.5 * pixel_area)
        throw std::invalid_argument("record: b_area is not on the pixel lattice");
    return ObservedRecord{std::move(sample_id), b_area, pixel_area, b_pixels};
}

double ObservedDataset::pixel_area() const {
    if (records.empty()) throw std::invalid_argument("dataset is empty");
    const double px = records.front().pixel_area;
    for (const auto& r : records)
        if (std::abs(r.pixel_area - px) > 1e-12 * px)
            throw std::invalid_argument("dataset mixes pixel sizes");
    return px;
}

double ChainDiagnostics::max_rhat() const {
    return std::max({rhat_mu, rhat_sigma, rhat_nu});
}

std::vector<std::pair<std::int64_t, std::int64_t>> count_by_b(const ObservedDataset& data) {
    std::map<std::int64_t, std::int64_t> m;
    for (const auto& r : data.records) ++m[r.b_pixels];
    return {m.begin(), m.end()};
}

MarginalModel::MarginalModel(const LikelihoodTable& table, double pixel_area)
    : table_(&table), px_(pixel_area) {
    if (!(pixel_area > 0.0)) throw std::invalid_argument("MarginalModel: pixel_area must be positive");
    const auto& rows = table.rows();
    if (rows.front().a > kGuaranteedMissRatio)
        throw std::runtime_error(
            "MarginalModel: table does not cover the guaranteed-miss region (a_grid starts above pi/2)");
    if (table.a_top() < kGuaranteedHitRatio)
        throw std::runtime_error(
            "MarginalModel: table does not cover the guaranteed-hit threshold (a_max below 2*pi)");
    edges_.resize(rows.size() + 1);
    edges_.front() = rows.front().a;
    for (std::size_t i = 1; i < rows.size(); ++i) edges_[i] = 0.5 * (rows[i - 1].a + rows[i].a);
    edges_.back() = rows.back().a;
}

void MarginalModel::cell_masses(const LogTParams& params, std::vector<double>& w,
                                double& below) const {
    const std::size_t n = table_->size();
    w.resize(n);
    double prev = logt_cdf(edges_[0] * px_, params);
    below = prev;
    for (std::size_t i = 0; i < n; ++i) {
        const double cur = logt_cdf(edges_[i + 1] * px_, params);
        w[i] = std::max(cur - prev, 0.0);
        prev = cur;
    }
}

double MarginalModel::p_b0(const LogTParams& params) const {
    const auto& rows = table_->rows();
    // Everything below the grid start is a guaranteed miss; P(0 | a) vanishes
    // beyond the guaranteed-hit bound, so only a prefix of rows contributes.
    double total = logt_cdf(edges_[0] * px_, params);
    double prev = total;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].a > kGuaranteedHitRatio && rows[i].prob(0) == 0.0) break;
        const double cur = logt_cdf(edges_[i + 1] * px_, params);
        total += (cur - prev) * rows[i].prob(0);
        prev = cur;
    }
    return std::clamp(total, 0.0, 1.0);
}

std::vector<double> MarginalModel::pmf(const LogTParams& params, std::int64_t b_top) const {
    if (b_top < 1) throw std::invalid_argument("pmf: b_top must be >= 1");
    std::vector<double> w;
    double below = 0.0;
    cell_masses(params, w, below);

    std::vector<double> out(static_cast<std::size_t>(b_top) + 1, 0.0);
    out[0] += below;
    const auto& rows = table_->rows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (w[i] == 0.0) continue;
        const auto& row = rows[i];
        for (std::size_t k = 0; k < row.p.size(); ++k) {
            const std::int64_t b = row.b_min + static_cast<std::int64_t>(k);
            if (b <= b_top) out[static_cast<std::size_t>(b)] += w[i] * row.p[k];
        }
    }
    // Erosion-free regime above the table: b = floor(a).
    const double a_top = table_->a_top();
    for (auto b = static_cast<std::int64_t>(std::floor(a_top)); b <= b_top; ++b) {
        const double lo = std::max(static_cast<double>(b), a_top);
        const double hi = static_cast<double>(b + 1);
        if (hi <= lo) continue;
        out[static_cast<std::size_t>(b)] += logt_cdf(hi * px_, params) - logt_cdf(lo * px_, params);
    }
    const double sum = std::accumulate(out.begin(), out.end(), 0.0);
    if (!(sum > 0.0)) throw std::runtime_error("pmf: vanishing total mass");
    for (double& p : out) p /= sum;
    return out;
}

double MarginalModel::log_likelihood(
    const LogTParams& params, const std::vector<std::pair<std::int64_t, std::int64_t>>& b_counts,
    bool truncate, std::int64_t zero_count) const {
    std::vector<double> w;
    double below = 0.0;
    cell_masses(params, w, below);

    const auto& rows = table_->rows();
    std::vector<double> acc(static_cast<std::size_t>(table_->max_b()) + 1, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (w[i] == 0.0) continue;
        const auto& row = rows[i];
        for (std::size_t k = 0; k < row.p.size(); ++k)
            acc[static_cast<std::size_t>(row.b_min) + k] += w[i] * row.p[k];
    }
    const double p0 = std::clamp(below + acc[0], 0.0, 1.0);

    const double a_top = table_->a_top();
    const auto tail_start = static_cast<std::int64_t>(std::floor(a_top));
    double ll = 0.0;
    std::int64_t n_obs = 0;
    for (const auto& [b, count] : b_counts) {
        double p = (b <= table_->max_b()) ? acc[static_cast<std::size_t>(b)] : 0.0;
        if (b >= tail_start) {
            const double lo = std::max(static_cast<double>(b), a_top);
            const double hi = static_cast<double>(b + 1);
            if (hi > lo) p += logt_cdf(hi * px_, params) - logt_cdf(lo * px_, params);
        }
        ll += static_cast<double>(count) * safe_log(p);
        n_obs += count;
    }
    if (truncate) {
        ll -= static_cast<double>(n_obs) * safe_log(1.0 - p0);
    } else if (zero_count > 0) {
        ll += static_cast<double>(zero_count) * safe_log(p0);
    }
    return ll;
}

std::vector<double> marginal_b_pmf(const LogTParams& params, const LikelihoodTable& table,
                                   double pixel_area) {
    MarginalModel model(table, pixel_area);
    const double a_hi = logt_quantile(1.0 - 1e-9, params) / pixel_area;
    const auto b_top = std::max<std::int64_t>(
        static_cast<std::int64_t>(std::ceil(std::max(a_hi, table.a_top()))) + 1, 2);
    return model.pmf(params, b_top);
}

namespace {

struct Vec3 {
    double x[3];
};

// Lower Cholesky of a 3x3 SPD matrix; falls back to the diagonal on failure.
struct Chol3 {
    double l[3][3] = {};

    static Chol3 from(const double c[3][3]) {
        Chol3 r;
        double a[3][3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a[i][j] = c[i][j];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = a[i][j];
                for (int k = 0; k < j; ++k) s -= r.l[i][k] * r.l[j][k];
                if (i == j) {
                    if (s <= 0.0) {  // not SPD; keep a diagonal proposal
                        Chol3 d;
                        for (int t = 0; t < 3; ++t)
                            d.l[t][t] = std::sqrt(std::max(c[t][t], 1e-8));
                        return d;
                    }
                    r.l[i][i] = std::sqrt(s);
                } else {
                    r.l[i][j] = s / r.l[j][j];
                }
            }
        }
        return r;
    }
};

struct ChainResult {
    std::vector<Vec3> kept;  // (mu, log sigma, log nu)
    double accept_rate = 0.0;
};

double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        const std::size_t h = c.size() / 2;
        halves.emplace_back(c.begin(), c.begin() + h);
        halves.emplace_back(c.begin() + h, c.begin() + 2 * h);
    }
    const double n = static_cast<double>(halves.front().size());
    const double m = static_cast<double>(halves.size());
    std::vector<double> means, vars;
    for (const auto& h : halves) {
        const double mean = std::accumulate(h.begin(), h.end(), 0.0) / n;
        double v = 0.0;
        for (double x : h) v += (x - mean) * (x - mean);
        means.push_back(mean);
        vars.push_back(v / (n - 1.0));
    }
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= n / (m - 1.0);
    const double w_var = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
    if (w_var <= 0.0) return 1.0;
    const double var_hat = (n - 1.0) / n * w_var + b / n;
    return std::sqrt(var_hat / w_var);
}

double ess_estimate(const std::vector<std::vector<double>>& chains) {
    double total = 0.0;
    for (const auto& c : chains) {
        const std::size_t n = c.size();
        const double mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double x : c) var += (x - mean) * (x - mean);
        var /= static_cast<double>(n);
        if (var <= 0.0) continue;
        double rho_sum = 0.0;
        for (std::size_t lag = 1; lag < std::min<std::size_t>(n / 2, 500); ++lag) {
            double acf = 0.0;
            for (std::size_t t = lag; t < n; ++t) acf += (c[t] - mean) * (c[t - lag] - mean);
            acf /= static_cast<double>(n) * var;
            if (acf < 0.05) break;
            rho_sum += acf;
        }
        total += static_cast<double>(n) / (1.0 + 2.0 * rho_sum);
    }
    return total;
}

}  // namespace

PosteriorDraws fit(const ObservedDataset& data, const LikelihoodTable& table,
                   const FitOptions& opts) {
    if (data.records.empty()) throw std::invalid_argument("fit: empty dataset");
    if (opts.chains < 1 || opts.iterations < 2 || opts.warmup < 1)
        throw std::invalid_argument("fit: chains/iterations/warmup out of range");
    const double px = data.pixel_area();
    if (std::abs(px - table.grid().pixel_area) > 1e-9 * px)
        throw std::invalid_argument("fit: dataset pixel size does not match the table");

    const auto b_counts = count_by_b(data);
    const MarginalModel model(table, px);

    // log posterior on x = (mu, log sigma, log nu); nu > 1 enforced.
    auto log_post = [&](const Vec3& x) {
        if (x.x[2] <= 0.0) return -std::numeric_limits<double>::infinity();
        const LogTParams params{x.x[0], std::exp(x.x[1]), std::exp(x.x[2])};
        double lp = -0.5 * x.x[0] * x.x[0] / 100.0;                   // mu ~ N(0, 10^2)
        lp += -0.5 * x.x[1] * x.x[1] / 2.25;                          // log sigma ~ N(0, 1.5^2)
        const double dn = x.x[2] - std::log(30.0);
        lp += -0.5 * dn * dn;                                         // log nu ~ N(log 30, 1)
        return lp + model.log_likelihood(params, b_counts, opts.truncate, opts.zero_count);
    };

    // Dispersed starts around moments of log B.
    double m0 = 0.0, s0 = 0.0;
    for (const auto& r : data.records) m0 += std::log(r.b_area);
    m0 /= static_cast<double>(data.records.size());
    for (const auto& r : data.records) {
        const double d = std::log(r.b_area) - m0;
        s0 += d * d;
    }
    s0 = std::sqrt(s0 / static_cast<double>(data.records.size()));
    s0 = std::max(s0, 0.1);

    std::vector<ChainResult> results(static_cast<std::size_t>(opts.chains));
    parallel_for(static_cast<std::size_t>(opts.chains), [&](std::size_t c) {
        auto eng = make_engine(opts.seed, 0xC4A1Full + c);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> uni(0.0, 1.0);

        Vec3 x{{m0 + 0.5 * normal(eng), std::log(s0) + 0.3 * normal(eng),
                std::log(30.0) + 0.7 * normal(eng)}};
        x.x[2] = std::max(x.x[2], 0.1);
        double lp = log_post(x);

        double cov[3][3] = {{0.02 * 0.02, 0, 0}, {0, 0.02 * 0.02, 0}, {0, 0, 0.2 * 0.2}};
        Chol3 chol = Chol3::from(cov);
        double scale = 1.0;

        std::vector<Vec3> history;
        history.reserve(static_cast<std::size_t>(opts.warmup));
        long accepted_window = 0, window = 0;
        long accepted_total = 0;

        const long total = opts.warmup + opts.iterations;
        ChainResult& res = results[c];
        res.kept.reserve(static_cast<std::size_t>(opts.iterations));
        for (long it = 0; it < total; ++it) {
            const double z0 = normal(eng), z1 = normal(eng), z2 = normal(eng);
            Vec3 prop;
            prop.x[0] = x.x[0] + scale * chol.l[0][0] * z0;
            prop.x[1] = x.x[1] + scale * (chol.l[1][0] * z0 + chol.l[1][1] * z1);
            prop.x[2] =
                x.x[2] + scale * (chol.l[2][0] * z0 + chol.l[2][1] * z1 + chol.l[2][2] * z2);
            const double lp_prop = log_post(prop);
            if (std::log(uni(eng)) < lp_prop - lp) {
                x = prop;
                lp = lp_prop;
                ++accepted_window;
                if (it >= opts.warmup) ++accepted_total;
            }
            ++window;

            if (it < opts.warmup) {
                history.push_back(x);
                // Proposal adaptation happens during warmup only.
                if (window >= 100) {
                    scale *= std::exp(1.5 * (static_cast<double>(accepted_window) / window - 0.3));
                    scale = std::clamp(scale, 1e-3, 1e3);
                    accepted_window = 0;
                    window = 0;
                    if (history.size() >= 200) {
                        double mean[3] = {};
                        for (const auto& h : history)
                            for (int d = 0; d < 3; ++d) mean[d] += h.x[d];
                        for (double& v : mean) v /= static_cast<double>(history.size());
                        double c2[3][3] = {};
                        for (const auto& h : history)
                            for (int a = 0; a < 3; ++a)
                                for (int b = 0; b < 3; ++b)
                                    c2[a][b] += (h.x[a] - mean[a]) * (h.x[b] - mean[b]);
                        for (int a = 0; a < 3; ++a)
                            for (int b = 0; b < 3; ++b)
                                c2[a][b] =
                                    c2[a][b] / static_cast<double>(history.size() - 1) * 5.66 / 3.0;
                        for (int d = 0; d < 3; ++d) c2[d][d] += 1e-8;
                        chol = Chol3::from(c2);
                    }
                }
            } else {
                res.kept.push_back(x);
            }
        }
        res.accept_rate = static_cast<double>(accepted_total) / opts.iterations;
    });

    PosteriorDraws out;
    out.chains = opts.chains;
    std::vector<std::vector<double>> mu_c, ls_c, ln_c;
    for (int c = 0; c < opts.chains; ++c) {
        std::vector<double> mus, lss, lns;
        for (const auto& v : results[c].kept) {
            out.draws.push_back(
                PosteriorDraw{LogTParams{v.x[0], std::exp(v.x[1]), std::exp(v.x[2])}, c});
            mus.push_back(v.x[0]);
            lss.push_back(v.x[1]);
            lns.push_back(v.x[2]);
        }
        mu_c.push_back(std::move(mus));
        ls_c.push_back(std::move(lss));
        ln_c.push_back(std::move(lns));
    }
    ChainDiagnostics d;
    d.rhat_mu = split_rhat(mu_c);
    d.rhat_sigma = split_rhat(ls_c);
    d.rhat_nu = split_rhat(ln_c);
    d.ess_mu = ess_estimate(mu_c);
    d.ess_sigma = ess_estimate(ls_c);
    d.ess_nu = ess_estimate(ln_c);
    d.converged = d.max_rhat() < 1.05;
    out.diagnostics = d;
    return out;
}

namespace {

struct Moments {
    double mean, sd;
};

Moments moments(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / (n - 1.0))};
}

}  // namespace

double r_squared(const PosteriorDraws& draws, const ObservedDataset& data,
                 const LikelihoodTable& table, int bins) {
    if (draws.draws.empty()) throw std::invalid_argument("r_squared: no draws");
    const double px = data.pixel_area();
    const MarginalModel model(table, px);

    std::int64_t b_lo = std::numeric_limits<std::int64_t>::max(), b_hi = 1;
    for (const auto& r : data.records) {
        b_lo = std::min(b_lo, r.b_pixels);
        b_hi = std::max(b_hi, r.b_pixels);
    }
    // Log-spaced bin edges over the data range; each b lands in one bin.
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    const double lo = static_cast<double>(b_lo) - 0.5, hi = static_cast<double>(b_hi) + 0.5;
    for (int k = 0; k <= bins; ++k)
        edges[k] = lo * std::pow(hi / lo, static_cast<double>(k) / bins);
    auto bin_of = [&](double b) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), b);
        return std::clamp<std::int64_t>(it - edges.begin() - 1, 0, bins - 1);
    };

    std::vector<double> obs(static_cast<std::size_t>(bins), 0.0);
    for (const auto& r : data.records) obs[bin_of(static_cast<double>(r.b_pixels))] += 1.0;
    const double n_obs = static_cast<double>(data.records.size());
    for (double& o : obs) o /= n_obs;

    // Posterior-mean predicted pmf, averaged over a thinned draw subset.
    const std::size_t n_draws = draws.draws.size();
    const std::size_t stride = std::max<std::size_t>(1, n_draws / 128);
    const auto b_top = static_cast<std::int64_t>(hi) + 1;
    std::vector<double> pred(static_cast<std::size_t>(bins), 0.0);
    std::size_t used = 0;
    for (std::size_t i = 0; i < n_draws; i += stride, ++used) {
        const auto pmf = model.pmf(draws.draws[i].params, b_top);
        const double p0 = pmf[0];
        for (std::int64_t b = b_lo; b <= b_hi; ++b)
            pred[bin_of(static_cast<double>(b))] += pmf[static_cast<std::size_t>(b)] / (1.0 - p0);
    }
    double pred_total = 0.0;
    for (double& p : pred) {
        p /= static_cast<double>(used);
        pred_total += p;
    }
    for (double& p : pred) p /= pred_total;  // renormalize over the binned range

    return r_squared_from_hist(obs, pred);
}

double r_squared_from_hist(const std::vector<double>& obs, const std::vector<double>& pred) {
    if (obs.size() != pred.size() || obs.empty())
        throw std::invalid_argument("r_squared_from_hist: size mismatch");
    const double obs_mean =
        std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(obs.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
        ss_res += (obs[k] - pred[k]) * (obs[k] - pred[k]);
        ss_tot += (obs[k] - obs_mean) * (obs[k] - obs_mean);
    }
    if (ss_tot <= 0.0) return ss_res <= 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - ss_res / ss_tot;
}

FitSummary goodness_of_fit(const PosteriorDraws& draws, const ObservedDataset& data,
                           const LikelihoodTable& table) {
    std::vector<double> mu, sigma, nu;
    for (const auto& d : draws.draws) {
        mu.push_back(d.params.mu);
        sigma.push_back(d.params.sigma);
        nu.push_back(d.params.nu);
    }
    const auto m_mu = moments(mu), m_sigma = moments(sigma), m_nu = moments(nu);
    FitSummary s{m_mu.mean,    m_mu.sd, m_sigma.mean, m_sigma.sd,       m_nu.mean, m_nu.sd,
                 0.0,          draws.diagnostics};
    s.r_squared = r_squared(draws, data, table);
    return s;
}

}  // namespace gsr
