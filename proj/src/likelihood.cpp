#include "gsr/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gsr/parallel.hpp"
#include "gsr/rng.hpp"

namespace gsr {

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::vector<double> make_a_grid(const TableConfig& cfg) {
    if (!(cfg.a_max > 0.0)) throw std::invalid_argument("table: a_max must be positive");
    if (cfg.a_steps < 2) throw std::invalid_argument("table: a_steps must be >= 2");
    std::vector<double> a(static_cast<std::size_t>(cfg.a_steps));
    if (cfg.grid == AGridScheme::uniform) {
        for (int i = 0; i < cfg.a_steps; ++i)
            a[i] = cfg.a_max * static_cast<double>(i + 1) / cfg.a_steps;
    } else {
        if (!(cfg.a_min > 0.0) || cfg.a_min >= cfg.a_max)
            throw std::invalid_argument("table: log grid needs 0 < a_min < a_max");
        const double step = std::log(cfg.a_max / cfg.a_min) / (cfg.a_steps - 1);
        for (int i = 0; i < cfg.a_steps; ++i) a[i] = cfg.a_min * std::exp(step * i);
        a.back() = cfg.a_max;
    }
    return a;
}

}  // namespace

std::string to_string(OffsetScheme s) {
    return s == OffsetScheme::quasi_lattice ? "quasi-lattice" : "pseudo-random";
}

OffsetScheme offset_scheme_from_string(const std::string& s) {
    if (s == "quasi-lattice") return OffsetScheme::quasi_lattice;
    if (s == "pseudo-random") return OffsetScheme::pseudo_random;
    throw std::invalid_argument("unknown offset scheme: " + s);
}

std::vector<Offset> make_offsets(std::int64_t n, std::uint64_t seed, OffsetScheme scheme) {
    if (n < 1) throw std::invalid_argument("offsets_per_a must be >= 1");
    auto eng = make_engine(seed, 0xA11CEull);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Offset> offs(static_cast<std::size_t>(n));
    if (scheme == OffsetScheme::quasi_lattice) {
        const auto g = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
        for (std::int64_t k = 0; k < n; ++k) {
            const double i = static_cast<double>(k % g);
            const double j = static_cast<double>(k / g);
            offs[k] = Offset{(i + uni(eng)) / g, (j + uni(eng)) / g};
        }
    } else {
        for (std::int64_t k = 0; k < n; ++k) {
            const double u = uni(eng);
            const double v = uni(eng);
            offs[k] = Offset{u, v};
        }
    }
    return offs;
}

LikelihoodTable LikelihoodTable::build(const GridSpec& grid, const TableConfig& cfg) {
    const auto a_grid = make_a_grid(cfg);
    const auto offsets = make_offsets(cfg.offsets_per_a, cfg.seed, cfg.scheme);

    LikelihoodTable table(grid, cfg);
    table.rows_.resize(a_grid.size());

    parallel_for(a_grid.size(), [&](std::size_t i) {
        const double a = a_grid[i];
        // Only particles bigger than the guaranteed-hit bound span more than
        // one b value; a +/- perimeter band bounds the support.
        const auto cap = static_cast<std::int64_t>(std::ceil(a)) + 1;
        std::vector<std::int64_t> counts(static_cast<std::size_t>(cap) + 1, 0);
        for (const Offset& o : offsets)
            ++counts[static_cast<std::size_t>(covered_pixels_unit(a, o.u, o.v))];

        std::int64_t lo = 0;
        while (counts[lo] == 0 && lo < cap) ++lo;
        std::int64_t hi = cap;
        while (counts[hi] == 0 && hi > lo) --hi;

        TableRow row;
        row.a = a;
        row.b_min = lo;
        row.p.resize(static_cast<std::size_t>(hi - lo + 1));
        const double inv = 1.0 / static_cast<double>(cfg.offsets_per_a);
        for (std::int64_t b = lo; b <= hi; ++b)
            row.p[b - lo] = static_cast<double>(counts[b]) * inv;
        table.rows_[i] = std::move(row);
    });

    std::int64_t max_b = 0;
    for (const auto& row : table.rows_)
        max_b = std::max(max_b, row.b_min + static_cast<std::int64_t>(row.p.size()) - 1);
    table.max_b_ = max_b;
    return table;
}

double LikelihoodTable::p_b0(double a) const {
    if (a < 0.0 || !std::isfinite(a)) throw std::invalid_argument("p_b0: a must be >= 0");
    if (a <= rows_.front().a) return rows_.front().prob(0);
    if (a > rows_.back().a) return 0.0;
    auto it = std::lower_bound(rows_.begin(), rows_.end(), a,
                               [](const TableRow& r, double x) { return r.a < x; });
    const std::size_t j = static_cast<std::size_t>(it - rows_.begin());
    const double a0 = rows_[j - 1].a, a1 = rows_[j].a;
    const double p0 = rows_[j - 1].prob(0), p1 = rows_[j].prob(0);
    const double t = (a - a0) / (a1 - a0);
    return std::clamp(p0 + t * (p1 - p0), 0.0, 1.0);
}

std::vector<double> LikelihoodTable::likelihood_slice(std::int64_t b) const {
    if (b < 0 || b > max_b_) throw std::invalid_argument("likelihood_slice: b out of range");
    std::vector<double> col(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) col[i] = rows_[i].prob(b);
    return col;
}

MeanCurve LikelihoodTable::mean_curve() const {
    MeanCurve mc;
    mc.a_values.reserve(rows_.size());
    mc.mean_b.reserve(rows_.size());
    mc.mean_b_over_a.reserve(rows_.size());
    for (const auto& row : rows_) {
        double m = 0.0;
        for (std::size_t k = 0; k < row.p.size(); ++k)
            m += static_cast<double>(row.b_min + static_cast<std::int64_t>(k)) * row.p[k];
        mc.a_values.push_back(row.a);
        mc.mean_b.push_back(m);
        mc.mean_b_over_a.push_back(m / row.a);
    }
    return mc;
}

std::vector<double> LikelihoodTable::posterior_slice(
    std::int64_t b, const std::function<double(double)>& prior) const {
    if (b < 0 || b > max_b_) throw std::invalid_argument("posterior_slice: b out of range");
    const std::size_t n = rows_.size();
    std::vector<double> dens(n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dens[i] = rows_[i].prob(b) * prior(rows_[i].a);
        const double lo = (i == 0) ? 0.0 : rows_[i - 1].a;
        const double hi = (i + 1 == n) ? rows_[i].a : rows_[i + 1].a;
        z += dens[i] * 0.5 * (hi - lo);
    }
    if (!(z > 0.0))
        throw std::runtime_error("posterior_slice: zero normalizer (b unreachable under prior)");
    for (double& d : dens) d /= z;
    return dens;
}

void LikelihoodTable::save(std::ostream& out) const {
    out << "pixel_area,a_max,a_steps,offsets_per_a,seed,scheme\n";
    out << fmt(grid_.pixel_area) << ',' << fmt(cfg_.a_max) << ',' << cfg_.a_steps << ','
        << cfg_.offsets_per_a << ',' << cfg_.seed << ',' << to_string(cfg_.scheme) << '\n';
    out << "a_value";
    for (std::int64_t b = 0; b <= max_b_; ++b) out << ",p_b" << b;
    out << '\n';
    for (const auto& row : rows_) {
        out << fmt(row.a);
        for (std::int64_t b = 0; b <= max_b_; ++b) out << ',' << fmt(row.prob(b));
        out << '\n';
    }
}

void LikelihoodTable::save(const std::string& path,
                           const std::vector<std::string>& comment_lines) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& line : comment_lines) out << "# " << line << '\n';
    save(out);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ',')) parts.push_back(cur);
    return parts;
}

std::string next_data_line(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        return line;
    }
    return {};
}

}  // namespace

LikelihoodTable LikelihoodTable::load(std::istream& in) {
    const std::string header = next_data_line(in);
    if (header.rfind("pixel_area,", 0) != 0)
        throw std::runtime_error("table load: missing metadata header");
    const auto meta = split_csv(next_data_line(in));
    if (meta.size() != 6) throw std::runtime_error("table load: malformed metadata row");

    TableConfig cfg;
    const double pixel_area = std::stod(meta[0]);
    cfg.a_max = std::stod(meta[1]);
    cfg.a_steps = std::stoi(meta[2]);
    cfg.offsets_per_a = std::stoll(meta[3]);
    cfg.seed = std::stoull(meta[4]);
    cfg.scheme = offset_scheme_from_string(meta[5]);

    const std::string cols = next_data_line(in);
    if (cols.rfind("a_value", 0) != 0) throw std::runtime_error("table load: missing column header");

    LikelihoodTable table(GridSpec(pixel_area), cfg);
    std::string line;
    while (!(line = next_data_line(in)).empty()) {
        const auto parts = split_csv(line);
        if (parts.size() < 2) throw std::runtime_error("table load: short data row");
        TableRow row;
        row.a = std::stod(parts[0]);
        std::vector<double> dense(parts.size() - 1);
        for (std::size_t k = 1; k < parts.size(); ++k) dense[k - 1] = std::stod(parts[k]);
        std::int64_t lo = 0;
        auto hi = static_cast<std::int64_t>(dense.size()) - 1;
        while (lo < hi && dense[lo] == 0.0) ++lo;
        while (hi > lo && dense[hi] == 0.0) --hi;
        row.b_min = lo;
        row.p.assign(dense.begin() + lo, dense.begin() + hi + 1);
        table.rows_.push_back(std::move(row));
    }
    if (table.rows_.empty()) throw std::runtime_error("table load: no data rows");
    std::int64_t max_b = 0;
    for (const auto& row : table.rows_)
        max_b = std::max(max_b, row.b_min + static_cast<std::int64_t>(row.p.size()) - 1);
    table.max_b_ = max_b;
    // uniform vs log grid is recoverable from the a_value column if ever needed
    cfg.a_steps = static_cast<int>(table.rows_.size());
    table.cfg_.a_steps = cfg.a_steps;
    return table;
}

LikelihoodTable LikelihoodTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table: " + path);
    return load(in);
}

}  // namespace gsr
