#include "gsr/ingest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gsr/grid.hpp"
#include "gsr/rng.hpp"

namespace gsr {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ',')) parts.push_back(cur);
    if (!line.empty() && line.back() == ',') parts.emplace_back();
    return parts;
}

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

LoadResult load_particle_file(const std::string& path, bool allow_mixed_px) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open particle file: " + path);

    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        header = split_csv(line);
        break;
    }
    if (header.empty()) throw std::runtime_error("particle file has no header row: " + path);

    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
        return static_cast<std::ptrdiff_t>(-1);
    };
    const auto c_id = col("sample_id"), c_class = col("class"), c_area = col("area_um2"),
               c_px = col("pixel_area_um2");
    if (c_id < 0 || c_class < 0 || c_area < 0 || c_px < 0)
        throw std::runtime_error(
            "particle file missing required columns "
            "(sample_id, class, area_um2, pixel_area_um2): " +
            path);

    LoadResult result;
    IngestReport& rep = result.report;
    std::set<std::string> seen_ids;
    std::map<std::string, std::int64_t> per_sample;
    double common_px = -1.0;
    std::int64_t line_no = 1;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        ++rep.rows_in;
        const auto parts = split_csv(line);
        auto bad = [&](const std::string& why) {
            ++rep.rows_bad;
            if (rep.bad_rows.size() < 20)
                rep.bad_rows.push_back("line " + std::to_string(line_no) + ": " + why);
        };
        if (parts.size() < header.size()) {
            bad("expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(parts.size()));
            continue;
        }
        double area = 0.0, px = 0.0;
        if (!parse_double(parts[c_area], area) || !parse_double(parts[c_px], px)) {
            bad("non-numeric area or pixel size");
            continue;
        }
        const std::string& id = parts[c_id];
        const std::string& cls = parts[c_class];
        if (cls != "characteristic") {
            ++rep.rows_parsed;
            ++rep.rows_other_class;
            seen_ids.insert(id);
            continue;
        }
        try {
            ObservedRecord rec = make_record(id, area, px);
            if (common_px < 0.0) common_px = px;
            if (!allow_mixed_px && std::abs(px - common_px) > 1e-12 * common_px) {
                bad("pixel size " + parts[c_px] + " differs from " + fmt(common_px));
                continue;
            }
            result.data.records.push_back(std::move(rec));
            ++rep.rows_parsed;
            seen_ids.insert(id);
            ++per_sample[id];
            ++rep.particles;
        } catch (const std::exception& e) {
            bad(e.what());
        }
    }
    rep.samples_seen = static_cast<std::int64_t>(seen_ids.size());
    rep.samples_positive = static_cast<std::int64_t>(per_sample.size());

    if (per_sample.empty())
        throw std::runtime_error("particle file contains no characteristic particles: " + path);
    std::vector<std::int64_t> counts;
    counts.reserve(per_sample.size());
    for (const auto& [id, c] : per_sample) counts.push_back(c);
    result.counts = CountDistribution::from_counts(counts);
    return result;
}

SyntheticSummary generate_synthetic(const SyntheticSpec& spec, const std::string& data_path,
                                    const std::string& sidecar_path,
                                    const std::vector<std::string>& comment_lines) {
    spec.params.validate();
    spec.counts.validate();
    if (spec.n_samples < 1) throw std::invalid_argument("generate_synthetic: n_samples >= 1");
    if (!(spec.pixel_area > 0.0))
        throw std::invalid_argument("generate_synthetic: pixel_area must be positive");

    std::ofstream data(data_path), sidecar(sidecar_path);
    if (!data) throw std::runtime_error("cannot write: " + data_path);
    if (!sidecar) throw std::runtime_error("cannot write: " + sidecar_path);
    for (const auto& c : comment_lines) {
        data << "# " << c << '\n';
        sidecar << "# " << c << '\n';
    }
    data << "sample_id,class,area_um2,pixel_area_um2\n";
    sidecar << "sample_id,true_area_um2,registered_b_pixels\n";

    auto eng = make_engine(spec.seed, 0x5E17ull);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::student_t_distribution<double> tdist(spec.params.nu);
    const bool lognormal = std::isinf(spec.params.nu);

    std::vector<std::int64_t> count_values;
    std::vector<double> count_probs;
    for (const auto& [n, p] : spec.counts.pmf) {
        count_values.push_back(n);
        count_probs.push_back(p);
    }
    std::discrete_distribution<std::size_t> count_dist(count_probs.begin(), count_probs.end());

    SyntheticSummary sum;
    sum.samples = spec.n_samples;
    char id[32];
    for (std::int64_t s = 0; s < spec.n_samples; ++s) {
        std::snprintf(id, sizeof(id), "S%06lld", static_cast<long long>(s + 1));
        const std::int64_t n = count_values[count_dist(eng)];
        bool any = false;
        for (std::int64_t k = 0; k < n; ++k) {
            const double t = lognormal ? normal(eng) : tdist(eng);
            const double area = std::exp(spec.params.mu + spec.params.sigma * t);
            const std::int64_t b =
                covered_pixels_unit(area / spec.pixel_area, uni(eng), uni(eng));
            sidecar << id << ',' << fmt(area) << ',' << b << '\n';
            if (b >= 1) {
                data << id << ",characteristic," << fmt(static_cast<double>(b) * spec.pixel_area)
                     << ',' << fmt(spec.pixel_area) << '\n';
                ++sum.particles_written;
                any = true;
            } else {
                ++sum.particles_dropped;
            }
        }
        if (any) ++sum.positive_samples;
    }
    return sum;
}

std::vector<std::int64_t> sample_detected_b(const LogTParams& params, std::int64_t n_detected,
                                            double pixel_area, std::uint64_t seed,
                                            std::int64_t* dropped) {
    params.validate();
    if (n_detected < 1) throw std::invalid_argument("sample_detected_b: n_detected >= 1");
    if (!(pixel_area > 0.0))
        throw std::invalid_argument("sample_detected_b: pixel_area must be positive");

    auto eng = make_engine(seed, 0xDE7Eull);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::student_t_distribution<double> tdist(params.nu);
    const bool lognormal = std::isinf(params.nu);

    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(n_detected));
    std::int64_t misses = 0;
    const std::int64_t max_attempts = 1000 * n_detected + 100000;
    for (std::int64_t attempts = 0; static_cast<std::int64_t>(out.size()) < n_detected;
         ++attempts) {
        if (attempts > max_attempts)
            throw std::runtime_error("sample_detected_b: detection probability too small");
        const double t = lognormal ? normal(eng) : tdist(eng);
        const double area = std::exp(params.mu + params.sigma * t);
        const std::int64_t b = covered_pixels_unit(area / pixel_area, uni(eng), uni(eng));
        if (b >= 1)
            out.push_back(b);
        else
            ++misses;
    }
    if (dropped) *dropped = misses;
    return out;
}

ObservedDataset dataset_from_pixels(const std::vector<std::int64_t>& b_pixels,
                                    double pixel_area) {
    ObservedDataset data;
    data.records.reserve(b_pixels.size());
    std::int64_t i = 0;
    for (std::int64_t b : b_pixels) {
        ++i;
        data.records.push_back(make_record("S" + std::to_string(i),
                                           static_cast<double>(b) * pixel_area, pixel_area));
    }
    return data;
}

}  // namespace gsr
