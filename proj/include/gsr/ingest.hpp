#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsr/fns.hpp"
#include "gsr/inference.hpp"

namespace gsr {

// Particle export dialect: comma-separated, UTF-8, '.' decimal, mandatory
// header with columns sample_id, class, area_um2, pixel_area_um2. Unknown
// columns are ignored; malformed rows are counted and reported, never
// silently dropped.
struct IngestReport {
    std::int64_t rows_in = 0;          // data rows seen
    std::int64_t rows_parsed = 0;      // rows that parsed cleanly
    std::int64_t rows_bad = 0;         // rows_in = rows_parsed + rows_bad
    std::int64_t rows_other_class = 0; // parsed but not "characteristic"
    std::int64_t samples_seen = 0;     // distinct sample ids over parsed rows
    std::int64_t samples_positive = 0; // distinct ids with >= 1 characteristic particle
    std::int64_t particles = 0;        // characteristic rows consumed
    std::vector<std::string> bad_rows; // first few diagnostics
};

struct LoadResult {
    ObservedDataset data;
    CountDistribution counts;
    IngestReport report;
};

LoadResult load_particle_file(const std::string& path, bool allow_mixed_px = false);

struct SyntheticSpec {
    LogTParams params;
    CountDistribution counts;  // characteristic particles per bearing sample
    std::int64_t n_samples = 0;
    double pixel_area = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticSummary {
    std::int64_t samples = 0;
    std::int64_t positive_samples = 0;   // samples with >= 1 registered particle
    std::int64_t particles_written = 0;  // rows in the data file (B >= 1)
    std::int64_t particles_dropped = 0;  // B = 0 events, tallied in the sidecar
};

// Writes the data file (detected rows only) plus a ground-truth sidecar with
// columns sample_id, true_area_um2, registered_b_pixels for every particle.
SyntheticSummary generate_synthetic(const SyntheticSpec& spec, const std::string& data_path,
                                    const std::string& sidecar_path,
                                    const std::vector<std::string>& comment_lines = {});

// Detected registered sizes only: draws A from the size law, registers at a
// random offset, keeps b >= 1 until n_detected are collected. `dropped`
// returns the number of B = 0 events along the way.
std::vector<std::int64_t> sample_detected_b(const LogTParams& params, std::int64_t n_detected,
                                            double pixel_area, std::uint64_t seed,
                                            std::int64_t* dropped = nullptr);

// Assembles an ObservedDataset from registered pixel counts at one pixel size.
ObservedDataset dataset_from_pixels(const std::vector<std::int64_t>& b_pixels,
                                    double pixel_area);

}  // namespace gsr
