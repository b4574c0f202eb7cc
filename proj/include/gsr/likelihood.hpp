#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gsr/grid.hpp"

namespace gsr {

enum class OffsetScheme { quasi_lattice, pseudo_random };

enum class AGridScheme { uniform, log_spaced };

std::string to_string(OffsetScheme s);
OffsetScheme offset_scheme_from_string(const std::string& s);

struct MeanCurve {
    std::vector<double> a_values;
    std::vector<double> mean_b;
    std::vector<double> mean_b_over_a;
};

// One A bin: P(covered_pixels = b_min + k) = p[k]. Entries outside [b_min,
// b_min + p.size()) are zero.
struct TableRow {
    double a = 0.0;  // in units of pixel_area
    std::int64_t b_min = 0;
    std::vector<double> p;

    double prob(std::int64_t b) const {
        const std::int64_t k = b - b_min;
        if (k < 0 || k >= static_cast<std::int64_t>(p.size())) return 0.0;
        return p[static_cast<std::size_t>(k)];
    }
};

struct TableConfig {
    double a_max = 12.0;
    int a_steps = 600;
    std::int64_t offsets_per_a = 4096;
    std::uint64_t seed = 0;
    OffsetScheme scheme = OffsetScheme::quasi_lattice;
    AGridScheme grid = AGridScheme::uniform;
    double a_min = 0.0;  // log grids need a positive lower edge
};

// Discretized P(B | A, px) over an A grid in units of px. Immutable once
// built; shares freely across threads.
class LikelihoodTable {
public:
    static LikelihoodTable build(const GridSpec& grid, const TableConfig& cfg);
    static LikelihoodTable load(const std::string& path);
    static LikelihoodTable load(std::istream& in);

    const GridSpec& grid() const { return grid_; }
    const TableConfig& config() const { return cfg_; }
    const std::vector<TableRow>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    std::int64_t max_b() const { return max_b_; }

    double a_value(std::size_t i) const { return rows_[i].a; }
    double a_top() const { return rows_.back().a; }
    double prob(std::size_t i, std::int64_t b) const { return rows_[i].prob(b); }

    // Interpolated P(B = 0 | A = a); monotone piecewise-linear, clamped to
    // [0, 1]; a above the grid returns 0, negative a is rejected.
    double p_b0(double a) const;

    // Column b as a function of A on the table grid (not normalized over A).
    std::vector<double> likelihood_slice(std::int64_t b) const;

    MeanCurve mean_curve() const;

    // Normalized density over the A grid for P(A | B = b) with the given
    // prior; throws if the normalizer vanishes (b unreachable under the prior).
    std::vector<double> posterior_slice(std::int64_t b,
                                        const std::function<double(double)>& prior) const;

    // CSV: metadata header row + values, then dense rows a_value, p_b0, p_b1, ...
    // Lines starting with '#' are ignored on load.
    void save(std::ostream& out) const;
    void save(const std::string& path, const std::vector<std::string>& comment_lines = {}) const;

private:
    LikelihoodTable(GridSpec grid, TableConfig cfg) : grid_(grid), cfg_(cfg) {}

    GridSpec grid_{1.0};
    TableConfig cfg_;
    std::vector<TableRow> rows_;
    std::int64_t max_b_ = 0;
};

// Offset sample over one pixel period on the unit grid, shared by every A bin
// so the per-offset monotonicity of registration carries over to the table.
std::vector<Offset> make_offsets(std::int64_t n, std::uint64_t seed, OffsetScheme scheme);

}  // namespace gsr
