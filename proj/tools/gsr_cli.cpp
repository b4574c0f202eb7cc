// Command-line pipeline: likelihood tables, size-distribution fits, false
// negative sample curves, multi-resolution validation and synthetic data.
//
// Exit codes: 0 success, 2 usage error, 3 data validation error,
// 4 convergence failure.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gsr/fns.hpp"
#include "gsr/grid.hpp"
#include "gsr/ingest.hpp"
#include "gsr/inference.hpp"
#include "gsr/likelihood.hpp"
#include "gsr/sizedist.hpp"
#include "gsr/version.hpp"

namespace {

std::string g_command_line;

std::vector<std::string> metadata(std::uint64_t seed) {
    return {std::string("igsr-fns ") + gsr::kVersion, "command: " + g_command_line,
            "seed: " + std::to_string(seed)};
}

void write_header(std::ostream& out, std::uint64_t seed) {
    for (const auto& line : metadata(seed)) out << "# " << line << '\n';
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

gsr::CountDistribution parse_counts_spec(const std::string& spec) {
    // inline pmf: "1:0.8,2:0.15,3:0.05"
    gsr::CountDistribution d;
    std::istringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("bad counts spec entry: " + item);
        const std::int64_t n = std::stoll(item.substr(0, colon));
        const double p = std::stod(item.substr(colon + 1));
        d.pmf[n] = p;
        d.n_max = std::max(d.n_max, n);
    }
    d.validate();
    return d;
}

gsr::PosteriorDraws load_posterior(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open posterior file: " + path);
    gsr::PosteriorDraws draws;
    std::string line;
    bool header_seen = false;
    int max_chain = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("chain,", 0) != 0)
                throw std::runtime_error("posterior file missing header: " + path);
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string f;
        std::vector<std::string> parts;
        while (std::getline(row, f, ',')) parts.push_back(f);
        if (parts.size() != 5) throw std::runtime_error("malformed posterior row: " + line);
        gsr::PosteriorDraw d;
        d.chain = std::stoi(parts[0]);
        d.params = gsr::LogTParams{std::stod(parts[2]), std::stod(parts[3]), std::stod(parts[4])};
        max_chain = std::max(max_chain, d.chain);
        draws.draws.push_back(d);
    }
    if (draws.draws.empty()) throw std::runtime_error("posterior file has no draws: " + path);
    draws.chains = max_chain + 1;
    draws.diagnostics.converged = true;  // provenance lives in the source fit
    return draws;
}

void save_posterior(const std::string& path, const gsr::PosteriorDraws& draws,
                    std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    write_header(out, seed);
    out << "chain,iteration,mu,sigma,nu\n";
    int prev_chain = -1;
    long iter = 0;
    for (const auto& d : draws.draws) {
        if (d.chain != prev_chain) {
            prev_chain = d.chain;
            iter = 0;
        }
        out << d.chain << ',' << iter++ << ',' << fmt(d.params.mu) << ',' << fmt(d.params.sigma)
            << ',' << fmt(d.params.nu) << '\n';
    }
}

// Log-spaced fit table sized from the data: dense enough near the detection
// thresholds, reaching far enough that the erosion-free tail approximation
// carries negligible mass.
gsr::LikelihoodTable build_fit_table(double pixel_area, std::int64_t max_b,
                                     std::int64_t offsets_per_a, std::uint64_t seed) {
    gsr::TableConfig cfg;
    cfg.grid = gsr::AGridScheme::log_spaced;
    cfg.a_min = 0.05;
    cfg.a_max = std::max(1.0e4, 2.0 * static_cast<double>(max_b));
    cfg.a_steps = static_cast<int>(std::ceil(std::log(cfg.a_max / cfg.a_min) / 0.01));
    cfg.offsets_per_a = offsets_per_a;
    cfg.seed = seed;
    return gsr::LikelihoodTable::build(gsr::GridSpec(pixel_area), cfg);
}

int run(int argc, char** argv) {
    CLI::App app{"iGSR pixel-grid detection model: likelihood tables, size-distribution "
                 "fits and false-negative-sample probabilities"};
    app.require_subcommand(1);

    // build-likelihood
    auto* cmd_build = app.add_subcommand("build-likelihood", "Simulate P(B | A, px) over an A grid");
    double bl_px = 0.16, bl_amax = 12.0, bl_amin = 0.05;
    int bl_steps = 600;
    std::int64_t bl_offsets = 4096;
    std::uint64_t bl_seed = 0;
    std::string bl_out = "likelihood.csv", bl_scheme = "quasi-lattice", bl_grid = "uniform";
    cmd_build->add_option("--px", bl_px, "pixel area in um^2")->check(CLI::PositiveNumber);
    cmd_build->add_option("--a-max", bl_amax, "grid top in units of px")->check(CLI::PositiveNumber);
    cmd_build->add_option("--a-steps", bl_steps, "number of A bins");
    cmd_build->add_option("--offsets-per-a", bl_offsets, "offsets per A bin");
    cmd_build->add_option("--seed", bl_seed, "RNG seed")->required();
    cmd_build->add_option("--scheme", bl_scheme, "quasi-lattice | pseudo-random");
    cmd_build->add_option("--grid", bl_grid, "uniform | log");
    cmd_build->add_option("--a-min", bl_amin, "low edge for log grids");
    cmd_build->add_option("--out", bl_out, "output table path");

    // fit
    auto* cmd_fit = app.add_subcommand("fit", "Fit the log-t size law to registered areas");
    std::string fit_data, fit_table, fit_outdir = ".";
    int fit_chains = 4, fit_iters = 1000, fit_warmup = 1000;
    std::int64_t fit_offsets = 2048;
    std::uint64_t fit_seed = 0;
    bool fit_untruncated = false;
    std::int64_t fit_zero_count = 0;
    cmd_fit->add_option("--data", fit_data, "particle CSV")->required();
    cmd_fit->add_option("--table", fit_table, "likelihood table (built internally if omitted)");
    cmd_fit->add_option("--chains", fit_chains, "MCMC chains");
    cmd_fit->add_option("--iterations", fit_iters, "kept draws per chain");
    cmd_fit->add_option("--warmup", fit_warmup, "warmup iterations per chain");
    cmd_fit->add_option("--offsets-per-a", fit_offsets, "offsets per A bin for the internal table");
    cmd_fit->add_option("--seed", fit_seed, "RNG seed")->required();
    cmd_fit->add_option("--out-dir", fit_outdir, "output directory");
    cmd_fit->add_flag("--untruncated", fit_untruncated,
                      "do not condition the likelihood on detection (B >= 1)");
    cmd_fit->add_option("--zero-count", fit_zero_count,
                        "number of B = 0 events to score in untruncated mode");

    // fns
    auto* cmd_fns = app.add_subcommand("fns", "False-negative-sample probability vs pixel size");
    std::string fns_posterior, fns_data, fns_counts_spec, fns_out = "fns_curve.csv";
    double fns_px_min = 0.01, fns_px_max = 0.4;
    int fns_px_steps = 40;
    std::vector<double> fns_px;
    std::int64_t fns_offsets = 8192;
    int fns_a_steps = 600;
    std::uint64_t fns_seed = 0;
    cmd_fns->add_option("--posterior", fns_posterior, "posterior draws CSV")->required();
    cmd_fns->add_option("--data", fns_data, "particle CSV supplying the counts pmf");
    cmd_fns->add_option("--counts", fns_counts_spec, "inline counts pmf, e.g. 1:0.8,2:0.2");
    cmd_fns->add_option("--px", fns_px, "explicit pixel areas in um^2");
    cmd_fns->add_option("--px-min", fns_px_min, "range start in um^2");
    cmd_fns->add_option("--px-max", fns_px_max, "range end in um^2");
    cmd_fns->add_option("--px-steps", fns_px_steps, "points in the range");
    cmd_fns->add_option("--offsets-per-a", fns_offsets, "offsets per A bin");
    cmd_fns->add_option("--a-steps", fns_a_steps, "A bins of the detection table");
    cmd_fns->add_option("--seed", fns_seed, "RNG seed")->required();
    cmd_fns->add_option("--out", fns_out, "output curve path");

    // validate
    auto* cmd_validate = app.add_subcommand(
        "validate", "Push fine-resolution areas through the model at coarser pixel sizes");
    std::string val_base, val_outdir = ".";
    double val_px_min = 0.01;
    std::vector<double> val_targets;
    int val_reps = 64;
    std::uint64_t val_seed = 0;
    cmd_validate->add_option("--base", val_base, "particle CSV measured at --px-min")->required();
    cmd_validate->add_option("--px-min", val_px_min, "base pixel area in um^2");
    cmd_validate->add_option("--target", val_targets, "target pixel areas in um^2")->required();
    cmd_validate->add_option("--reps", val_reps, "offsets per particle");
    cmd_validate->add_option("--seed", val_seed, "RNG seed")->required();
    cmd_validate->add_option("--out-dir", val_outdir, "output directory");

    // simulate
    auto* cmd_sim = app.add_subcommand("simulate", "Generate a synthetic particle export");
    double sim_mu = 1.53, sim_sigma = 1.17, sim_nu = 76.0, sim_px = 0.16;
    std::int64_t sim_samples = 320;
    std::string sim_counts_spec = "1:1.0", sim_outdir = ".";
    std::uint64_t sim_seed = 0;
    cmd_sim->add_option("--mu", sim_mu, "log-t location");
    cmd_sim->add_option("--sigma", sim_sigma, "log-t scale")->check(CLI::PositiveNumber);
    cmd_sim->add_option("--nu", sim_nu, "log-t degrees of freedom")->check(CLI::PositiveNumber);
    cmd_sim->add_option("--px", sim_px, "pixel area in um^2")->check(CLI::PositiveNumber);
    cmd_sim->add_option("--n-samples", sim_samples, "number of samples");
    cmd_sim->add_option("--counts", sim_counts_spec, "counts pmf, e.g. 1:0.8,2:0.2");
    cmd_sim->add_option("--seed", sim_seed, "RNG seed")->required();
    cmd_sim->add_option("--out-dir", sim_outdir, "output directory");

    // measure
    auto* cmd_measure = app.add_subcommand("measure", "Register a single particle (debug)");
    double m_area = 1.0, m_px = 0.16, m_u = 0.0, m_v = 0.0;
    cmd_measure->add_option("--area", m_area, "particle area in um^2")->required();
    cmd_measure->add_option("--px", m_px, "pixel area in um^2")->required();
    cmd_measure->add_option("--u", m_u, "center offset u in um");
    cmd_measure->add_option("--v", m_v, "center offset v in um");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    namespace fs = std::filesystem;

    if (cmd_build->parsed()) {
        gsr::TableConfig cfg;
        cfg.a_max = bl_amax;
        cfg.a_steps = bl_steps;
        cfg.offsets_per_a = bl_offsets;
        cfg.seed = bl_seed;
        cfg.scheme = gsr::offset_scheme_from_string(bl_scheme);
        if (bl_grid == "log") {
            cfg.grid = gsr::AGridScheme::log_spaced;
            cfg.a_min = bl_amin;
        } else if (bl_grid != "uniform") {
            throw std::invalid_argument("unknown grid scheme: " + bl_grid);
        }
        const auto table = gsr::LikelihoodTable::build(gsr::GridSpec(bl_px), cfg);
        table.save(bl_out, metadata(bl_seed));
        std::cout << "wrote " << bl_out << " (" << table.size() << " A bins, max_b "
                  << table.max_b() << ")\n";
        return 0;
    }

    if (cmd_fit->parsed()) {
        const auto loaded = gsr::load_particle_file(fit_data);
        std::cout << "loaded " << loaded.report.particles << " characteristic particles from "
                  << loaded.report.samples_positive << " positive samples ("
                  << loaded.report.rows_bad << " bad rows)\n";
        const double px = loaded.data.pixel_area();
        std::int64_t max_b = 1;
        for (const auto& r : loaded.data.records) max_b = std::max(max_b, r.b_pixels);

        gsr::LikelihoodTable table =
            fit_table.empty() ? build_fit_table(px, max_b, fit_offsets, fit_seed)
                              : gsr::LikelihoodTable::load(fit_table);

        gsr::FitOptions opts;
        opts.chains = fit_chains;
        opts.iterations = fit_iters;
        opts.warmup = fit_warmup;
        opts.seed = fit_seed;
        opts.truncate = !fit_untruncated;
        opts.zero_count = fit_zero_count;
        const auto draws = gsr::fit(loaded.data, table, opts);
        const auto summary = gsr::goodness_of_fit(draws, loaded.data, table);

        fs::create_directories(fit_outdir);
        save_posterior((fs::path(fit_outdir) / "posterior.csv").string(), draws, fit_seed);
        {
            std::ofstream out(fs::path(fit_outdir) / "summary.txt");
            write_header(out, fit_seed);
            out << "mu_mean=" << fmt(summary.mu_mean) << "\nmu_sd=" << fmt(summary.mu_sd)
                << "\nsigma_mean=" << fmt(summary.sigma_mean)
                << "\nsigma_sd=" << fmt(summary.sigma_sd) << "\nnu_mean=" << fmt(summary.nu_mean)
                << "\nnu_sd=" << fmt(summary.nu_sd) << "\nr_squared=" << fmt(summary.r_squared)
                << "\nrhat_mu=" << fmt(summary.diagnostics.rhat_mu)
                << "\nrhat_sigma=" << fmt(summary.diagnostics.rhat_sigma)
                << "\nrhat_nu=" << fmt(summary.diagnostics.rhat_nu)
                << "\ness_mu=" << fmt(summary.diagnostics.ess_mu)
                << "\ness_sigma=" << fmt(summary.diagnostics.ess_sigma)
                << "\ness_nu=" << fmt(summary.diagnostics.ess_nu)
                << "\nconverged=" << (summary.diagnostics.converged ? "true" : "false") << '\n';
        }
        std::cout << "mu = " << summary.mu_mean << " +/- " << summary.mu_sd
                  << ", sigma = " << summary.sigma_mean << " +/- " << summary.sigma_sd
                  << ", nu = " << summary.nu_mean << " +/- " << summary.nu_sd
                  << ", R^2 = " << summary.r_squared << '\n';
        if (!draws.diagnostics.converged) {
            std::cerr << "fit did not converge: max split-Rhat = "
                      << draws.diagnostics.max_rhat() << " (threshold 1.05)\n";
            return 4;
        }
        return 0;
    }

    if (cmd_fns->parsed()) {
        const auto draws = load_posterior(fns_posterior);
        gsr::CountDistribution counts;
        if (!fns_counts_spec.empty()) {
            counts = parse_counts_spec(fns_counts_spec);
        } else if (!fns_data.empty()) {
            counts = gsr::load_particle_file(fns_data).counts;
        } else {
            throw std::invalid_argument("fns: provide --counts or --data");
        }
        if (fns_px.empty()) {
            for (int i = 0; i < fns_px_steps; ++i)
                fns_px.push_back(fns_px_min + (fns_px_max - fns_px_min) * i /
                                                  std::max(1, fns_px_steps - 1));
        }
        gsr::TableConfig cfg;
        cfg.a_steps = fns_a_steps;
        cfg.offsets_per_a = fns_offsets;
        cfg.seed = fns_seed;
        const auto table = gsr::LikelihoodTable::build(gsr::GridSpec(1.0), cfg);
        const auto curve = gsr::fns_curve(draws, counts, fns_px, table);

        std::ofstream out(fns_out);
        if (!out) throw std::runtime_error("cannot write: " + fns_out);
        write_header(out, fns_seed);
        out << "px_um2,p_b0_mean,p_fns_mean,p_fns_lo90,p_fns_hi90\n";
        for (std::size_t i = 0; i < curve.px_values.size(); ++i)
            out << fmt(curve.px_values[i]) << ',' << fmt(curve.p_b0[i]) << ','
                << fmt(curve.p_fns[i]) << ',' << fmt(curve.lower[i]) << ','
                << fmt(curve.upper[i]) << '\n';
        std::cout << "wrote " << fns_out << " (" << curve.px_values.size() << " pixel sizes)\n";
        return 0;
    }

    if (cmd_validate->parsed()) {
        const auto loaded = gsr::load_particle_file(val_base);
        std::vector<double> base_areas;
        for (const auto& r : loaded.data.records) base_areas.push_back(r.b_area);
        const auto result = gsr::validate_multiresolution(base_areas, val_px_min, val_targets,
                                                          val_reps, val_seed);
        fs::create_directories(val_outdir);
        std::ofstream summary(fs::path(val_outdir) / "validation_summary.txt");
        write_header(summary, val_seed);
        for (std::size_t i = 0; i < result.targets.size(); ++i) {
            const auto& t = result.targets[i];
            std::string name = "validation_px" + std::to_string(i) + ".csv";
            std::ofstream out(fs::path(val_outdir) / name);
            write_header(out, val_seed);
            out << "b_pixels,predicted_freq\n";
            for (std::size_t b = 0; b < t.predicted.size(); ++b)
                out << b << ',' << fmt(t.predicted[b]) << '\n';
            summary << "target_px=" << fmt(t.pixel_area) << " file=" << name
                    << " support=" << t.predicted.size() << '\n';
        }
        std::cout << "wrote " << result.targets.size() << " histogram files to " << val_outdir
                  << '\n';
        return 0;
    }

    if (cmd_sim->parsed()) {
        gsr::SyntheticSpec spec;
        spec.params = gsr::LogTParams{sim_mu, sim_sigma, sim_nu};
        spec.counts = parse_counts_spec(sim_counts_spec);
        spec.n_samples = sim_samples;
        spec.pixel_area = sim_px;
        spec.seed = sim_seed;
        fs::create_directories(sim_outdir);
        const auto sum = gsr::generate_synthetic(
            spec, (fs::path(sim_outdir) / "particles.csv").string(),
            (fs::path(sim_outdir) / "particles_truth.csv").string(), metadata(sim_seed));
        std::cout << "samples=" << sum.samples << " positive=" << sum.positive_samples
                  << " written=" << sum.particles_written
                  << " dropped=" << sum.particles_dropped << '\n';
        return 0;
    }

    if (cmd_measure->parsed()) {
        const gsr::GridSpec grid(m_px);
        const auto reg = gsr::register_particle(gsr::Particle(m_area), grid,
                                                gsr::Offset{m_u, m_v});
        std::cout << "covered_pixels=" << reg.covered_pixels << " b_um2=" << fmt(reg.area_b)
                  << '\n';
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::ostringstream cmd;
    for (int i = 0; i < argc; ++i) cmd << (i ? " " : "") << argv[i];
    g_command_line = cmd.str();
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
