#pragma once

// Task dispatch for the command-line tool: runs one configured task, writes
// its CSV and manifest, and maps error classes onto exit codes.

#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "vaet/config.hpp"
#include "vaet/csv.hpp"
#include "vaet/dynamics.hpp"
#include "vaet/errors.hpp"
#include "vaet/model.hpp"
#include "vaet/spectral.hpp"
#include "vaet/sweeps.hpp"

namespace vaet {

inline constexpr const char* kOutDirEnv = "VAET_OUT_DIR";

/// --out, then $VAET_OUT_DIR, then output.dir from the config, then the
/// working directory.
inline std::filesystem::path resolve_output_dir(const std::string& cli_out, const RunConfig& c) {
    if (!cli_out.empty()) return cli_out;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    if (!c.output.dir.empty()) return c.output.dir;
    return ".";
}

struct RunReport {
    int exit_code = 0;
    std::vector<std::filesystem::path> files;
    std::string message;
};

namespace detail {

inline void add_check(RunManifest& m, std::string name, bool passed, double value, double limit) {
    if (!passed) m.warnings.push_back("check failed: " + name);
    m.checks.push_back({std::move(name), passed, value, limit});
}

inline void unit_details(const RunConfig& c, RunManifest& m) {
    if (c.j_in_khz <= 0.0) return;
    m.extra["units"] = {{"j_in_khz", c.j_in_khz},
                        {"energy_unit_khz", c.j_in_khz},
                        {"time_unit_ms", 1.0 / (2.0 * std::numbers::pi * c.j_in_khz)}};
}

inline void fock_check(const VibrationParams& v, RunManifest& m) {
    add_check(m, "fock_adequacy", v.truncation_adequate(), v.mean_thermal_occupation(),
              v.fock_dim / 5.0);
}

inline std::vector<double> grid_of(const Range& r) { return r.values(); }

struct TaskContext {
    const RunConfig& config;
    std::filesystem::path dir;
    std::string prefix;
    std::ostream& log;
    RunReport& report;

    RunManifest manifest() const {
        RunManifest m;
        m.config_text = serialize(config);
        m.task = to_string(config.task);
        unit_details(config, m);
        return m;
    }

    void emit(const CsvTable& t, RunManifest m, const std::string& suffix = {}) {
        const auto path = dir / (prefix + suffix + ".csv");
        write_with_manifest(t, path, std::move(m));
        report.files.push_back(path);
        report.files.push_back(manifest_path(path));
        log << "wrote " << path.string() << "\n";
    }
};

inline void run_eigen(TaskContext& ctx) {
    const auto& c = ctx.config;
    const auto sd = dimer_spectrum_numeric(c.dimer);
    const auto cf = dimer_spectrum_closed_form(c.dimer);
    RunManifest m = ctx.manifest();
    double dev = 0.0;
    for (int j = 1; j <= 4; ++j) dev = std::max(dev, std::abs(sd.values(j) - cf(j)));
    add_check(m, "residuals_certified", sd.certified, sd.residuals.maxCoeff(), kResidualTolerance);
    add_check(m, "closed_form_agreement", dev <= 1e-8, dev, 1e-8);
    ctx.emit(eigen_table(sd), std::move(m));
}

inline void run_ep(TaskContext& ctx) {
    const auto& c = ctx.config;
    std::vector<EPReport> reports;
    if (c.dimer.delta == 0.0)
        reports = classify_delta_zero(c.dimer.j_tunnel, c.dimer.alpha);
    else
        reports.push_back(find_ep(c.dimer));
    RunManifest m = ctx.manifest();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        const std::string tag = reports.size() > 1 ? "[" + std::to_string(i) + "]" : "";
        add_check(m, "eigvec_angle" + tag, r.eigvec_min_angle <= kEigvecAngleTolerance,
                  r.eigvec_min_angle, kEigvecAngleTolerance);
        add_check(m, "eigenvalue_gap" + tag, r.min_gap < kEPGapTolerance * std::max(1.0, r.matrix_norm),
                  r.min_gap, kEPGapTolerance * std::max(1.0, r.matrix_norm));
        if (!r.note.empty()) m.warnings.push_back(r.note);
    }
    ctx.emit(ep_table(reports), std::move(m));
}

inline void run_trace_line(TaskContext& ctx) {
    const auto& c = ctx.config;
    const auto line = trace_exceptional_line(c.dimer.delta, grid_of(c.trace_alpha), c.dimer.j_tunnel);
    RunManifest m = ctx.manifest();
    add_check(m, "monotone_increase", true, static_cast<double>(line.samples.size()), 0.0);
    ctx.emit(trace_line_table(line), std::move(m));
}

inline void trajectory_checks(const TrajectoryResult& r, const DensityInvariants& worst,
                              RunManifest& m) {
    add_check(m, "trace", worst.trace_error <= 1e-10, worst.trace_error, 1e-10);
    add_check(m, "hermiticity", worst.hermiticity_error <= 1e-10, worst.hermiticity_error, 1e-10);
    add_check(m, "positivity", worst.min_eigenvalue >= -1e-8, worst.min_eigenvalue, -1e-8);
    const double sum = r.max_population_sum_error();
    add_check(m, "population_sum", sum <= 1e-10, sum, 1e-10);
    add_check(m, "top_fock_weight", !r.truncation_flagged(), r.max_top_fock_weight(), kTopFockTolerance);
    for (const auto& w : r.warnings) m.warnings.push_back(w);
}

/// Observer that folds every sampled state into the worst-case invariants.
inline EvolutionOptions watched(AcceptorObservable obs, DensityInvariants& worst) {
    EvolutionOptions eo;
    eo.observable = obs;
    eo.observe_stride = 50;
    worst.min_eigenvalue = 0.0;
    eo.observer = [&worst](double, const ComplexMatrix& rho) {
        const auto d = check_density(rho);
        worst.trace_error = std::max(worst.trace_error, d.trace_error);
        worst.hermiticity_error = std::max(worst.hermiticity_error, d.hermiticity_error);
        worst.min_eigenvalue = std::min(worst.min_eigenvalue, d.min_eigenvalue);
    };
    return eo;
}

inline void run_dynamics(TaskContext& ctx) {
    const auto& c = ctx.config;
    const auto h = full_hamiltonian(c.dimer, c.vibration);
    DensityInvariants worst;
    const auto r = evolve_nonunitary(h.matrix, initial_state(c.vibration),
                                     uniform_grid(c.evolution.t_end, c.evolution.dt),
                                     watched(c.evolution.observable, worst));
    RunManifest m = ctx.manifest();
    fock_check(c.vibration, m);
    trajectory_checks(r, worst, m);
    m.extra["observable"] = to_string(r.observable);
    ctx.emit(trajectory_table(r), std::move(m));
}

inline void run_lindblad(TaskContext& ctx) {
    const auto& c = ctx.config;
    const auto h = full_hamiltonian(c.dimer, c.vibration);
    DensityInvariants worst;
    LindbladOptions lo;
    lo.evolution = watched(c.evolution.observable, worst);
    const auto r = evolve_lindblad(h.matrix, c.dissipation, initial_state(c.vibration),
                                   uniform_grid(c.evolution.t_end, c.evolution.dt), lo);
    RunManifest m = ctx.manifest();
    fock_check(c.vibration, m);
    trajectory_checks(r, worst, m);
    m.extra["observable"] = to_string(r.observable);
    m.extra["rk4_substeps"] = r.substeps;
    ctx.emit(trajectory_table(r), std::move(m));
}

inline void map_checks(const SpectrumMap& map, RunManifest& m) {
    const auto failed = map.count_flagged(cell_flags::failed);
    add_check(m, "failed_cells", failed == 0, static_cast<double>(failed), 0.0);
    const auto fock = map.count_flagged(cell_flags::fock_inadequate);
    add_check(m, "fock_inadequate_cells", fock == 0, static_cast<double>(fock), 0.0);
    m.extra["propagator_fallback_cells"] = map.count_flagged(cell_flags::propagator_fallback);
    for (const auto& cell : map.cells)
        if (!cell.error.empty()) {
            m.warnings.push_back("first failed cell: " + cell.error);
            break;
        }
}

inline void run_sweep(TaskContext& ctx) {
    const auto& c = ctx.config;
    const auto map = sweep_2d(c.model_point(), c.sweep.x, c.sweep.y, c.sweep_options());
    RunManifest m = ctx.manifest();
    map_checks(map, m);
    ctx.emit(sweep_table(map), std::move(m));
}

/// Only the cut line is computed: the held axis collapses to its grid value
/// nearest the requested one.
inline void run_cut(TaskContext& ctx) {
    const auto& c = ctx.config;
    const bool on_x = c.cut.axis == c.sweep.x.param;
    Axis held = on_x ? c.sweep.x : c.sweep.y;
    const Axis free = on_x ? c.sweep.y : c.sweep.x;
    const double pos = std::round((c.cut.value - held.start) / held.step);
    const double idx = std::clamp(pos, 0.0, static_cast<double>(held.size() - 1));
    held.start = held.at(static_cast<std::size_t>(idx));
    held.stop = held.start;
    const auto map = on_x ? sweep_2d(c.model_point(), held, free, c.sweep_options())
                          : sweep_2d(c.model_point(), free, held, c.sweep_options());
    const Cut1D cut = cut_1d(map, c.cut.axis, c.cut.value);
    RunManifest m = ctx.manifest();
    map_checks(map, m);
    m.extra["requested"] = cut.requested;
    m.extra["snapped"] = cut.snapped;
    if (cut.offset != 0.0)
        m.warnings.push_back("cut snapped to " + format_real(cut.snapped) + " (offset " +
                             format_real(cut.offset) + ")");
    ctx.emit(cut_table(cut), std::move(m));
}

inline void run_enhancement(TaskContext& ctx) {
    const auto& c = ctx.config;
    const auto e = enhancement_factor(c.model_point(), grid_of(c.enhancement_gamma), c.sweep_options());
    RunManifest m = ctx.manifest();
    fock_check(c.vibration, m);
    add_check(m, "denominator_guard", !e.denominator_guard,
              std::min(e.reference_final, e.reference_avg), kDenominatorGuard);
    m.extra["reference_final"] = json_real(e.reference_final);
    m.extra["reference_avg"] = json_real(e.reference_avg);
    ctx.emit(enhancement_table(e), std::move(m));
}

inline void run_period(TaskContext& ctx) {
    const auto& c = ctx.config;
    const auto p = period_curve(c.dimer, grid_of(c.period_gamma));
    RunManifest m = ctx.manifest();
    m.extra["fit_c"] = p.fit.c;
    m.extra["gamma_star"] = p.fit.gamma_star;
    m.extra["reference_c"] = p.fit.reference_c;
    m.extra["reference_gamma_star"] = p.fit.reference_gamma_star;
    add_check(m, "reference_deviation", p.fit.max_rel_deviation <= 0.02, p.fit.max_rel_deviation, 0.02);
    ctx.emit(period_table(p), std::move(m));
}

}  // namespace detail

inline int exit_code_of(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return err->exit_code();
    return 1;
}

/// Runs the configured task. Never throws; errors are reported on `log` and
/// through the exit code (parse 2, numeric 3, domain 4, io 5, other 1).
inline RunReport run(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
    RunReport report;
    try {
        detail::TaskContext ctx{config, out_dir,
                                config.output.prefix.empty() ? to_string(config.task) : config.output.prefix,
                                log, report};
        switch (config.task) {
            case Task::eigen: detail::run_eigen(ctx); break;
            case Task::ep: detail::run_ep(ctx); break;
            case Task::trace_line: detail::run_trace_line(ctx); break;
            case Task::dynamics: detail::run_dynamics(ctx); break;
            case Task::lindblad: detail::run_lindblad(ctx); break;
            case Task::sweep: detail::run_sweep(ctx); break;
            case Task::cut: detail::run_cut(ctx); break;
            case Task::enhancement: detail::run_enhancement(ctx); break;
            case Task::period: detail::run_period(ctx); break;
        }
    } catch (const std::exception& e) {
        report.exit_code = exit_code_of(e);
        report.message = e.what();
        log << "error: " << e.what() << "\n";
    }
    return report;
}

}  // namespace vaet
