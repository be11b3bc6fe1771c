#pragma once

// Parameter sweeps: 2-D spectrum maps, 1-D cuts, enhancement factors, the
// slow-period curve, and the peak utilities used to read features off them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "vaet/dynamics.hpp"
#include "vaet/errors.hpp"
#include "vaet/model.hpp"
#include "vaet/spectral.hpp"

namespace vaet {

enum class SweepParameter { gamma, nu, kappa, kbt, alpha, delta };

inline const char* to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::gamma: return "gamma";
        case SweepParameter::nu: return "nu";
        case SweepParameter::kappa: return "kappa";
        case SweepParameter::kbt: return "kbt";
        case SweepParameter::alpha: return "alpha";
        case SweepParameter::delta: return "delta";
    }
    return "?";
}

inline SweepParameter parse_sweep_parameter(std::string_view name) {
    for (auto p : {SweepParameter::gamma, SweepParameter::nu, SweepParameter::kappa,
                   SweepParameter::kbt, SweepParameter::alpha, SweepParameter::delta})
        if (name == to_string(p)) return p;
    throw InterfaceError("unknown sweep parameter '" + std::string(name) +
                         "' (expected gamma, nu, kappa, kbt, alpha or delta)");
}

/// Uniform grid start, start + step, ... up to stop (inclusive within 1e-9 steps).
struct Axis {
    SweepParameter param = SweepParameter::gamma;
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    [[nodiscard]] std::size_t size() const {
        if (!(step > 0.0) || !(stop >= start) || !std::isfinite(start) || !std::isfinite(stop))
            throw DomainError(std::string("axis ") + to_string(param) +
                              ": need step > 0 and stop >= start");
        return static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    }

    [[nodiscard]] double at(std::size_t i) const { return start + static_cast<double>(i) * step; }

    [[nodiscard]] std::vector<double> values() const {
        std::vector<double> v(size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = at(i);
        return v;
    }

    bool operator==(const Axis&) const = default;
};

struct ModelPoint {
    DimerParams dimer;
    VibrationParams vibration;

    bool operator==(const ModelPoint&) const = default;
};

inline void set_parameter(ModelPoint& m, SweepParameter p, double value) {
    switch (p) {
        case SweepParameter::gamma: m.dimer.gamma = value; break;
        case SweepParameter::nu: m.vibration.nu = value; break;
        case SweepParameter::kappa: m.vibration.kappa = value; break;
        case SweepParameter::kbt: m.vibration.kbt = value; break;
        case SweepParameter::alpha: m.dimer.alpha = value; break;
        case SweepParameter::delta: m.dimer.delta = value; break;
    }
}

enum class SweepKernel { automatic, propagator };

struct SweepOptions {
    double t_f = 22.5;
    double dt = 0.005;
    int threads = 1;
    SweepKernel kernel = SweepKernel::automatic;
    AcceptorObservable observable = AcceptorObservable::excited_acceptor;

    bool operator==(const SweepOptions&) const = default;
};

namespace cell_flags {
inline constexpr std::uint32_t fock_inadequate = 1u;  // n̄ >= N/5
inline constexpr std::uint32_t failed = 2u;
inline constexpr std::uint32_t propagator_fallback = 4u;  // spectral kernel declined the cell
}  // namespace cell_flags

struct CellResult {
    double x = 0.0;
    double y = 0.0;
    double p_final = std::numeric_limits<double>::quiet_NaN();
    double p_avg = std::numeric_limits<double>::quiet_NaN();
    double p_max = std::numeric_limits<double>::quiet_NaN();
    std::uint32_t flags = 0;
    std::string error;
};

/// P_a(t_f), P̄_a and max P_a on [0, t_f] for one parameter point.
inline CellResult evaluate_point(const ModelPoint& m, const SweepOptions& opt) {
    CellResult c;
    try {
        if (!(opt.t_f > 0.0) || !(opt.dt > 0.0))
            throw DomainError("sweep: need t_f > 0 and dt > 0");
        const auto h = full_hamiltonian(m.dimer, m.vibration);
        if (!m.vibration.truncation_adequate()) c.flags |= cell_flags::fock_inadequate;
        const long steps = static_cast<long>(std::ceil(opt.t_f / opt.dt - 1e-9));
        std::vector<double> times(static_cast<std::size_t>(steps) + 1);
        for (long k = 0; k <= steps; ++k) times[static_cast<std::size_t>(k)] = k * opt.dt;
        std::vector<double> series;
        if (opt.kernel == SweepKernel::automatic) {
            auto s = acceptor_series_spectral(h.matrix, thermal_weights(m.vibration), steps, opt.dt,
                                              {opt.observable});
            if (s.accepted) series = std::move(s.p_acceptor);
        }
        if (series.empty()) {
            if (opt.kernel == SweepKernel::automatic) c.flags |= cell_flags::propagator_fallback;
            EvolutionOptions eo;
            eo.observable = opt.observable;
            series = evolve_nonunitary(h.matrix, initial_state(m.vibration), times, eo).p_acceptor;
        }
        c.p_final = value_at(times, series, opt.t_f);
        c.p_avg = averaged_population(times, series, opt.t_f);
        c.p_max = 0.0;
        for (std::size_t k = 0; k < times.size() && times[k] <= opt.t_f + 1e-12; ++k)
            c.p_max = std::max(c.p_max, series[k]);
    } catch (const std::exception& e) {
        c.flags |= cell_flags::failed;
        c.error = e.what();
    }
    return c;
}

/// Runs fn(i) for i in [0, count) on `threads` workers. Each index is
/// processed exactly once; results must be written to disjoint slots.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

struct SpectrumMap {
    Axis x;
    Axis y;
    ModelPoint fixed;
    SweepOptions options;
    std::string version;
    std::vector<CellResult> cells;  // x-major: index = ix * ny + iy

    [[nodiscard]] std::size_t nx() const { return x.size(); }
    [[nodiscard]] std::size_t ny() const { return y.size(); }
    [[nodiscard]] const CellResult& at(std::size_t ix, std::size_t iy) const {
        return cells.at(ix * ny() + iy);
    }
    [[nodiscard]] std::size_t count_flagged(std::uint32_t flag) const {
        return static_cast<std::size_t>(
            std::count_if(cells.begin(), cells.end(), [&](const CellResult& c) { return c.flags & flag; }));
    }
};

#ifndef VAET_VERSION
#define VAET_VERSION "0.0.0"
#endif

inline SpectrumMap sweep_2d(const ModelPoint& fixed, const Axis& x, const Axis& y,
                            const SweepOptions& opt) {
    if (x.param == y.param) throw InterfaceError("sweep_2d: x and y must be different parameters");
    SpectrumMap map;
    map.x = x;
    map.y = y;
    map.fixed = fixed;
    map.options = opt;
    map.version = VAET_VERSION;
    const std::size_t nx = x.size();
    const std::size_t ny = y.size();
    map.cells.resize(nx * ny);
    parallel_for(nx * ny, opt.threads, [&](std::size_t i) {
        ModelPoint m = fixed;
        const double xv = x.at(i / ny);
        const double yv = y.at(i % ny);
        set_parameter(m, x.param, xv);
        set_parameter(m, y.param, yv);
        CellResult c = evaluate_point(m, opt);
        c.x = xv;
        c.y = yv;
        map.cells[i] = std::move(c);
    });
    return map;
}

struct Cut1D {
    SweepParameter fixed_axis = SweepParameter::nu;
    SweepParameter free_axis = SweepParameter::gamma;
    double requested = 0.0;
    double snapped = 0.0;
    double offset = 0.0;  // snapped - requested
    std::vector<double> coords;
    std::vector<double> p_final;
    std::vector<double> p_avg;
    std::vector<std::uint32_t> flags;
};

/// Curves along the other axis with `axis` held at the grid value nearest to
/// `value`.
inline Cut1D cut_1d(const SpectrumMap& map, SweepParameter axis, double value) {
    const bool on_x = axis == map.x.param;
    if (!on_x && axis != map.y.param)
        throw InterfaceError(std::string("cut_1d: axis '") + to_string(axis) + "' is not an axis of the map");
    const Axis& held = on_x ? map.x : map.y;
    const Axis& free = on_x ? map.y : map.x;
    const double pos = (value - held.start) / held.step;
    const auto idx = static_cast<std::size_t>(
        std::clamp<double>(std::llround(pos), 0.0, static_cast<double>(held.size() - 1)));
    Cut1D c;
    c.fixed_axis = axis;
    c.free_axis = free.param;
    c.requested = value;
    c.snapped = held.at(idx);
    c.offset = c.snapped - value;
    for (std::size_t k = 0; k < free.size(); ++k) {
        const CellResult& cell = on_x ? map.at(idx, k) : map.at(k, idx);
        c.coords.push_back(free.at(k));
        c.p_final.push_back(cell.p_final);
        c.p_avg.push_back(cell.p_avg);
        c.flags.push_back(cell.flags);
    }
    return c;
}

inline Cut1D cut_1d(const SpectrumMap& map, std::string_view axis, double value) {
    return cut_1d(map, parse_sweep_parameter(axis), value);
}

// ---------------------------------------------------------------------------
// Enhancement factor

inline constexpr double kDenominatorGuard = 1e-6;

struct EnhancementCurve {
    std::vector<double> gamma_grid;
    std::vector<double> factor_final;  // P_a(t_f, γ) / P_a(t_f, 0)
    std::vector<double> factor_avg;    // P̄_a(γ) / P̄_a(0)
    std::vector<double> p_final;
    std::vector<double> p_avg;
    std::vector<std::uint32_t> flags;
    double reference_final = 0.0;
    double reference_avg = 0.0;
    bool denominator_guard = false;  // a reference value fell below 1e-6
};

inline EnhancementCurve enhancement_factor(const ModelPoint& fixed,
                                           const std::vector<double>& gamma_grid,
                                           const SweepOptions& opt) {
    EnhancementCurve out;
    out.gamma_grid = gamma_grid;
    std::vector<CellResult> cells(gamma_grid.size() + 1);
    parallel_for(cells.size(), opt.threads, [&](std::size_t i) {
        ModelPoint m = fixed;
        m.dimer.gamma = i == 0 ? 0.0 : gamma_grid[i - 1];
        cells[i] = evaluate_point(m, opt);
    });
    const CellResult& ref = cells[0];
    if (ref.flags & cell_flags::failed)
        throw NumericError("enhancement_factor: Hermitian reference failed: " + ref.error);
    out.reference_final = ref.p_final;
    out.reference_avg = ref.p_avg;
    const bool guard_final = !(ref.p_final >= kDenominatorGuard);
    const bool guard_avg = !(ref.p_avg >= kDenominatorGuard);
    out.denominator_guard = guard_final || guard_avg;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const CellResult& c = cells[i];
        out.p_final.push_back(c.p_final);
        out.p_avg.push_back(c.p_avg);
        out.factor_final.push_back(guard_final ? nan : c.p_final / ref.p_final);
        out.factor_avg.push_back(guard_avg ? nan : c.p_avg / ref.p_avg);
        out.flags.push_back(c.flags | (out.denominator_guard ? cell_flags::failed : 0u));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Slow-oscillation period

struct PeriodFit {
    double c = 0.0;                  // least-squares coefficient of (γ* - γ)^{-1/2}
    double gamma_star = 0.0;
    double max_rel_deviation = 0.0;  // of T* against the reference curve
    double reference_c = 2.23;
    double reference_gamma_star = 1.00778;
};

struct PeriodCurve {
    std::vector<double> gamma;
    std::vector<double> period;
    PeriodFit fit;
};

/// T* = 2π/|λ₄₂| per grid point plus the fit of c(γ* - γ)^{-1/2} (with the
/// closed-form γ*) and the deviation from reference_c (γ_ref - γ)^{-1/2}.
inline PeriodCurve period_curve(const DimerParams& base, const std::vector<double>& gamma_grid,
                                double reference_c = 2.23, double reference_gamma_star = 1.00778) {
    PeriodCurve out;
    DimerParams p = base;
    for (double g : gamma_grid) {
        p.gamma = g;
        out.gamma.push_back(g);
        out.period.push_back(slow_period(p));
    }
    out.fit.reference_c = reference_c;
    out.fit.reference_gamma_star = reference_gamma_star;
    out.fit.gamma_star = gamma_star_closed_form(base);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < out.gamma.size(); ++i) {
        const double u = 1.0 / std::sqrt(out.fit.gamma_star - out.gamma[i]);
        num += out.period[i] * u;
        den += u * u;
        const double ref = reference_c / std::sqrt(reference_gamma_star - out.gamma[i]);
        out.fit.max_rel_deviation =
            std::max(out.fit.max_rel_deviation, std::abs(out.period[i] - ref) / ref);
    }
    out.fit.c = den > 0.0 ? num / den : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Peak utilities

/// 3-point moving average; the end points average with their one neighbour.
inline std::vector<double> smooth3(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = v[i];
        int count = 1;
        if (i > 0) sum += v[i - 1], ++count;
        if (i + 1 < n) sum += v[i + 1], ++count;
        out[i] = sum / count;
    }
    return out;
}

/// Interior strict-left local maxima, ordered by decreasing value.
inline std::vector<std::size_t> local_maxima(const std::vector<double>& v) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 1; i + 1 < v.size(); ++i)
        if (v[i] > v[i - 1] && v[i] >= v[i + 1]) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return idx;
}

/// Vertex of the parabola through the three points around interior index i.
inline double refine_peak(const std::vector<double>& x, const std::vector<double>& v, std::size_t i) {
    if (i == 0 || i + 1 >= v.size()) return x[i];
    const double a = v[i - 1], b = v[i], c = v[i + 1];
    const double den = a - 2.0 * b + c;
    if (den == 0.0) return x[i];
    const double shift = 0.5 * (a - c) / den;
    return x[i] + std::clamp(shift, -1.0, 1.0) * (x[i + 1] - x[i]);
}

/// Full width at half maximum around index i, linearly interpolated; NaN when
/// the curve does not fall below half on both sides.
inline double fwhm(const std::vector<double>& x, const std::vector<double>& v, std::size_t i) {
    const double half = 0.5 * v[i];
    std::size_t l = i, r = i;
    while (l > 0 && v[l] > half) --l;
    while (r + 1 < v.size() && v[r] > half) ++r;
    if (v[l] > half || v[r] > half) return std::numeric_limits<double>::quiet_NaN();
    auto cross = [&](std::size_t a, std::size_t b) {
        return x[a] + (half - v[a]) * (x[b] - x[a]) / (v[b] - v[a]);
    };
    return cross(r - 1, r) - cross(l, l + 1);
}

}  // namespace vaet
