#pragma once

// Run configuration: a plain-text document of `key = value` lines grouped in
// [sections]. Comments start with '#' or ';'. Unknown sections and keys are
// rejected. Example:
//
//   task = dynamics
//   [dimer]
//   gamma = 0.99
//   [evolution]
//   t_end = 30
//
// Every omitted value takes its default (α=1, Δ=8, ν=16.12, κ=0.3, k_BT=40,
// N=50, t_f=22.5, all in units of J).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vaet/dynamics.hpp"
#include "vaet/errors.hpp"
#include "vaet/model.hpp"
#include "vaet/sweeps.hpp"

namespace vaet {

enum class Task { eigen, ep, trace_line, dynamics, lindblad, sweep, cut, enhancement, period };

inline const char* to_string(Task t) {
    switch (t) {
        case Task::eigen: return "eigen";
        case Task::ep: return "ep";
        case Task::trace_line: return "trace-line";
        case Task::dynamics: return "dynamics";
        case Task::lindblad: return "lindblad";
        case Task::sweep: return "sweep";
        case Task::cut: return "cut";
        case Task::enhancement: return "enhancement";
        case Task::period: return "period";
    }
    return "?";
}

inline std::optional<Task> parse_task(std::string_view s) {
    for (auto t : {Task::eigen, Task::ep, Task::trace_line, Task::dynamics, Task::lindblad,
                   Task::sweep, Task::cut, Task::enhancement, Task::period})
        if (s == to_string(t)) return t;
    return std::nullopt;
}

/// start:stop:step without a parameter name.
struct Range {
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    [[nodiscard]] std::vector<double> values() const {
        return Axis{SweepParameter::gamma, start, stop, step}.values();
    }

    bool operator==(const Range&) const = default;
};

struct EvolutionConfig {
    double t_f = 22.5;
    double dt = 0.005;
    double t_end = 30.0;
    AcceptorObservable observable = AcceptorObservable::excited_acceptor;

    bool operator==(const EvolutionConfig&) const = default;
};

struct SweepConfig {
    Axis x{SweepParameter::gamma, 0.0, 1.2, 0.005};
    Axis y{SweepParameter::nu, 4.0, 20.0, 0.04};
    int threads = 1;
    SweepKernel kernel = SweepKernel::automatic;

    bool operator==(const SweepConfig&) const = default;
};

struct CutConfig {
    SweepParameter axis = SweepParameter::nu;
    double value = 16.12;

    bool operator==(const CutConfig&) const = default;
};

struct OutputConfig {
    std::string dir;
    std::string prefix;

    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    Task task = Task::eigen;
    double j_in_khz = 0.0;  // 0: no dimensional display
    DimerParams dimer;
    VibrationParams vibration;
    DissipationParams dissipation;
    EvolutionConfig evolution;
    SweepConfig sweep;
    CutConfig cut;
    Range enhancement_gamma{0.0, 1.2, 0.005};
    Range period_gamma{0.0, 1.005, 0.005};
    Range trace_alpha{0.0, 1.0, 0.05};
    OutputConfig output;

    bool operator==(const RunConfig&) const = default;

    [[nodiscard]] ModelPoint model_point() const { return {dimer, vibration}; }

    [[nodiscard]] SweepOptions sweep_options() const {
        SweepOptions o;
        o.t_f = evolution.t_f;
        o.dt = evolution.dt;
        o.threads = sweep.threads;
        o.kernel = sweep.kernel;
        o.observable = evolution.observable;
        return o;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline double parse_double(std::string_view text, int line, const std::string& key) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    const auto res = std::from_chars(first, last, v);
    if (t.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
        throw ParseError("expected a finite number, got '" + t + "'", line, key);
    return v;
}

inline int parse_int(std::string_view text, int line, const std::string& key) {
    const std::string t = trim(text);
    int v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw ParseError("expected an integer, got '" + t + "'", line, key);
    return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i)
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    return out;
}

inline Range parse_range(std::string_view text, int line, const std::string& key) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ParseError("expected start:stop:step", line, key);
    Range r{parse_double(parts[0], line, key), parse_double(parts[1], line, key),
            parse_double(parts[2], line, key)};
    if (!(r.step > 0.0) || !(r.stop >= r.start))
        throw ParseError("range needs step > 0 and stop >= start", line, key);
    return r;
}

inline Axis parse_axis(std::string_view text, int line, const std::string& key) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ParseError("expected name:start:stop:step", line, key);
    SweepParameter p;
    try {
        p = parse_sweep_parameter(trim(text.substr(0, colon)));
    } catch (const InterfaceError& e) {
        throw ParseError(e.what(), line, key);
    }
    const Range r = parse_range(text.substr(colon + 1), line, key);
    return {p, r.start, r.stop, r.step};
}

/// Shortest text that parses back to exactly `v`.
inline std::string fmt_exact(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Applies one `section.key = value` assignment (section empty for top-level
/// keys). `line` is 0 for command-line overrides.
inline void apply_setting(RunConfig& c, const std::string& section, const std::string& key,
                          const std::string& value, int line) {
    using namespace detail;
    const std::string full = section.empty() ? key : section + "." + key;
    auto num = [&] { return parse_double(value, line, full); };
    auto unknown = [&] { throw ParseError("unknown key", line, full); };

    if (section.empty()) {
        if (key == "task") {
            const auto t = parse_task(trim(value));
            if (!t) throw ParseError("unknown task '" + trim(value) + "'", line, full);
            c.task = *t;
        } else if (key == "j_in_khz") {
            c.j_in_khz = num();
        } else {
            unknown();
        }
    } else if (section == "dimer") {
        if (key == "j_tunnel") c.dimer.j_tunnel = num();
        else if (key == "gamma") c.dimer.gamma = num();
        else if (key == "alpha") c.dimer.alpha = num();
        else if (key == "delta") c.dimer.delta = num();
        else unknown();
    } else if (section == "vibration") {
        if (key == "nu") c.vibration.nu = num();
        else if (key == "kappa") c.vibration.kappa = num();
        else if (key == "kbt") c.vibration.kbt = num();
        else if (key == "fock_dim") c.vibration.fock_dim = parse_int(value, line, full);
        else unknown();
    } else if (section == "dissipation") {
        if (key == "gamma_a") c.dissipation.gamma_a = num();
        else unknown();
    } else if (section == "evolution") {
        if (key == "t_f") c.evolution.t_f = num();
        else if (key == "dt") c.evolution.dt = num();
        else if (key == "t_end") c.evolution.t_end = num();
        else if (key == "observable") {
            const std::string v = trim(value);
            if (v == "excited_acceptor") c.evolution.observable = AcceptorObservable::excited_acceptor;
            else if (v == "ge_projector") c.evolution.observable = AcceptorObservable::ge_projector;
            else throw ParseError("expected excited_acceptor or ge_projector", line, full);
        } else unknown();
    } else if (section == "sweep") {
        if (key == "x") c.sweep.x = parse_axis(value, line, full);
        else if (key == "y") c.sweep.y = parse_axis(value, line, full);
        else if (key == "threads") c.sweep.threads = parse_int(value, line, full);
        else if (key == "kernel") {
            const std::string v = trim(value);
            if (v == "automatic") c.sweep.kernel = SweepKernel::automatic;
            else if (v == "propagator") c.sweep.kernel = SweepKernel::propagator;
            else throw ParseError("expected automatic or propagator", line, full);
        } else unknown();
    } else if (section == "cut") {
        if (key == "axis") {
            try {
                c.cut.axis = parse_sweep_parameter(trim(value));
            } catch (const InterfaceError& e) {
                throw ParseError(e.what(), line, full);
            }
        } else if (key == "value") c.cut.value = num();
        else unknown();
    } else if (section == "enhancement") {
        if (key == "gamma") c.enhancement_gamma = parse_range(value, line, full);
        else unknown();
    } else if (section == "period") {
        if (key == "gamma") c.period_gamma = parse_range(value, line, full);
        else unknown();
    } else if (section == "trace-line") {
        if (key == "alpha") c.trace_alpha = parse_range(value, line, full);
        else unknown();
    } else if (section == "output") {
        if (key == "dir") c.output.dir = trim(value);
        else if (key == "prefix") c.output.prefix = trim(value);
        else unknown();
    } else {
        throw ParseError("unknown section [" + section + "]", line, full);
    }
}

/// Physical and structural checks; failures surface as parse errors naming
/// the offending key and, when known, its line.
inline void validate_config(const RunConfig& c, const std::map<std::string, int>& lines = {}) {
    auto fail = [&](const std::string& key, const std::string& what) {
        const auto it = lines.find(key);
        throw ParseError(what, it == lines.end() ? 0 : it->second, key);
    };
    auto guard = [&](const std::string& section, auto&& fn) {
        try {
            fn();
        } catch (const ValidationError& e) {
            fail(section + "." + e.field(), e.what());
        }
    };
    guard("dimer", [&] { c.dimer.validate(); });
    guard("vibration", [&] { c.vibration.validate(); });
    guard("dissipation", [&] { c.dissipation.validate(); });
    if (!(c.evolution.dt > 0.0)) fail("evolution.dt", "must be > 0");
    if (!(c.evolution.t_f > 0.0)) fail("evolution.t_f", "must be > 0");
    if (!(c.evolution.t_end > 0.0)) fail("evolution.t_end", "must be > 0");
    if (c.j_in_khz < 0.0) fail("j_in_khz", "must be >= 0");
    if (c.sweep.threads < 1) fail("sweep.threads", "must be >= 1");
    if (c.sweep.x.param == c.sweep.y.param) fail("sweep.y", "must differ from sweep.x");
    for (const auto* ax : {&c.sweep.x, &c.sweep.y})
        if (!(ax->step > 0.0) || !(ax->stop >= ax->start))
            fail(ax == &c.sweep.x ? "sweep.x" : "sweep.y", "axis needs step > 0 and stop >= start");
    if (c.task == Task::cut && c.cut.axis != c.sweep.x.param && c.cut.axis != c.sweep.y.param)
        fail("cut.axis", "must be one of the sweep axes");
    if (c.task == Task::trace_line && !(c.dimer.delta > 0.0))
        fail("dimer.delta", "trace-line requires delta > 0");
}

/// Parses a configuration document, then applies `overrides` of the form
/// `key=value` or `section.key=value`.
inline RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {}) {
    RunConfig c;
    std::map<std::string, int> lines;
    std::string section;
    std::set<std::string> seen_sections;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t hash = raw.find_first_of("#;");
        const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError("malformed section header", line);
            section = detail::trim(s.substr(1, s.size() - 2));
            if (section.empty()) throw ParseError("empty section name", line);
            if (!seen_sections.insert(section).second)
                throw ParseError("duplicate section [" + section + "]", line, section);
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line);
        const std::string key = detail::trim(s.substr(0, eq));
        if (key.empty()) throw ParseError("empty key", line);
        const std::string full = section.empty() ? key : section + "." + key;
        if (lines.count(full)) throw ParseError("duplicate key", line, full);
        lines[full] = line;
        apply_setting(c, section, key, s.substr(eq + 1), line);
    }
    for (const auto& o : overrides) {
        const std::size_t eq = o.find('=');
        if (eq == std::string::npos) throw ParseError("override must be key=value", 0, o);
        const std::string path = detail::trim(o.substr(0, eq));
        const std::size_t dot = path.rfind('.');
        const std::string sec = dot == std::string::npos ? "" : path.substr(0, dot);
        const std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
        apply_setting(c, sec, key, o.substr(eq + 1), 0);
        lines.erase(path);
        lines[path] = 0;
    }
    if (!lines.count("task")) throw ParseError("missing task", 0, "task");
    validate_config(c, lines);
    return c;
}

/// Canonical text form; parse_config(serialize(c)) == c.
inline std::string serialize(const RunConfig& c) {
    using detail::fmt_exact;
    auto axis = [](const Axis& a) {
        return std::string(to_string(a.param)) + ":" + fmt_exact(a.start) + ":" + fmt_exact(a.stop) + ":" +
               fmt_exact(a.step);
    };
    auto range = [](const Range& r) {
        return fmt_exact(r.start) + ":" + fmt_exact(r.stop) + ":" + fmt_exact(r.step);
    };
    std::ostringstream o;
    o << "task = " << to_string(c.task) << "\n";
    o << "j_in_khz = " << fmt_exact(c.j_in_khz) << "\n";
    o << "\n[dimer]\n";
    o << "j_tunnel = " << fmt_exact(c.dimer.j_tunnel) << "\n";
    o << "gamma = " << fmt_exact(c.dimer.gamma) << "\n";
    o << "alpha = " << fmt_exact(c.dimer.alpha) << "\n";
    o << "delta = " << fmt_exact(c.dimer.delta) << "\n";
    o << "\n[vibration]\n";
    o << "nu = " << fmt_exact(c.vibration.nu) << "\n";
    o << "kappa = " << fmt_exact(c.vibration.kappa) << "\n";
    o << "kbt = " << fmt_exact(c.vibration.kbt) << "\n";
    o << "fock_dim = " << c.vibration.fock_dim << "\n";
    o << "\n[dissipation]\n";
    o << "gamma_a = " << fmt_exact(c.dissipation.gamma_a) << "\n";
    o << "\n[evolution]\n";
    o << "t_f = " << fmt_exact(c.evolution.t_f) << "\n";
    o << "dt = " << fmt_exact(c.evolution.dt) << "\n";
    o << "t_end = " << fmt_exact(c.evolution.t_end) << "\n";
    o << "observable = " << to_string(c.evolution.observable) << "\n";
    o << "\n[sweep]\n";
    o << "x = " << axis(c.sweep.x) << "\n";
    o << "y = " << axis(c.sweep.y) << "\n";
    o << "threads = " << c.sweep.threads << "\n";
    o << "kernel = " << (c.sweep.kernel == SweepKernel::automatic ? "automatic" : "propagator")
      << "\n";
    o << "\n[cut]\n";
    o << "axis = " << to_string(c.cut.axis) << "\n";
    o << "value = " << fmt_exact(c.cut.value) << "\n";
    o << "\n[enhancement]\ngamma = " << range(c.enhancement_gamma) << "\n";
    o << "\n[period]\ngamma = " << range(c.period_gamma) << "\n";
    o << "\n[trace-line]\nalpha = " << range(c.trace_alpha) << "\n";
    o << "\n[output]\n";
    if (!c.output.dir.empty()) o << "dir = " << c.output.dir << "\n";
    if (!c.output.prefix.empty()) o << "prefix = " << c.output.prefix << "\n";
    return o.str();
}

}  // namespace vaet
