#pragma once

// CSV tables for every result type, atomic file writes and the JSON manifest
// that accompanies each data file.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaet/config.hpp"
#include "vaet/dynamics.hpp"
#include "vaet/errors.hpp"
#include "vaet/spectral.hpp"
#include "vaet/sweeps.hpp"

namespace vaet {

/// 12 significant digits, "nan"/"inf"/"-inf" for non-finite values.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        if (row.size() != header.size())
            throw ShapeError("csv: row has " + std::to_string(row.size()) + " fields, header has " +
                             std::to_string(header.size()));
        rows.push_back(std::move(row));
    }
};

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

/// RFC 4180: CRLF line endings, quoted fields where needed, header first.
inline std::string to_csv(const CsvTable& t) {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += csv_escape(fields[i]);
        }
        out += "\r\n";
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory: " + ec.message(), path.parent_path().string());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing", tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("write failed", tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("rename failed", path.string());
    }
}

inline void write_csv(const CsvTable& t, const std::filesystem::path& path) {
    atomic_write(path, to_csv(t));
}

// ---------------------------------------------------------------------------
// Schemas

inline CsvTable trajectory_table(const TrajectoryResult& r) {
    CsvTable t;
    t.header = {"t", "p_acceptor", "p_donor", "p_gg", "p_ee", "raw_trace", "mean_phonon",
                "top_fock_weight"};
    for (std::size_t i = 0; i < r.size(); ++i)
        t.add({format_real(r.times[i]), format_real(r.p_acceptor[i]), format_real(r.p_donor[i]),
               format_real(r.p_gg[i]), format_real(r.p_ee[i]), format_real(r.raw_trace[i]),
               format_real(r.mean_phonon[i]), format_real(r.top_fock_weight[i])});
    return t;
}

inline CsvTable sweep_table(const SpectrumMap& m) {
    CsvTable t;
    t.header = {"x", "y", "p_final", "p_avg", "flags"};
    for (const auto& c : m.cells)
        t.add({format_real(c.x), format_real(c.y), format_real(c.p_final), format_real(c.p_avg),
               std::to_string(c.flags)});
    return t;
}

inline CsvTable eigen_table(const SpectralDecomposition& s) {
    CsvTable t;
    t.header = {"index", "lambda_re", "lambda_im", "residual"};
    for (int j = 0; j < 4; ++j)
        t.add({std::to_string(j + 1), format_real(s.values.lambda[j].real()),
               format_real(s.values.lambda[j].imag()), format_real(s.residuals(j))});
    return t;
}

inline CsvTable eigen_table(const EigenSystem& s) {
    CsvTable t;
    t.header = {"index", "lambda_re", "lambda_im", "residual"};
    for (Index j = 0; j < s.size(); ++j)
        t.add({std::to_string(j + 1), format_real(s.values(j).real()), format_real(s.values(j).imag()),
               format_real(s.residuals(j))});
    return t;
}

inline CsvTable ep_table(const std::vector<EPReport>& reports) {
    CsvTable t;
    t.header = {"gamma_star", "order", "degeneracy", "transitions", "eigvec_min_angle"};
    for (const auto& r : reports)
        t.add({format_real(r.gamma_star), std::to_string(r.order_n), std::to_string(r.degeneracy_s),
               std::to_string(r.transition_count), format_real(r.eigvec_min_angle)});
    return t;
}

inline CsvTable cut_table(const Cut1D& c) {
    CsvTable t;
    t.header = {to_string(c.free_axis), "p_final", "p_avg", "flags"};
    for (std::size_t i = 0; i < c.coords.size(); ++i)
        t.add({format_real(c.coords[i]), format_real(c.p_final[i]), format_real(c.p_avg[i]),
               std::to_string(c.flags[i])});
    return t;
}

inline CsvTable enhancement_table(const EnhancementCurve& e) {
    CsvTable t;
    t.header = {"gamma", "p_final", "p_avg", "factor_final", "factor_avg", "flags"};
    for (std::size_t i = 0; i < e.gamma_grid.size(); ++i)
        t.add({format_real(e.gamma_grid[i]), format_real(e.p_final[i]), format_real(e.p_avg[i]),
               format_real(e.factor_final[i]), format_real(e.factor_avg[i]),
               std::to_string(e.flags[i])});
    return t;
}

inline CsvTable period_table(const PeriodCurve& p) {
    CsvTable t;
    t.header = {"gamma", "period"};
    for (std::size_t i = 0; i < p.gamma.size(); ++i)
        t.add({format_real(p.gamma[i]), format_real(p.period[i])});
    return t;
}

inline CsvTable trace_line_table(const ExceptionalLine& l) {
    CsvTable t;
    t.header = {"alpha", "gamma_star"};
    for (const auto& s : l.samples) t.add({format_real(s.alpha), format_real(s.gamma_star)});
    return t;
}

// ---------------------------------------------------------------------------
// Manifest

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double limit = 0.0;
};

struct RunManifest {
    std::string config_text;
    std::string task;
    std::string data_file;
    std::vector<CheckResult> checks;
    std::vector<std::string> warnings;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::ordered_json json_real(double v) {
    if (std::isfinite(v)) return v;
    return format_real(v);
}

inline std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = "vaet";
    j["version"] = VAET_VERSION;
    j["timestamp"] = utc_timestamp();
    j["task"] = m.task;
    j["data_file"] = m.data_file;
    j["config"] = m.config_text;
    auto checks = nlohmann::ordered_json::array();
    for (const auto& c : m.checks)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", json_real(c.value)},
                          {"limit", json_real(c.limit)}});
    j["checks"] = checks;
    j["warnings"] = m.warnings;
    if (!m.extra.empty()) j["details"] = m.extra;
    return j.dump(2) + "\n";
}

/// data.csv -> data.manifest.json
inline std::filesystem::path manifest_path(const std::filesystem::path& data) {
    std::filesystem::path p = data;
    p.replace_extension(".manifest.json");
    return p;
}

/// Writes the data file and its manifest.
inline void write_with_manifest(const CsvTable& t, const std::filesystem::path& path,
                                RunManifest manifest) {
    manifest.data_file = path.filename().string();
    write_csv(t, path);
    atomic_write(manifest_path(path), manifest_json(manifest));
}

}  // namespace vaet
