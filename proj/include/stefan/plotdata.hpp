#pragma once

// Reshapes run artifacts into whitespace-separated series for external
// plotting tools. Everything is written below <run-dir>/plot/.

#include "stefan/error.hpp"
#include "stefan/runner.hpp"
#include "stefan/uq.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace stefan {

/// Numeric CSV table with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ConfigError("column '" + name + "' not found", "plot.missing");
    }
};

inline CsvTable read_csv(const fs::path& path) {
    std::istringstream in(read_file(path));
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty", "plot.missing");
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line)) row.push_back(std::stod(cell));
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace detail {

/// Groups rows by the value of `key`, preserving first-appearance order.
inline std::vector<std::pair<double, std::vector<const std::vector<double>*>>> group_by(const CsvTable& t,
                                                                                      std::size_t key) {
    std::vector<std::pair<double, std::vector<const std::vector<double>*>>> out;
    std::map<double, std::size_t> index;
    for (const auto& r : t.rows) {
        auto [it, fresh] = index.emplace(r[key], out.size());
        if (fresh) out.push_back({r[key], {}});
        out[it->second].second.push_back(&r);
    }
    return out;
}

inline void write_text(const fs::path& p, const std::string& s, std::vector<std::string>& written) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << s;
    written.push_back(p.string());
}

/// Columns: first the shared coordinate, then one per group.
inline std::string wide(const CsvTable& t, const std::string& group, const std::string& coord,
                        const std::string& value) {
    auto groups = group_by(t, t.col(group));
    const std::size_t c = t.col(coord), v = t.col(value);
    std::ostringstream os;
    os << "# " << coord;
    for (const auto& g : groups) os << " " << group << "=" << format_double(g.first);
    os << "\n";
    const std::size_t n = groups.empty() ? 0 : groups.front().second.size();
    for (std::size_t i = 0; i < n; ++i) {
        os << format_double((*groups.front().second[i])[c]);
        for (const auto& g : groups) os << " " << format_double((*g.second.at(i))[v]);
        os << "\n";
    }
    return os.str();
}

inline std::string columns(const CsvTable& t, const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    std::ostringstream os;
    os << "#";
    for (const auto& n : names) {
        idx.push_back(t.col(n));
        os << " " << n;
    }
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? " " : "") << format_double(r[idx[i]]);
        os << "\n";
    }
    return os.str();
}

} // namespace detail

/// Writes plot-ready files for the run in `dir`; returns the paths written.
inline std::vector<std::string> emit_plot_data(const fs::path& dir, int bins = 30) {
    const fs::path manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) throw ConfigError("'" + dir.string() + "' has no manifest.json", "plot.missing");
    auto m = nlohmann::json::parse(read_file(manifest));
    if (m.value("status", "") != "ok") throw ConfigError("run in '" + dir.string() + "' did not complete", "plot.missing");
    const std::string mode = m.at("mode");

    std::map<std::string, std::vector<std::string>> expected{
        {"simulate1d", {"interface.csv", "profiles.csv"}},
        {"simulate2d", {"interface2d.csv", "modes.csv"}},
        {"uq1d", {"statistics.csv", "archive.csv"}},
        {"uq2d", {"statistics.csv", "archive.csv"}},
        {"oracle", {"oracle.csv"}},
        {"audit", {"audit.csv"}},
    };
    std::string missing;
    for (const auto& f : expected.at(mode))
        if (!fs::exists(dir / f)) missing += (missing.empty() ? "" : ", ") + f;
    if (!missing.empty()) throw ConfigError("missing artifacts in '" + dir.string() + "': " + missing, "plot.missing");

    const fs::path out = dir / "plot";
    std::vector<std::string> written;
    using detail::write_text;

    if (mode == "simulate1d") {
        auto prof = read_csv(dir / "profiles.csv");
        write_text(out / "profiles.dat", detail::wide(prof, "tau", "z", "phi"), written);
        write_text(out / "temperature.dat", detail::wide(prof, "tau", "z", "theta"), written);
        write_text(out / "interface.dat",
                   detail::columns(read_csv(dir / "interface.csv"), {"tau", "s_phys", "length", "s_star"}), written);
    } else if (mode == "simulate2d") {
        auto curves = read_csv(dir / "interface2d.csv");
        write_text(out / "curves.dat", detail::wide(curves, "tau", "y", "s_phys"), written);
        write_text(out / "modes.dat", detail::columns(read_csv(dir / "modes.csv"), {"tau", "mean_s_phys", "dominant_mode"}),
                   written);
    } else if (mode == "uq1d" || mode == "uq2d") {
        auto stats = read_csv(dir / "statistics.csv");
        const bool two_d = mode == "uq2d";
        std::ostringstream band;
        band << (two_d ? "# tau y mean mean-std mean+std\n" : "# tau mean mean-std mean+std\n");
        const std::size_t ct = stats.col("tau"), cm = stats.col("mean"), cs = stats.col("std");
        for (const auto& r : stats.rows) {
            band << format_double(r[ct]);
            if (two_d) band << " " << format_double(r[stats.col("y")]);
            band << " " << format_double(r[cm]) << " " << format_double(r[cm] - r[cs]) << " "
                 << format_double(r[cm] + r[cs]) << "\n";
        }
        write_text(out / "band.dat", band.str(), written);
        if (two_d) {
            write_text(out / "moments.dat", detail::columns(stats, {"tau", "y", "skewness", "kurtosis", "sample_std"}),
                       written);
            // Histograms per (tau, y) from the raw archive.
            auto arch = read_csv(dir / "archive.csv");
            const std::size_t at = arch.col("tau"), ay = arch.col("y"), as = arch.col("s_phys");
            std::map<std::pair<double, double>, std::vector<double>> cells;
            for (const auto& r : arch.rows) cells[{r[at], r[ay]}].push_back(r[as]);
            for (const auto& [key, values] : cells) {
                auto h = histogram(values, bins);
                std::ostringstream os;
                os << "# bin_lo bin_hi count\n";
                for (std::size_t b = 0; b < h.counts.size(); ++b)
                    os << format_double(h.edges[b]) << " " << format_double(h.edges[b + 1]) << " " << h.counts[b] << "\n";
                write_text(out / "histograms" / ("tau_" + label(key.first) + "_y_" + label(key.second) + ".dat"),
                           os.str(), written);
            }
        }
    } else if (mode == "oracle") {
        write_text(out / "oracle.dat",
                   detail::columns(read_csv(dir / "oracle.csv"), {"tau", "s_analytic", "s_numeric", "rel_error"}), written);
    } else {
        write_text(out / "audit.dat",
                   detail::columns(read_csv(dir / "audit.csv"), {"level", "dz", "tau", "enthalpy", "scaled_residual"}),
                   written);
    }
    return written;
}

} // namespace stefan
