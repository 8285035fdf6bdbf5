#pragma once

// Executes a RunConfig: dispatches to the solvers, writes CSV artifacts, and
// records a JSON manifest with content hashes and scalar metrics. Tolerance
// files (`metric = value +- tol`, `metric <= value`, `metric >= value`) are
// checked against those metrics.

#include "stefan/config.hpp"
#include "stefan/error.hpp"
#include "stefan/solver1d.hpp"
#include "stefan/solver2d.hpp"
#include "stefan/uq.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace stefan {

namespace fs = std::filesystem;

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 digest failed", "io.hash");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + p.string() + "'", "io.read");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Short label for a time or coordinate in metric names, e.g. 0.30000000000000004 -> "0.3".
inline std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Accumulates CSV rows with round-trip number formatting.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) {
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << "\n";
    }

    CsvWriter& row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            os_ << (first ? "" : ",") << format_double(v);
            first = false;
        }
        os_ << "\n";
        return *this;
    }

    CsvWriter& row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << format_double(values[i]);
        os_ << "\n";
        return *this;
    }

    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

struct RunReport {
    std::string mode;
    std::map<std::string, double> metrics;
    std::vector<std::string> notes;
    std::vector<std::string> files; ///< relative to the output directory, in write order
    nlohmann::json extra = nlohmann::json::object();
};

class ArtifactSink {
public:
    explicit ArtifactSink(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_))
            throw ConfigError("output directory '" + dir_.string() + "' is not writable", "config.output");
    }

    const fs::path& dir() const { return dir_; }

    void write(RunReport& report, const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        out << content;
        if (!out) throw ConfigError("cannot write '" + (dir_ / name).string() + "'", "config.output");
        report.files.push_back(name);
    }

private:
    fs::path dir_;
};

namespace detail {

inline void run_simulate1d(const RunConfig& cfg, ArtifactSink& sink, RunReport& rep) {
    const Grid1D grid = cfg.grid1d();
    auto res = run1d(grid, cfg.model, cfg.solver1d(), cfg.run_options());
    const auto& t = res.trace;
    auto regime = classify_regime(t, cfg.model.beta_hat);

    CsvWriter iface({"tau", "length", "s_star", "s_phys", "s_solidus", "s_liquidus", "v_est", "interface_dominated"});
    for (std::size_t k = 0; k < t.size(); ++k)
        iface.row({t.taus[k], t.length[k], t.s_star[k], t.s_phys[k], t.s_solidus[k], t.s_liquidus[k], t.v_est[k],
                   regime[k] == Regime::interface_dominated ? 1.0 : 0.0});
    sink.write(rep, "interface.csv", iface.str());

    CsvWriter prof({"tau", "z", "phi", "theta"});
    for (const auto& s : res.snapshots)
        for (int i = 0; i < grid.nodes; ++i)
            prof.row({s.tau, grid.z(i), s.phi[static_cast<std::size_t>(i)],
                      temperature_from_enthalpy(s.phi[static_cast<std::size_t>(i)])});
    sink.write(rep, "profiles.csv", prof.str());

    rep.metrics["final_tau"] = t.taus.back();
    rep.metrics["final_length"] = t.length.back();
    rep.metrics["final_s_star"] = t.s_star.back();
    rep.metrics["final_s_phys"] = t.s_phys.back();
    rep.notes.push_back(std::string("final regime: ") + to_string(regime.back()));
}

inline void run_simulate2d(const RunConfig& cfg, ArtifactSink& sink, RunReport& rep) {
    const Grid2D grid = cfg.grid2d();
    auto report = stability_check(grid, cfg.model, cfg.tau_end);
    rep.notes.push_back(report.describe());
    RunOptions run = cfg.run_options();
    run.keep_fields = false;
    auto res = run2d(grid, cfg.model, cfg.solver2d(), run);
    const auto& c = res.curve;

    CsvWriter curves({"tau", "y", "s_star", "s_phys"});
    for (std::size_t k = 0; k < c.size(); ++k)
        for (int j = 0; j < grid.ny; ++j)
            curves.row({c.taus[k], grid.y(j), c.s_star[k][static_cast<std::size_t>(j)], c.s_phys(k, static_cast<std::size_t>(j))});
    sink.write(rep, "interface2d.csv", curves.str());

    std::vector<std::string> header{"tau", "length", "mean_s_phys", "min_s_phys", "max_s_phys"};
    for (int m = 1; m <= cfg.max_mode; ++m) header.push_back("A" + std::to_string(m));
    header.push_back("dominant_mode");
    CsvWriter modes(header);

    std::vector<std::vector<double>> amp(c.size());
    std::vector<int> dominant(c.size());
    std::size_t peak = 0;
    double peak_amp = -1.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        auto s = c.s_phys_row(k);
        double mean = 0.0;
        for (std::size_t j = 0; j + 1 < s.size(); ++j) mean += s[j];
        mean /= static_cast<double>(s.size() - 1);
        auto [mn, mx] = std::minmax_element(s.begin(), s.end());
        std::vector<double> row{c.taus[k], c.length[k], mean, *mn, *mx};
        amp[k].resize(static_cast<std::size_t>(cfg.max_mode) + 1, 0.0);
        for (int m = 1; m <= cfg.max_mode; ++m) {
            amp[k][static_cast<std::size_t>(m)] = half_wave_amplitude(s, m);
            row.push_back(amp[k][static_cast<std::size_t>(m)]);
        }
        dominant[k] = dominant_half_wave_mode(s, cfg.max_mode);
        row.push_back(dominant[k]);
        modes.row(row);
        if (amp[k][static_cast<std::size_t>(dominant[k])] > peak_amp) {
            peak_amp = amp[k][static_cast<std::size_t>(dominant[k])];
            peak = k;
        }
    }
    sink.write(rep, "modes.csv", modes.str());

    // Shape metrics: the mode dominating the most heterogeneous snapshot, and
    // how its amplitude evolves over the last third of the run.
    const int mode = dominant[peak];
    const double t_late = c.taus.front() + 2.0 * (c.taus.back() - c.taus.front()) / 3.0;
    std::size_t k0 = 0;
    while (k0 + 1 < c.size() && c.taus[k0] < t_late) ++k0;
    double st = 0, sa = 0, stt = 0, sta = 0, n = 0;
    for (std::size_t k = k0; k < c.size(); ++k) {
        double a = amp[k][static_cast<std::size_t>(mode)];
        st += c.taus[k];
        sa += a;
        stt += c.taus[k] * c.taus[k];
        sta += c.taus[k] * a;
        n += 1;
    }
    double denom = n * stt - st * st;
    rep.metrics["dominant_mode"] = mode;
    rep.metrics["peak_amplitude"] = peak_amp;
    rep.metrics["peak_tau"] = c.taus[peak];
    rep.metrics["late_start_amplitude"] = amp[k0][static_cast<std::size_t>(mode)];
    rep.metrics["final_amplitude"] = amp.back()[static_cast<std::size_t>(mode)];
    rep.metrics["late_amplitude_drop"] = rep.metrics["late_start_amplitude"] - rep.metrics["final_amplitude"];
    rep.metrics["late_amplitude_slope"] = denom > 0 ? (n * sta - st * sa) / denom : 0.0;
    rep.metrics["final_mean_s_phys"] = std::accumulate(c.s_star.back().begin(), c.s_star.back().end() - 1, 0.0) /
                                       static_cast<double>(grid.ny - 1) * c.length.back();
    rep.metrics["stability_margin"] = report.margin;
}

inline void write_uq(const RunConfig& cfg, const UqResult& r, ArtifactSink& sink, RunReport& rep) {
    const auto& s = r.surrogate;
    const bool two_d = !r.ys.empty();
    const std::size_t ny = two_d ? r.ys.size() : 1;
    auto stats = statistics(s, cfg.histogram_bins);

    auto key = [&](std::vector<std::string> base) {
        base.insert(base.begin(), "tau");
        if (two_d) base.insert(base.begin() + 1, "y");
        return base;
    };
    auto lead = [&](std::size_t k, std::size_t j, std::vector<double> rest) {
        std::vector<double> row{r.taus[k]};
        if (two_d) row.push_back(r.ys[j]);
        row.insert(row.end(), rest.begin(), rest.end());
        return row;
    };

    CsvWriter st(key({"mean", "std", "sample_mean", "sample_std", "skewness", "kurtosis"}));
    CsvWriter hist(key({"bin_lo", "bin_hi", "count"}));
    for (std::size_t k = 0; k < r.taus.size(); ++k)
        for (std::size_t j = 0; j < ny; ++j) {
            const auto& c = stats[r.column(k, j)];
            st.row(lead(k, j, {c.mean, c.std, c.sample_mean, c.sample_std, c.skewness, c.kurtosis}));
            for (std::size_t b = 0; b < c.hist.counts.size(); ++b)
                hist.row(lead(k, j, {c.hist.edges[b], c.hist.edges[b + 1], static_cast<double>(c.hist.counts[b])}));
        }
    sink.write(rep, "statistics.csv", st.str());
    sink.write(rep, "histograms.csv", hist.str());

    std::vector<std::string> coef_header{"n"};
    for (const auto& p : cfg.random.params) coef_header.push_back("deg_" + p.name);
    coef_header.push_back("tau");
    if (two_d) coef_header.push_back("y");
    coef_header.push_back("c");
    CsvWriter coef(coef_header);
    const auto& idx = s.basis.indices();
    for (std::size_t n = 0; n < idx.size(); ++n)
        for (std::size_t k = 0; k < r.taus.size(); ++k)
            for (std::size_t j = 0; j < ny; ++j) {
                std::vector<double> row{static_cast<double>(n)};
                for (int d : idx[n]) row.push_back(d);
                row.push_back(r.taus[k]);
                if (two_d) row.push_back(r.ys[j]);
                row.push_back(s.coeffs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r.column(k, j))));
                coef.row(row);
            }
    sink.write(rep, "coefficients.csv", coef.str());

    // Long format: one row per sample and response column.
    std::vector<std::string> arch_header{"m"};
    for (const auto& p : cfg.random.params) arch_header.push_back(p.name);
    arch_header.push_back("tau");
    if (two_d) arch_header.push_back("y");
    arch_header.push_back("s_phys");
    CsvWriter arch(arch_header);
    for (Eigen::Index m = 0; m < s.samples.rows(); ++m)
        for (std::size_t k = 0; k < r.taus.size(); ++k)
            for (std::size_t j = 0; j < ny; ++j) {
                std::vector<double> row{static_cast<double>(m)};
                for (Eigen::Index d = 0; d < s.samples.cols(); ++d) row.push_back(s.samples(m, d));
                row.push_back(r.taus[k]);
                if (two_d) row.push_back(r.ys[j]);
                row.push_back(s.responses(m, static_cast<Eigen::Index>(r.column(k, j))));
                arch.row(row);
            }
    sink.write(rep, "archive.csv", arch.str());

    rep.metrics["samples"] = static_cast<double>(s.samples.rows());
    rep.metrics["basis_size"] = static_cast<double>(s.basis.size());
    rep.metrics["condition"] = s.condition;
    if (!two_d) {
        const auto& f = stats[r.column(r.taus.size() - 1)];
        rep.metrics["final_tau"] = r.taus.back();
        rep.metrics["mean_final"] = f.mean;
        rep.metrics["std_final"] = f.std;
        rep.metrics["sample_mean_final"] = f.sample_mean;
        rep.metrics["sample_std_final"] = f.sample_std;
    } else {
        for (std::size_t k = 0; k < r.taus.size(); ++k) {
            const std::string t = label(r.taus[k]);
            double skew = 0.0, kurt = 0.0;
            for (std::size_t j = 0; j < ny; ++j) {
                skew = std::max(skew, std::abs(stats[r.column(k, j)].skewness));
                kurt = std::max(kurt, std::abs(stats[r.column(k, j)].kurtosis - 3.0));
            }
            rep.metrics["max_abs_skewness@tau=" + t] = skew;
            rep.metrics["max_abs_excess_kurtosis@tau=" + t] = kurt;
            for (double y : {0.5, 1.0}) {
                auto j = static_cast<std::size_t>(std::lround(y * static_cast<double>(ny - 1)));
                const auto& c = stats[r.column(k, j)];
                const std::string at = "@tau=" + t + ",y=" + label(y);
                rep.metrics["mean" + at] = c.mean;
                rep.metrics["std" + at] = c.std;
                rep.metrics["sample_std" + at] = c.sample_std;
            }
        }
    }
    nlohmann::json campaign;
    campaign["samples"] = s.samples.rows();
    campaign["degree"] = s.basis.degree();
    campaign["basis_size"] = s.basis.size();
    campaign["condition"] = s.condition;
    campaign["seed"] = cfg.seed;
    campaign["pseudo_inverse"] = s.used_pseudo_inverse;
    campaign["sample_status"] = std::vector<std::string>(static_cast<std::size_t>(s.samples.rows()), "ok");
    rep.extra["campaign"] = campaign;
    for (const auto& n : r.notes) rep.notes.push_back(n);
}

inline void run_oracle(const RunConfig& cfg, ArtifactSink& sink, RunReport& rep) {
    auto sol = neumann_oracle(cfg.model);
    auto res = run1d(cfg.grid1d(), cfg.model, cfg.solver1d(), cfg.run_options());
    const auto& t = res.trace;
    CsvWriter out({"tau", "s_analytic", "s_numeric", "rel_error"});
    double worst = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        double exact = sol.interface(t.taus[k]);
        double rel = exact > 0.0 ? (t.s_phys[k] - exact) / exact : 0.0;
        out.row({t.taus[k], exact, t.s_phys[k], rel});
        if (t.taus[k] >= cfg.tau_from - 1e-12) worst = std::max(worst, std::abs(rel));
    }
    sink.write(rep, "oracle.csv", out.str());
    rep.metrics["lambda"] = sol.lambda;
    rep.metrics["max_rel_error"] = worst;
}

/// Per-step enthalpy balance on the configured grid. Returns the largest
/// residual over tau >= tau_from, scaled by E * dtau (open) or E (closed).
inline double audit_grid(const RunConfig& cfg, double dz, CsvWriter& csv, int level) {
    const Grid1D grid = Grid1D::uniform(dz, cfg.dtau, cfg.tau_end);
    const Solver1DOptions opts = cfg.solver1d();
    const bool closed = opts.far == FarBoundary::insulated;
    Solver1D solver(grid, cfg.model, opts);
    auto field = solver.initial_field();
    std::vector<Snapshot1D> pair{{field.tau, field.phi}, {}};
    const long every = std::max<long>(1, cfg.snapshot_every);
    double worst = 0.0;
    for (long k = 1; k <= grid.steps; ++k) {
        solver.step(field);
        if (k % every != 0 && k != grid.steps) continue;
        pair[1] = {field.tau, field.phi};
        auto a = energy_audit(pair, cfg.model, opts);
        const double dt = pair[1].tau - pair[0].tau;
        const double e = a.total_enthalpy[1];
        const double scaled = closed ? a.residual[0] / std::abs(e) : a.residual[0] / (std::abs(e) * dt);
        if (field.tau >= cfg.tau_from - 1e-12) worst = std::max(worst, std::abs(scaled));
        csv.row({static_cast<double>(level), dz, field.tau, e, a.residual[0], scaled});
        pair[0] = std::move(pair[1]);
    }
    return worst;
}

inline void run_audit(const RunConfig& cfg, ArtifactSink& sink, RunReport& rep) {
    CsvWriter csv({"level", "dz", "tau", "enthalpy", "residual", "scaled_residual"});
    const int levels = cfg.audit_variant == "closed" ? 1 : cfg.audit_levels;
    std::vector<double> worst;
    for (int l = 0; l < levels; ++l) {
        double dz = cfg.dz / std::pow(2.0, l);
        worst.push_back(audit_grid(cfg, dz, csv, l));
        rep.metrics["max_scaled_residual@dz=" + label(dz)] = worst.back();
    }
    sink.write(rep, "audit.csv", csv.str());
    rep.metrics["max_scaled_residual"] = worst.front();
    if (levels >= 2) {
        double order = std::numeric_limits<double>::infinity();
        for (std::size_t l = 1; l < worst.size(); ++l) order = std::min(order, std::log2(worst[l - 1] / worst[l]));
        rep.metrics["observed_order"] = order;
    }
}

} // namespace detail

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<fs::path> output;
};

inline RunConfig apply_overrides(RunConfig cfg, const RunOverrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (o.output) cfg.output = o.output->string();
    return cfg;
}

inline nlohmann::json manifest_json(const RunConfig& cfg, const RunReport& rep, const fs::path& dir,
                                    double wall_seconds, const Error* error) {
    nlohmann::json m;
    m["tool"] = "stefan";
    m["version"] = "1.0.0";
    m["mode"] = to_string(cfg.mode);
    m["seed"] = cfg.seed;
    m["threads"] = cfg.threads;
    m["config_sha256"] = sha256_hex(cfg.resolved());
    m["wall_time_s"] = wall_seconds;
    m["compiler"] = __VERSION__;
    m["status"] = error ? "error" : "ok";
    if (error)
        m["error"] = {{"code", static_cast<int>(error->code())}, {"tag", error->tag()}, {"message", error->what()}};
    m["metrics"] = rep.metrics;
    m["notes"] = rep.notes;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : rep.files) {
        std::string bytes = read_file(dir / f);
        files.push_back({{"path", f}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
    }
    m["files"] = files;
    for (auto& [k, v] : rep.extra.items()) m[k] = v;
    return m;
}

/// Runs `cfg`, writing every artifact and manifest.json into `dir`. Errors are
/// recorded in the manifest and rethrown.
inline RunReport run(const RunConfig& cfg, const fs::path& dir) {
    const auto start = std::chrono::steady_clock::now();
    ArtifactSink sink(dir);
    RunReport rep;
    rep.mode = to_string(cfg.mode);
    sink.write(rep, "resolved.cfg", cfg.resolved());
    auto finish = [&](const Error* err) {
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream(dir / "manifest.json") << manifest_json(cfg, rep, dir, wall, err).dump(2) << "\n";
    };
    try {
        switch (cfg.mode) {
        case Mode::simulate1d: detail::run_simulate1d(cfg, sink, rep); break;
        case Mode::simulate2d: detail::run_simulate2d(cfg, sink, rep); break;
        case Mode::uq1d:
            detail::write_uq(cfg,
                             run_uq_1d(cfg.random, cfg.model, cfg.grid1d(), cfg.solver1d(), cfg.run_options(),
                                       cfg.campaign()),
                             sink, rep);
            break;
        case Mode::uq2d:
            detail::write_uq(cfg,
                             run_uq_2d(cfg.random, cfg.model, cfg.grid2d(), cfg.solver2d(), cfg.run_options(),
                                       cfg.campaign()),
                             sink, rep);
            break;
        case Mode::oracle: detail::run_oracle(cfg, sink, rep); break;
        case Mode::audit: detail::run_audit(cfg, sink, rep); break;
        }
    } catch (const Error& e) {
        finish(&e);
        throw;
    } catch (const std::exception& e) {
        NumericalError wrapped(e.what(), "internal");
        finish(&wrapped);
        throw wrapped;
    }
    finish(nullptr);
    return rep;
}

// ---------------------------------------------------------------------------
// Tolerance files

struct ToleranceCheck {
    std::string metric;
    std::string op; ///< "+-", "<=", ">="
    double value = 0.0;
    double tol = 0.0;
    std::optional<double> actual;
    bool pass = false;

    std::string describe() const {
        std::ostringstream os;
        os << metric << " = " << (actual ? format_double(*actual) : std::string("missing"));
        if (op == "+-") os << " (expected " << format_double(value) << " +- " << format_double(tol) << ")";
        else os << " (expected " << op << " " << format_double(value) << ")";
        return os.str();
    }
};

inline std::vector<ToleranceCheck> parse_tolerances(const std::string& text) {
    std::vector<ToleranceCheck> out;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    auto number = [&](std::string s) {
        s = detail::trim(s);
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw ConfigError("tolerance line " + std::to_string(line) + ": bad number '" + s + "'", "config.parse");
        return v;
    };
    while (std::getline(in, raw)) {
        ++line;
        std::string text_line = detail::trim(std::string_view(raw).substr(0, raw.find('#')));
        if (text_line.empty()) continue;
        ToleranceCheck c;
        std::size_t pos;
        if ((pos = text_line.find("<=")) != std::string::npos || (pos = text_line.find(">=")) != std::string::npos) {
            c.op = text_line.substr(pos, 2);
            c.metric = detail::trim(std::string_view(text_line).substr(0, pos));
            c.value = number(text_line.substr(pos + 2));
        } else if ((pos = text_line.find('=')) != std::string::npos) {
            c.op = "+-";
            c.metric = detail::trim(std::string_view(text_line).substr(0, pos));
            std::string rest = text_line.substr(pos + 1);
            auto pm = rest.find("+-");
            if (pm == std::string::npos)
                throw ConfigError("tolerance line " + std::to_string(line) + ": expected 'value +- tol'", "config.parse");
            c.value = number(rest.substr(0, pm));
            c.tol = number(rest.substr(pm + 2));
        } else {
            throw ConfigError("tolerance line " + std::to_string(line) + ": expected a comparison", "config.parse");
        }
        if (c.metric.empty()) throw ConfigError("tolerance line " + std::to_string(line) + ": missing metric name", "config.parse");
        out.push_back(c);
    }
    return out;
}

inline std::vector<ToleranceCheck> check_tolerances(std::vector<ToleranceCheck> checks,
                                                    const std::map<std::string, double>& metrics) {
    for (auto& c : checks) {
        auto it = metrics.find(c.metric);
        if (it == metrics.end()) continue;
        c.actual = it->second;
        double a = it->second;
        if (c.op == "+-") c.pass = std::abs(a - c.value) <= c.tol;
        else if (c.op == "<=") c.pass = a <= c.value;
        else c.pass = a >= c.value;
    }
    return checks;
}

} // namespace stefan
