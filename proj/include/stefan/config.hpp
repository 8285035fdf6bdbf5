#pragma once

// Run configuration: a flat `key = value` text format with `#` comments.
//
// A config either gives material constants (rho, c, k, latent_heat, T_0,
// T_initial, L_0, L_ref, optionally beta and eta in physical units) or the
// dimensionless values directly (theta_0, theta_initial, beta_hat, eta_hat,
// L0_star). beta_hat / eta_hat may be given alongside material constants and
// then take precedence. Random inputs are `param.<name> = uniform(a, b)` or
// `param.<name> = normal(mu, sigma)`.

#include "stefan/error.hpp"
#include "stefan/model.hpp"
#include "stefan/solver1d.hpp"
#include "stefan/solver2d.hpp"
#include "stefan/uq.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

namespace stefan {

enum class Mode { simulate1d, simulate2d, uq1d, uq2d, oracle, audit };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::simulate1d: return "simulate1d";
    case Mode::simulate2d: return "simulate2d";
    case Mode::uq1d: return "uq1d";
    case Mode::uq2d: return "uq2d";
    case Mode::oracle: return "oracle";
    default: return "audit";
    }
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw NumericalError("cannot format number");
    return std::string(buf, end);
}

struct RunConfig {
    Mode mode = Mode::simulate1d;
    DimlessConfig model;

    double dz = 0.01;
    double dy = 0.01;
    double dtau = 1e-4;
    double tau_end = 4.0;
    Scheme scheme = Scheme::implicit;
    int lag_iterations = 1;
    double interface_level = 0.0;
    long snapshot_every = 0;

    unsigned threads = 1;
    std::uint64_t seed = 1;
    std::string output;

    RandomInputSpec random;
    int degree = 4;
    std::size_t samples = 0;
    double oversampling = 2.0;
    int histogram_bins = 30;
    bool allow_pseudo_inverse = false;

    /// oracle: error window start. audit: transient excluded from the residual norm.
    double tau_from = 1.0;
    /// audit: "open" (injection + cold wall) or "closed" (both ends insulated).
    std::string audit_variant = "open";
    /// audit: number of grids in the refinement study (dz, dz/2, ...).
    int audit_levels = 3;
    /// simulate2d: largest half-wave mode reported.
    int max_mode = 10;

    /// Comments echoed at the top of the resolved config (original physical inputs).
    std::vector<std::string> provenance;

    bool is_2d() const { return mode == Mode::simulate2d || mode == Mode::uq2d; }
    bool is_uq() const { return mode == Mode::uq1d || mode == Mode::uq2d; }
    bool is_explicit() const { return is_2d() || scheme == Scheme::explicit_euler; }

    Grid1D grid1d() const { return Grid1D::uniform(dz, dtau, tau_end); }
    Grid2D grid2d() const { return Grid2D::uniform(dy, dz, dtau, tau_end); }

    Solver1DOptions solver1d() const {
        Solver1DOptions o;
        o.scheme = scheme;
        o.lag_iterations = lag_iterations;
        o.interface_level = interface_level;
        if (mode == Mode::audit && audit_variant == "closed") {
            o.wall = WallBoundary::insulated;
            o.far = FarBoundary::insulated;
        }
        return o;
    }

    Solver2DOptions solver2d() const {
        Solver2DOptions o;
        o.threads = threads;
        o.interface_level = interface_level;
        return o;
    }

    RunOptions run_options() const {
        RunOptions r;
        r.snapshot_every = snapshot_every;
        return r;
    }

    CampaignOptions campaign() const {
        CampaignOptions c;
        c.degree = degree;
        c.samples = samples;
        c.oversampling = oversampling;
        c.seed = seed;
        c.threads = threads;
        c.fit.allow_pseudo_inverse = allow_pseudo_inverse;
        return c;
    }

    void validate() const;

    /// Canonical text; loading it reproduces this configuration exactly.
    std::string resolved() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

class KeyValues {
public:
    explicit KeyValues(std::istream& in) {
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            auto hash = raw.find('#');
            std::string text = trim(std::string_view(raw).substr(0, hash));
            if (text.empty()) continue;
            auto eq = text.find('=');
            if (eq == std::string::npos) throw ConfigError(where(line) + "expected 'key = value'", "config.parse");
            std::string key = trim(std::string_view(text).substr(0, eq));
            std::string value = trim(std::string_view(text).substr(eq + 1));
            if (key.empty()) throw ConfigError(where(line) + "missing key", "config.parse");
            if (value.empty()) throw ConfigError(where(line) + "missing value for '" + key + "'", "config.parse");
            if (entries_.count(key)) throw ConfigError(where(line) + "duplicate key '" + key + "'", "config.parse");
            entries_[key] = {value, line};
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::optional<std::string> text(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    std::optional<double> number(const std::string& key) {
        auto v = text(key);
        if (!v) return std::nullopt;
        return parse_number(*v, key);
    }

    double parse_number(const std::string& v, const std::string& key) const {
        double out = 0.0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || p != v.data() + v.size())
            throw ConfigError(where(line_of(key)) + "'" + key + "' expects a number, got '" + v + "'", "config.parse");
        return out;
    }

    template <class Int>
    std::optional<Int> integer(const std::string& key) {
        auto v = text(key);
        if (!v) return std::nullopt;
        Int out{};
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc{} || p != v->data() + v->size())
            throw ConfigError(where(line_of(key)) + "'" + key + "' expects an integer, got '" + *v + "'",
                              "config.parse");
        return out;
    }

    std::optional<bool> boolean(const std::string& key) {
        auto v = text(key);
        if (!v) return std::nullopt;
        if (*v == "true") return true;
        if (*v == "false") return false;
        throw ConfigError(where(line_of(key)) + "'" + key + "' expects true or false", "config.parse");
    }

    /// Keys with the given prefix, in file order of appearance by line.
    std::vector<std::string> with_prefix(const std::string& prefix) const {
        std::vector<std::pair<int, std::string>> found;
        for (const auto& [k, e] : entries_)
            if (k.rfind(prefix, 0) == 0) found.emplace_back(e.line, k);
        std::sort(found.begin(), found.end());
        std::vector<std::string> out;
        for (auto& f : found) out.push_back(f.second);
        return out;
    }

    int line_of(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    void reject_unused() const {
        for (const auto& [k, e] : entries_)
            if (!e.used) throw ConfigError(where(e.line) + "unknown key '" + k + "'", "config.parse");
    }

    static std::string where(int line) { return line > 0 ? "line " + std::to_string(line) + ": " : ""; }

private:
    std::map<std::string, Entry> entries_;
};

inline Distribution parse_distribution(const std::string& text, const std::string& key, KeyValues& kv) {
    auto open = text.find('(');
    auto close = text.rfind(')');
    auto comma = text.find(',');
    if (open == std::string::npos || close != text.size() - 1 || comma == std::string::npos || comma > close)
        throw ConfigError(KeyValues::where(kv.line_of(key)) + "'" + key +
                              "' expects uniform(a, b) or normal(mu, sigma)",
                          "config.parse");
    std::string kind = trim(std::string_view(text).substr(0, open));
    double a = kv.parse_number(trim(std::string_view(text).substr(open + 1, comma - open - 1)), key);
    double b = kv.parse_number(trim(std::string_view(text).substr(comma + 1, close - comma - 1)), key);
    if (kind == "uniform") return Distribution::uniform(a, b);
    if (kind == "normal") return Distribution::normal(a, b);
    throw ConfigError(KeyValues::where(kv.line_of(key)) + "unknown distribution '" + kind + "'", "config.parse");
}

} // namespace detail

inline RunConfig parse_config(std::istream& in) {
    detail::KeyValues kv(in);
    RunConfig c;

    auto mode = kv.text("mode");
    if (!mode) throw ConfigError("missing required key 'mode'", "config.parse");
    bool known = false;
    for (Mode m : {Mode::simulate1d, Mode::simulate2d, Mode::uq1d, Mode::uq2d, Mode::oracle, Mode::audit})
        if (*mode == to_string(m)) {
            c.mode = m;
            known = true;
        }
    if (!known) throw ConfigError("line " + std::to_string(kv.line_of("mode")) + ": unknown mode '" + *mode + "'",
                                  "config.parse");

    static const char* physical_keys[] = {"rho", "c", "k", "latent_heat", "T_0", "T_initial", "T_m", "L_0", "beta", "eta"};
    bool physical = false;
    for (const char* k : physical_keys) physical = physical || kv.has(k);

    if (physical) {
        PhysicalParams p;
        auto set = [&](const char* key, double& field) {
            if (auto v = kv.number(key)) field = *v;
        };
        set("rho", p.rho);
        set("c", p.c);
        set("k", p.k);
        set("latent_heat", p.latent_heat);
        set("T_0", p.T_0);
        set("T_initial", p.T_initial);
        set("T_m", p.T_m);
        set("L_0", p.L_0);
        set("L_ref", p.L_ref);
        double beta = kv.number("beta").value_or(0.0);
        double eta = kv.number("eta").value_or(0.0);
        bool has_eta = kv.has("eta");
        if (kv.has("theta_0") || kv.has("theta_initial") || kv.has("L0_star") || kv.has("gamma"))
            throw ConfigError("material constants and dimensionless temperatures/lengths cannot be mixed");
        c.model = nondimensionalize(p, beta, has_eta ? eta : 1.0);
        if (!has_eta) c.model.eta_hat = Expression(1.0);
        std::ostringstream os;
        os << "from rho=" << format_double(p.rho) << " c=" << format_double(p.c) << " k=" << format_double(p.k)
           << " latent_heat=" << format_double(p.latent_heat) << " T_0=" << format_double(p.T_0)
           << " T_initial=" << format_double(p.T_initial) << " L_0=" << format_double(p.L_0)
           << " L_ref=" << format_double(p.L_ref);
        c.provenance.push_back(os.str());
    } else {
        if (auto v = kv.number("theta_0")) c.model.theta_0 = *v;
        if (auto v = kv.number("theta_initial")) c.model.theta_initial = *v;
        if (auto v = kv.number("L0_star")) c.model.L0_star = *v;
        if (auto v = kv.number("L_ref")) c.model.L_ref = *v;
        if (auto v = kv.number("gamma")) c.model.gamma = *v;
        if (auto v = kv.number("theta_m")) c.model.theta_m = *v;
    }
    if (auto v = kv.number("beta_hat")) c.model.beta_hat = *v;
    if (auto v = kv.text("eta_hat")) c.model.eta_hat = Expression::parse(*v);

    if (auto v = kv.number("dz")) c.dz = *v;
    if (auto v = kv.number("dy")) c.dy = *v;
    if (auto v = kv.number("dtau")) c.dtau = *v;
    if (auto v = kv.number("tau_end")) c.tau_end = *v;
    if (auto v = kv.text("scheme")) {
        if (*v == "implicit") c.scheme = Scheme::implicit;
        else if (*v == "explicit") c.scheme = Scheme::explicit_euler;
        else throw ConfigError("scheme must be implicit or explicit", "config.parse");
    }
    if (auto v = kv.integer<int>("lag_iterations")) c.lag_iterations = *v;
    if (auto v = kv.number("interface_level")) c.interface_level = *v;
    if (auto v = kv.integer<long>("snapshot_every")) c.snapshot_every = *v;
    if (auto v = kv.integer<unsigned>("threads")) c.threads = *v;
    if (auto v = kv.integer<std::uint64_t>("seed")) c.seed = *v;
    if (auto v = kv.text("output")) c.output = *v;

    for (const auto& key : kv.with_prefix("param.")) {
        std::string name = key.substr(6);
        if (name.empty()) throw ConfigError("empty parameter name in '" + key + "'", "config.parse");
        auto text = *kv.text(key);
        c.random.params.push_back({name, detail::parse_distribution(text, key, kv)});
    }
    if (auto v = kv.integer<int>("degree")) c.degree = *v;
    if (auto v = kv.integer<std::size_t>("samples")) c.samples = *v;
    if (auto v = kv.number("oversampling")) c.oversampling = *v;
    if (auto v = kv.integer<int>("histogram_bins")) c.histogram_bins = *v;
    if (auto v = kv.boolean("allow_pseudo_inverse")) c.allow_pseudo_inverse = *v;

    if (c.mode == Mode::audit) c.tau_from = 0.1;
    if (auto v = kv.number("tau_from")) c.tau_from = *v;
    if (auto v = kv.text("audit_variant")) c.audit_variant = *v;
    if (auto v = kv.integer<int>("audit_levels")) c.audit_levels = *v;
    if (auto v = kv.integer<int>("max_mode")) c.max_mode = *v;

    kv.reject_unused();
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'", "config.io");
    try {
        return parse_config(in);
    } catch (const Error& e) {
        throw Error(e.code(), e.tag(), path.string() + ": " + e.what());
    }
}

inline RunConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline void RunConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(std::isfinite(v) && v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(dz, "dz");
    positive(dtau, "dtau");
    if (is_2d()) positive(dy, "dy");
    if (!(tau_end >= 0.0)) throw ConfigError("tau_end must be non-negative");
    if (lag_iterations < 1) throw ConfigError("lag_iterations must be >= 1");
    if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
    if (histogram_bins < 1) throw ConfigError("histogram_bins must be >= 1");

    if (is_uq()) {
        if (random.params.empty()) throw ConfigError("UQ modes need at least one 'param.<name>' entry");
        random.validate(model);
        if (degree < 0) throw ConfigError("degree must be >= 0");
        auto basis = LegendreBasis::for_spec(random, degree);
        campaign().sample_count(basis.size());
        if (samples > 0 && samples < basis.size())
            throw ConfigError("samples = " + std::to_string(samples) + " is below the basis size " +
                              std::to_string(basis.size()) + "; choose M = c N^2 with N the basis size");
        // bind the support corners so invalid influx or lengths fail before any solve
        std::vector<double> corner(random.dims());
        const std::size_t corners = std::size_t{1} << random.dims();
        for (std::size_t mask = 0; mask < corners; ++mask) {
            for (std::size_t d = 0; d < random.dims(); ++d) {
                const auto& dist = random.params[d].dist;
                corner[d] = (mask >> d) & 1u ? dist.upper() : dist.lower();
            }
            DimlessConfig bound = random.bind(model, corner);
            if (is_2d()) stability_check(grid2d(), bound, tau_end).enforce();
        }
    } else {
        if (!random.params.empty()) throw ConfigError("'param.' entries are only allowed in UQ modes");
        model.validate();
        if (is_2d()) stability_check(grid2d(), model, tau_end).enforce();
    }

    if (mode == Mode::oracle && model.beta_hat != 0.0)
        throw ConfigError("oracle mode compares against a static-boundary solution and needs beta_hat = 0");
    if (mode == Mode::audit) {
        if (audit_variant != "open" && audit_variant != "closed")
            throw ConfigError("audit_variant must be open or closed");
        if (audit_variant == "closed" && model.beta_hat != 0.0)
            throw ConfigError("the closed audit variant needs beta_hat = 0");
        if (audit_levels < 1) throw ConfigError("audit_levels must be >= 1");
    }
    if (is_2d() && max_mode < 1) throw ConfigError("max_mode must be >= 1");
    if (is_2d() && scheme != Scheme::implicit) throw ConfigError("the 2D solver has no scheme choice");
}

inline std::string RunConfig::resolved() const {
    std::ostringstream os;
    for (const auto& p : provenance) os << "# " << p << "\n";
    auto num = [&](const char* key, double v) { os << key << " = " << format_double(v) << "\n"; };
    os << "mode = " << to_string(mode) << "\n";
    num("theta_0", model.theta_0);
    num("theta_initial", model.theta_initial);
    num("theta_m", model.theta_m);
    num("beta_hat", model.beta_hat);
    os << "eta_hat = " << model.eta_hat.source() << "\n";
    num("gamma", model.gamma);
    num("L0_star", model.L0_star);
    num("L_ref", model.L_ref);
    num("dz", dz);
    if (is_2d()) num("dy", dy);
    num("dtau", dtau);
    num("tau_end", tau_end);
    if (!is_2d()) os << "scheme = " << (scheme == Scheme::implicit ? "implicit" : "explicit") << "\n";
    os << "lag_iterations = " << lag_iterations << "\n";
    num("interface_level", interface_level);
    os << "snapshot_every = " << snapshot_every << "\n";
    // threads is an execution setting (recorded in the manifest): results and
    // the config hash do not depend on it.
    os << "seed = " << seed << "\n";
    if (!output.empty()) os << "output = " << output << "\n";
    if (is_uq()) {
        for (const auto& p : random.params) os << "param." << p.name << " = " << p.dist.describe() << "\n";
        os << "degree = " << degree << "\n";
        os << "samples = " << samples << "\n";
        num("oversampling", oversampling);
        os << "allow_pseudo_inverse = " << (allow_pseudo_inverse ? "true" : "false") << "\n";
    }
    os << "histogram_bins = " << histogram_bins << "\n";
    if (mode == Mode::oracle || mode == Mode::audit) num("tau_from", tau_from);
    if (mode == Mode::audit) {
        os << "audit_variant = " << audit_variant << "\n";
        os << "audit_levels = " << audit_levels << "\n";
    }
    if (is_2d()) os << "max_mode = " << max_mode << "\n";
    return os.str();
}

} // namespace stefan
