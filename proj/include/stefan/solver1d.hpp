#pragma once

// One-dimensional enthalpy solver on the stretched reference coordinate
// z = x / L(tau) in [0, 1]. The governing equation is
//
//   d(phi)/d(tau) = (L_ref^2 / L^2) d2(theta)/dz2 + beta_hat z / L d(phi)/dz
//
// with theta = phi + phi_tilde(phi), a Dirichlet wall at z = 0 and the
// injection condition (L_ref^2 / L) d(theta)/dz + beta_hat phi = eta_hat beta_hat
// at z = 1.

#include "stefan/error.hpp"
#include "stefan/model.hpp"
#include "stefan/tdma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace stefan {

struct Grid1D {
    int nodes = 101;
    double dtau = 1e-4;
    long steps = 40000;

    /// Builds a grid from a spacing that divides [0, 1] and a step that divides tau_end.
    static Grid1D uniform(double dz, double dtau, double tau_end) {
        if (!(dz > 0.0 && dz <= 0.5)) throw ConfigError("dz must lie in (0, 0.5]");
        if (!(dtau > 0.0)) throw ConfigError("dtau must be positive");
        if (!(tau_end >= 0.0)) throw ConfigError("tau_end must be non-negative");
        Grid1D g;
        double cells = 1.0 / dz;
        g.nodes = static_cast<int>(std::lround(cells)) + 1;
        if (std::abs(cells - (g.nodes - 1)) > 1e-9 * cells)
            throw ConfigError("dz must divide the unit interval evenly");
        double count = tau_end / dtau;
        g.steps = std::lround(count);
        if (std::abs(count - static_cast<double>(g.steps)) > 1e-6 * std::max(1.0, count))
            throw ConfigError("dtau must divide tau_end evenly");
        g.dtau = dtau;
        return g;
    }

    double dz() const { return 1.0 / (nodes - 1); }
    double z(int i) const { return i * dz(); }
    double lambda() const { return dtau / dz(); }
    double dnum() const { return dtau / (dz() * dz()); }
    double tau_end() const { return static_cast<double>(steps) * dtau; }

    void validate() const {
        if (nodes < 3) throw ConfigError("grid needs at least 3 nodes");
        if (!(dtau > 0.0)) throw ConfigError("dtau must be positive");
        if (steps < 0) throw ConfigError("step count must be non-negative");
    }
};

enum class Scheme { implicit, explicit_euler };
enum class WallBoundary { dirichlet, insulated };
enum class FarBoundary { injection, insulated };

struct Solver1DOptions {
    Scheme scheme = Scheme::implicit;
    WallBoundary wall = WallBoundary::dirichlet;
    FarBoundary far = FarBoundary::injection;
    /// 1 reproduces the single lag of phi_tilde; larger values iterate the lag to lag_tol.
    int lag_iterations = 1;
    double lag_tol = 1e-10;
    /// Enthalpy level whose first crossing from the wall marks the free boundary.
    double interface_level = 0.0;
};

struct EnthalpyField1D {
    std::vector<double> phi;
    double tau = 0.0;
    long step = 0;
};

/// Uniform liquid at theta_initial with the wall node at theta_0.
inline EnthalpyField1D initialize(const Grid1D& grid, const DimlessConfig& cfg) {
    grid.validate();
    if (!(cfg.theta_initial > 0.0))
        throw ConfigError("theta_initial must be positive: the initial state is liquid");
    EnthalpyField1D f;
    f.phi.assign(static_cast<std::size_t>(grid.nodes), enthalpy_from_temperature(cfg.theta_initial));
    f.phi.front() = enthalpy_from_temperature(cfg.theta_0);
    return f;
}

/// Ghost temperature beyond z = 1 from the discrete injection condition,
/// assuming the boundary node is liquid.
inline double ghost_boundary(double theta_n, double eta_hat, double beta_hat, double length, double L_ref,
                             double dz) {
    double s = length / (L_ref * L_ref) * dz;
    return (1.0 - s * beta_hat) * theta_n + beta_hat * (eta_hat - 1.0) * s;
}

namespace detail {

/// Explicit z-direction increment shared by the 1D and 2D explicit schemes.
inline double explicit_z_rate(double theta_l, double theta_c, double theta_r, double phi_c, double phi_r,
                              double diff, double conv) {
    return diff * (theta_l - 2.0 * theta_c + theta_r) + conv * (phi_r - phi_c);
}

} // namespace detail

class Solver1D {
public:
    Solver1D(Grid1D grid, DimlessConfig cfg, Solver1DOptions opts = {})
        : grid_(grid), cfg_(std::move(cfg)), opts_(opts), system_(static_cast<std::size_t>(grid.nodes)) {
        grid_.validate();
        cfg_.validate();
        if (opts_.lag_iterations < 1) throw ConfigError("lag_iterations must be >= 1");
        if (opts_.far == FarBoundary::insulated && cfg_.beta_hat != 0.0)
            throw ConfigError("an insulated far boundary requires beta_hat = 0");
        tilde_.resize(static_cast<std::size_t>(grid_.nodes));
        z_.resize(static_cast<std::size_t>(grid_.nodes));
        for (int i = 0; i < grid_.nodes; ++i) z_[i] = grid_.z(i);
        next_.resize(static_cast<std::size_t>(grid_.nodes));
        eta_is_steady_ = !cfg_.eta_hat.depends_on("tau");
        if (eta_is_steady_) eta_cached_ = cfg_.influx(0.0, 0.0);
    }

    const Grid1D& grid() const { return grid_; }
    const DimlessConfig& config() const { return cfg_; }
    const Solver1DOptions& options() const { return opts_; }

    EnthalpyField1D initial_field() const { return initialize(grid_, cfg_); }

    /// Advances `field` by one time step.
    void step(EnthalpyField1D& field) {
        if (field.phi.size() != static_cast<std::size_t>(grid_.nodes))
            throw ConfigError("field size does not match the grid");
        if (opts_.scheme == Scheme::implicit)
            step_implicit(field);
        else
            step_explicit(field);
        field.step += 1;
        field.tau = static_cast<double>(field.step) * grid_.dtau;
    }

    double influx(double tau) const { return eta_is_steady_ ? eta_cached_ : cfg_.influx(0.0, tau); }

private:
    void step_implicit(EnthalpyField1D& field) {
        const int n = grid_.nodes;
        const double tau_new = static_cast<double>(field.step + 1) * grid_.dtau;
        const double L = cfg_.length(tau_new);
        const double dz = grid_.dz();
        const double d = grid_.dnum() * cfg_.L_ref * cfg_.L_ref / (L * L);
        const double beta = cfg_.beta_hat;
        const double eta = influx(tau_new);
        const double lam = grid_.lambda();
        const double g = cfg_.L_ref * cfg_.L_ref / (L * dz);
        const std::vector<double>& old = field.phi;

        auto& a = system_.lower;
        auto& b = system_.diag;
        auto& c = system_.upper;
        auto& r = system_.rhs;

        for (int i = 0; i < n; ++i) tilde_[i] = phi_tilde(old[i]);

        for (int iter = 0; iter < opts_.lag_iterations; ++iter) {
            if (opts_.wall == WallBoundary::dirichlet) {
                b[0] = 1.0;
                c[0] = 0.0;
                r[0] = enthalpy_from_temperature(cfg_.theta_0);
            } else {
                b[0] = 1.0 + 2.0 * d;
                c[0] = -2.0 * d;
                r[0] = old[0] + 2.0 * d * (tilde_[1] - tilde_[0]);
            }
            const double cv_scale = beta / L * lam;
            for (int i = 1; i < n - 1; ++i) {
                double cv = cv_scale * z_[i];
                a[i] = -d;
                b[i] = 1.0 + 2.0 * d + cv;
                c[i] = -(d + cv);
                r[i] = d * (tilde_[i - 1] - 2.0 * tilde_[i] + tilde_[i + 1]) + old[i];
            }
            if (opts_.far == FarBoundary::injection) {
                a[n - 1] = -g;
                b[n - 1] = g + beta;
                r[n - 1] = g * (tilde_[n - 2] - tilde_[n - 1]) + eta * beta;
            } else {
                a[n - 1] = -2.0 * d;
                b[n - 1] = 1.0 + 2.0 * d;
                r[n - 1] = old[n - 1] + 2.0 * d * (tilde_[n - 2] - tilde_[n - 1]);
            }
            system_.solve(next_);

            if (opts_.lag_iterations == 1) break;
            double change = 0.0;
            for (int i = 0; i < n; ++i) {
                double t = phi_tilde(next_[i]);
                change = std::max(change, std::abs(t - tilde_[i]));
                tilde_[i] = t;
            }
            if (change < opts_.lag_tol) break;
        }
        field.phi.swap(next_);
    }

    void step_explicit(EnthalpyField1D& field) {
        const int n = grid_.nodes;
        const double tau = field.tau;
        const double L = cfg_.length(tau);
        const double dz = grid_.dz();
        const double diff = cfg_.L_ref * cfg_.L_ref / (L * L) / (dz * dz);
        const double beta = cfg_.beta_hat;
        const double dtau = grid_.dtau;
        const std::vector<double>& phi = field.phi;

        for (int i = 0; i < n; ++i) tilde_[i] = temperature_from_enthalpy(phi[i]);
        const std::vector<double>& theta = tilde_;

        double theta_ghost, phi_ghost;
        if (opts_.far == FarBoundary::injection) {
            theta_ghost = ghost_boundary(theta[n - 1], influx(tau), beta, L, cfg_.L_ref, dz);
            phi_ghost = phi[n - 1] + (theta_ghost - theta[n - 1]);
        } else {
            theta_ghost = theta[n - 2];
            phi_ghost = phi[n - 2];
        }

        if (opts_.wall == WallBoundary::dirichlet) {
            next_[0] = enthalpy_from_temperature(cfg_.theta_0);
        } else {
            next_[0] = phi[0] + dtau * detail::explicit_z_rate(theta[1], theta[0], theta[1], phi[0], phi[1], diff, 0.0);
        }
        for (int i = 1; i < n; ++i) {
            double conv = beta * z_[i] / L / dz;
            double theta_r = i + 1 < n ? theta[i + 1] : theta_ghost;
            double phi_r = i + 1 < n ? phi[i + 1] : phi_ghost;
            next_[i] = phi[i] + dtau * detail::explicit_z_rate(theta[i - 1], theta[i], theta_r, phi[i], phi_r, diff, conv);
        }
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(next_[i]))
                throw NumericalError("non-finite enthalpy at node " + std::to_string(i) + " in step " +
                                         std::to_string(field.step + 1),
                                     "numerical.blowup");
        }
        field.phi.swap(next_);
    }

    Grid1D grid_;
    DimlessConfig cfg_;
    Solver1DOptions opts_;
    TridiagonalSystem system_;
    std::vector<double> tilde_;
    std::vector<double> z_;
    std::vector<double> next_;
    bool eta_is_steady_ = false;
    double eta_cached_ = 1.0;
};

/// Functional form of a single step.
inline EnthalpyField1D step(EnthalpyField1D field, const Grid1D& grid, const DimlessConfig& cfg,
                            const Solver1DOptions& opts = {}) {
    Solver1D solver(grid, cfg, opts);
    solver.step(field);
    return field;
}

// ---------------------------------------------------------------------------
// Free boundary

/// First position from the wall where the piecewise-linear profile reaches
/// `level` from below. 0 if the wall node is already at or above `level`,
/// 1 if the level is never reached.
inline double level_crossing(std::span<const double> phi, double dz, double level) {
    if (phi.empty() || phi[0] >= level) return 0.0;
    for (std::size_t i = 0; i + 1 < phi.size(); ++i) {
        if (phi[i] < level && phi[i + 1] >= level) {
            double frac = (level - phi[i]) / (phi[i + 1] - phi[i]);
            return (static_cast<double>(i) + frac) * dz;
        }
    }
    return 1.0;
}

struct InterfacePoint {
    double s_star = 0.0;
    double s_phys = 0.0;
};

inline InterfacePoint extract_interface(std::span<const double> phi, double dz, double length, double level = 0.0) {
    double s = level_crossing(phi, dz, level);
    return {s, s * length};
}

/// Time series of the free boundary.
struct InterfaceTrace {
    std::vector<double> taus;
    std::vector<double> s_star;
    std::vector<double> s_phys;
    std::vector<double> length;
    /// Finite-difference estimate of d(s_star)/d(tau).
    std::vector<double> v_est;
    /// Reference-coordinate crossings of phi = 0 and phi = 1 (mush edges).
    std::vector<double> s_solidus;
    std::vector<double> s_liquidus;

    std::size_t size() const { return taus.size(); }

    void record(double tau, std::span<const double> phi, double dz, double L, double level) {
        double s = level_crossing(phi, dz, level);
        taus.push_back(tau);
        s_star.push_back(s);
        s_phys.push_back(s * L);
        length.push_back(L);
        s_solidus.push_back(level_crossing(phi, dz, 0.0));
        s_liquidus.push_back(level_crossing(phi, dz, 1.0));
    }

    void finalize() { v_est = derivative(taus, s_star); }

    /// Second-order differences in the interior, one-sided at the ends.
    static std::vector<double> derivative(const std::vector<double>& t, const std::vector<double>& v) {
        std::vector<double> out(t.size(), 0.0);
        const std::size_t n = t.size();
        if (n < 2) return out;
        out[0] = (v[1] - v[0]) / (t[1] - t[0]);
        out[n - 1] = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
        for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1]);
        return out;
    }
};

enum class Regime { interface_dominated, injection_dominated };

inline const char* to_string(Regime r) {
    return r == Regime::interface_dominated ? "interface-dominated" : "injection-dominated";
}

/// Interface-dominated where the physical interface outruns the injection boundary.
inline std::vector<Regime> classify_regime(const InterfaceTrace& trace, double beta_hat) {
    if (trace.size() == 0) throw ConfigError("classify_regime needs a non-empty trace");
    std::vector<Regime> out;
    out.reserve(trace.size());
    if (trace.size() == 1) {
        out.push_back(Regime::injection_dominated);
        return out;
    }
    auto speed = InterfaceTrace::derivative(trace.taus, trace.s_phys);
    for (double v : speed) out.push_back(v > beta_hat ? Regime::interface_dominated : Regime::injection_dominated);
    return out;
}

// ---------------------------------------------------------------------------
// Runs

struct Snapshot1D {
    double tau = 0.0;
    std::vector<double> phi;
};

struct RunOptions {
    /// Steps between snapshots; 0 picks ceil(steps / 400).
    long snapshot_every = 0;
    bool keep_fields = true;

    long cadence(long steps) const {
        if (snapshot_every > 0) return snapshot_every;
        return std::max<long>(1, (steps + 399) / 400);
    }
};

struct RunResult1D {
    InterfaceTrace trace;
    std::vector<Snapshot1D> snapshots;
    EnthalpyField1D final_field;
};

inline RunResult1D run1d(const Grid1D& grid, const DimlessConfig& cfg, const Solver1DOptions& opts = {},
                         const RunOptions& run = {}) {
    Solver1D solver(grid, cfg, opts);
    EnthalpyField1D field = solver.initial_field();
    RunResult1D out;
    const long every = run.cadence(grid.steps);
    const double dz = grid.dz();
    auto capture = [&] {
        out.trace.record(field.tau, field.phi, dz, cfg.length(field.tau), opts.interface_level);
        if (run.keep_fields) out.snapshots.push_back({field.tau, field.phi});
    };
    capture();
    for (long k = 1; k <= grid.steps; ++k) {
        solver.step(field);
        if (k % every == 0 || k == grid.steps) capture();
    }
    out.trace.finalize();
    out.final_field = std::move(field);
    return out;
}

// ---------------------------------------------------------------------------
// Energy budget

/// Per-interval enthalpy balance. Energies are in units of rho L_h L_ref:
/// E(tau) = L(tau) * integral_0^1 phi dz (trapezoidal). Between snapshots the
/// budget is dE/dtau = eta_hat beta_hat - (L_ref^2 / L) d(theta)/dz|_{z=0},
/// the injected enthalpy minus the conductive loss through the wall.
struct EnergyAudit {
    std::vector<double> tau;
    std::vector<double> residual;
    std::vector<double> total_enthalpy;

    double max_abs_residual() const {
        double m = 0.0;
        for (double r : residual) m = std::max(m, std::abs(r));
        return m;
    }

    double max_relative_residual() const {
        double m = 0.0;
        for (std::size_t i = 0; i < residual.size(); ++i)
            m = std::max(m, std::abs(residual[i]) / std::max(std::abs(total_enthalpy[i + 1]), 1e-300));
        return m;
    }
};

inline double total_enthalpy(std::span<const double> phi, double dz, double length) {
    double s = 0.5 * (phi.front() + phi.back());
    for (std::size_t i = 1; i + 1 < phi.size(); ++i) s += phi[i];
    return length * s * dz;
}

/// The rate is taken at the end of each interval, matching the implicit step.
inline EnergyAudit energy_audit(std::span<const Snapshot1D> history, const DimlessConfig& cfg,
                                const Solver1DOptions& opts = {}) {
    if (history.size() < 2) throw ConfigError("energy audit needs at least two snapshots");
    const std::size_t n = history.front().phi.size();
    if (n < 3) throw ConfigError("energy audit needs at least three nodes");
    const double dz = 1.0 / static_cast<double>(n - 1);

    auto rate = [&](const Snapshot1D& s) {
        const double L = cfg.length(s.tau);
        double influx = opts.far == FarBoundary::injection ? cfg.beta_hat * cfg.influx(0.0, s.tau) : 0.0;
        double wall = 0.0;
        if (opts.wall == WallBoundary::dirichlet) {
            double t0 = temperature_from_enthalpy(s.phi[0]);
            double t1 = temperature_from_enthalpy(s.phi[1]);
            wall = cfg.L_ref * cfg.L_ref / L * (t1 - t0) / dz;
        }
        return influx - wall;
    };

    EnergyAudit out;
    for (const auto& s : history) out.total_enthalpy.push_back(total_enthalpy(s.phi, dz, cfg.length(s.tau)));
    for (std::size_t k = 1; k < history.size(); ++k) {
        double dt = history[k].tau - history[k - 1].tau;
        double change = out.total_enthalpy[k] - out.total_enthalpy[k - 1];
        out.tau.push_back(history[k].tau);
        out.residual.push_back(change - dt * rate(history[k]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classical two-phase similarity solution for a static boundary

/// S(tau) = 2 lambda sqrt(alpha tau) with alpha = L_ref^2 in these units.
struct NeumannSolution {
    double lambda = 0.0;
    double diffusivity = 1.0;

    double interface(double tau) const { return 2.0 * lambda * std::sqrt(diffusivity * tau); }
};

/// Residual of the two-phase transcendental equation
///   lambda sqrt(pi) = -theta_0 e^{-lambda^2} / erf(lambda) - theta_i e^{-lambda^2} / erfc(lambda).
inline double neumann_residual(double lambda, double theta_0, double theta_initial) {
    double e = std::exp(-lambda * lambda);
    return lambda * std::sqrt(std::numbers::pi) + theta_0 * e / std::erf(lambda) +
           theta_initial * e / std::erfc(lambda);
}

inline NeumannSolution neumann_oracle(const DimlessConfig& cfg) {
    if (cfg.beta_hat != 0.0) throw ConfigError("the similarity solution requires beta_hat = 0");
    if (cfg.theta_initial < 0.0) throw ConfigError("the similarity solution requires theta_initial >= 0");
    NeumannSolution sol;
    sol.diffusivity = cfg.L_ref * cfg.L_ref;
    if (cfg.theta_0 >= 0.0) return sol;

    auto f = [&](double l) { return neumann_residual(l, cfg.theta_0, cfg.theta_initial); };
    double lo = 0.0, hi = 1.0;
    while (f(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 64.0) throw NumericalError("similarity root not bracketed", "numerical.oracle");
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        mid = 0.5 * (lo + hi);
        double v = mid > 0.0 ? f(mid) : -1.0;
        if (v == 0.0 || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
        (v < 0.0 ? lo : hi) = mid;
    }
    if (!(std::abs(f(mid)) <= 1e-12)) throw NumericalError("similarity root did not converge", "numerical.oracle");
    sol.lambda = mid;
    return sol;
}

} // namespace stefan
