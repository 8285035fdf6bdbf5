#pragma once

// Two-dimensional explicit enthalpy solver on (y, z) in [0, 1] x [0, 1] with
// z = x / L(tau). Periodic in y (y = 0 and y = 1 are the same node), Dirichlet
// wall at z = 0, injection ghost node beyond z = 1.

#include "stefan/error.hpp"
#include "stefan/model.hpp"
#include "stefan/parallel.hpp"
#include "stefan/solver1d.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace stefan {

struct Grid2D {
    int ny = 101;
    int nz = 101;
    double dtau = 1e-6;
    long steps = 0;

    static Grid2D uniform(double dy, double dz, double dtau, double tau_end) {
        auto gz = Grid1D::uniform(dz, dtau, tau_end);
        auto gy = Grid1D::uniform(dy, dtau, tau_end);
        return {gy.nodes, gz.nodes, dtau, gz.steps};
    }

    double dy() const { return 1.0 / (ny - 1); }
    double dz() const { return 1.0 / (nz - 1); }
    double y(int j) const { return j * dy(); }
    double z(int i) const { return i * dz(); }
    double tau_end() const { return static_cast<double>(steps) * dtau; }
    std::size_t size() const { return static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz); }

    void validate() const {
        if (ny < 3 || nz < 3) throw ConfigError("2D grid needs at least 3 nodes per direction");
        if (!(dtau > 0.0)) throw ConfigError("dtau must be positive");
        if (steps < 0) throw ConfigError("step count must be non-negative");
    }
};

/// Row-major enthalpy: phi[j * nz + i] is the node (y_j, z_i).
struct EnthalpyField2D {
    std::vector<double> phi;
    int ny = 0;
    int nz = 0;
    double tau = 0.0;
    long step = 0;

    double& at(int j, int i) { return phi[static_cast<std::size_t>(j) * nz + i]; }
    double at(int j, int i) const { return phi[static_cast<std::size_t>(j) * nz + i]; }
    std::span<const double> column(int j) const {
        return {phi.data() + static_cast<std::size_t>(j) * nz, static_cast<std::size_t>(nz)};
    }
};

/// Terms of the forward-Euler bound
///   dtau (2 L_ref^2 / (L_min^2 dz^2) + 2 L_ref^2 / dy^2 + beta_hat / (L_min dz)) <= 1.
struct StabilityReport {
    bool ok = true;
    double margin = 0.0;
    double z_term = 0.0;
    double y_term = 0.0;
    double convection_term = 0.0;
    double max_dtau = 0.0;

    std::string describe() const {
        std::ostringstream os;
        os.precision(6);
        os << "explicit stability bound " << margin << (ok ? " <= 1" : " > 1") << "; largest admissible dtau is "
           << max_dtau;
        return os.str();
    }

    void enforce() const {
        if (!ok) throw ConfigError(describe(), "config.stability");
    }
};

inline StabilityReport stability_check(const Grid2D& grid, const DimlessConfig& cfg, double tau_end) {
    const double L_min = std::min(cfg.length(0.0), cfg.length(tau_end));
    const double r2 = cfg.L_ref * cfg.L_ref;
    StabilityReport rep;
    rep.z_term = 2.0 * r2 / (L_min * L_min * grid.dz() * grid.dz());
    rep.y_term = 2.0 * r2 / (grid.dy() * grid.dy());
    rep.convection_term = cfg.beta_hat / (L_min * grid.dz());
    const double sum = rep.z_term + rep.y_term + rep.convection_term;
    rep.margin = grid.dtau * sum;
    rep.max_dtau = 1.0 / sum;
    rep.ok = rep.margin <= 1.0;
    return rep;
}

struct Solver2DOptions {
    unsigned threads = 1;
    double interface_level = 0.0;
    bool check_stability = true;
};

class Solver2D {
public:
    Solver2D(Grid2D grid, DimlessConfig cfg, Solver2DOptions opts = {})
        : grid_(grid), cfg_(std::move(cfg)), opts_(opts) {
        grid_.validate();
        cfg_.validate();
        if (opts_.check_stability) stability_check(grid_, cfg_, grid_.tau_end()).enforce();
        theta_.resize(grid_.size());
        next_.resize(grid_.size());
        eta_.resize(static_cast<std::size_t>(grid_.ny));
        eta_is_steady_ = !cfg_.eta_hat.depends_on("tau");
        if (eta_is_steady_) refresh_influx(0.0);
    }

    const Grid2D& grid() const { return grid_; }
    const DimlessConfig& config() const { return cfg_; }

    EnthalpyField2D initial_field() const {
        if (!(cfg_.theta_initial > 0.0))
            throw ConfigError("theta_initial must be positive: the initial state is liquid");
        EnthalpyField2D f;
        f.ny = grid_.ny;
        f.nz = grid_.nz;
        f.phi.assign(grid_.size(), enthalpy_from_temperature(cfg_.theta_initial));
        for (int j = 0; j < grid_.ny; ++j) f.at(j, 0) = enthalpy_from_temperature(cfg_.theta_0);
        return f;
    }

    /// Influx at each y node for the current time level.
    std::span<const double> influx() const { return eta_; }

    void step(EnthalpyField2D& field) {
        check_shape(field);
        begin_step(field);
        compute_theta(field, 0, grid_.ny - 1);
        update_rows(field, 0, grid_.ny - 1);
        finish_step(field);
    }

    /// Advances `steps` steps; `on_step` runs after each step on a single thread.
    /// Rows are split across workers; each node depends only on the previous level,
    /// so results do not depend on the thread count.
    void advance(EnthalpyField2D& field, long steps, const std::function<void(const EnthalpyField2D&)>& on_step = {}) {
        check_shape(field);
        const int rows = grid_.ny - 1;
        const unsigned workers = std::min<unsigned>(resolve_threads(opts_.threads), static_cast<unsigned>(rows));
        if (workers <= 1) {
            for (long k = 0; k < steps; ++k) {
                step(field);
                if (on_step) on_step(field);
            }
            return;
        }

        long remaining = steps;
        std::exception_ptr failure;
        bool stop = steps <= 0;
        if (!stop) begin_step(field);
        auto completion = [&]() noexcept {
            if (phase_ == 0) {
                phase_ = 1;
                return;
            }
            phase_ = 0;
            try {
                finish_step(field);
                if (on_step) on_step(field);
                if (--remaining <= 0)
                    stop = true;
                else
                    begin_step(field);
            } catch (...) {
                failure = std::current_exception();
                stop = true;
            }
        };
        phase_ = 0;
        std::barrier sync(static_cast<std::ptrdiff_t>(workers), completion);
        auto work = [&](unsigned w) {
            const int lo = static_cast<int>(static_cast<long>(rows) * w / workers);
            const int hi = static_cast<int>(static_cast<long>(rows) * (w + 1) / workers);
            while (!stop) {
                compute_theta(field, lo, hi);
                sync.arrive_and_wait();
                update_rows(field, lo, hi);
                sync.arrive_and_wait();
            }
        };
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
        }
        if (failure) std::rethrow_exception(failure);
    }

private:
    void check_shape(const EnthalpyField2D& field) const {
        if (field.ny != grid_.ny || field.nz != grid_.nz || field.phi.size() != grid_.size())
            throw ConfigError("field shape does not match the grid");
    }

    void refresh_influx(double tau) {
        for (int j = 0; j < grid_.ny - 1; ++j) eta_[j] = cfg_.influx(grid_.y(j), tau);
        eta_[grid_.ny - 1] = eta_[0];
    }

    void begin_step(const EnthalpyField2D& field) {
        if (!eta_is_steady_) refresh_influx(field.tau);
        length_ = cfg_.length(field.tau);
    }

    void compute_theta(const EnthalpyField2D& field, int j_lo, int j_hi) {
        const std::size_t nz = static_cast<std::size_t>(grid_.nz);
        for (std::size_t p = static_cast<std::size_t>(j_lo) * nz; p < static_cast<std::size_t>(j_hi) * nz; ++p)
            theta_[p] = temperature_from_enthalpy(field.phi[p]);
    }

    void update_rows(const EnthalpyField2D& field, int j_lo, int j_hi) {
        const int nz = grid_.nz;
        const int period = grid_.ny - 1;
        const double L = length_;
        const double dz = grid_.dz();
        const double dy = grid_.dy();
        const double diff_z = cfg_.L_ref * cfg_.L_ref / (L * L) / (dz * dz);
        const double diff_y = cfg_.L_ref * cfg_.L_ref / (dy * dy);
        const double beta = cfg_.beta_hat;
        const double dtau = grid_.dtau;
        const double wall = enthalpy_from_temperature(cfg_.theta_0);
        const double* phi = field.phi.data();

        for (int j = j_lo; j < j_hi; ++j) {
            const double* row = phi + static_cast<std::size_t>(j) * nz;
            const double* th = theta_.data() + static_cast<std::size_t>(j) * nz;
            const double* th_s = theta_.data() + static_cast<std::size_t>((j + period - 1) % period) * nz;
            const double* th_n = theta_.data() + static_cast<std::size_t>((j + 1) % period) * nz;
            double* out = next_.data() + static_cast<std::size_t>(j) * nz;

            const double theta_ghost = ghost_boundary(th[nz - 1], eta_[j], beta, L, cfg_.L_ref, dz);
            const double phi_ghost = row[nz - 1] + (theta_ghost - th[nz - 1]);

            out[0] = wall;
            for (int i = 1; i < nz; ++i) {
                const double conv = beta * (i * dz) / L / dz;
                const double theta_r = i + 1 < nz ? th[i + 1] : theta_ghost;
                const double phi_r = i + 1 < nz ? row[i + 1] : phi_ghost;
                const double rate_z = detail::explicit_z_rate(th[i - 1], th[i], theta_r, row[i], phi_r, diff_z, conv);
                const double rate_y = diff_y * (th_s[i] - 2.0 * th[i] + th_n[i]);
                out[i] = row[i] + dtau * (rate_z + rate_y);
            }
        }
    }

    void finish_step(EnthalpyField2D& field) {
        const std::size_t nz = static_cast<std::size_t>(grid_.nz);
        std::copy_n(next_.begin(), nz, next_.begin() + static_cast<std::ptrdiff_t>((grid_.ny - 1) * nz));
        for (std::size_t p = 0; p < next_.size(); ++p) {
            if (!std::isfinite(next_[p])) {
                throw NumericalError("non-finite enthalpy at node (j=" + std::to_string(p / nz) +
                                         ", i=" + std::to_string(p % nz) + ") in step " +
                                         std::to_string(field.step + 1),
                                     "numerical.blowup");
            }
        }
        field.phi.swap(next_);
        field.step += 1;
        field.tau = static_cast<double>(field.step) * grid_.dtau;
    }

    Grid2D grid_;
    DimlessConfig cfg_;
    Solver2DOptions opts_;
    std::vector<double> theta_;
    std::vector<double> next_;
    std::vector<double> eta_;
    bool eta_is_steady_ = false;
    double length_ = 1.0;
    int phase_ = 0;
};

inline std::vector<double> extract_interface_curve(const EnthalpyField2D& field, double level = 0.0) {
    std::vector<double> s(static_cast<std::size_t>(field.ny));
    const double dz = 1.0 / (field.nz - 1);
    for (int j = 0; j < field.ny; ++j) s[j] = level_crossing(field.column(j), dz, level);
    return s;
}

struct InterfaceCurve {
    std::vector<double> taus;
    std::vector<double> length;
    std::vector<std::vector<double>> s_star;

    std::size_t size() const { return taus.size(); }
    double s_phys(std::size_t k, std::size_t j) const { return s_star[k][j] * length[k]; }
    std::vector<double> s_phys_row(std::size_t k) const {
        std::vector<double> out(s_star[k]);
        for (double& v : out) v *= length[k];
        return out;
    }
    /// Snapshot index closest to `tau`.
    std::size_t nearest(double tau) const {
        std::size_t best = 0;
        for (std::size_t k = 1; k < taus.size(); ++k)
            if (std::abs(taus[k] - tau) < std::abs(taus[best] - tau)) best = k;
        return best;
    }
};

struct Snapshot2D {
    double tau = 0.0;
    std::vector<double> phi;
};

struct RunResult2D {
    InterfaceCurve curve;
    std::vector<Snapshot2D> snapshots;
    EnthalpyField2D final_field;
};

inline RunResult2D run2d(const Grid2D& grid, const DimlessConfig& cfg, const Solver2DOptions& opts = {},
                         const RunOptions& run = {}) {
    Solver2D solver(grid, cfg, opts);
    EnthalpyField2D field = solver.initial_field();
    RunResult2D out;
    const long every = run.cadence(grid.steps);
    auto capture = [&](const EnthalpyField2D& f) {
        out.curve.taus.push_back(f.tau);
        out.curve.length.push_back(cfg.length(f.tau));
        out.curve.s_star.push_back(extract_interface_curve(f, opts.interface_level));
        if (run.keep_fields) out.snapshots.push_back({f.tau, f.phi});
    };
    capture(field);
    solver.advance(field, grid.steps, [&](const EnthalpyField2D& f) {
        if (f.step % every == 0 || f.step == grid.steps) capture(f);
    });
    out.final_field = std::move(field);
    return out;
}

/// Two-dimensional enthalpy budget, the y-integral of the 1D budget. The explicit
/// scheme uses rates at the start of each interval.
inline EnergyAudit energy_audit_2d(std::span<const Snapshot2D> history, const Grid2D& grid, const DimlessConfig& cfg) {
    if (history.size() < 2) throw ConfigError("energy audit needs at least two snapshots");
    const int ny = grid.ny, nz = grid.nz;
    const double dy = grid.dy(), dz = grid.dz();
    const int period = ny - 1;

    auto energy = [&](const Snapshot2D& s) {
        double total = 0.0;
        for (int j = 0; j < period; ++j)
            total += total_enthalpy({s.phi.data() + static_cast<std::size_t>(j) * nz, static_cast<std::size_t>(nz)},
                                    dz, cfg.length(s.tau));
        return total * dy;
    };
    auto rate = [&](const Snapshot2D& s) {
        const double L = cfg.length(s.tau);
        double r = 0.0;
        for (int j = 0; j < period; ++j) {
            const double* col = s.phi.data() + static_cast<std::size_t>(j) * nz;
            double wall = cfg.L_ref * cfg.L_ref / L *
                          (temperature_from_enthalpy(col[1]) - temperature_from_enthalpy(col[0])) / dz;
            r += cfg.beta_hat * cfg.influx(grid.y(j), s.tau) - wall;
        }
        return r * dy;
    };

    EnergyAudit out;
    for (const auto& s : history) out.total_enthalpy.push_back(energy(s));
    for (std::size_t k = 1; k < history.size(); ++k) {
        double dt = history[k].tau - history[k - 1].tau;
        out.tau.push_back(history[k].tau);
        out.residual.push_back(out.total_enthalpy[k] - out.total_enthalpy[k - 1] - dt * rate(history[k - 1]));
    }
    return out;
}

/// Amplitude of the half-wave mode k (wavenumber k pi) of a y-profile on [0, 1]:
/// |2 int (s - mean) e^{-i k pi y} dy| with the trapezoidal rule.
inline double half_wave_amplitude(std::span<const double> values, int k) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double dy = 1.0 / static_cast<double>(n - 1);
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += (j == 0 || j + 1 == n ? 0.5 : 1.0) * values[j];
    mean *= dy;
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double w = (j == 0 || j + 1 == n ? 0.5 : 1.0) * dy;
        double arg = k * std::numbers::pi * static_cast<double>(j) * dy;
        a += w * (values[j] - mean) * std::cos(arg);
        b += w * (values[j] - mean) * std::sin(arg);
    }
    return 2.0 * std::hypot(a, b);
}

/// Half-wave mode in [1, k_max] with the largest amplitude.
inline int dominant_half_wave_mode(std::span<const double> values, int k_max) {
    int best = 1;
    double best_amp = -1.0;
    for (int k = 1; k <= k_max; ++k) {
        double a = half_wave_amplitude(values, k);
        if (a > best_amp) {
            best_amp = a;
            best = k;
        }
    }
    return best;
}

} // namespace stefan
