#pragma once

#include "stefan/error.hpp"
#include "stefan/expression.hpp"

#include <cmath>
#include <string>

namespace stefan {

/// Dimensional material and boundary constants. Units follow the usual
/// icing setup: rho [kg/m^3], c [MJ/(kg C)], k [W/(m C)], latent_heat [MJ/kg],
/// temperatures [C], lengths [m].
struct PhysicalParams {
    double rho = 1.0;
    double c = 2.5;
    double k = 2.0;
    double latent_heat = 100.0;
    double T_0 = -10.0;
    double T_initial = 2.0;
    double T_m = 0.0;
    double L_0 = 1.0;
    double L_ref = 1.0;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(std::isfinite(v) && v > 0.0))
                throw ConfigError(std::string(name) + " must be positive (got " + std::to_string(v) + ")");
        };
        positive(rho, "rho");
        positive(c, "c");
        positive(k, "k");
        positive(latent_heat, "latent_heat");
        positive(L_0, "L_0");
        positive(L_ref, "L_ref");
        if (T_m != 0.0) throw ConfigError("T_m must be 0");
        if (!(std::isfinite(T_0) && T_0 < T_m))
            throw ConfigError("T_0 must be below the melt temperature");
        if (!(std::isfinite(T_initial) && T_initial > T_m))
            throw ConfigError("T_initial must be above the melt temperature");
    }
};

/// Nondimensional problem description consumed by the solvers.
struct DimlessConfig {
    double theta_0 = -0.25;
    double theta_initial = 0.05;
    double theta_m = 0.0;
    double beta_hat = 0.0;
    /// Incoming heat influx as a function of (y, tau); 1D solvers evaluate it at y = 0.
    Expression eta_hat{1.0};
    /// k L_h / (c L_ref^2); zero when the configuration was given in dimensionless form.
    double gamma = 0.0;
    double L0_star = 1.0;
    double L_ref = 1.0;

    /// Domain length L(tau) = L0_star + beta_hat * tau.
    double length(double tau) const { return L0_star + beta_hat * tau; }

    double influx(double y, double tau) const {
        double v = eta_hat(y, tau);
        if (!(v >= 1.0 - 1e-12))
            throw ConfigError("eta_hat must be greater than 1 (got " + std::to_string(v) + " at y=" +
                              std::to_string(y) + ", tau=" + std::to_string(tau) + ")");
        return v;
    }

    void validate() const {
        if (!std::isfinite(theta_0)) throw ConfigError("theta_0 must be finite");
        if (!std::isfinite(theta_initial)) throw ConfigError("theta_initial must be finite");
        if (theta_m != 0.0) throw ConfigError("theta_m must be 0");
        if (!(std::isfinite(beta_hat) && beta_hat >= 0.0)) throw ConfigError("beta_hat must be >= 0");
        if (!(std::isfinite(L0_star) && L0_star > 0.0)) throw ConfigError("L0_star must be positive");
        if (!(std::isfinite(L_ref) && L_ref > 0.0)) throw ConfigError("L_ref must be positive");
        if (auto free = eta_hat.free_parameters(); !free.empty())
            throw ConfigError("eta_hat references unbound parameter '" + *free.begin() + "'");
        for (int j = 0; j <= 200; ++j) influx(j / 200.0, 0.0);
    }
};

/// Enthalpy-temperature correction 0.5 (|1 - phi| - |phi| - 1): 0 in solid,
/// -phi in the mush, -1 in liquid. Evaluated by branch so each piece is exact.
constexpr double phi_tilde(double phi) noexcept {
    if (phi <= 0.0) return 0.0;
    if (phi >= 1.0) return -1.0;
    return -phi;
}

constexpr double temperature_from_enthalpy(double phi) noexcept { return phi + phi_tilde(phi); }

/// Inverse of temperature_from_enthalpy off the mush plateau; theta = 0 maps to phi = 0.
constexpr double enthalpy_from_temperature(double theta) noexcept {
    return theta > 0.0 ? theta + 1.0 : theta;
}

inline double domain_length(double tau, const DimlessConfig& cfg) { return cfg.length(tau); }

/// Maps dimensional inputs to the solver's nondimensional form. `beta` is the
/// boundary speed [m/s] and `eta` the influx parameter; see DimlessConfig.
inline DimlessConfig nondimensionalize(const PhysicalParams& p, double beta, double eta) {
    p.validate();
    DimlessConfig d;
    d.theta_0 = p.c * p.T_0 / p.latent_heat;
    d.theta_initial = p.c * p.T_initial / p.latent_heat;
    d.theta_m = p.c * p.T_m / p.latent_heat;
    d.gamma = p.k * p.latent_heat / (p.c * p.L_ref * p.L_ref);
    d.beta_hat = p.rho * p.c * p.L_ref * p.L_ref / p.k * beta;
    double eta_tilde = p.k / (p.rho * p.c * p.L_ref * p.L_ref) * eta;
    d.eta_hat = Expression(eta_tilde / d.gamma);
    d.L0_star = p.L_0 / p.L_ref;
    d.L_ref = p.L_ref;
    return d;
}

/// Dimensional quantities recovered from a DimlessConfig and the material constants.
struct DimensionalState {
    double T_0, T_initial, T_m, L_0, beta, eta;
};

inline DimensionalState redimensionalize(const DimlessConfig& d, const PhysicalParams& p) {
    if (!d.eta_hat.is_constant()) throw ConfigError("only a constant eta_hat can be redimensionalized");
    double gamma = p.k * p.latent_heat / (p.c * p.L_ref * p.L_ref);
    double eta_tilde = d.eta_hat(0.0, 0.0) * gamma;
    return {
        d.theta_0 * p.latent_heat / p.c,
        d.theta_initial * p.latent_heat / p.c,
        d.theta_m * p.latent_heat / p.c,
        d.L0_star * p.L_ref,
        d.beta_hat * p.k / (p.rho * p.c * p.L_ref * p.L_ref),
        eta_tilde * p.rho * p.c * p.L_ref * p.L_ref / p.k,
    };
}

} // namespace stefan
