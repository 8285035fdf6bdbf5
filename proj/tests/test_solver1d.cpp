#include "stefan/solver1d.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace stefan;

namespace {

// Icing setup: T_0 = -10, T_initial = 2 with c / L_h = 0.025.
DimlessConfig icing(double eta, double beta) {
    DimlessConfig c;
    c.theta_0 = -0.25;
    c.theta_initial = 0.05;
    c.beta_hat = beta;
    c.eta_hat = Expression(eta);
    c.L0_star = 1.0;
    return c;
}

double final_interface(const DimlessConfig& c, double dz = 0.01, double dtau = 1e-4, double level = 0.0) {
    Solver1DOptions o;
    o.interface_level = level;
    RunOptions r;
    r.keep_fields = false;
    return run1d(Grid1D::uniform(dz, dtau, 4.0), c, o, r).trace.s_phys.back();
}

// One-phase limit, solved by Newton's method independently of the library's bisection:
// lambda e^{lambda^2} erf(lambda) = -theta_0 / sqrt(pi).
double one_phase_lambda(double theta_0) {
    const double rhs = -theta_0 / std::sqrt(std::numbers::pi);
    double l = 0.5;
    for (int i = 0; i < 100; ++i) {
        double f = l * std::exp(l * l) * std::erf(l) - rhs;
        double df = std::exp(l * l) * std::erf(l) * (1 + 2 * l * l) + l * std::exp(l * l) * 2 / std::sqrt(std::numbers::pi) * std::exp(-l * l);
        l -= f / df;
    }
    return l;
}

} // namespace

TEST(Grid1D, UniformGrid) {
    auto g = Grid1D::uniform(0.01, 1e-4, 4.0);
    EXPECT_EQ(g.nodes, 101);
    EXPECT_EQ(g.steps, 40000);
    EXPECT_DOUBLE_EQ(g.dz(), 0.01);
    EXPECT_DOUBLE_EQ(g.tau_end(), 4.0);
    EXPECT_THROW(Grid1D::uniform(0.03, 1e-4, 1.0), ConfigError); // 1/dz not an integer
    EXPECT_THROW(Grid1D::uniform(0.01, -1.0, 1.0), ConfigError);
}

TEST(Initialize, LiquidInteriorColdWall) {
    auto f = initialize(Grid1D::uniform(0.25, 0.1, 1.0), icing(1.25, 0.35));
    EXPECT_DOUBLE_EQ(f.phi[0], -0.25);
    for (std::size_t i = 1; i < f.phi.size(); ++i) EXPECT_DOUBLE_EQ(f.phi[i], 1.05);
    auto c = icing(1.25, 0.35);
    c.theta_initial = 0.0;
    EXPECT_THROW(initialize(Grid1D::uniform(0.25, 0.1, 1.0), c), ConfigError);
}

TEST(Step, UniformLiquidIsSteady) {
    // Pure diffusion with the wall held at the initial temperature.
    auto c = icing(1.0, 0.0);
    c.theta_0 = 0.05;
    auto grid = Grid1D::uniform(0.05, 1e-3, 1.0);
    Solver1D s(grid, c);
    auto f = s.initial_field();
    for (int k = 0; k < 200; ++k) s.step(f);
    for (double v : f.phi) EXPECT_NEAR(v, 1.05, 1e-13);
}

TEST(Step, FunctionalFormMatchesSolver) {
    auto c = icing(1.25, 0.35);
    auto grid = Grid1D::uniform(0.02, 1e-3, 1.0);
    Solver1D s(grid, c);
    auto f = s.initial_field();
    auto g = step(f, grid, c);
    s.step(f);
    EXPECT_EQ(f.phi, g.phi);
    EXPECT_EQ(g.step, 1);
    EXPECT_DOUBLE_EQ(g.tau, 1e-3);
}

TEST(Step, ImplicitRowsSatisfyPrintedScheme) {
    // Substitute the computed phi^{k+1} back into the printed difference equations.
    auto c = icing(1.25, 0.35);
    auto grid = Grid1D::uniform(0.05, 1e-2, 1.0);
    Solver1D s(grid, c);
    auto f = s.initial_field();
    for (int k = 0; k < 7; ++k) s.step(f);
    auto old = f.phi;
    s.step(f);
    const auto& p = f.phi;
    const int n = grid.nodes;
    const double L = c.length(f.tau), dz = grid.dz();
    const double d = grid.dtau / (dz * dz) / (L * L), lam = grid.dtau / dz, g = 1.0 / (L * dz);
    for (int i = 1; i < n - 1; ++i) {
        double cv = c.beta_hat * grid.z(i) * lam / L;
        double lhs = (1 + 2 * d + cv) * p[i] - d * p[i - 1] - (d + cv) * p[i + 1];
        double rhs = d * (phi_tilde(old[i - 1]) - 2 * phi_tilde(old[i]) + phi_tilde(old[i + 1])) + old[i];
        EXPECT_NEAR(lhs, rhs, 1e-12) << i;
    }
    double lhs = (g + c.beta_hat) * p[n - 1] - g * p[n - 2];
    double rhs = g * (phi_tilde(old[n - 2]) - phi_tilde(old[n - 1])) + 1.25 * c.beta_hat;
    EXPECT_NEAR(lhs, rhs, 1e-12);
    EXPECT_EQ(p[0], -0.25);
}

TEST(Step, LagIterationConverges) {
    auto c = icing(1.25, 0.35);
    // Lagging phi_tilde costs O(dtau): iterating it to convergence differs less as dtau shrinks.
    Solver1DOptions o;
    o.lag_iterations = 50;
    auto gap = [&](double dtau) {
        auto grid = Grid1D::uniform(0.02, dtau, 0.5);
        return std::abs(run1d(grid, c, o).trace.s_phys.back() - run1d(grid, c).trace.s_phys.back());
    };
    EXPECT_LT(gap(1e-4), gap(1e-3) / 3);
    auto grid = Grid1D::uniform(0.02, 1e-3, 0.5);
    o.lag_iterations = 0;
    EXPECT_THROW(Solver1D(grid, c, o), ConfigError);
}

TEST(Step, ExplicitBlowUpDetected) {
    auto c = icing(1.25, 0.35);
    Solver1DOptions o;
    o.scheme = Scheme::explicit_euler;
    auto grid = Grid1D::uniform(0.01, 1e-2, 2.0); // far beyond the explicit limit
    try {
        run1d(grid, c, o);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.tag(), "numerical.blowup");
    }
}

TEST(Step, ExplicitAgreesWithImplicit) {
    auto c = icing(1.25, 0.35);
    Solver1DOptions ex;
    ex.scheme = Scheme::explicit_euler;
    auto e = run1d(Grid1D::uniform(0.02, 1e-4, 1.0), c, ex).trace.s_phys.back();
    auto i = run1d(Grid1D::uniform(0.02, 1e-4, 1.0), c).trace.s_phys.back();
    EXPECT_NEAR(e, i, 0.02);
}

TEST(GhostBoundary, PrintedFormula) {
    EXPECT_DOUBLE_EQ(ghost_boundary(0.3, 2.0, 0.0, 1.0, 1.0, 0.01), 0.3);
    EXPECT_DOUBLE_EQ(ghost_boundary(0.0, 1.0, 0.1, 1.0, 1.0, 0.01), 0.0);
    EXPECT_NEAR(ghost_boundary(0.0, 3.0, 0.1, 1.0, 1.0, 0.005), 0.001, 1e-17);
}

TEST(Interface, LevelCrossing) {
    std::vector<double> phi{-1, -0.5, 0.5, 1.5};
    EXPECT_DOUBLE_EQ(level_crossing(phi, 1.0 / 3.0, 0.5), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(level_crossing(phi, 1.0 / 3.0, 0.0), 0.5);
    std::vector<double> liquid{1.2, 1.1, 1.05};
    EXPECT_EQ(level_crossing(liquid, 0.5, 0.0), 0.0);
    std::vector<double> solid{-1, -0.5, -0.1};
    EXPECT_EQ(level_crossing(solid, 0.5, 0.0), 1.0);
    auto p = extract_interface(phi, 1.0 / 3.0, 2.4, 0.5);
    EXPECT_DOUBLE_EQ(p.s_phys, 2.0 / 3.0 * 2.4);
}

// Paper figure captions: final physical interface positions at tau = 4.
TEST(Run1D, FigureInterfacePositions) {
    EXPECT_NEAR(final_interface(icing(1.25, 0.35)), 1.15, 0.03);
    EXPECT_NEAR(final_interface(icing(1.25, 1.0)), 1.05, 0.03);
    EXPECT_NEAR(final_interface(icing(1.0, 0.35)), 1.32, 0.03);
    EXPECT_NEAR(final_interface(icing(1.0, 1.0)), 1.30, 0.03);
}

TEST(Run1D, ParameterMonotonicity) {
    double s035 = final_interface(icing(1.25, 0.35)), s05 = final_interface(icing(1.25, 0.5));
    double s1 = final_interface(icing(1.25, 1.0));
    EXPECT_GE(s035, s05);
    EXPECT_GE(s05, s1);
    EXPECT_GT(final_interface(icing(1.0, 0.35)), s035);
    EXPECT_GT(final_interface(icing(1.0, 1.0)), s1);
}

TEST(Run1D, GridConvergence) {
    auto c = icing(1.25, 0.35);
    double a = final_interface(c, 0.01), b = final_interface(c, 0.005), d = final_interface(c, 0.0025);
    EXPECT_LT(std::abs(b - d), std::abs(a - b));
    EXPECT_LT(std::abs(b - d), 0.005);
}

TEST(Run1D, SolidRegionIsAnIntervalAtTheWall) {
    for (auto [eta, beta] : {std::pair{1.25, 0.35}, {1.25, 1.0}, {1.0, 0.35}, {1.0, 1.0}}) {
        auto res = run1d(Grid1D::uniform(0.01, 1e-4, 4.0), icing(eta, beta));
        for (const auto& s : res.snapshots) {
            std::size_t i = 0;
            while (i < s.phi.size() && s.phi[i] < 0) ++i;
            ASSERT_GE(i, 1u);
            for (; i < s.phi.size(); ++i) ASSERT_GE(s.phi[i], 0.0) << "tau=" << s.tau;
        }
    }
}

TEST(Run1D, Deterministic) {
    auto c = icing(1.25, 0.35);
    auto a = run1d(Grid1D::uniform(0.02, 1e-3, 1.0), c);
    auto b = run1d(Grid1D::uniform(0.02, 1e-3, 1.0), c);
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) EXPECT_EQ(a.snapshots[k].phi, b.snapshots[k].phi);
}

TEST(Run1D, SnapshotCadence) {
    RunOptions r;
    EXPECT_EQ(r.cadence(40000), 100);
    EXPECT_EQ(r.cadence(401), 2);
    r.snapshot_every = 7;
    EXPECT_EQ(r.cadence(40000), 7);
    auto res = run1d(Grid1D::uniform(0.05, 1e-3, 0.01), icing(1.25, 0.35), {}, r);
    EXPECT_EQ(res.trace.size(), 3u); // tau = 0, 0.007, 0.01
}

TEST(Regime, Classification) {
    // static boundary: freezing front is the only motion
    auto still = run1d(Grid1D::uniform(0.01, 1e-3, 2.0), icing(1.0, 0.0)).trace;
    for (auto r : classify_regime(still, 0.0)) EXPECT_EQ(r, Regime::interface_dominated);

    InterfaceTrace flat;
    flat.taus = {0, 1, 2};
    flat.s_phys = {0.3, 0.3, 0.3};
    for (auto r : classify_regime(flat, 0.5)) EXPECT_EQ(r, Regime::injection_dominated);

    auto t = run1d(Grid1D::uniform(0.01, 1e-4, 4.0), icing(1.25, 1.0)).trace;
    auto reg = classify_regime(t, 1.0);
    EXPECT_EQ(reg[1], Regime::interface_dominated);
    EXPECT_EQ(reg.back(), Regime::injection_dominated);
}

TEST(EnergyAudit, ClosedSystemConserves) {
    auto c = icing(1.0, 0.0);
    Solver1DOptions o;
    o.wall = WallBoundary::insulated;
    o.far = FarBoundary::insulated;
    RunOptions r;
    r.snapshot_every = 1;
    auto res = run1d(Grid1D::uniform(0.02, 1e-3, 0.5), c, o, r);
    auto a = energy_audit(res.snapshots, c, o);
    for (std::size_t k = 0; k < a.residual.size(); ++k)
        EXPECT_LE(std::abs(a.residual[k]) / a.total_enthalpy[k + 1], 1e-10);
}

TEST(EnergyAudit, SteadyLiquidBalancesInflux) {
    // eta_hat = 1 + theta keeps the uniform liquid state stationary while the domain grows.
    auto c = icing(1.05, 0.35);
    c.theta_0 = 0.05;
    RunOptions r;
    r.snapshot_every = 1;
    auto res = run1d(Grid1D::uniform(0.05, 1e-3, 0.2), c, {}, r);
    auto a = energy_audit(res.snapshots, c);
    EXPECT_LE(a.max_abs_residual(), 1e-10);
}

TEST(EnergyAudit, OpenSystemFirstOrder) {
    auto c = icing(1.25, 0.35);
    auto worst = [&](double dz) {
        RunOptions r;
        r.snapshot_every = 1;
        auto res = run1d(Grid1D::uniform(dz, 1e-4, 0.5), c, {}, r);
        auto a = energy_audit(res.snapshots, c);
        double w = 0;
        for (std::size_t k = 0; k < a.residual.size(); ++k)
            if (a.tau[k] >= 0.1) w = std::max(w, std::abs(a.residual[k]) / (a.total_enthalpy[k + 1] * 1e-4));
        return w;
    };
    double e1 = worst(0.02), e2 = worst(0.01), e3 = worst(0.005);
    EXPECT_GE(std::log2(e1 / e2), 0.8);
    EXPECT_GE(std::log2(e2 / e3), 0.8);
}

TEST(EnergyAudit, NeedsHistory) {
    std::vector<Snapshot1D> one{{0.0, {1, 1, 1}}};
    EXPECT_THROW(energy_audit(one, icing(1, 0)), ConfigError);
}

TEST(Neumann, OnePhaseLimit) {
    auto c = icing(1.0, 0.0);
    c.theta_initial = 0.0;
    auto sol = neumann_oracle(c);
    double l = one_phase_lambda(-0.25);
    EXPECT_NEAR(sol.lambda, l, 1e-10);
    EXPECT_NEAR(sol.interface(4.0), 2 * l * 2, 1e-10);
}

TEST(Neumann, NoCoolingNoFreezing) {
    auto c = icing(1.0, 0.0);
    c.theta_0 = 0.0;
    auto sol = neumann_oracle(c);
    EXPECT_EQ(sol.lambda, 0.0);
    EXPECT_EQ(sol.interface(3.0), 0.0);
}

TEST(Neumann, SimilarityStructure) {
    auto sol = neumann_oracle(icing(1.0, 0.0));
    EXPECT_LE(std::abs(neumann_residual(sol.lambda, -0.25, 0.05)), 1e-12);
    double r1 = sol.interface(1) / 1, r2 = sol.interface(2) / std::sqrt(2.0), r4 = sol.interface(4) / 2;
    EXPECT_NEAR(r1, r2, 1e-10);
    EXPECT_NEAR(r1, r4, 1e-10);
    EXPECT_THROW(neumann_oracle(icing(1.0, 0.2)), ConfigError);
}

TEST(Neumann, NumericalInterfaceWithinOnePercent) {
    auto c = icing(1.0, 0.0);
    c.L0_star = 4.0;
    Solver1DOptions o;
    o.interface_level = 0.5;
    RunOptions r;
    r.keep_fields = false;
    auto t = run1d(Grid1D::uniform(0.005, 1e-4, 4.0), c, o, r).trace;
    auto sol = neumann_oracle(c);
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t.taus[k] >= 1.0) {
            EXPECT_LE(std::abs(t.s_phys[k] / sol.interface(t.taus[k]) - 1), 0.01) << t.taus[k];
        }
}
