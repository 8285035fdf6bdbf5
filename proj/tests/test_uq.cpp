#include "gpc_properties.hpp"
#include "stefan/uq.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stefan;

namespace {

RandomInputSpec one(const std::string& name, Distribution d) {
    RandomInputSpec s;
    s.params = {{name, d}};
    return s;
}

DimlessConfig base() {
    DimlessConfig c;
    c.theta_0 = -0.25;
    c.theta_initial = 0.05;
    c.beta_hat = 0.35;
    c.eta_hat = Expression(1.25);
    return c;
}

} // namespace

TEST(Sampling, Deterministic) {
    auto spec = one("beta_hat", Distribution::uniform(0, 1));
    auto a = sample_inputs(spec, 4, 7), b = sample_inputs(spec, 4, 7), c = sample_inputs(spec, 4, 8);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Sampling, UniformMean) {
    auto xi = sample_inputs(one("beta_hat", Distribution::uniform(0.2, 0.7)), 100000, 3);
    EXPECT_NEAR(xi.mean(), 0.45, 0.005);
    EXPECT_GE(xi.minCoeff(), 0.2);
    EXPECT_LT(xi.maxCoeff(), 0.7);
}

TEST(Sampling, NormalVariance) {
    auto xi = sample_inputs(one("eta_hat", Distribution::normal(2, 1)), 100000, 4);
    double m = xi.mean();
    double v = (xi.array() - m).square().mean();
    EXPECT_NEAR(v, 1.0, 0.02);
    EXPECT_GE(xi.minCoeff(), -2.0);
    EXPECT_LE(xi.maxCoeff(), 6.0);
}

TEST(Sampling, TooFewSamples) {
    try {
        sample_inputs(one("beta_hat", Distribution::uniform(0, 1)), 3, 1, 5);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("M = c N^2"), std::string::npos);
    }
}

TEST(Distribution, Validation) {
    EXPECT_THROW(Distribution::uniform(1, 1).validate("x"), ConfigError);
    EXPECT_THROW(Distribution::normal(1, 0).validate("x"), ConfigError);
    auto n = Distribution::normal(2, 1);
    EXPECT_DOUBLE_EQ(n.lower(), -2);
    EXPECT_DOUBLE_EQ(n.upper(), 6);
    EXPECT_LT(n.truncated_mass(), 1e-4);
    EXPECT_GT(n.truncated_mass(), 0);
    EXPECT_DOUBLE_EQ(Distribution::uniform(0.2, 0.7).to_reference(0.45), 0.0);
}

TEST(Basis, Values) {
    LegendreBasis b({Distribution::uniform(0, 1)}, 4);
    EXPECT_EQ(b.size(), 5u);
    for (double x : {0.0, 0.3, 1.0}) EXPECT_DOUBLE_EQ(b.eval(std::vector{x})(0), 1.0);
    EXPECT_NEAR(b.eval(std::vector{1.0})(2), std::sqrt(5.0), 1e-14);
    EXPECT_NEAR(b.eval(std::vector{0.5})(2), -std::sqrt(5.0) / 2, 1e-14);
}

TEST(Basis, OddFactorsVanishAtCenter) {
    LegendreBasis b({Distribution::uniform(0.2, 0.7), Distribution::uniform(1, 1.25)}, 4);
    EXPECT_EQ(b.size(), 15u);
    auto v = b.eval(std::vector{0.45, 1.125});
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto& a = b.indices()[i];
        if (a[0] % 2 || a[1] % 2) EXPECT_NEAR(v(static_cast<Eigen::Index>(i)), 0.0, 1e-14);
        else EXPECT_NE(v(static_cast<Eigen::Index>(i)), 0.0);
    }
}

TEST(Basis, TotalDegreeOrdering) {
    LegendreBasis b({Distribution::uniform(0, 1), Distribution::uniform(0, 1)}, 2);
    std::vector<std::vector<int>> want{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    EXPECT_EQ(b.indices(), want);
}

TEST(InnerProduct, Examples) {
    EXPECT_DOUBLE_EQ(discrete_inner_product(std::vector{1.0, 1.0, 1.0}, std::vector{1.0, 1.0, 1.0}), 1.0);
    EXPECT_DOUBLE_EQ(discrete_inner_product(std::vector{-1.0, 1.0}, std::vector{1.0, 1.0}), 0.0);
    EXPECT_THROW(discrete_inner_product(std::vector{1.0}, std::vector{1.0, 2.0}), ConfigError);

    auto spec = one("beta_hat", Distribution::uniform(0.2, 0.7));
    LegendreBasis b = LegendreBasis::for_spec(spec, 1);
    Eigen::VectorXd p1 = b.design(sample_inputs(spec, 100000, 5)).col(1);
    std::span<const double> v(p1.data(), static_cast<std::size_t>(p1.size()));
    EXPECT_NEAR(discrete_inner_product(v, v), 1.0, 0.02);
}

TEST(InnerProduct, OrthonormalityBound) {
    EXPECT_LE(props::orthonormality_violation_fraction(1000, 20), 0.05);
    EXPECT_LE(props::orthonormality_violation_fraction(20000, 10), 0.05);
}

TEST(Fit, Constant) {
    auto spec = props::box2();
    auto basis = LegendreBasis::for_spec(spec, 4);
    auto xi = sample_inputs(spec, 450, 1);
    auto s = fit_surrogate(xi, Eigen::MatrixXd::Constant(450, 2, 1.7), basis);
    for (Eigen::Index c = 0; c < 2; ++c) {
        EXPECT_NEAR(s.coeffs(0, c), 1.7, 1e-12);
        EXPECT_LE(s.coeffs.col(c).tail(14).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_NEAR(evaluate_surrogate(s, std::vector{0.3, 1.2}, 1), 1.7, 1e-12);
    auto st = statistics(s);
    EXPECT_LE(st[0].std, 1e-10);
    EXPECT_EQ(st[0].hist.counts.size(), 1u);
    EXPECT_EQ(st[0].skewness, 0.0);
    EXPECT_EQ(st[0].kurtosis, 3.0);
    EXPECT_THROW(evaluate_surrogate(s, std::vector{0.3, 1.2}, 2), ConfigError);
}

TEST(Fit, PlantedBasisFunction) { EXPECT_LE(props::planted_error(), 1e-10); }

TEST(Fit, PlantedEvaluatesAtCenter) {
    auto spec = one("beta_hat", Distribution::uniform(0.2, 0.7));
    auto basis = LegendreBasis::for_spec(spec, 4);
    auto xi = sample_inputs(spec, 50, 2);
    Eigen::MatrixXd r = basis.design(xi).col(2);
    auto s = fit_surrogate(xi, r, basis);
    EXPECT_NEAR(evaluate_surrogate(s, std::vector{0.45}, 0), -std::sqrt(5.0) / 2, 1e-10);
}

TEST(Fit, InSpanPolynomial) { EXPECT_LE(props::in_span_error(), 1e-8); }

TEST(Fit, Idempotent) {
    auto spec = props::box2();
    auto basis = LegendreBasis::for_spec(spec, 4);
    auto xi = sample_inputs(spec, 450, 9);
    Eigen::MatrixXd r(450, 1);
    for (Eigen::Index m = 0; m < 450; ++m) r(m, 0) = std::sin(3 * xi(m, 0)) * xi(m, 1);
    auto s = fit_surrogate(xi, r, basis);
    Eigen::MatrixXd pred = basis.design(xi) * s.coeffs;
    auto again = fit_surrogate(xi, pred, basis);
    EXPECT_LE((again.coeffs - s.coeffs).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fit, MeanAndVarianceIdentities) {
    auto spec = props::box2();
    auto basis = LegendreBasis::for_spec(spec, 4);
    auto xi = sample_inputs(spec, 450, 10);
    Eigen::MatrixXd r(450, 1);
    for (Eigen::Index m = 0; m < 450; ++m) r(m, 0) = std::exp(xi(m, 0)) + xi(m, 1);
    auto s = fit_surrogate(xi, r, basis);
    // c_0 solves the constant row of the Gram system together with the others.
    Eigen::MatrixXd phi = basis.design(xi);
    Eigen::VectorXd proj = phi.transpose() * r / 450.0;
    Eigen::MatrixXd gram = phi.transpose() * phi / 450.0;
    EXPECT_NEAR(gram.row(0).dot(s.coeffs.col(0)), proj(0), 1e-12);
    EXPECT_NEAR(proj(0), r.mean(), 1e-12);
    auto v = props::variance_identity();
    EXPECT_LE(std::abs(v.surrogate - v.archive), v.bound);
}

TEST(Fit, Errors) {
    auto spec = props::box2();
    auto basis = LegendreBasis::for_spec(spec, 4);
    auto xi = sample_inputs(spec, 10, 1);
    EXPECT_THROW(fit_surrogate(xi, Eigen::MatrixXd::Zero(10, 1), basis), ConfigError);

    // Duplicated samples make the Gram matrix singular.
    SampleMatrix dup(60, 2);
    for (Eigen::Index m = 0; m < 60; ++m) dup.row(m) = Eigen::RowVector2d(0.3, 1.1);
    try {
        fit_surrogate(dup, Eigen::MatrixXd::Ones(60, 1), basis);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.tag(), "numerical.ill_conditioned");
        EXPECT_NE(std::string(e.what()).find("M = c N^2"), std::string::npos);
    }
    FitOptions o;
    o.allow_pseudo_inverse = true;
    auto s = fit_surrogate(dup, Eigen::MatrixXd::Constant(60, 1, 2.0), basis, o);
    EXPECT_TRUE(s.used_pseudo_inverse);
    EXPECT_NEAR(evaluate_surrogate(s, std::vector{0.3, 1.1}, 0), 2.0, 1e-8);

    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(60, 1);
    bad(3, 0) = std::nan("");
    EXPECT_THROW(fit_surrogate(sample_inputs(spec, 60, 1), bad, basis), NumericalError);
}

TEST(Statistics, SymmetricResponse) {
    auto spec = one("beta_hat", Distribution::uniform(-1, 1));
    auto basis = LegendreBasis::for_spec(spec, 1);
    auto xi = sample_inputs(spec, 100000, 6);
    Eigen::MatrixXd r = xi;
    auto st = statistics(fit_surrogate(xi, r, basis)).front();
    EXPECT_LE(std::abs(st.skewness), 0.05);
    EXPECT_NEAR(st.kurtosis, 1.8, 0.02); // uniform
    EXPECT_NEAR(st.std, 1 / std::sqrt(3.0), 0.01);
    EXPECT_EQ(st.hist.counts.size(), 30u);
}

TEST(Histogram, Edges) {
    auto h = histogram(std::vector{0.0, 1.0, 2.0, 3.0}, 3);
    EXPECT_EQ(h.counts, (std::vector<std::size_t>{1, 1, 2}));
    EXPECT_DOUBLE_EQ(h.edges.back(), 3.0);
    EXPECT_THROW(histogram(std::vector<double>{}, 3), ConfigError);
    EXPECT_THROW(histogram(std::vector{1.0}, 0), ConfigError);
}

TEST(Spec, Binding) {
    RandomInputSpec s;
    auto c = base();
    c.eta_hat = Expression::parse("1 + zeta*(1 + cos(3*pi*y))");
    s.params = {{"beta_hat", Distribution::uniform(0.1, 0.3)}, {"zeta", Distribution::uniform(1, 1.2)}};
    s.validate(c);
    auto b = s.bind(c, std::vector{0.2, 1.1});
    EXPECT_DOUBLE_EQ(b.beta_hat, 0.2);
    EXPECT_DOUBLE_EQ(b.eta_hat(0.0, 0.0), 1 + 1.1 * 2);

    RandomInputSpec unused;
    unused.params = {{"zeta", Distribution::uniform(1, 2)}};
    EXPECT_THROW(unused.validate(base()), ConfigError);
    RandomInputSpec missing;
    missing.params = {{"beta_hat", Distribution::uniform(0.1, 0.3)}};
    EXPECT_THROW(missing.validate(c), ConfigError);
    RandomInputSpec twice;
    twice.params = {{"beta_hat", Distribution::uniform(0.1, 0.3)}, {"beta_hat", Distribution::uniform(0.1, 0.3)}};
    EXPECT_THROW(twice.validate(base()), ConfigError);
}

TEST(Campaign, OneDimensional) {
    RandomInputSpec s;
    s.params = {{"beta_hat", Distribution::uniform(0.2, 0.7)}, {"eta_hat", Distribution::uniform(1.0, 1.25)}};
    CampaignOptions o;
    o.degree = 2;
    o.seed = 42;
    EXPECT_EQ(o.sample_count(6), 72u);
    RunOptions r;
    r.snapshot_every = 100;
    auto grid = Grid1D::uniform(0.05, 1e-3, 0.5);
    auto serial = run_uq_1d(s, base(), grid, {}, r, o);
    EXPECT_EQ(serial.surrogate.samples.rows(), 72);
    EXPECT_EQ(serial.taus.size(), 6u);
    EXPECT_EQ(serial.surrogate.columns(), 6);

    o.threads = 4;
    auto par = run_uq_1d(s, base(), grid, {}, r, o);
    EXPECT_EQ(serial.surrogate.responses, par.surrogate.responses);
    EXPECT_EQ(serial.surrogate.coeffs, par.surrogate.coeffs);

    // Each archived response is the deterministic solver run at that sample.
    auto cfg = s.bind(base(), {serial.surrogate.samples.row(5).data(), 2});
    auto direct = run1d(grid, cfg, {}, r).trace.s_phys;
    for (std::size_t k = 0; k < direct.size(); ++k)
        EXPECT_EQ(direct[k], serial.surrogate.responses(5, static_cast<Eigen::Index>(k)));
}

TEST(Campaign, ErrorsNameTheSample) {
    RandomInputSpec s;
    s.params = {{"eta_hat", Distribution::uniform(0.5, 1.5)}};
    CampaignOptions o;
    o.degree = 1;
    try {
        run_uq_1d(s, base(), Grid1D::uniform(0.1, 1e-2, 0.1), {}, {}, o);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ExitCode::config);
        EXPECT_NE(std::string(e.what()).find("sample 0"), std::string::npos);
    }
}

TEST(Campaign, TwoDimensionalYIndependent) {
    RandomInputSpec s;
    s.params = {{"beta_hat", Distribution::uniform(0.1, 0.3)}, {"zeta", Distribution::uniform(1, 1.2)}};
    auto c = base();
    c.L0_star = 0.2;
    c.eta_hat = Expression::parse("1 + zeta");
    CampaignOptions o;
    o.degree = 1;
    o.threads = 2;
    RunOptions r;
    r.snapshot_every = 1000;
    auto grid = Grid2D::uniform(0.1, 0.05, 1e-5, 0.02);
    auto res = run_uq_2d(s, c, grid, {}, r, o);
    ASSERT_EQ(res.ys.size(), 11u);
    ASSERT_EQ(res.taus.size(), 3u);
    for (std::size_t k = 0; k < res.taus.size(); ++k)
        for (std::size_t j = 1; j < res.ys.size(); ++j)
            EXPECT_LE((res.surrogate.coeffs.col(static_cast<Eigen::Index>(res.column(k, j))) -
                       res.surrogate.coeffs.col(static_cast<Eigen::Index>(res.column(k, 0))))
                          .cwiseAbs()
                          .maxCoeff(),
                      1e-8);
}
