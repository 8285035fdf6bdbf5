#pragma once

// Non-intrusive generalized polynomial chaos: random inputs are sampled, the
// deterministic solver runs once per sample, and the responses are projected
// onto an orthonormal Legendre basis by discrete least squares.

#include "stefan/error.hpp"
#include "stefan/model.hpp"
#include "stefan/parallel.hpp"
#include "stefan/solver1d.hpp"
#include "stefan/solver2d.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <limits>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace stefan {

// ---------------------------------------------------------------------------
// Random inputs

struct Distribution {
    enum class Kind { uniform, normal };
    Kind kind = Kind::uniform;
    double a = 0.0; ///< lower bound, or mean for normal
    double b = 1.0; ///< upper bound, or standard deviation for normal

    static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
    static Distribution normal(double mu, double sigma) { return {Kind::normal, mu, sigma}; }

    /// Normal variables are truncated to mu +- 4 sigma so they fit a Legendre basis.
    static constexpr double normal_cutoff = 4.0;

    double lower() const { return kind == Kind::uniform ? a : a - normal_cutoff * b; }
    double upper() const { return kind == Kind::uniform ? b : a + normal_cutoff * b; }

    /// Affine map of the support onto [-1, 1].
    double to_reference(double xi) const { return (2.0 * xi - lower() - upper()) / (upper() - lower()); }

    /// Probability mass removed by the truncation (zero for uniform).
    double truncated_mass() const {
        return kind == Kind::uniform ? 0.0 : std::erfc(normal_cutoff / std::numbers::sqrt2);
    }

    std::string describe() const;

    void validate(const std::string& name) const {
        if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("distribution of '" + name + "' is not finite");
        if (kind == Kind::uniform && !(a < b))
            throw ConfigError("uniform(" + std::to_string(a) + ", " + std::to_string(b) + ") for '" + name +
                              "' needs a < b");
        if (kind == Kind::normal && !(b > 0.0))
            throw ConfigError("normal distribution for '" + name + "' needs sigma > 0");
    }
};

inline std::string Distribution::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << (kind == Kind::uniform ? "uniform(" : "normal(") << a << ", " << b << ")";
    return os.str();
}

struct RandomParameter {
    std::string name;
    Distribution dist;
};

/// Named random inputs and how they enter a DimlessConfig. Names that match a
/// DimlessConfig field (beta_hat, eta_hat, theta_0, theta_initial, L0_star)
/// overwrite it; any other name is substituted into the eta_hat expression.
struct RandomInputSpec {
    std::vector<RandomParameter> params;

    std::size_t dims() const { return params.size(); }

    static bool is_direct(const std::string& name) {
        return name == "beta_hat" || name == "eta_hat" || name == "theta_0" || name == "theta_initial" ||
               name == "L0_star";
    }

    void validate(const DimlessConfig& base) const {
        if (params.empty()) throw ConfigError("random input spec has no parameters");
        std::set<std::string> seen;
        for (const auto& p : params) {
            if (!seen.insert(p.name).second) throw ConfigError("random parameter '" + p.name + "' listed twice");
            p.dist.validate(p.name);
            if (!is_direct(p.name) && !base.eta_hat.depends_on(p.name))
                throw ConfigError("random parameter '" + p.name + "' is not used by eta_hat = " +
                                  base.eta_hat.source());
        }
        for (const auto& name : base.eta_hat.free_parameters())
            if (!seen.count(name)) throw ConfigError("eta_hat parameter '" + name + "' has no distribution");
    }

    /// Config for one parameter point; validates the result.
    DimlessConfig bind(const DimlessConfig& base, std::span<const double> xi) const {
        DimlessConfig cfg = base;
        std::map<std::string, double> subs;
        std::optional<double> eta;
        for (std::size_t d = 0; d < params.size(); ++d) {
            const auto& n = params[d].name;
            if (n == "beta_hat") cfg.beta_hat = xi[d];
            else if (n == "eta_hat") eta = xi[d];
            else if (n == "theta_0") cfg.theta_0 = xi[d];
            else if (n == "theta_initial") cfg.theta_initial = xi[d];
            else if (n == "L0_star") cfg.L0_star = xi[d];
            else subs[n] = xi[d];
        }
        cfg.eta_hat = eta ? Expression(*eta) : base.eta_hat.substitute(subs);
        cfg.validate();
        return cfg;
    }
};

/// mt19937_64 with explicit conversions so streams are identical across
/// standard library implementations: 53-bit uniforms and Box-Muller normals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        double u1;
        do u1 = uniform();
        while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double draw(const Distribution& d) {
        if (d.kind == Distribution::Kind::uniform) return d.a + (d.b - d.a) * uniform();
        for (;;) {
            double z = normal();
            if (std::abs(z) <= Distribution::normal_cutoff) return d.a + d.b * z;
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Row m holds the parameter values of sample m in spec order.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline SampleMatrix sample_inputs(const RandomInputSpec& spec, std::size_t M, std::uint64_t seed,
                                  std::size_t basis_size = 0) {
    if (M < basis_size)
        throw ConfigError("sample size " + std::to_string(M) + " is below the basis size " +
                          std::to_string(basis_size) + "; choose M = c N^2 with N the basis size");
    for (const auto& p : spec.params) p.dist.validate(p.name);
    Rng rng(seed);
    SampleMatrix xi(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(spec.dims()));
    for (Eigen::Index m = 0; m < xi.rows(); ++m)
        for (Eigen::Index d = 0; d < xi.cols(); ++d) xi(m, d) = rng.draw(spec.params[static_cast<std::size_t>(d)].dist);
    return xi;
}

// ---------------------------------------------------------------------------
// Basis

/// Orthonormal Legendre polynomial sqrt(2n+1) P_n(x) for the uniform weight on [-1, 1].
inline double legendre_orthonormal(int n, double x) {
    double p0 = 1.0, p1 = x;
    if (n == 0) return 1.0;
    for (int k = 1; k < n; ++k) {
        double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return std::sqrt(2.0 * n + 1.0) * p1;
}

/// Multivariate basis of total degree <= degree, ordered by degree and then
/// lexicographically with the first dimension's exponent descending.
class LegendreBasis {
public:
    LegendreBasis() = default;
    LegendreBasis(std::vector<Distribution> dists, int degree) : dists_(std::move(dists)), degree_(degree) {
        if (dists_.empty()) throw ConfigError("basis needs at least one dimension");
        if (degree < 0) throw ConfigError("basis degree must be non-negative");
        std::vector<int> alpha(dists_.size());
        for (int total = 0; total <= degree; ++total) fill(alpha, 0, total);
    }

    static LegendreBasis for_spec(const RandomInputSpec& spec, int degree) {
        std::vector<Distribution> d;
        for (const auto& p : spec.params) d.push_back(p.dist);
        return {std::move(d), degree};
    }

    std::size_t size() const { return indices_.size(); }
    std::size_t dims() const { return dists_.size(); }
    int degree() const { return degree_; }
    const std::vector<std::vector<int>>& indices() const { return indices_; }
    const std::vector<Distribution>& distributions() const { return dists_; }

    /// Values of every basis function at the parameter point xi (physical units).
    Eigen::VectorXd eval(std::span<const double> xi) const {
        if (xi.size() != dims()) throw ConfigError("parameter point has the wrong dimension");
        Eigen::MatrixXd uni(static_cast<Eigen::Index>(dims()), degree_ + 1);
        for (std::size_t d = 0; d < dims(); ++d) {
            double x = dists_[d].to_reference(xi[d]);
            for (int n = 0; n <= degree_; ++n) uni(static_cast<Eigen::Index>(d), n) = legendre_orthonormal(n, x);
        }
        Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) {
            double v = 1.0;
            for (std::size_t d = 0; d < dims(); ++d) v *= uni(static_cast<Eigen::Index>(d), indices_[i][d]);
            out(static_cast<Eigen::Index>(i)) = v;
        }
        return out;
    }

    /// M x N design matrix.
    Eigen::MatrixXd design(const SampleMatrix& xi) const {
        Eigen::MatrixXd phi(xi.rows(), static_cast<Eigen::Index>(size()));
        for (Eigen::Index m = 0; m < xi.rows(); ++m)
            phi.row(m) = eval({xi.row(m).data(), static_cast<std::size_t>(xi.cols())}).transpose();
        return phi;
    }

private:
    void fill(std::vector<int>& alpha, std::size_t d, int remaining) {
        if (d + 1 == alpha.size()) {
            alpha[d] = remaining;
            indices_.push_back(alpha);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            alpha[d] = k;
            fill(alpha, d + 1, remaining - k);
        }
    }

    std::vector<Distribution> dists_;
    int degree_ = 0;
    std::vector<std::vector<int>> indices_;
};

inline Eigen::VectorXd eval_basis(const LegendreBasis& basis, std::span<const double> xi) { return basis.eval(xi); }

/// <u, v>_M = (1/M) sum u_m v_m.
inline double discrete_inner_product(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ConfigError("inner product of sequences with different lengths");
    if (u.empty()) throw ConfigError("inner product of empty sequences");
    double s = 0.0;
    for (std::size_t m = 0; m < u.size(); ++m) s += u[m] * v[m];
    return s / static_cast<double>(u.size());
}

// ---------------------------------------------------------------------------
// Surrogate

struct FitOptions {
    double max_condition = 1e12;
    /// Use an eigenvalue pseudo-inverse instead of failing on ill-conditioning.
    bool allow_pseudo_inverse = false;
};

/// Coefficient column c of response column r: S_N(xi) = sum_n coeffs(n, c) phi_n(xi).
struct GpcSurrogate {
    LegendreBasis basis;
    Eigen::MatrixXd coeffs;    ///< basis size x response columns
    SampleMatrix samples;      ///< M x dims
    Eigen::MatrixXd responses; ///< M x response columns
    double condition = 0.0;
    bool used_pseudo_inverse = false;

    Eigen::Index columns() const { return coeffs.cols(); }
};

inline GpcSurrogate fit_surrogate(const SampleMatrix& xi, Eigen::MatrixXd responses, const LegendreBasis& basis,
                                  const FitOptions& opts = {}) {
    const Eigen::Index M = xi.rows();
    const Eigen::Index N = static_cast<Eigen::Index>(basis.size());
    if (responses.rows() != M) throw ConfigError("response rows do not match the sample count");
    if (static_cast<std::size_t>(xi.cols()) != basis.dims()) throw ConfigError("samples do not match the basis dimension");
    if (M < N)
        throw ConfigError("sample size " + std::to_string(M) + " is below the basis size " + std::to_string(N) +
                          "; choose M = c N^2 with N the basis size");
    if (!responses.allFinite()) throw NumericalError("non-finite response in the sample archive", "numerical.response");

    const Eigen::MatrixXd phi = basis.design(xi);
    const Eigen::MatrixXd gram = phi.transpose() * phi / static_cast<double>(M);
    const Eigen::MatrixXd rhs = phi.transpose() * responses / static_cast<double>(M);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    GpcSurrogate s;
    s.basis = basis;
    s.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();

    if (s.condition > opts.max_condition) {
        if (!opts.allow_pseudo_inverse)
            throw NumericalError("Gram matrix condition number " + std::to_string(s.condition) +
                                     " exceeds the limit; increase the sample size (M = c N^2)",
                                 "numerical.ill_conditioned");
        Eigen::VectorXd inv = eig.eigenvalues();
        for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > hi / opts.max_condition ? 1.0 / inv(i) : 0.0;
        s.coeffs = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * rhs;
        s.used_pseudo_inverse = true;
    } else {
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success)
            throw NumericalError("Gram matrix is not positive definite; increase the sample size (M = c N^2)",
                                 "numerical.ill_conditioned");
        s.coeffs = llt.solve(rhs);
    }
    s.samples = xi;
    s.responses = std::move(responses);
    return s;
}

inline double evaluate_surrogate(const GpcSurrogate& s, std::span<const double> xi, Eigen::Index column) {
    if (column < 0 || column >= s.columns()) throw ConfigError("surrogate column out of range");
    return s.basis.eval(xi).dot(s.coeffs.col(column));
}

// ---------------------------------------------------------------------------
// Statistics

struct Histogram {
    std::vector<double> edges; ///< bins + 1 edges
    std::vector<std::size_t> counts;
};

inline Histogram histogram(std::span<const double> values, int bins = 30) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    if (values.empty()) throw ConfigError("histogram of an empty sample");
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    Histogram h;
    if (*mn == *mx) {
        h.edges = {*mn, *mx};
        h.counts = {values.size()};
        return h;
    }
    const double lo = *mn, hi = *mx, w = (hi - lo) / bins;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + b * w;
    h.edges.back() = hi;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>(std::min<double>(bins - 1, std::floor((v - lo) / w)));
        ++h.counts[b];
    }
    return h;
}

struct ColumnStatistics {
    double mean = 0.0;        ///< c_0
    double std = 0.0;         ///< sqrt(sum_{n>0} c_n^2)
    double sample_mean = 0.0; ///< archive moments
    double sample_std = 0.0;
    double skewness = 0.0;
    double kurtosis = 3.0; ///< non-excess; a constant sample reports 0 skewness and 3 kurtosis
    Histogram hist;
};

inline std::vector<ColumnStatistics> statistics(const GpcSurrogate& s, int bins = 30) {
    const Eigen::Index M = s.responses.rows();
    std::vector<ColumnStatistics> out(static_cast<std::size_t>(s.columns()));
    for (Eigen::Index c = 0; c < s.columns(); ++c) {
        auto& st = out[static_cast<std::size_t>(c)];
        st.mean = s.coeffs(0, c);
        st.std = s.coeffs.col(c).tail(s.coeffs.rows() - 1).norm();
        std::vector<double> v(s.responses.col(c).data(), s.responses.col(c).data() + M);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(M);
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (double x : v) {
            double d = x - mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= static_cast<double>(M);
        m3 /= static_cast<double>(M);
        m4 /= static_cast<double>(M);
        st.sample_mean = mean;
        st.sample_std = std::sqrt(m2);
        // Rounding in the mean leaves a tiny m2 for constant samples; treat those as constant.
        const double scale = std::max(1.0, std::abs(mean));
        if (m2 > 1e-28 * scale * scale) {
            st.skewness = m3 / std::pow(m2, 1.5);
            st.kurtosis = m4 / (m2 * m2);
        }
        st.hist = histogram(v, bins);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Campaigns

struct CampaignOptions {
    int degree = 4;
    std::size_t samples = 0; ///< 0 applies M = oversampling * N^2
    double oversampling = 2.0;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    FitOptions fit;

    std::size_t sample_count(std::size_t basis_size) const {
        if (samples > 0) return samples;
        if (!(oversampling > 0.0)) throw ConfigError("oversampling factor must be positive");
        return static_cast<std::size_t>(std::ceil(oversampling * static_cast<double>(basis_size * basis_size)));
    }
};

/// Responses are s_phys at `taus` (1D) or at every (tau_k, y_j), column k * ny + j (2D).
struct UqResult {
    GpcSurrogate surrogate;
    std::vector<double> taus;
    std::vector<double> ys; ///< empty for 1D campaigns
    std::vector<std::string> notes;

    std::size_t column(std::size_t k, std::size_t j = 0) const { return k * std::max<std::size_t>(ys.size(), 1) + j; }
};

namespace detail {

template <class Runner>
UqResult run_campaign(const RandomInputSpec& spec, const DimlessConfig& base, const CampaignOptions& opts,
                      Runner&& runner) {
    spec.validate(base);
    const LegendreBasis basis = LegendreBasis::for_spec(spec, opts.degree);
    const std::size_t M = opts.sample_count(basis.size());
    const SampleMatrix xi = sample_inputs(spec, M, opts.seed, basis.size());

    std::vector<DimlessConfig> configs;
    configs.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
        try {
            configs.push_back(spec.bind(base, {xi.row(static_cast<Eigen::Index>(m)).data(), spec.dims()}));
        } catch (const Error& e) {
            throw Error(e.code(), e.tag(), "sample " + std::to_string(m) + ": " + e.what());
        }
    }

    UqResult out;
    std::vector<std::vector<double>> rows(M);
    parallel_for(M, opts.threads, [&](std::size_t m) {
        try {
            rows[m] = runner(configs[m], m == 0 ? &out : nullptr);
        } catch (const Error& e) {
            throw Error(e.code(), e.tag(), "sample " + std::to_string(m) + ": " + e.what());
        }
    });

    const std::size_t cols = rows.front().size();
    Eigen::MatrixXd responses(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(cols));
    for (std::size_t m = 0; m < M; ++m) {
        if (rows[m].size() != cols) throw NumericalError("sample " + std::to_string(m) + " returned a ragged response");
        for (std::size_t c = 0; c < cols; ++c)
            responses(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)) = rows[m][c];
    }
    out.surrogate = fit_surrogate(xi, std::move(responses), basis, opts.fit);
    for (const auto& p : spec.params)
        if (p.dist.kind == Distribution::Kind::normal)
            out.notes.push_back(p.name + ": normal truncated at mu +- 4 sigma, removed mass " +
                                std::to_string(p.dist.truncated_mass()));
    if (out.surrogate.used_pseudo_inverse) out.notes.push_back("Gram system solved with a pseudo-inverse");
    return out;
}

} // namespace detail

inline UqResult run_uq_1d(const RandomInputSpec& spec, const DimlessConfig& base, const Grid1D& grid,
                          const Solver1DOptions& solver, const RunOptions& run, const CampaignOptions& opts) {
    RunOptions r = run;
    r.keep_fields = false;
    return detail::run_campaign(spec, base, opts, [&](const DimlessConfig& cfg, UqResult* first) {
        auto res = run1d(grid, cfg, solver, r);
        if (first) first->taus = res.trace.taus;
        return res.trace.s_phys;
    });
}

inline UqResult run_uq_2d(const RandomInputSpec& spec, const DimlessConfig& base, const Grid2D& grid,
                          const Solver2DOptions& solver, const RunOptions& run, const CampaignOptions& opts) {
    RunOptions r = run;
    r.keep_fields = false;
    Solver2DOptions s = solver;
    s.threads = 1; // parallelism is across samples
    return detail::run_campaign(spec, base, opts, [&](const DimlessConfig& cfg, UqResult* first) {
        auto res = run2d(grid, cfg, s, r);
        if (first) {
            first->taus = res.curve.taus;
            first->ys.resize(static_cast<std::size_t>(grid.ny));
            for (int j = 0; j < grid.ny; ++j) first->ys[static_cast<std::size_t>(j)] = grid.y(j);
        }
        std::vector<double> flat;
        flat.reserve(res.curve.size() * static_cast<std::size_t>(grid.ny));
        for (std::size_t k = 0; k < res.curve.size(); ++k)
            for (double v : res.curve.s_phys_row(k)) flat.push_back(v);
        return flat;
    });
}

} // namespace stefan
