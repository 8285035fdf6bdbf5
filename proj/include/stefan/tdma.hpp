#pragma once

#include "stefan/error.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace stefan {

/// Tridiagonal system a_i x_{i-1} + b_i x_i + c_i x_{i+1} = r_i, solved with the
/// Thomas algorithm. a[0] and c[n-1] are ignored. Scratch storage is kept
/// between solves so repeated time steps do not allocate.
class TridiagonalSystem {
public:
    explicit TridiagonalSystem(std::size_t n = 0) { resize(n); }

    void resize(std::size_t n) {
        lower.assign(n, 0.0);
        diag.assign(n, 0.0);
        upper.assign(n, 0.0);
        rhs.assign(n, 0.0);
        c_prime_.assign(n, 0.0);
    }

    std::size_t size() const noexcept { return diag.size(); }

    /// Throws NumericalError when a pivot falls below `pivot_tol` in magnitude.
    void solve(std::span<double> x, double pivot_tol = 1e-14) {
        const std::size_t n = diag.size();
        if (x.size() != n) throw ConfigError("tridiagonal solve: size mismatch");
        if (n == 0) return;

        auto check = [&](double pivot, std::size_t row) {
            if (!(std::abs(pivot) >= pivot_tol))
                throw NumericalError("tridiagonal pivot " + std::to_string(pivot) + " at row " +
                                         std::to_string(row) + " is singular",
                                     "numerical.singular_tdma");
        };

        check(diag[0], 0);
        c_prime_[0] = upper[0] / diag[0];
        x[0] = rhs[0] / diag[0];
        for (std::size_t i = 1; i < n; ++i) {
            double pivot = diag[i] - lower[i] * c_prime_[i - 1];
            check(pivot, i);
            double inv = 1.0 / pivot;
            c_prime_[i] = upper[i] * inv;
            x[i] = (rhs[i] - lower[i] * x[i - 1]) * inv;
        }
        for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= c_prime_[i - 1] * x[i];
    }

    std::vector<double> lower, diag, upper, rhs;

private:
    std::vector<double> c_prime_;
};

} // namespace stefan
