#pragma once

// Matrix-free symmetric positive-definite grid operators of the form
//   (A x)_k = a_k x_k + sum over faces e of k:  s_e (x_k - x_neighbour)
// and a Jacobi-preconditioned conjugate-gradient solver for them.

#include <cmath>
#include <string>
#include <vector>

#include "gammaseg/errors.hpp"
#include "gammaseg/grid.hpp"

namespace gammaseg {

struct GridOperator {
    Grid grid;
    std::vector<double> mass;  // a_k > 0
    std::vector<double> sx;    // face between k and k+1 (x); unused on the last column
    std::vector<double> sy;    // face between k and k+nx (y); unused on the last row

    explicit GridOperator(const Grid& g)
        : grid(g), mass(g.size(), 0.0), sx(g.size(), 0.0), sy(g.size(), 0.0) {}

    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const int nx = grid.nx();
        const int ny = grid.ny();
        const std::size_t stride = static_cast<std::size_t>(nx);
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = mass[k] * x[k];
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const std::size_t k = grid.index(i, j);
                if (i + 1 < nx) {
                    const double f = sx[k] * (x[k] - x[k + 1]);
                    y[k] += f;
                    y[k + 1] -= f;
                }
                if (j + 1 < ny) {
                    const double f = sy[k] * (x[k] - x[k + stride]);
                    y[k] += f;
                    y[k + stride] -= f;
                }
            }
        }
    }

    std::vector<double> diagonal() const {
        const int nx = grid.nx();
        const int ny = grid.ny();
        const std::size_t stride = static_cast<std::size_t>(nx);
        std::vector<double> d(mass);
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const std::size_t k = grid.index(i, j);
                if (i + 1 < nx) {
                    d[k] += sx[k];
                    d[k + 1] += sx[k];
                }
                if (j + 1 < ny) {
                    d[k] += sy[k];
                    d[k + stride] += sy[k];
                }
            }
        }
        return d;
    }
};

struct CgResult {
    int iterations = 0;
    double residual = 0.0;  // relative: |r| / |b|
};

/// Solves A x = b starting from the given x; stops at |r| <= tol |b|.
inline CgResult cg_solve(const GridOperator& A, const std::vector<double>& b, std::vector<double>& x, double tol,
                         int max_iter) {
    const std::size_t n = b.size();
    const auto diag = A.diagonal();
    std::vector<double> r(n), z(n), p(n), q(n);
    A.apply(x, q);
    double bnorm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        r[k] = b[k] - q[k];
        bnorm += b[k] * b[k];
    }
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) bnorm = 1.0;
    auto rnorm = [&] {
        double s = 0.0;
        for (double v : r) s += v * v;
        return std::sqrt(s);
    };
    CgResult res;
    res.residual = rnorm() / bnorm;
    if (res.residual <= tol) return res;
    double rz = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        z[k] = r[k] / diag[k];
        p[k] = z[k];
        rz += r[k] * z[k];
    }
    for (int it = 1; it <= max_iter; ++it) {
        A.apply(p, q);
        double pq = 0.0;
        for (std::size_t k = 0; k < n; ++k) pq += p[k] * q[k];
        if (pq == 0.0) return res;  // the direction underflowed: nothing left to resolve
        if (!(pq > 0.0)) throw CgDivergence("conjugate gradients: operator not positive definite", res.residual);
        const double alpha = rz / pq;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        res.iterations = it;
        res.residual = rnorm() / bnorm;
        if (res.residual <= tol) return res;
        double rz_new = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            z[k] = r[k] / diag[k];
            rz_new += r[k] * z[k];
        }
        if (rz_new == 0.0) return res;  // residual underflowed: nothing left to resolve
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    throw CgDivergence("conjugate gradients: no convergence in " + std::to_string(max_iter) +
                           " iterations, relative residual " + std::to_string(res.residual),
                       res.residual);
}

/// Direct tridiagonal (Thomas) solve for operators on a 1D strip.
inline void tridiagonal_solve(const GridOperator& A, const std::vector<double>& b, std::vector<double>& x) {
    const std::size_t n = b.size();
    const auto diag = A.diagonal();
    std::vector<double> c(n, 0.0), d(n);
    // off-diagonal between k and k+1 is -sx[k]
    double denom = diag[0];
    c[0] = n > 1 ? -A.sx[0] / denom : 0.0;
    d[0] = b[0] / denom;
    for (std::size_t k = 1; k < n; ++k) {
        denom = diag[k] + A.sx[k - 1] * c[k - 1];
        c[k] = k + 1 < n ? -A.sx[k] / denom : 0.0;
        d[k] = (b[k] + A.sx[k - 1] * d[k - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) x[k] = d[k] - c[k] * x[k + 1];
}

/// Direct solve on strips, conjugate gradients otherwise.
inline CgResult spd_solve(const GridOperator& A, const std::vector<double>& b, std::vector<double>& x, double tol,
                          int max_iter) {
    if (A.grid.is_1d()) {
        tridiagonal_solve(A, b, x);
        return {};
    }
    return cg_solve(A, b, x, tol, max_iter);
}

} // namespace gammaseg
