#pragma once

// Uniform cell-centered grids over a rectangle (ny = 1 gives a 1D strip) and
// the discrete calculus shared by the energies, the solver and the harness.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gammaseg/errors.hpp"

namespace gammaseg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

class Grid {
public:
    Grid() = default;

    Grid(int nx, int ny, double hx, double hy, double ox = 0.0, double oy = 0.0)
        : nx_(nx), ny_(ny), hx_(hx), hy_(hy), ox_(ox), oy_(oy) {
        if (nx < 2) throw std::invalid_argument("Grid: nx must be >= 2, got " + std::to_string(nx));
        if (ny < 1) throw std::invalid_argument("Grid: ny must be >= 1, got " + std::to_string(ny));
        if (!(hx > 0.0) || !(hy > 0.0) || !std::isfinite(hx) || !std::isfinite(hy))
            throw std::invalid_argument("Grid: cell widths must be positive and finite");
    }

    /// n x n cells covering [0,1]^2.
    static Grid unit_square(int n) { return Grid(n, n, 1.0 / n, 1.0 / n); }

    /// 1D strip of n cells over [0, length]; the unit height makes cell
    /// areas equal to 1D cell lengths.
    static Grid line(int n, double length = 1.0) { return Grid(n, 1, length / n, 1.0); }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double origin_x() const { return ox_; }
    double origin_y() const { return oy_; }
    double extent_x() const { return nx_ * hx_; }
    double extent_y() const { return ny_ * hy_; }
    bool is_1d() const { return ny_ == 1; }

    std::size_t size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }
    double cell_area() const { return hx_ * hy_; }
    double measure() const { return static_cast<double>(size()) * cell_area(); }
    double diameter() const { return std::hypot(extent_x(), extent_y()); }

    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
    }
    int col(std::size_t idx) const { return static_cast<int>(idx % static_cast<std::size_t>(nx_)); }
    int row(std::size_t idx) const { return static_cast<int>(idx / static_cast<std::size_t>(nx_)); }

    Vec2 center(int i, int j) const { return {ox_ + (i + 0.5) * hx_, oy_ + (j + 0.5) * hy_}; }
    Vec2 center(std::size_t idx) const { return center(col(idx), row(idx)); }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.hx_ == b.hx_ && a.hy_ == b.hy_ && a.ox_ == b.ox_ &&
               a.oy_ == b.oy_;
    }

private:
    int nx_ = 2;
    int ny_ = 1;
    double hx_ = 0.5;
    double hy_ = 1.0;
    double ox_ = 0.0;
    double oy_ = 0.0;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) throw ShapeMismatch(std::string(what) + ": fields live on different grids");
}

namespace detail {
inline void require_finite(std::span<const double> values, const char* what) {
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}
} // namespace detail

struct ScalarField {
    Grid grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    ScalarField(const Grid& g, std::vector<double> vals) : grid(g), values(std::move(vals)) {
        if (values.size() != grid.size()) throw ShapeMismatch("ScalarField: value count does not match grid");
        detail::require_finite(values, "ScalarField");
    }

    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
    double& at(int i, int j) { return values[grid.index(i, j)]; }
    double at(int i, int j) const { return values[grid.index(i, j)]; }
    std::size_t size() const { return values.size(); }
};

/// m values per cell, stored cell-major.
struct MultiField {
    Grid grid;
    int channels = 1;
    std::vector<double> values;

    MultiField() = default;
    MultiField(const Grid& g, int m, double fill = 0.0)
        : grid(g), channels(m), values(g.size() * static_cast<std::size_t>(m), fill) {
        if (m < 1) throw std::invalid_argument("MultiField: channels must be >= 1");
    }
    MultiField(const Grid& g, int m, std::vector<double> vals) : grid(g), channels(m), values(std::move(vals)) {
        if (m < 1) throw std::invalid_argument("MultiField: channels must be >= 1");
        if (values.size() != grid.size() * static_cast<std::size_t>(m))
            throw ShapeMismatch("MultiField: value count does not match grid x channels");
        detail::require_finite(values, "MultiField");
    }

    /// Broadcast a constant m-vector over the grid.
    static MultiField constant(const Grid& g, std::span<const double> c) {
        MultiField f(g, static_cast<int>(c.size()));
        for (std::size_t k = 0; k < g.size(); ++k)
            std::copy(c.begin(), c.end(), f.values.begin() + static_cast<std::ptrdiff_t>(k * c.size()));
        return f;
    }
    static MultiField from_scalar(const ScalarField& s) { return MultiField(s.grid, 1, s.values); }

    std::span<double> cell(std::size_t k) {
        return {values.data() + k * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
    }
    std::span<const double> cell(std::size_t k) const {
        return {values.data() + k * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
    }
    double& at(std::size_t k, int c) { return values[k * static_cast<std::size_t>(channels) + c]; }
    double at(std::size_t k, int c) const { return values[k * static_cast<std::size_t>(channels) + c]; }

    ScalarField channel(int c) const {
        ScalarField s(grid);
        for (std::size_t k = 0; k < grid.size(); ++k) s[k] = at(k, c);
        return s;
    }
    void set_channel(int c, const ScalarField& s) {
        for (std::size_t k = 0; k < grid.size(); ++k) at(k, c) = s[k];
    }
    ScalarField channel_average() const {
        ScalarField s(grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            double acc = 0.0;
            for (double v : cell(k)) acc += v;
            s[k] = acc / channels;
        }
        return s;
    }
};

struct IndicatorField {
    Grid grid;
    std::vector<std::uint8_t> mask;

    IndicatorField() = default;
    explicit IndicatorField(const Grid& g, bool fill = false) : grid(g), mask(g.size(), fill ? 1 : 0) {}
    IndicatorField(const Grid& g, std::vector<std::uint8_t> m) : grid(g), mask(std::move(m)) {
        if (mask.size() != grid.size()) throw ShapeMismatch("IndicatorField: mask size does not match grid");
        for (auto b : mask)
            if (b > 1) throw std::invalid_argument("IndicatorField: mask values must be 0 or 1");
    }

    /// Cells whose center satisfies the predicate.
    template <class Pred>
    static IndicatorField from_predicate(const Grid& g, Pred&& inside) {
        IndicatorField e(g);
        for (std::size_t k = 0; k < g.size(); ++k) e.mask[k] = inside(g.center(k)) ? 1 : 0;
        return e;
    }

    bool operator[](std::size_t k) const { return mask[k] != 0; }
    std::size_t count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }
    bool empty() const { return count() == 0; }
    bool full() const { return count() == mask.size(); }

    ScalarField as_scalar() const {
        ScalarField s(grid);
        for (std::size_t k = 0; k < mask.size(); ++k) s[k] = mask[k];
        return s;
    }
    IndicatorField complement() const {
        IndicatorField c(grid);
        for (std::size_t k = 0; k < mask.size(); ++k) c.mask[k] = mask[k] ? 0 : 1;
        return c;
    }
    friend bool operator==(const IndicatorField& a, const IndicatorField& b) {
        return a.grid == b.grid && a.mask == b.mask;
    }
};

// ---------------------------------------------------------------------------
// Discrete calculus

/// Forward differences with the difference set to zero on the last column
/// (x) and last row (y).
inline std::vector<Vec2> gradient_forward(const ScalarField& f) {
    const Grid& g = f.grid;
    std::vector<Vec2> out(g.size());
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            Vec2 d;
            if (i + 1 < g.nx()) d.x = (f.values[k + 1] - f.values[k]) / g.hx();
            if (j + 1 < g.ny()) d.y = (f.values[k + static_cast<std::size_t>(g.nx())] - f.values[k]) / g.hy();
            out[k] = d;
        }
    }
    return out;
}

/// Squared Euclidean norm of the forward gradient of a multi-channel field,
/// channels combined before any power is taken.
inline std::vector<double> gradient_norm_sq(const MultiField& c) {
    const Grid& g = c.grid;
    const int m = c.channels;
    std::vector<double> out(g.size(), 0.0);
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            double acc = 0.0;
            for (int ch = 0; ch < m; ++ch) {
                if (i + 1 < g.nx()) {
                    const double d = (c.at(k + 1, ch) - c.at(k, ch)) / g.hx();
                    acc += d * d;
                }
                if (j + 1 < g.ny()) {
                    const double d = (c.at(k + static_cast<std::size_t>(g.nx()), ch) - c.at(k, ch)) / g.hy();
                    acc += d * d;
                }
            }
            out[k] = acc;
        }
    }
    return out;
}

/// Isotropic total variation: sum over cells of |grad f| times the cell area.
inline double tv_isotropic(const ScalarField& f) {
    const auto grad = gradient_forward(f);
    double acc = 0.0;
    for (const Vec2& d : grad) acc += norm(d);
    return acc * f.grid.cell_area();
}

/// Cells with v <= 1/2 go to 0, the rest to 1.
inline IndicatorField threshold_half(const ScalarField& v) {
    IndicatorField e(v.grid);
    for (std::size_t k = 0; k < v.size(); ++k) e.mask[k] = v[k] > 0.5 ? 1 : 0;
    return e;
}

inline double l1_distance(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid, b.grid, "l1_distance");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += std::abs(a[k] - b[k]);
    return acc * a.grid.cell_area();
}

/// f sampled at x + (dx, dy) by bilinear interpolation between cell
/// centers, clamped to the grid.
inline ScalarField translate(const ScalarField& f, double dx, double dy) {
    const Grid& g = f.grid;
    ScalarField out(g);
    auto sample = [&](double fi, double fj) {
        fi = std::clamp(fi, 0.0, static_cast<double>(g.nx() - 1));
        fj = std::clamp(fj, 0.0, static_cast<double>(g.ny() - 1));
        const int i0 = std::min(static_cast<int>(fi), g.nx() - 1);
        const int j0 = std::min(static_cast<int>(fj), g.ny() - 1);
        const int i1 = std::min(i0 + 1, g.nx() - 1);
        const int j1 = std::min(j0 + 1, g.ny() - 1);
        const double ti = fi - i0;
        const double tj = fj - j0;
        return (1 - ti) * (1 - tj) * f.at(i0, j0) + ti * (1 - tj) * f.at(i1, j0) + (1 - ti) * tj * f.at(i0, j1) +
               ti * tj * f.at(i1, j1);
    };
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) out.at(i, j) = sample(i + dx / g.hx(), j + dy / g.hy());
    return out;
}

/// sum_k w_k |a_k - b_k|^p
inline double weighted_lp_power(const ScalarField& a, const ScalarField& b, std::span<const double> weights,
                                double p) {
    require_same_grid(a.grid, b.grid, "weighted_lp_power");
    if (weights.size() != a.size()) throw ShapeMismatch("weighted_lp_power: weight count does not match grid");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += weights[k] * std::pow(std::abs(a[k] - b[k]), p);
    return acc;
}

// ---------------------------------------------------------------------------
// Boundary geometry

/// Cell face separating two cells whose mask values differ.
struct Face {
    Vec2 a;
    Vec2 b;
    std::size_t inner;  // cell on the E side
    std::size_t outer;  // cell on the complement side
    double length() const { return std::hypot(b.x - a.x, b.y - a.y); }
    Vec2 midpoint() const { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }
};

inline void require_nondegenerate(const IndicatorField& e, const char* what) {
    const std::size_t n = e.count();
    if (n == 0) throw DegenerateSetError(std::string(what) + ": set is empty, boundary undefined");
    if (n == e.mask.size()) throw DegenerateSetError(std::string(what) + ": set is the whole domain, boundary undefined");
}

inline std::vector<Face> boundary_faces(const IndicatorField& e) {
    const Grid& g = e.grid;
    std::vector<Face> faces;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            const double x1 = g.origin_x() + (i + 1) * g.hx();
            const double y1 = g.origin_y() + (j + 1) * g.hy();
            if (i + 1 < g.nx() && e.mask[k] != e.mask[k + 1]) {
                const bool in_left = e.mask[k] != 0;
                faces.push_back({{x1, y1 - g.hy()}, {x1, y1}, in_left ? k : k + 1, in_left ? k + 1 : k});
            }
            if (j + 1 < g.ny()) {
                const std::size_t up = k + static_cast<std::size_t>(g.nx());
                if (e.mask[k] != e.mask[up]) {
                    const bool in_low = e.mask[k] != 0;
                    faces.push_back({{x1 - g.hx(), y1}, {x1, y1}, in_low ? k : up, in_low ? up : k});
                }
            }
        }
    }
    return faces;
}

/// Cells adjacent to at least one boundary face, in increasing index order.
inline std::vector<std::size_t> boundary_cells(const IndicatorField& e) {
    std::vector<std::uint8_t> flag(e.mask.size(), 0);
    for (const Face& f : boundary_faces(e)) flag[f.inner] = flag[f.outer] = 1;
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < flag.size(); ++k)
        if (flag[k]) out.push_back(k);
    return out;
}

/// Discrete perimeter: total length of boundary faces.
inline double discrete_perimeter(const IndicatorField& e) {
    double acc = 0.0;
    for (const Face& f : boundary_faces(e)) acc += f.length();
    return acc;
}

namespace detail {

/// Exact 1D squared distance transform (lower envelope of parabolas) for
/// samples spaced `step` apart; inf marks non-sites.
inline void edt_1d(std::span<const double> f, std::span<double> d, double step, std::vector<int>& v,
                   std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(f.size());
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        const double xq = q * step;
        while (k >= 0) {
            const int r = v[k];
            const double xr = r * step;
            const double s = ((f[q] + xq * xq) - (f[r] + xr * xr)) / (2.0 * (xq - xr));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
        } else {
            const int r = v[k];
            const double xr = r * step;
            ++k;
            v[k] = q;
            z[k] = ((f[q] + xq * xq) - (f[r] + xr * xr)) / (2.0 * (xq - xr));
        }
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        const double xq = q * step;
        while (z[j + 1] < xq) ++j;
        const double dx = xq - v[j] * step;
        d[q] = dx * dx + f[v[j]];
    }
}

} // namespace detail

/// Euclidean distance from every cell center to the discrete boundary of E,
/// represented by the midpoints of its faces: the points where the linear
/// interpolant of the mask between two differing cells crosses 1/2.
///
/// Midpoints sit on a lattice of half-cell spacing whose odd nodes are the
/// cell centers, so a separable two-pass exact distance transform on that
/// lattice gives the distances exactly. Using midpoints rather than whole
/// faces halves the staircase bias of neighbourhood volumes on oblique
/// boundaries and leaves axis-aligned boundaries exact.
inline std::vector<double> boundary_distance(const IndicatorField& e) {
    require_nondegenerate(e, "boundary_distance");
    constexpr double inf = std::numeric_limits<double>::infinity();
    const Grid& g = e.grid;
    const int lx = 2 * g.nx() + 1;
    const int ly = 2 * g.ny() + 1;
    const double sx = 0.5 * g.hx();
    const double sy = 0.5 * g.hy();
    std::vector<double> lattice(static_cast<std::size_t>(lx) * static_cast<std::size_t>(ly), inf);
    auto mark = [&](int a, int b) { lattice[static_cast<std::size_t>(b) * lx + a] = 0.0; };
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            if (i + 1 < g.nx() && e.mask[k] != e.mask[k + 1])
                mark(2 * i + 2, 2 * j + 1);
            if (j + 1 < g.ny() && e.mask[k] != e.mask[k + static_cast<std::size_t>(g.nx())])
                mark(2 * i + 1, 2 * j + 2);
        }
    }
    std::vector<int> v;
    std::vector<double> z;
    // columns (y direction)
    {
        std::vector<double> in(static_cast<std::size_t>(ly)), out(static_cast<std::size_t>(ly));
        for (int a = 0; a < lx; ++a) {
            for (int b = 0; b < ly; ++b) in[b] = lattice[static_cast<std::size_t>(b) * lx + a];
            detail::edt_1d(in, out, sy, v, z);
            for (int b = 0; b < ly; ++b) lattice[static_cast<std::size_t>(b) * lx + a] = out[b];
        }
    }
    // rows (x direction); only odd rows hold cell centers
    std::vector<double> dist(g.size());
    {
        std::vector<double> in(static_cast<std::size_t>(lx)), out(static_cast<std::size_t>(lx));
        for (int j = 0; j < g.ny(); ++j) {
            const int b = 2 * j + 1;
            std::copy_n(lattice.begin() + static_cast<std::ptrdiff_t>(b) * lx, lx, in.begin());
            detail::edt_1d(in, out, sx, v, z);
            for (int i = 0; i < g.nx(); ++i) dist[g.index(i, j)] = std::sqrt(out[2 * i + 1]);
        }
    }
    return dist;
}

/// Boundary distance, positive inside E and negative outside.
inline std::vector<double> signed_distance(const IndicatorField& e) {
    auto d = boundary_distance(e);
    for (std::size_t k = 0; k < d.size(); ++k)
        if (!e.mask[k]) d[k] = -d[k];
    return d;
}

/// Volume of the a-neighbourhood {x : dist(x, boundary of E) < a}, with the
/// distance of boundary_distance.
///
/// Each cell contributes the fraction clamp((a - d)/h + 1/2, 0, 1) of its
/// area, d being the center distance and h = sqrt(hx*hy) (hx on a strip); for an
/// axis-aligned face this is exactly the covered part of the cell.
inline double minkowski_volume(const IndicatorField& e, double a) {
    const Grid& g = e.grid;
    const double h = g.is_1d() ? g.hx() : std::sqrt(g.hx() * g.hy());
    const double width = g.is_1d() ? g.hx() : std::max(g.hx(), g.hy());
    if (!(a > width)) throw std::invalid_argument("minkowski_volume: a must exceed the cell width");
    const auto d = boundary_distance(e);
    double acc = 0.0;
    for (double dk : d) acc += std::clamp((a - dk) / h + 0.5, 0.0, 1.0);
    return acc * g.cell_area();
}

struct DensityReport {
    bool pass = true;
    std::size_t worst_cell = 0;   // boundary cell attaining the smallest ratio
    double worst_radius = 0.0;
    double worst_perimeter = 0.0; // discrete perimeter inside the ball
    double worst_ratio = std::numeric_limits<double>::infinity();  // perimeter / (kappa r^exponent)
    std::vector<double> radii;
};

/// Checks P(E; B_r(x)) >= kappa r^exponent for every boundary cell center x
/// and radii r0, r0/2, ... down to twice the cell width. Relative perimeter
/// inside the ball is the length of faces whose midpoint lies in the ball.
inline DensityReport perimeter_density_check(const IndicatorField& e, double kappa, double r0,
                                             double exponent = 1.0) {
    require_nondegenerate(e, "perimeter_density_check");
    const Grid& g = e.grid;
    if (!(r0 > 0.0) || r0 > std::max(g.extent_x(), g.extent_y()))
        throw std::invalid_argument("perimeter_density_check: r0 must lie in (0, extent]");
    if (!(kappa > 0.0)) throw std::invalid_argument("perimeter_density_check: kappa must be positive");

    DensityReport rep;
    const double rmin = 2.0 * (g.is_1d() ? g.hx() : std::max(g.hx(), g.hy()));
    for (double r = r0; r >= rmin || rep.radii.empty(); r *= 0.5) rep.radii.push_back(r);

    const auto faces = boundary_faces(e);
    std::vector<Vec2> mids;
    std::vector<double> lens;
    mids.reserve(faces.size());
    for (const Face& f : faces) {
        mids.push_back(f.midpoint());
        lens.push_back(f.length());
    }
    std::vector<double> per(rep.radii.size());
    for (std::size_t cell : boundary_cells(e)) {
        const Vec2 x = g.center(cell);
        std::fill(per.begin(), per.end(), 0.0);
        for (std::size_t f = 0; f < mids.size(); ++f) {
            const double dist = std::hypot(mids[f].x - x.x, mids[f].y - x.y);
            for (std::size_t r = 0; r < rep.radii.size(); ++r) {
                if (dist <= rep.radii[r]) {
                    per[r] += lens[f];
                } else {
                    break;  // radii are decreasing
                }
            }
        }
        for (std::size_t r = 0; r < rep.radii.size(); ++r) {
            const double ratio = per[r] / (kappa * std::pow(rep.radii[r], exponent));
            if (ratio < rep.worst_ratio) {
                rep.worst_ratio = ratio;
                rep.worst_cell = cell;
                rep.worst_radius = rep.radii[r];
                rep.worst_perimeter = per[r];
            }
        }
    }
    rep.pass = rep.worst_ratio >= 1.0;
    return rep;
}

} // namespace gammaseg
