#pragma once

// Discrete Ginzburg-Landau, Ambrosio-Tortorelli type, piecewise-constant and
// sharp-interface limit energies on a uniform grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "gammaseg/errors.hpp"
#include "gammaseg/grid.hpp"
#include "gammaseg/potential.hpp"
#include "gammaseg/transport.hpp"

namespace gammaseg {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// The triple (v, c1, c2).
struct SegmentationState {
    ScalarField v;
    MultiField c1;
    MultiField c2;

    SegmentationState() = default;
    SegmentationState(ScalarField v_, MultiField c1_, MultiField c2_)
        : v(std::move(v_)), c1(std::move(c1_)), c2(std::move(c2_)) {
        require_same_grid(v.grid, c1.grid, "SegmentationState");
        require_same_grid(v.grid, c2.grid, "SegmentationState");
        if (c1.channels != c2.channels) throw ShapeMismatch("SegmentationState: c1 and c2 channel counts differ");
    }

    const Grid& grid() const { return v.grid; }

    /// (1 - v, c2, c1)
    SegmentationState swapped() const {
        ScalarField w(v.grid);
        for (std::size_t k = 0; k < v.size(); ++k) w[k] = 1.0 - v[k];
        return SegmentationState(std::move(w), c2, c1);
    }
};

struct EnergyParams {
    double p = 2.0;
    double mu = 1.0;
    bool mu_infinite = false;
    double nu = 1.0;
    double eps = 0.05;
    bool normalized = true;

    void validate() const {
        if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("EnergyParams: p must lie in (1, inf)");
        if (!mu_infinite && (!(mu >= 0.0) || !std::isfinite(mu)))
            throw std::invalid_argument("EnergyParams: mu must be >= 0");
        if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("EnergyParams: nu must be > 0");
        if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("EnergyParams: eps must be > 0");
    }
};

struct EnergyBreakdown {
    double data1 = 0.0;
    double data2 = 0.0;
    double grad1 = 0.0;
    double grad2 = 0.0;
    double gl = 0.0;       // (nu / c_W) * GL energy; zero in limit energies
    double tv_term = 0.0;  // nu * TV(v); zero in approximating energies
    double total = 0.0;

    bool infinite() const { return std::isinf(total); }
    static EnergyBreakdown infinity() {
        EnergyBreakdown b;
        b.total = kInfinity;
        return b;
    }
    void sum() { total = data1 + data2 + grad1 + grad2 + gl + tv_term; }
};

struct Measures {
    DiscreteMeasure lam_v;
    DiscreteMeasure lam_1mv;
};

/// lambda_v = |v| / ||v||_1 and lambda_{1-v} = |1-v| / ||1-v||_1 as cell
/// weights; a vanishing L1 norm yields the flagged zero measure.
inline Measures measures_from(const ScalarField& v) {
    std::vector<double> a(v.size()), b(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        a[k] = std::abs(v[k]);
        b[k] = std::abs(1.0 - v[k]);
    }
    return {DiscreteMeasure::from_density(v.grid, a), DiscreteMeasure::from_density(v.grid, b)};
}

/// sum over cells of (eps |grad v|^2 + W(v)/eps) * cell area
inline double gl_energy(const ScalarField& v, const DoubleWell& W, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("gl_energy: eps must be positive");
    const auto grad = gradient_forward(v);
    double acc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double g2 = grad[k].x * grad[k].x + grad[k].y * grad[k].y;
        acc += eps * g2 + W(v[k]) / eps;
    }
    return acc * v.grid.cell_area();
}

/// Per-cell |c - u0|^p with the channel difference combined in l2 first.
inline std::vector<double> misfit_pow(const MultiField& c, const MultiField& u0, double p) {
    require_same_grid(c.grid, u0.grid, "misfit");
    if (c.channels != u0.channels) throw ShapeMismatch("misfit: channel counts differ");
    std::vector<double> out(c.grid.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        double acc = 0.0;
        for (int ch = 0; ch < c.channels; ++ch) {
            const double d = c.at(k, ch) - u0.at(k, ch);
            acc += d * d;
        }
        out[k] = p == 2.0 ? acc : std::pow(std::sqrt(acc), p);
    }
    return out;
}

/// Per-cell |grad c|^p.
inline std::vector<double> gradient_pow(const MultiField& c, double p) {
    auto g2 = gradient_norm_sq(c);
    if (p != 2.0)
        for (double& x : g2) x = std::pow(std::sqrt(x), p);
    return g2;
}

/// (sum_k |grad c|_k^p lam_k)^(1/p)
inline double sobolev_seminorm_proxy(const MultiField& c, const DiscreteMeasure& lam, double p) {
    if (lam.zero_flag) throw ZeroMeasureError("sobolev_seminorm_proxy: zero measure");
    if (lam.size() != c.grid.size()) throw ShapeMismatch("sobolev_seminorm_proxy: measure not on the grid");
    const auto g = gradient_pow(c, p);
    double acc = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) acc += g[k] * lam.weights[k];
    return std::pow(acc, 1.0 / p);
}

struct HajlaszReport {
    bool pass = true;
    double max_violation = -kInfinity;  // max of |c(x)-c(y)| - |x-y|(g(x)+g(y))
    std::size_t x = 0;
    std::size_t y = 0;
    int pairs = 0;
};

/// Samples pairs of cells with positive lam-weight and tests the pointwise
/// upper-gradient inequality |c(x)-c(y)| <= |x-y| (g(x) + g(y)).
inline HajlaszReport hajlasz_pair_check(const MultiField& c, const ScalarField& g, const DiscreteMeasure& lam,
                                        int samples, std::uint64_t seed = 1) {
    require_same_grid(c.grid, g.grid, "hajlasz_pair_check");
    for (double x : g.values)
        if (x < 0.0) throw std::invalid_argument("hajlasz_pair_check: g must be nonnegative");
    std::vector<std::size_t> support;
    for (std::size_t k = 0; k < lam.size(); ++k)
        if (lam.weights[k] > 0.0) support.push_back(k);
    HajlaszReport rep;
    if (support.size() < 2) return rep;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
    const Grid& grid = c.grid;
    for (int s = 0; s < samples; ++s) {
        const std::size_t a = support[pick(rng)];
        std::size_t b = support[pick(rng)];
        if (a == b) b = support[(std::find(support.begin(), support.end(), a) - support.begin() + 1) % support.size()];
        double dc = 0.0;
        for (int ch = 0; ch < c.channels; ++ch) dc += (c.at(a, ch) - c.at(b, ch)) * (c.at(a, ch) - c.at(b, ch));
        const Vec2 xa = grid.center(a);
        const Vec2 xb = grid.center(b);
        const double viol = std::sqrt(dc) - std::hypot(xa.x - xb.x, xa.y - xb.y) * (g[a] + g[b]);
        ++rep.pairs;
        if (viol > rep.max_violation) {
            rep.max_violation = viol;
            rep.x = a;
            rep.y = b;
        }
    }
    rep.pass = rep.max_violation <= 1e-12;
    return rep;
}

/// Approximating energy of a state. Normalized: data and gradient terms
/// integrate against lambda_v, lambda_{1-v}; otherwise against |v| dx and
/// |1-v| dx. Terms tied to a zero measure vanish.
inline EnergyBreakdown at_energy(const SegmentationState& s, const MultiField& u0, const DoubleWell& W,
                                 const EnergyParams& prm) {
    prm.validate();
    if (prm.mu_infinite) throw std::invalid_argument("at_energy: mu must be finite for the approximating energy");
    require_same_grid(s.grid(), u0.grid, "at_energy");
    if (s.c1.channels != u0.channels) throw ShapeMismatch("at_energy: state and image channel counts differ");
    const Grid& g = s.grid();
    const double area = g.cell_area();
    std::vector<double> w1(g.size()), w2(g.size());
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        w1[k] = std::abs(s.v[k]) * area;
        w2[k] = std::abs(1.0 - s.v[k]) * area;
        m1 += w1[k];
        m2 += w2[k];
    }
    if (prm.normalized) {
        for (double& x : w1) x = m1 > 0.0 ? x / m1 : 0.0;
        for (double& x : w2) x = m2 > 0.0 ? x / m2 : 0.0;
    }
    const auto d1 = misfit_pow(s.c1, u0, prm.p);
    const auto d2 = misfit_pow(s.c2, u0, prm.p);
    EnergyBreakdown e;
    for (std::size_t k = 0; k < g.size(); ++k) {
        e.data1 += d1[k] * w1[k];
        e.data2 += d2[k] * w2[k];
    }
    if (prm.mu > 0.0) {
        const auto g1 = gradient_pow(s.c1, prm.p);
        const auto g2 = gradient_pow(s.c2, prm.p);
        for (std::size_t k = 0; k < g.size(); ++k) {
            e.grad1 += g1[k] * w1[k];
            e.grad2 += g2[k] * w2[k];
        }
        e.grad1 *= prm.mu;
        e.grad2 *= prm.mu;
    }
    e.gl = prm.nu / W.cw * gl_energy(s.v, W, prm.eps);
    e.sum();
    return e;
}

inline constexpr double kIndicatorTol = 1e-9;
inline constexpr double kConstancyTol = 1e-6;

/// True when every cell of v lies within kIndicatorTol of 0 or 1.
inline bool is_indicator(const ScalarField& v) {
    for (double x : v.values)
        if (std::abs(x) > kIndicatorTol && std::abs(x - 1.0) > kIndicatorTol) return false;
    return true;
}

namespace detail {

/// Max deviation of c from its mean over the cells selected by `in`,
/// relative to the largest mean component; 0 for an empty selection.
inline double relative_nonconstancy(const MultiField& c, const std::vector<std::uint8_t>& in) {
    std::vector<double> mean(static_cast<std::size_t>(c.channels), 0.0);
    std::size_t n = 0;
    for (std::size_t k = 0; k < in.size(); ++k)
        if (in[k]) {
            for (int ch = 0; ch < c.channels; ++ch) mean[ch] += c.at(k, ch);
            ++n;
        }
    if (n == 0) return 0.0;
    double scale = 0.0;
    for (double& m : mean) {
        m /= static_cast<double>(n);
        scale = std::max(scale, std::abs(m));
    }
    double dev = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k)
        if (in[k])
            for (int ch = 0; ch < c.channels; ++ch) dev = std::max(dev, std::abs(c.at(k, ch) - mean[ch]));
    if (dev == 0.0) return 0.0;
    return scale > 0.0 ? dev / scale : kInfinity;
}

} // namespace detail

/// Sharp-interface limit energy; +infinity unless v is an indicator (and,
/// for mu = infinity, unless c1 and c2 are constant on their segments).
inline EnergyBreakdown limit_energy(const SegmentationState& s, const MultiField& u0, const EnergyParams& prm) {
    require_same_grid(s.grid(), u0.grid, "limit_energy");
    if (!is_indicator(s.v)) return EnergyBreakdown::infinity();
    const Grid& g = s.grid();
    ScalarField v(g);
    std::vector<std::uint8_t> inE(g.size()), outE(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        v[k] = s.v[k] > 0.5 ? 1.0 : 0.0;
        inE[k] = v[k] == 1.0;
        outE[k] = !inE[k];
    }
    if (prm.mu_infinite && (detail::relative_nonconstancy(s.c1, inE) > kConstancyTol ||
                            detail::relative_nonconstancy(s.c2, outE) > kConstancyTol))
        return EnergyBreakdown::infinity();
    const Measures lam = measures_from(v);
    const auto d1 = misfit_pow(s.c1, u0, prm.p);
    const auto d2 = misfit_pow(s.c2, u0, prm.p);
    EnergyBreakdown e;
    for (std::size_t k = 0; k < g.size(); ++k) {
        e.data1 += d1[k] * lam.lam_v.weights[k];
        e.data2 += d2[k] * lam.lam_1mv.weights[k];
    }
    if (!prm.mu_infinite && prm.mu > 0.0) {
        if (!lam.lam_v.zero_flag) e.grad1 = prm.mu * std::pow(sobolev_seminorm_proxy(s.c1, lam.lam_v, prm.p), prm.p);
        if (!lam.lam_1mv.zero_flag)
            e.grad2 = prm.mu * std::pow(sobolev_seminorm_proxy(s.c2, lam.lam_1mv, prm.p), prm.p);
    }
    e.tv_term = prm.nu * tv_isotropic(v);
    e.sum();
    return e;
}

/// Piecewise-constant approximating energy, unnormalized.
inline EnergyBreakdown pc_energy_eps_breakdown(const ScalarField& v, std::span<const double> c1,
                                               std::span<const double> c2, const MultiField& u0,
                                               const DoubleWell& W, const EnergyParams& prm) {
    require_same_grid(v.grid, u0.grid, "pc_energy_eps");
    if (c1.size() != static_cast<std::size_t>(u0.channels) || c2.size() != c1.size())
        throw ShapeMismatch("pc_energy_eps: constant length does not match image channels");
    const MultiField f1 = MultiField::constant(v.grid, c1);
    const MultiField f2 = MultiField::constant(v.grid, c2);
    const auto d1 = misfit_pow(f1, u0, prm.p);
    const auto d2 = misfit_pow(f2, u0, prm.p);
    EnergyBreakdown e;
    for (std::size_t k = 0; k < v.size(); ++k) {
        e.data1 += d1[k] * std::abs(v[k]);
        e.data2 += d2[k] * std::abs(1.0 - v[k]);
    }
    e.data1 *= v.grid.cell_area();
    e.data2 *= v.grid.cell_area();
    e.gl = prm.nu / W.cw * gl_energy(v, W, prm.eps);
    e.sum();
    return e;
}

inline double pc_energy_eps(const ScalarField& v, std::span<const double> c1, std::span<const double> c2,
                            const MultiField& u0, const DoubleWell& W, const EnergyParams& prm) {
    return pc_energy_eps_breakdown(v, c1, c2, u0, W, prm).total;
}

inline EnergyBreakdown pc_limit_energy_breakdown(const IndicatorField& E, std::span<const double> c1,
                                                 std::span<const double> c2, const MultiField& u0,
                                                 const EnergyParams& prm) {
    require_same_grid(E.grid, u0.grid, "pc_limit_energy");
    if (c1.size() != static_cast<std::size_t>(u0.channels) || c2.size() != c1.size())
        throw ShapeMismatch("pc_limit_energy: constant length does not match image channels");
    const MultiField f1 = MultiField::constant(E.grid, c1);
    const MultiField f2 = MultiField::constant(E.grid, c2);
    const auto d1 = misfit_pow(f1, u0, prm.p);
    const auto d2 = misfit_pow(f2, u0, prm.p);
    EnergyBreakdown e;
    for (std::size_t k = 0; k < E.mask.size(); ++k) (E.mask[k] ? e.data1 : e.data2) += E.mask[k] ? d1[k] : d2[k];
    e.data1 *= E.grid.cell_area();
    e.data2 *= E.grid.cell_area();
    e.tv_term = prm.nu * tv_isotropic(E.as_scalar());
    e.sum();
    return e;
}

inline double pc_limit_energy(const IndicatorField& E, std::span<const double> c1, std::span<const double> c2,
                              const MultiField& u0, const EnergyParams& prm) {
    return pc_limit_energy_breakdown(E, c1, c2, u0, prm).total;
}

} // namespace gammaseg
