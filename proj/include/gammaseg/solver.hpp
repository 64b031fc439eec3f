#pragma once

// Alternating minimization of the unnormalized phase-field energy and the
// recovery-sequence construction (optimal profile + mollified fields).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gammaseg/cg.hpp"
#include "gammaseg/energy.hpp"
#include "gammaseg/errors.hpp"
#include "gammaseg/grid.hpp"
#include "gammaseg/potential.hpp"

namespace gammaseg {

enum class SolverMode { smooth, piecewise_constant };

struct SolverConfig {
    int max_outer = 2000;
    double tol = 1e-9;      // stop when the relative energy decrease falls below this
    double tau = 1.0;       // largest v-step; the stabilized step is stable for any tau
    double eta = 1e-6;      // weight floor for the field solves
    double cg_tol = 1e-10;
    int cg_max = 20000;
    SolverMode mode = SolverMode::smooth;
    std::uint64_t seed = 0;
    // also try the interface-free states v = 0 and v = 1 after the descent
    bool try_constant_states = false;

    void validate() const {
        if (max_outer < 1) throw std::invalid_argument("SolverConfig: max_outer must be >= 1");
        if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be > 0");
        if (!(tau > 0.0)) throw std::invalid_argument("SolverConfig: tau must be > 0");
        if (!(eta > 0.0) || eta > 1e-3) throw std::invalid_argument("SolverConfig: eta must lie in (0, 1e-3]");
        if (!(cg_tol > 0.0) || cg_max < 1) throw std::invalid_argument("SolverConfig: invalid CG controls");
    }
};

// ---------------------------------------------------------------------------
// Constant fits

struct ConstantsFit {
    std::vector<double> c1;
    std::vector<double> c2;
    bool degenerate1 = false;  // zero mass: c1 returned unchanged
    bool degenerate2 = false;
};

namespace detail {

/// Root of a nondecreasing function on [lo, hi] by bisection down to
/// adjacent doubles; the sign change of a convex objective's derivative.
template <class F>
double bisect_increasing(F&& df, double lo, double hi) {
    if (df(lo) >= 0.0) return lo;
    if (df(hi) <= 0.0) return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (df(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// argmin_c sum_k w_k |c - u0_k|^p over m-vectors c.
inline std::vector<double> fit_one_constant(std::span<const double> w, const MultiField& u0, double p,
                                            std::vector<double> start) {
    const int m = u0.channels;
    const std::size_t n = w.size();
    double mass = 0.0;
    for (double x : w) mass += x;
    std::vector<double> c(static_cast<std::size_t>(m), 0.0);
    if (p == 2.0) {
        for (std::size_t k = 0; k < n; ++k)
            for (int ch = 0; ch < m; ++ch) c[ch] += w[k] * u0.at(k, ch);
        for (double& x : c) x /= mass;
        return c;
    }
    c = std::move(start);
    for (int sweep = 0; sweep < 200; ++sweep) {
        double moved = 0.0;
        for (int ch = 0; ch < m; ++ch) {
            double lo = kInfinity;
            double hi = -kInfinity;
            for (std::size_t k = 0; k < n; ++k) {
                lo = std::min(lo, u0.at(k, ch));
                hi = std::max(hi, u0.at(k, ch));
            }
            const double before = c[ch];
            // the objective is convex in c[ch]; its partial derivative is
            // sum_k w_k |d_k|^(p-2) (c[ch] - u0_k), zero where d_k vanishes
            c[ch] = bisect_increasing(
                [&](double x) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < n; ++k) {
                        if (w[k] == 0.0) continue;
                        double d2 = 0.0;
                        for (int q = 0; q < m; ++q) {
                            const double dq = (q == ch ? x : c[q]) - u0.at(k, q);
                            d2 += dq * dq;
                        }
                        if (d2 == 0.0) continue;
                        acc += w[k] * std::pow(d2, 0.5 * p - 1.0) * (x - u0.at(k, ch));
                    }
                    return acc;
                },
                lo, hi);
            moved = std::max(moved, std::abs(c[ch] - before));
        }
        if (m == 1 || moved < 1e-10) break;
    }
    return c;
}

} // namespace detail

/// Minimizers over constants of the two data terms; `previous` supplies
/// the values returned for a phase without mass.
inline ConstantsFit fit_constants(const ScalarField& v, const MultiField& u0, double p,
                                  const ConstantsFit* previous = nullptr) {
    require_same_grid(v.grid, u0.grid, "fit_constants");
    const std::size_t n = v.size();
    const auto m = static_cast<std::size_t>(u0.channels);
    std::vector<double> w1(n), w2(n);
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        w1[k] = std::abs(v[k]);
        w2[k] = std::abs(1.0 - v[k]);
        m1 += w1[k];
        m2 += w2[k];
    }
    ConstantsFit out;
    const std::vector<double> zeros(m, 0.0);
    auto start = [&](const std::vector<double>* prev) {
        if (prev && prev->size() == m) return *prev;
        std::vector<double> mean(m, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t ch = 0; ch < m; ++ch) mean[ch] += u0.at(k, static_cast<int>(ch)) / static_cast<double>(n);
        return mean;
    };
    const std::vector<double>* p1 = previous ? &previous->c1 : nullptr;
    const std::vector<double>* p2 = previous ? &previous->c2 : nullptr;
    if (m1 > 0.0) {
        out.c1 = detail::fit_one_constant(w1, u0, p, start(p1));
    } else {
        out.degenerate1 = true;
        out.c1 = p1 ? *p1 : zeros;
    }
    if (m2 > 0.0) {
        out.c2 = detail::fit_one_constant(w2, u0, p, start(p2));
    } else {
        out.degenerate2 = true;
        out.c2 = p2 ? *p2 : zeros;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Smooth fields

namespace detail {

/// sum_k w_k (|c - u0|^p + mu |grad c|^p) * area and its gradient.
inline double field_objective(const MultiField& c, const MultiField& u0, std::span<const double> w, double mu,
                              double p, std::vector<double>* grad) {
    const Grid& g = c.grid;
    const int m = c.channels;
    const double area = g.cell_area();
    const std::size_t stride = static_cast<std::size_t>(g.nx());
    if (grad) grad->assign(c.values.size(), 0.0);
    double acc = 0.0;
    std::vector<double> dx(static_cast<std::size_t>(m)), dy(static_cast<std::size_t>(m)), dd(static_cast<std::size_t>(m));
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            double r2 = 0.0;
            double g2 = 0.0;
            for (int ch = 0; ch < m; ++ch) {
                dd[ch] = c.at(k, ch) - u0.at(k, ch);
                r2 += dd[ch] * dd[ch];
                dx[ch] = i + 1 < g.nx() ? (c.at(k + 1, ch) - c.at(k, ch)) / g.hx() : 0.0;
                dy[ch] = j + 1 < g.ny() ? (c.at(k + stride, ch) - c.at(k, ch)) / g.hy() : 0.0;
                g2 += dx[ch] * dx[ch] + dy[ch] * dy[ch];
            }
            const double rn = std::sqrt(r2);
            const double gn = std::sqrt(g2);
            acc += w[k] * (std::pow(rn, p) + mu * std::pow(gn, p));
            if (!grad) continue;
            const double sr = rn > 0.0 ? p * std::pow(rn, p - 2.0) : 0.0;
            const double sg = gn > 0.0 ? mu * p * std::pow(gn, p - 2.0) : 0.0;
            for (int ch = 0; ch < m; ++ch) {
                auto& G = *grad;
                G[k * m + ch] += w[k] * area * sr * dd[ch];
                if (i + 1 < g.nx()) {
                    const double t = w[k] * area * sg * dx[ch] / g.hx();
                    G[(k + 1) * m + ch] += t;
                    G[k * m + ch] -= t;
                }
                if (j + 1 < g.ny()) {
                    const double t = w[k] * area * sg * dy[ch] / g.hy();
                    G[(k + stride) * m + ch] += t;
                    G[k * m + ch] -= t;
                }
            }
        }
    }
    return acc * area;
}

/// Minimizer of the weighted field objective for one phase.
inline MultiField fit_field(std::span<const double> w, const MultiField& u0, double mu, double p,
                            const SolverConfig& cfg, const MultiField* warm) {
    const Grid& g = u0.grid;
    MultiField c = warm ? *warm : u0;
    if (p == 2.0) {
        GridOperator A(g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            A.mass[k] = w[k];
            A.sx[k] = mu * w[k] / (g.hx() * g.hx());
            A.sy[k] = mu * w[k] / (g.hy() * g.hy());
        }
        std::vector<double> b(g.size()), x(g.size());
        for (int ch = 0; ch < u0.channels; ++ch) {
            for (std::size_t k = 0; k < g.size(); ++k) {
                b[k] = w[k] * u0.at(k, ch);
                x[k] = c.at(k, ch);
            }
            spd_solve(A, b, x, cfg.cg_tol, cfg.cg_max);
            for (std::size_t k = 0; k < g.size(); ++k) c.at(k, ch) = x[k];
        }
        return c;
    }
    // Lagged weights: freezing |c - u0|^(p-2) and |grad c|^(p-2) turns the
    // objective into an SPD quadratic whose minimizer x satisfies
    // A (c - x) = grad f / p, so x - c is a descent direction; Armijo
    // backtracking on the true objective keeps the iteration monotone.
    constexpr double floor_r = 1e-8;
    const int m = u0.channels;
    std::vector<double> grad;
    double f = field_objective(c, u0, w, mu, p, &grad);
    GridOperator A(g);
    std::vector<double> b(g.size()), x(g.size());
    for (int it = 0; it < 200; ++it) {
        const auto r = misfit_pow(c, u0, 2.0);
        const auto gs = gradient_norm_sq(c);
        for (std::size_t k = 0; k < g.size(); ++k) {
            A.mass[k] = w[k] * std::pow(std::max(std::sqrt(r[k]), floor_r), p - 2.0);
            const double s = mu * w[k] * std::pow(std::max(std::sqrt(gs[k]), floor_r), p - 2.0);
            A.sx[k] = s / (g.hx() * g.hx());
            A.sy[k] = s / (g.hy() * g.hy());
        }
        MultiField target = c;
        for (int ch = 0; ch < m; ++ch) {
            for (std::size_t k = 0; k < g.size(); ++k) {
                b[k] = A.mass[k] * u0.at(k, ch);
                x[k] = c.at(k, ch);
            }
            spd_solve(A, b, x, cfg.cg_tol, cfg.cg_max);
            for (std::size_t k = 0; k < g.size(); ++k) target.at(k, ch) = x[k];
        }
        double slope = 0.0;  // directional derivative along target - c
        for (std::size_t k = 0; k < c.values.size(); ++k) slope += grad[k] * (target.values[k] - c.values[k]);
        if (!(slope < 0.0)) break;
        MultiField trial = c;
        double ft = kInfinity;
        double t = 1.0;
        for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
            for (std::size_t k = 0; k < c.values.size(); ++k)
                trial.values[k] = c.values[k] + t * (target.values[k] - c.values[k]);
            ft = field_objective(trial, u0, w, mu, p, nullptr);
            if (ft <= f + 1e-4 * t * slope) break;
        }
        if (!(ft < f)) break;
        const double rel = (f - ft) / std::max(f, 1e-300);
        c = std::move(trial);
        f = field_objective(c, u0, w, mu, p, &grad);
        if (rel < 1e-13) break;
    }
    return c;
}

} // namespace detail

struct SmoothFields {
    MultiField c1;
    MultiField c2;
};

/// Minimizes the data and gradient terms in (c1, c2) for fixed v with
/// weights max(|v|, eta) and max(|1-v|, eta).
inline SmoothFields fit_smooth_fields(const ScalarField& v, const MultiField& u0, const EnergyParams& prm,
                                      const SolverConfig& cfg, const SmoothFields* warm = nullptr) {
    require_same_grid(v.grid, u0.grid, "fit_smooth_fields");
    std::vector<double> w1(v.size()), w2(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        w1[k] = std::max(std::abs(v[k]), cfg.eta);
        w2[k] = std::max(std::abs(1.0 - v[k]), cfg.eta);
    }
    return {detail::fit_field(w1, u0, prm.mu, prm.p, cfg, warm ? &warm->c1 : nullptr),
            detail::fit_field(w2, u0, prm.mu, prm.p, cfg, warm ? &warm->c2 : nullptr)};
}

// ---------------------------------------------------------------------------
// Phase-field step

/// Per-cell A - B with A = |c1-u0|^p + mu |grad c1|^p and B likewise.
inline std::vector<double> phase_forcing(const SegmentationState& s, const MultiField& u0, const EnergyParams& prm) {
    auto a = misfit_pow(s.c1, u0, prm.p);
    const auto b = misfit_pow(s.c2, u0, prm.p);
    if (prm.mu > 0.0) {
        const auto g1 = gradient_pow(s.c1, prm.p);
        const auto g2 = gradient_pow(s.c2, prm.p);
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += prm.mu * (g1[k] - g2[k]);
    }
    for (std::size_t k = 0; k < a.size(); ++k) a[k] -= b[k];
    return a;
}

/// One linearly stabilized semi-implicit step of the phase-field gradient flow:
///   ((1 + tau r S) I - tau (2 nu eps / c_W) Lap) v+ = v + tau r S v - tau [F + r W'(v)],
/// with r = nu / (c_W eps) and S = sup |W''| on [0, 1], followed by clamping
/// to [0, 1] (values below 1e-100 are flushed to 0 so a decaying phase never
/// drifts into subnormals). F is the data forcing (A - B). The stabilizer makes the step
/// energy-stable for every tau and leaves the fixed points unchanged.
inline ScalarField phase_step(const ScalarField& v, std::span<const double> forcing, const DoubleWell& W,
                              const EnergyParams& prm, const SolverConfig& cfg, double tau) {
    const Grid& g = v.grid;
    const double kappa = 2.0 * prm.nu * prm.eps / W.cw;
    const double react = prm.nu / (W.cw * prm.eps);
    GridOperator A(g);
    const double stab = tau * react * W.curvature;
    std::fill(A.mass.begin(), A.mass.end(), 1.0 + stab);
    std::fill(A.sx.begin(), A.sx.end(), tau * kappa / (g.hx() * g.hx()));
    std::fill(A.sy.begin(), A.sy.end(), tau * kappa / (g.hy() * g.hy()));
    std::vector<double> rhs(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        rhs[k] = (1.0 + stab) * v[k] - tau * (forcing[k] + react * W.deriv(v[k]));
    std::vector<double> x = v.values;
    spd_solve(A, rhs, x, cfg.cg_tol, cfg.cg_max);
    ScalarField out(g);
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = x[k] < 1e-100 ? 0.0 : std::min(x[k], 1.0);
    return out;
}

inline double stable_tau(const DoubleWell&, const EnergyParams&, const SolverConfig& cfg) { return cfg.tau; }

inline ScalarField update_v_step(const SegmentationState& s, const MultiField& u0, const DoubleWell& W,
                                 const EnergyParams& prm, const SolverConfig& cfg) {
    const auto f = phase_forcing(s, u0, prm);
    return phase_step(s.v, f, W, prm, cfg, stable_tau(W, prm, cfg));
}

// ---------------------------------------------------------------------------
// Alternating minimization

/// Otsu split of the channel average: the threshold maximizing the
/// between-class variance.
inline double otsu_threshold(const ScalarField& f) {
    std::vector<double> s = f.values;
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double total = 0.0;
    for (double x : s) total += x;
    double best = -1.0;
    double thr = 0.5 * (s.front() + s.back());
    double left = 0.0;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        left += s[k];
        if (s[k] == s[k + 1]) continue;
        const double n1 = static_cast<double>(k + 1);
        const double n2 = n - n1;
        const double m1 = left / n1;
        const double m2 = (total - left) / n2;
        const double between = n1 * n2 * (m1 - m2) * (m1 - m2);
        if (between > best) {
            best = between;
            thr = 0.5 * (s[k] + s[k + 1]);
        }
    }
    return thr;
}

namespace detail {

inline ScalarField box_smooth(const ScalarField& f) {
    const Grid& g = f.grid;
    ScalarField out(g);
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            double acc = 0.0;
            int cnt = 0;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const int a = i + di;
                    const int b = j + dj;
                    if (a < 0 || b < 0 || a >= g.nx() || b >= g.ny()) continue;
                    acc += f.at(a, b);
                    ++cnt;
                }
            out.at(i, j) = acc / cnt;
        }
    return out;
}

inline MultiField broadcast(const Grid& g, const std::vector<double>& c) { return MultiField::constant(g, c); }

} // namespace detail

/// v from a smoothed two-means split of the channel average (1 on the
/// bright side) plus seeded uniform noise of amplitude 0.01; fields fitted
/// on that v.
inline SegmentationState initial_state(const MultiField& u0, const EnergyParams& prm, const SolverConfig& cfg) {
    const ScalarField avg = u0.channel_average();
    const double thr = otsu_threshold(avg);
    ScalarField v(u0.grid);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = avg[k] > thr ? 1.0 : 0.0;
    v = detail::box_smooth(detail::box_smooth(v));
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    for (double& x : v.values) x = std::clamp(x + noise(rng), 0.0, 1.0);
    if (cfg.mode == SolverMode::piecewise_constant) {
        const auto fit = fit_constants(v, u0, prm.p);
        return SegmentationState(v, detail::broadcast(u0.grid, fit.c1), detail::broadcast(u0.grid, fit.c2));
    }
    auto fields = fit_smooth_fields(v, u0, prm, cfg);
    return SegmentationState(v, std::move(fields.c1), std::move(fields.c2));
}

struct MinimizeResult {
    SegmentationState state;
    std::vector<EnergyBreakdown> trace;  // unnormalized energy after each accepted outer iteration
    int iterations = 0;
    bool converged = false;
};

/// Alternates the field (or constant) fit with a phase-field step until the
/// relative energy decrease drops below cfg.tol. Steps that would raise the
/// energy are rejected; a rejected v-step halves tau.
///
/// A descent flow cannot remove an interface that is a critical point of
/// the perimeter (a straight cut across the domain). With
/// cfg.try_constant_states the result is finally compared with the two
/// interface-free states v = 0 and v = 1, the one nearer the descent result
/// first, and replaced by a strictly better one. It is off by default: the
/// split found from the Otsu start is often only a local minimizer, and the
/// experiments study exactly that branch.
inline MinimizeResult minimize(const MultiField& u0, const DoubleWell& W, const EnergyParams& params,
                               const SolverConfig& cfg, const SegmentationState* init = nullptr) {
    params.validate();
    cfg.validate();
    if (params.mu_infinite) throw std::invalid_argument("minimize: mu must be finite");
    EnergyParams prm = params;
    prm.normalized = false;
    const bool pc = cfg.mode == SolverMode::piecewise_constant;
    if (pc) prm.mu = 0.0;

    MinimizeResult res;
    res.state = init ? *init : initial_state(u0, prm, cfg);
    require_same_grid(res.state.grid(), u0.grid, "minimize");
    SegmentationState& s = res.state;
    auto energy = [&](const SegmentationState& st) { return at_energy(st, u0, W, prm); };

    EnergyBreakdown cur = energy(s);
    res.trace.push_back(cur);
    const double tau_max = stable_tau(W, prm, cfg);
    double tau = tau_max;
    ConstantsFit consts;
    if (pc) {
        consts.c1.assign(s.c1.cell(0).begin(), s.c1.cell(0).end());
        consts.c2.assign(s.c2.cell(0).begin(), s.c2.cell(0).end());
    }
    SmoothFields fields{s.c1, s.c2};

    for (int it = 1; it <= cfg.max_outer; ++it) {
        res.iterations = it;
        const double before = cur.total;

        // field update
        SegmentationState trial = s;
        if (pc) {
            const auto fit = fit_constants(s.v, u0, prm.p, &consts);
            trial.c1 = detail::broadcast(u0.grid, fit.c1);
            trial.c2 = detail::broadcast(u0.grid, fit.c2);
            const auto e = energy(trial);
            if (e.total <= cur.total) {
                consts.c1 = fit.c1;
                consts.c2 = fit.c2;
                s = std::move(trial);
                cur = e;
            }
        } else {
            auto f = fit_smooth_fields(s.v, u0, prm, cfg, &fields);
            trial.c1 = f.c1;
            trial.c2 = f.c2;
            const auto e = energy(trial);
            if (e.total <= cur.total) {
                fields = std::move(f);
                s = std::move(trial);
                cur = e;
            }
        }

        // phase-field update
        const auto forcing = phase_forcing(s, u0, prm);
        bool stalled = false;
        double tau_used = tau;
        for (;;) {
            SegmentationState cand = s;
            cand.v = phase_step(s.v, forcing, W, prm, cfg, tau);
            const auto e = energy(cand);
            if (e.total <= cur.total) {
                s = std::move(cand);
                cur = e;
                tau_used = tau;
                tau = std::min(1.25 * tau, tau_max);
                break;
            }
            if (e.total - cur.total <= 1e-13 * std::max(1.0, std::abs(cur.total)) && tau <= 1e-3 * tau_max) {
                stalled = true;  // even short steps only move by rounding
                break;
            }
            tau *= 0.5;
            if (tau < 1e-12) throw NoProgress("minimize: v-step size underflow at outer iteration " + std::to_string(it));
        }

        res.trace.push_back(cur);
        const double rel = (before - cur.total) / std::max(std::abs(before), 1e-300);
        // a small decrease only signals convergence when the step was not
        // shrunk by earlier rejections
        if (stalled || (rel < cfg.tol && tau_used >= 0.5 * tau_max)) {
            res.converged = true;
            break;
        }
    }

    if (!cfg.try_constant_states) return res;
    double mean_v = 0.0;
    for (double x : s.v.values) mean_v += x;
    mean_v /= static_cast<double>(s.v.size());
    const double first = mean_v >= 0.5 ? 1.0 : 0.0;
    for (double level : {first, 1.0 - first}) {
        SegmentationState cand = s;
        std::fill(cand.v.values.begin(), cand.v.values.end(), level);
        if (pc) {
            const auto fit = fit_constants(cand.v, u0, prm.p, &consts);
            cand.c1 = detail::broadcast(u0.grid, fit.c1);
            cand.c2 = detail::broadcast(u0.grid, fit.c2);
        } else {
            auto f = fit_smooth_fields(cand.v, u0, prm, cfg, &fields);
            cand.c1 = std::move(f.c1);
            cand.c2 = std::move(f.c2);
        }
        const auto e = energy(cand);
        if (e.total < cur.total) {
            s = std::move(cand);
            cur = e;
            res.trace.push_back(cur);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Recovery sequence

/// psi_a(x) = C exp(1 / (|x/a|^2 - 1)) / a^d on |x| < a, sampled at cell
/// offsets and normalized to unit discrete mass.
struct Mollifier {
    double a = 0.0;
    double C = 0.0;  // continuous normalization constant of the unit-scale bump
    int rx = 0;
    int ry = 0;
    std::vector<double> weights;  // (2 ry + 1) x (2 rx + 1), row-major

    Mollifier(const Grid& g, double scale) : a(scale) {
        if (!(scale > 0.0)) throw std::invalid_argument("Mollifier: scale must be positive");
        const int d = g.is_1d() ? 1 : 2;
        auto bump = [](double r) { return r < 1.0 ? std::exp(1.0 / (r * r - 1.0)) : 0.0; };
        const std::function<double(double)> radial = [&](double r) {
            return (d == 1 ? 2.0 : 2.0 * std::numbers::pi * r) * bump(r);
        };
        C = 1.0 / adaptive_simpson(radial, 0.0, 1.0, 1e-13);
        rx = static_cast<int>(std::floor(a / g.hx()));
        ry = g.is_1d() ? 0 : static_cast<int>(std::floor(a / g.hy()));
        weights.assign(static_cast<std::size_t>((2 * rx + 1) * (2 * ry + 1)), 0.0);
        double total = 0.0;
        for (int j = -ry; j <= ry; ++j)
            for (int i = -rx; i <= rx; ++i) {
                const double r = d == 1 ? std::abs(i * g.hx()) / a : std::hypot(i * g.hx(), j * g.hy()) / a;
                const double w = C * bump(r);
                weights[static_cast<std::size_t>((j + ry) * (2 * rx + 1) + (i + rx))] = w;
                total += w;
            }
        if (total == 0.0) {  // scale below the grid: identity
            weights[static_cast<std::size_t>(ry * (2 * rx + 1) + rx)] = 1.0;
            total = 1.0;
        }
        for (double& w : weights) w /= total;
    }

    double discrete_mass() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

namespace detail {

/// Even reflection of an index into [0, n).
inline int reflect(int i, int n) {
    const int period = 2 * n;
    int r = i % period;
    if (r < 0) r += period;
    return r < n ? r : period - 1 - r;
}

} // namespace detail

/// psi_a * c with the field extended by even reflection across the domain
/// boundary, so constants are reproduced exactly.
inline MultiField mollify(const MultiField& c, const Mollifier& psi) {
    const Grid& g = c.grid;
    MultiField out(g, c.channels);
    const int w = 2 * psi.rx + 1;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            for (int dj = -psi.ry; dj <= psi.ry; ++dj) {
                const int b = detail::reflect(j + dj, g.ny());
                for (int di = -psi.rx; di <= psi.rx; ++di) {
                    const double wt = psi.weights[static_cast<std::size_t>((dj + psi.ry) * w + (di + psi.rx))];
                    if (wt == 0.0) continue;
                    const std::size_t src = g.index(detail::reflect(i + di, g.nx()), b);
                    for (int ch = 0; ch < c.channels; ++ch) out.at(k, ch) += wt * c.at(src, ch);
                }
            }
        }
    return out;
}

struct RecoveryScales {
    double b = 0.0;   // erosion depth
    double a1 = 0.0;  // mollifier scale for c1
    double a2 = 0.0;  // mollifier scale for c2
};

/// a_i = (lambda(phase minus its b-erosion))^(1/(2p)) with b = 4 eps, the
/// measure being the normalized indicator of the phase.
inline RecoveryScales recovery_scales(const IndicatorField& E, double eps, double p) {
    const auto sd = signed_distance(E);
    RecoveryScales r;
    r.b = 4.0 * eps;
    double in_total = 0.0;
    double in_band = 0.0;
    double out_total = 0.0;
    double out_band = 0.0;
    for (std::size_t k = 0; k < sd.size(); ++k) {
        if (E.mask[k]) {
            in_total += 1.0;
            if (sd[k] <= r.b) in_band += 1.0;
        } else {
            out_total += 1.0;
            if (-sd[k] <= r.b) out_band += 1.0;
        }
    }
    r.a1 = std::pow(in_band / in_total, 1.0 / (2.0 * p));
    r.a2 = std::pow(out_band / out_total, 1.0 / (2.0 * p));
    return r;
}

/// v = q(sd / eps) with q the optimal profile of W, and c_i mollified at
/// the recovery scales.
inline SegmentationState recovery_sequence(const IndicatorField& E, const MultiField& c1, const MultiField& c2,
                                           double eps, const DoubleWell& W, double p) {
    if (!(eps > 0.0)) throw std::invalid_argument("recovery_sequence: eps must be positive");
    require_nondegenerate(E, "recovery_sequence");
    require_same_grid(E.grid, c1.grid, "recovery_sequence");
    require_same_grid(E.grid, c2.grid, "recovery_sequence");
    const auto sd = signed_distance(E);
    const auto q = optimal_profile(W);
    ScalarField v(E.grid);
    for (std::size_t k = 0; k < sd.size(); ++k) v[k] = q(sd[k] / eps);
    const RecoveryScales sc = recovery_scales(E, eps, p);
    return SegmentationState(std::move(v), mollify(c1, Mollifier(E.grid, sc.a1)),
                             mollify(c2, Mollifier(E.grid, sc.a2)));
}

} // namespace gammaseg
