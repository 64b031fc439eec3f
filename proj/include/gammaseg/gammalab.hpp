#pragma once

// Numerical experiments: 1D interface energies, epsilon and mu ladders,
// piecewise-constant ladders and Minkowski-content studies, plus the
// synthetic images they run on.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gammaseg/clp.hpp"
#include "gammaseg/energy.hpp"
#include "gammaseg/grid.hpp"
#include "gammaseg/potential.hpp"
#include "gammaseg/solver.hpp"

namespace gammaseg {

// ---------------------------------------------------------------------------
// Synthetic images

/// Adds seeded uniform noise in [-amplitude, amplitude] to every value.
inline void add_uniform_noise(MultiField& f, double amplitude, std::uint64_t seed) {
    if (amplitude <= 0.0) return;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    for (double& x : f.values) x += u(rng);
}

/// low on x < split, high elsewhere (a vertical straight interface).
inline MultiField two_region_image(const Grid& g, double low, double high, double split = 0.5) {
    MultiField f(g, 1);
    for (std::size_t k = 0; k < g.size(); ++k) f.values[k] = g.center(k).x < split ? low : high;
    return f;
}

/// Two regions with a linear shading of the given slope along y.
inline MultiField shaded_two_region_image(const Grid& g, double low, double high, double slope) {
    MultiField f(g, 1);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 c = g.center(k);
        f.values[k] = (c.x < 0.5 ? low : high) + slope * (c.y - 0.5 * g.extent_y());
    }
    return f;
}

/// A bright disc on a dark background, sprinkled with small squares of the
/// opposite intensity; fine detail that only a small boundary weight keeps.
inline MultiField textured_image(const Grid& g, double low, double high, int speck, double density,
                                 std::uint64_t seed) {
    MultiField f(g, 1);
    const Vec2 mid{0.5 * g.extent_x(), 0.5 * g.extent_y()};
    const double r = 0.3 * std::min(g.extent_x(), g.extent_y());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 c = g.center(k);
        f.values[k] = std::hypot(c.x - mid.x, c.y - mid.y) < r ? high : low;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int j = 0; j + speck <= g.ny(); j += 2 * speck)
        for (int i = 0; i + speck <= g.nx(); i += 2 * speck) {
            if (u(rng) >= density) continue;
            const double flip = f.values[g.index(i, j)] == high ? low : high;
            for (int b = 0; b < speck; ++b)
                for (int a = 0; a < speck; ++a) f.values[g.index(i + a, j + b)] = flip;
        }
    return f;
}

// ---------------------------------------------------------------------------
// 1D interface energy

struct MMRow {
    double eps = 0.0;
    double gl = 0.0;
    double ratio = 0.0;  // gl / (c_W * jumps)
    int steps = 0;
};

struct MMOptions {
    int interfaces = 1;  // 1: step at 1/2; 2: plateau on [1/4, 3/4)
    int max_steps = 200000;
    double stationarity = 1e-9;  // max |v+ - v| / tau at which the flow stops
};

/// Relaxes a sharp initial condition under the pure Ginzburg-Landau flow on
/// a 1D strip and reports the stationary energy against c_W per jump.
inline std::vector<MMRow> modica_mortola_1d(const DoubleWell& W, const std::vector<double>& eps_ladder, int n_cells,
                                            const MMOptions& opt = {}) {
    if (n_cells < 1024) throw std::invalid_argument("modica_mortola_1d: need at least 1024 cells");
    if (opt.interfaces != 1 && opt.interfaces != 2)
        throw std::invalid_argument("modica_mortola_1d: interfaces must be 1 or 2");
    const Grid g = Grid::line(n_cells);
    std::vector<MMRow> rows;
    const std::vector<double> zero(g.size(), 0.0);
    SolverConfig cfg;
    cfg.cg_tol = 1e-14;
    for (double eps : eps_ladder) {
        ScalarField v(g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double x = g.center(k).x;
            v[k] = opt.interfaces == 1 ? (x >= 0.5 ? 1.0 : 0.0) : (x >= 0.25 && x < 0.75 ? 1.0 : 0.0);
        }
        // nu = c_W turns the phase step into the plain GL gradient flow
        EnergyParams prm;
        prm.nu = W.cw;
        prm.eps = eps;
        const double tau = eps / std::max(W.curvature, 2.0);
        MMRow row;
        row.eps = eps;
        bool done = false;
        for (int s = 1; s <= opt.max_steps; ++s) {
            ScalarField next = phase_step(v, zero, W, prm, cfg, tau);
            double change = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) change = std::max(change, std::abs(next[k] - v[k]));
            v = std::move(next);
            row.steps = s;
            if (change / tau < opt.stationarity) {
                done = true;
                break;
            }
        }
        if (!done)
            throw NonStationary("modica_mortola_1d: flow not stationary after " + std::to_string(opt.max_steps) +
                                " steps at eps = " + std::to_string(eps));
        row.gl = gl_energy(v, W, eps);
        row.ratio = row.gl / (W.cw * opt.interfaces);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ladders

struct MuRule {
    enum class Kind { fixed, sequence, divergent };
    Kind kind = Kind::fixed;
    double mu0 = 1.0;
    double alpha = 1.0;           // divergent: mu_eps = mu0 / eps^alpha
    std::vector<double> values;   // sequence: one mu per ladder point

    double at(std::size_t idx, double eps) const {
        switch (kind) {
        case Kind::fixed: return mu0;
        case Kind::sequence: return values.at(idx);
        case Kind::divergent: return mu0 / std::pow(eps, alpha);
        }
        return mu0;
    }
    /// The limit functional uses mu (fixed) or the constants branch.
    bool limit_infinite() const { return kind == Kind::divergent; }
    double limit_mu() const {
        if (kind == Kind::sequence) return values.empty() ? mu0 : values.back();
        return mu0;
    }
};

struct SweepPlan {
    std::vector<double> eps_ladder;
    MuRule mu_rule;
    double nu = 0.1;
    double p = 2.0;
    std::vector<std::uint64_t> seeds{0};
    bool warm_start = true;
    bool compute_clp = true;
    TransportOptions transport;

    void validate() const {
        if (eps_ladder.size() < 3) throw std::invalid_argument("SweepPlan: ladder needs at least 3 points");
        for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
            if (!(eps_ladder[k] > 0.0)) throw std::invalid_argument("SweepPlan: eps must be positive");
            if (k > 0 && !(eps_ladder[k] < eps_ladder[k - 1]))
                throw std::invalid_argument("SweepPlan: eps ladder must be strictly decreasing");
        }
        if (mu_rule.kind == MuRule::Kind::sequence && mu_rule.values.size() != eps_ladder.size())
            throw std::invalid_argument("SweepPlan: mu sequence length must match the ladder");
        if (!(nu > 0.0)) throw std::invalid_argument("SweepPlan: nu must be positive");
        if (!(p > 1.0)) throw std::invalid_argument("SweepPlan: p must exceed 1");
    }
};

struct GammaRow {
    double eps = 0.0;
    double mu = 0.0;
    double E_at_norm = 0.0;
    double E_limit = 0.0;
    double gap = 0.0;
    double l1_gap = 0.0;
    double tv_v = 0.0;
    double gl_over_tv = 0.0;
    double d_clp = 0.0;
    EnergyBreakdown at;  // breakdown of E_at_norm
    int iterations = 0;
};

struct GammaReport {
    std::vector<GammaRow> rows;
    std::vector<SegmentationState> states;      // converged state per ladder point
    std::vector<SegmentationState> limit_states;  // thresholded, refitted
};

/// Worker count for independent ladder points: GAMMASEG_THREADS if set,
/// else the hardware concurrency, never more than the number of jobs.
inline unsigned sweep_threads(std::size_t jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GAMMASEG_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

namespace detail {

/// Runs job(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline ScalarField thresholded(const ScalarField& v) { return threshold_half(v).as_scalar(); }

} // namespace detail

/// Thresholds v and refits the fields: constants for the mu = infinity
/// limit, weighted smooth fields otherwise.
inline SegmentationState limit_state(const SegmentationState& s, const MultiField& u0, const EnergyParams& prm,
                                     const SolverConfig& cfg) {
    ScalarField v = detail::thresholded(s.v);
    if (prm.mu_infinite || cfg.mode == SolverMode::piecewise_constant) {
        const auto fit = fit_constants(v, u0, prm.p);
        return SegmentationState(v, MultiField::constant(u0.grid, fit.c1), MultiField::constant(u0.grid, fit.c2));
    }
    SmoothFields warm{s.c1, s.c2};
    auto f = fit_smooth_fields(v, u0, prm, cfg, &warm);
    return SegmentationState(std::move(v), std::move(f.c1), std::move(f.c2));
}

/// Minimizes along the epsilon ladder and compares the normalized
/// approximating energy of each converged state with the limit energy of
/// its thresholded, refitted version.
inline GammaReport epsilon_sweep(const MultiField& u0, const DoubleWell& W, const SweepPlan& plan,
                                 const SolverConfig& cfg) {
    plan.validate();
    const std::size_t n = plan.eps_ladder.size();
    GammaReport rep;
    rep.rows.resize(n);
    rep.states.resize(n);
    rep.limit_states.resize(n);

    auto params_at = [&](std::size_t i) {
        EnergyParams prm;
        prm.p = plan.p;
        prm.nu = plan.nu;
        prm.eps = plan.eps_ladder[i];
        prm.mu = plan.mu_rule.at(i, prm.eps);
        prm.normalized = true;
        return prm;
    };
    auto run_point = [&](std::size_t i, const SegmentationState* init) {
        const EnergyParams prm = params_at(i);
        SolverConfig c = cfg;
        c.seed = plan.seeds.empty() ? cfg.seed : plan.seeds[i % plan.seeds.size()];
        MinimizeResult res;
        try {
            res = minimize(u0, W, prm, c, init);
        } catch (const Error& e) {
            throw Error("eps = " + std::to_string(prm.eps) + ": " + e.what());
        }
        GammaRow& row = rep.rows[i];
        row.eps = prm.eps;
        row.mu = prm.mu;
        row.iterations = res.iterations;
        row.at = at_energy(res.state, u0, W, prm);
        row.E_at_norm = row.at.total;

        EnergyParams lim = prm;
        lim.mu_infinite = plan.mu_rule.limit_infinite();
        lim.mu = plan.mu_rule.limit_mu();
        SegmentationState ls = limit_state(res.state, u0, lim, c);
        row.E_limit = limit_energy(ls, u0, lim).total;
        row.gap = row.E_at_norm - row.E_limit;
        row.l1_gap = l1_distance(ls.v, res.state.v);
        row.tv_v = tv_isotropic(res.state.v);
        row.gl_over_tv = row.tv_v > 0.0 ? gl_energy(res.state.v, W, prm.eps) / (W.cw * row.tv_v) : 0.0;
        rep.states[i] = std::move(res.state);
        rep.limit_states[i] = std::move(ls);
    };

    if (plan.warm_start) {
        for (std::size_t i = 0; i < n; ++i) run_point(i, i > 0 ? &rep.states[i - 1] : nullptr);
    } else {
        detail::parallel_for(n, sweep_threads(n), [&](std::size_t i) { run_point(i, nullptr); });
    }
    if (plan.compute_clp) {
        const SegmentationState& finest = rep.states.back();
        for (std::size_t i = 0; i < n; ++i)
            rep.rows[i].d_clp = i + 1 == n ? 0.0 : clp_distance(rep.states[i], finest, plan.p, plan.transport);
    }
    return rep;
}

struct MuRow {
    double mu = 0.0;
    double std1 = 0.0;   // within-segment standard deviation of c1 on E
    double std2 = 0.0;   // of c2 on the complement
    double dev1 = 0.0;   // RMS distance of c1 on E to the weighted mean, relative to it
    double dev2 = 0.0;
    std::vector<double> mean1;  // segment weighted means of u0
    std::vector<double> mean2;
    SegmentationState state;
};

namespace detail {

/// Standard deviation of c over the selected cells and its RMS distance to
/// `ref` relative to |ref|.
inline std::pair<double, double> segment_spread(const MultiField& c, const std::vector<std::uint8_t>& in,
                                                const std::vector<double>& ref) {
    const int m = c.channels;
    std::vector<double> mean(static_cast<std::size_t>(m), 0.0);
    double cnt = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k)
        if (in[k]) {
            for (int ch = 0; ch < m; ++ch) mean[ch] += c.at(k, ch);
            cnt += 1.0;
        }
    if (cnt == 0.0) return {0.0, 0.0};
    for (double& x : mean) x /= cnt;
    double var = 0.0;
    double dev = 0.0;
    double rn = 0.0;
    for (int ch = 0; ch < m; ++ch) rn += ref[ch] * ref[ch];
    for (std::size_t k = 0; k < in.size(); ++k)
        if (in[k])
            for (int ch = 0; ch < m; ++ch) {
                var += (c.at(k, ch) - mean[ch]) * (c.at(k, ch) - mean[ch]);
                dev += (c.at(k, ch) - ref[ch]) * (c.at(k, ch) - ref[ch]);
            }
    return {std::sqrt(var / cnt), std::sqrt(dev / cnt) / std::sqrt(rn)};
}

} // namespace detail

/// Minimizes at fixed eps for each mu of the ladder and measures how far
/// the fields are from constants on the thresholded segments.
inline std::vector<MuRow> mu_sweep(const MultiField& u0, const DoubleWell& W, const std::vector<double>& mu_ladder,
                                   double eps, double nu, double p, const SolverConfig& cfg, bool warm_start = true) {
    if (mu_ladder.size() < 2) throw std::invalid_argument("mu_sweep: ladder needs at least 2 points");
    for (std::size_t k = 1; k < mu_ladder.size(); ++k)
        if (!(mu_ladder[k] > mu_ladder[k - 1])) throw std::invalid_argument("mu_sweep: mu ladder must increase");
    std::vector<MuRow> rows(mu_ladder.size());
    auto run = [&](std::size_t i, const SegmentationState* init) {
        EnergyParams prm;
        prm.p = p;
        prm.nu = nu;
        prm.eps = eps;
        prm.mu = mu_ladder[i];
        auto res = minimize(u0, W, prm, cfg, init);
        MuRow& row = rows[i];
        row.mu = prm.mu;
        const IndicatorField E = threshold_half(res.state.v);
        const auto fit = fit_constants(res.state.v, u0, p);
        row.mean1 = fit.c1;
        row.mean2 = fit.c2;
        const auto s1 = detail::segment_spread(res.state.c1, E.mask, fit.c1);
        const auto s2 = detail::segment_spread(res.state.c2, E.complement().mask, fit.c2);
        row.std1 = s1.first;
        row.dev1 = s1.second;
        row.std2 = s2.first;
        row.dev2 = s2.second;
        row.state = std::move(res.state);
    };
    if (warm_start) {
        for (std::size_t i = 0; i < rows.size(); ++i) run(i, i > 0 ? &rows[i - 1].state : nullptr);
    } else {
        detail::parallel_for(rows.size(), sweep_threads(rows.size()), [&](std::size_t i) { run(i, nullptr); });
    }
    return rows;
}

struct PcRow {
    double eps = 0.0;
    double E_eps = 0.0;    // piecewise-constant approximating energy of the converged state
    double E_limit = 0.0;  // limit energy of its thresholded set with refitted constants
    double gap = 0.0;
    std::vector<double> c1;  // converged constants
    std::vector<double> c2;
    std::vector<double> c1_limit;
    std::vector<double> c2_limit;
    double dc = 0.0;  // max |c_eps - c_limit| over both phases and channels
    double tv_v = 0.0;
    SegmentationState state;
};

/// Piecewise-constant ladder: converged (v, c1, c2) per eps against the
/// limit energy of the thresholded set.
inline std::vector<PcRow> pc_gamma_check(const MultiField& u0, const DoubleWell& W, const SweepPlan& plan,
                                         const SolverConfig& cfg) {
    plan.validate();
    SolverConfig c = cfg;
    c.mode = SolverMode::piecewise_constant;
    std::vector<PcRow> rows(plan.eps_ladder.size());
    auto run = [&](std::size_t i, const SegmentationState* init) {
        EnergyParams prm;
        prm.p = plan.p;
        prm.nu = plan.nu;
        prm.eps = plan.eps_ladder[i];
        prm.mu = 0.0;
        SolverConfig ci = c;
        ci.seed = plan.seeds.empty() ? cfg.seed : plan.seeds[i % plan.seeds.size()];
        auto res = minimize(u0, W, prm, ci, init);
        PcRow& row = rows[i];
        row.eps = prm.eps;
        row.c1.assign(res.state.c1.cell(0).begin(), res.state.c1.cell(0).end());
        row.c2.assign(res.state.c2.cell(0).begin(), res.state.c2.cell(0).end());
        row.E_eps = pc_energy_eps(res.state.v, row.c1, row.c2, u0, W, prm);
        const IndicatorField E = threshold_half(res.state.v);
        const auto fit = fit_constants(E.as_scalar(), u0, prm.p);
        row.c1_limit = fit.c1;
        row.c2_limit = fit.c2;
        row.E_limit = pc_limit_energy(E, fit.c1, fit.c2, u0, prm);
        row.gap = row.E_eps - row.E_limit;
        for (std::size_t ch = 0; ch < row.c1.size(); ++ch)
            row.dc = std::max({row.dc, std::abs(row.c1[ch] - fit.c1[ch]), std::abs(row.c2[ch] - fit.c2[ch])});
        row.tv_v = tv_isotropic(res.state.v);
        row.state = std::move(res.state);
    };
    if (plan.warm_start) {
        for (std::size_t i = 0; i < rows.size(); ++i) run(i, i > 0 ? &rows[i - 1].state : nullptr);
    } else {
        detail::parallel_for(rows.size(), sweep_threads(rows.size()), [&](std::size_t i) { run(i, nullptr); });
    }
    return rows;
}

struct MinkowskiRow {
    double a = 0.0;
    double volume = 0.0;
    double ratio = 0.0;      // volume / (2a)
    double perimeter = 0.0;  // discrete face-count perimeter
    double deviation = 0.0;  // ratio / perimeter - 1
};

inline std::vector<MinkowskiRow> minkowski_study(const IndicatorField& E, const std::vector<double>& a_ladder) {
    require_nondegenerate(E, "minkowski_study");
    const double P = discrete_perimeter(E);
    std::vector<MinkowskiRow> rows;
    for (double a : a_ladder) {
        MinkowskiRow r;
        r.a = a;
        r.volume = minkowski_volume(E, a);
        r.ratio = r.volume / (2.0 * a);
        r.perimeter = P;
        r.deviation = r.ratio / P - 1.0;
        rows.push_back(r);
    }
    return rows;
}

} // namespace gammaseg
