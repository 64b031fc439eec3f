// End-to-end acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gammaseg/gammaseg.hpp"

using namespace gammaseg;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail += (detail.empty() ? "" : "; ") + std::string(ok ? "" : "NOT ") + what;
    }
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string list(const std::vector<double>& xs, const char* f = "%.4g") {
    std::string s = "[";
    for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? ", " : "") + fmt(f, xs[k]);
    return s + "]";
}

bool strictly_decreasing(const std::vector<double>& xs) {
    for (std::size_t k = 1; k < xs.size(); ++k)
        if (!(xs[k] < xs[k - 1])) return false;
    return true;
}

int failures = 0;

void run(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
        out.pass = false;
        out.detail += "; NOT within the " + fmt("%.0f", budget_s) + " s budget";
    }
    if (!out.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", id, title, out.detail.c_str(),
                secs);
    std::fflush(stdout);
}

double trapezoid_cw(const DoubleWell& W, int n) {
    double s = 0.5 * (std::sqrt(W(0.0)) + std::sqrt(W(1.0)));
    for (int k = 1; k < n; ++k) s += std::sqrt(W(static_cast<double>(k) / n));
    return 2.0 * s / n;
}

// ---------------------------------------------------------------------------

Outcome modica_mortola() {
    Outcome o;
    const auto rows = modica_mortola_1d(make_quartic(), {0.05, 0.02, 0.01}, 4096);
    std::vector<double> ratio, dist;
    for (const auto& r : rows) {
        ratio.push_back(r.ratio);
        dist.push_back(std::abs(r.ratio - 1.0));
    }
    o.require(dist.back() <= 0.05, "GL energy within 5% of c_W at eps = 0.01, ratios " + list(ratio, "%.12f"));
    o.require(strictly_decreasing(dist), "ratio monotone toward 1, |ratio - 1| = " + list(dist, "%.3e"));
    return o;
}

Outcome well_constants() {
    Outcome o;
    const auto q = make_quartic();
    const auto s = make_sine();
    const double oq = trapezoid_cw(q, 1 << 21);
    const double os = trapezoid_cw(s, 1 << 21);
    const double cq = compute_cw(q, 1e-10);
    const double cs = compute_cw(s, 1e-10);
    o.require(std::abs(cq - oq) <= 1e-8 && std::abs(cq - 1.0 / 3) <= 1e-8,
              "quartic c_W " + fmt("%.15f", cq) + " vs trapezoid " + fmt("%.15f", oq));
    o.require(std::abs(cs - os) <= 1e-8 && std::abs(cs - 2.0 / std::numbers::pi) <= 1e-8,
              "sine c_W " + fmt("%.15f", cs) + " vs trapezoid " + fmt("%.15f", os));
    return o;
}

struct GammaRun {
    GammaReport rep;
    double measure = 1.0;
};

const GammaRun& gamma_run() {
    static const GammaRun run = [] {
        const Grid g = Grid::unit_square(64);
        auto u0 = two_region_image(g, 0.35, 0.65);
        add_uniform_noise(u0, 0.05, 7);
        SweepPlan plan;
        plan.eps_ladder = {0.1, 0.05, 0.025, 0.0125};
        plan.mu_rule.mu0 = 1.0;
        plan.nu = 0.1;
        plan.compute_clp = false;
        return GammaRun{epsilon_sweep(u0, make_quartic(), plan, {}), g.measure()};
    }();
    return run;
}

Outcome gamma_gap() {
    Outcome o;
    const auto& rep = gamma_run().rep;
    std::vector<double> gap;
    for (const auto& r : rep.rows) gap.push_back(std::abs(r.gap));
    const double rel = gap.back() / rep.rows.back().E_limit;
    o.require(strictly_decreasing(gap), "|gap| decreasing " + list(gap));
    o.require(rel <= 0.10, "final |gap| / E_limit = " + fmt("%.4f", rel) + " <= 0.10");
    return o;
}

Outcome thresholding() {
    Outcome o;
    const auto& run = gamma_run();
    std::vector<double> l1;
    for (const auto& r : run.rep.rows) l1.push_back(r.l1_gap);
    o.require(strictly_decreasing(l1), "L1 gap decreasing " + list(l1));
    o.require(l1.back() <= 0.02 * run.measure, "final L1 gap " + fmt("%.4g", l1.back()) + " <= 0.02 |Omega|");
    return o;
}

Outcome mu_branch() {
    Outcome o;
    const Grid g = Grid::unit_square(64);
    const auto u0 = shaded_two_region_image(g, 0.3, 0.7, 0.2);
    const auto rows = mu_sweep(u0, make_quartic(), {1, 10, 100, 1000}, 0.025, 0.1, 2.0, {});
    std::vector<double> s1, s2;
    for (const auto& r : rows) {
        s1.push_back(r.std1);
        s2.push_back(r.std2);
    }
    o.require(strictly_decreasing(s1) && strictly_decreasing(s2),
              "within-segment std strictly decreasing " + list(s1) + " / " + list(s2));
    const double dev = std::max(rows.back().dev1, rows.back().dev2);
    o.require(dev <= 0.02, "relative deviation at mu = 1000 is " + fmt("%.3e", dev) + " <= 0.02");
    return o;
}

Outcome clp_metric() {
    Outcome o;
    constexpr double kZero = 1e-6;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto random_state = [&](const Grid& g) {
        ScalarField v(g);
        const double mode = u(rng);
        if (mode < 0.1) {
            std::fill(v.values.begin(), v.values.end(), 0.1 + 0.8 * u(rng));
        } else {
            for (double& x : v.values) {
                const double r = u(rng);
                x = r < 0.25 ? 0.0 : (r < 0.5 ? 1.0 : u(rng));
            }
        }
        MultiField c1(g, 1), c2(g, 1);
        for (double& x : c1.values) x = u(rng);
        for (double& x : c2.values) x = u(rng);
        return SegmentationState(v, c1, c2);
    };
    // a different representative of the same class
    auto equivalent_copy = [&](const SegmentationState& s) {
        SegmentationState t = s;
        const double v0 = s.v[0];
        const bool constant = std::all_of(s.v.values.begin(), s.v.values.end(), [&](double x) { return x == v0; });
        if (constant && v0 > 0.0 && v0 < 1.0) std::fill(t.v.values.begin(), t.v.values.end(), 0.1 + 0.8 * u(rng));
        for (std::size_t k = 0; k < t.v.size(); ++k) {
            if (t.v[k] == 0.0) t.c1.values[k] = u(rng);
            if (t.v[k] == 1.0) t.c2.values[k] = u(rng);
        }
        return t;
    };

    double worst_sym = 0.0, worst_tri = -1e300;
    int zero_mismatch = 0, equivalent_pairs = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int nx = 2 + static_cast<int>(u(rng) * 5);  // 2..6
        const int ny = 2 + static_cast<int>(u(rng) * 4);  // 2..5, at most 30 points
        const Grid g(nx, ny, 1.0 / nx, 1.0 / ny);
        const auto r = random_state(g);
        const auto s = trial % 3 == 0 ? equivalent_copy(r) : random_state(g);
        const auto t = trial % 5 == 0 ? equivalent_copy(s) : random_state(g);
        const double rs = clp_distance(r, s, 2.0), sr = clp_distance(s, r, 2.0);
        const double st = clp_distance(s, t, 2.0), rt = clp_distance(r, t, 2.0);
        worst_sym = std::max(worst_sym, std::abs(rs - sr));
        worst_tri = std::max({worst_tri, rt - rs - st, rs - rt - st, st - rs - rt});
        for (const auto& [a, b, d] : {std::tuple{&r, &s, rs}, std::tuple{&s, &t, st}, std::tuple{&r, &t, rt}}) {
            const bool eq = clp_equivalent(*a, *b);
            equivalent_pairs += eq ? 1 : 0;
            if (eq != (d <= kZero)) ++zero_mismatch;
        }
    }
    o.require(worst_sym <= 1e-9, "symmetry defect " + fmt("%.2e", worst_sym));
    o.require(worst_tri <= 1e-9, "triangle defect " + fmt("%.2e", worst_tri));
    o.require(zero_mismatch == 0, "d = 0 iff equivalent (" + std::to_string(equivalent_pairs) + " equivalent pairs, " +
                                      std::to_string(zero_mismatch) + " mismatches)");

    double worst_brute = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 8;
        std::vector<Vec2> pa(n), pb(n);
        std::vector<double> fa(n), fb(n);
        for (int k = 0; k < n; ++k) {
            pa[k] = {u(rng), u(rng)};
            pb[k] = {u(rng), u(rng)};
            fa[k] = u(rng);
            fb[k] = u(rng);
        }
        const std::vector<double> w(n, 1.0 / n);
        const PairedSample a(DiscreteMeasure(pa, w), 1, fa), b(DiscreteMeasure(pb, w), 1, fb);
        const double p = 1.0 + trial % 3;
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double c = 0.0;
            for (int i = 0; i < n; ++i)
                c += (std::pow(std::hypot(pa[i].x - pb[perm[i]].x, pa[i].y - pb[perm[i]].y), p) +
                      std::pow(std::abs(fa[i] - fb[perm[i]]), p)) /
                     n;
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        worst_brute = std::max(worst_brute, std::abs(tlp_distance(a, b, p).distance - std::pow(best, 1.0 / p)));
    }
    o.require(worst_brute <= 1e-9, "exact LP vs permutation brute force, worst " + fmt("%.2e", worst_brute));
    return o;
}

struct RecoveryRun {
    std::vector<double> eps{0.08, 0.04, 0.02};
    std::vector<double> dist, stag, margin, rel;
};

const RecoveryRun& recovery_run() {
    static const RecoveryRun run = [] {
        RecoveryRun r;
        const Grid g = Grid::unit_square(64);
        const auto E = IndicatorField::from_predicate(g, [](Vec2 x) { return x.x < 0.5; });
        const MultiField c1(g, 1, 0.25), c2(g, 1, 0.75);
        MultiField u0(g, 1);
        for (std::size_t k = 0; k < g.size(); ++k) u0.values[k] = E[k] ? 0.25 : 0.75;
        const SegmentationState sharp(E.as_scalar(), c1, c2);
        const auto W = make_quartic();
        EnergyParams prm;
        prm.nu = 1.0;
        prm.mu = 1.0;
        const double El = limit_energy(sharp, u0, prm).total;
        for (double eps : r.eps) {
            const auto s = recovery_sequence(E, c1, c2, eps, W, 2.0);
            const auto d = clp_distance_full(s, sharp, 2.0);
            const auto ms = measures_from(s.v);
            r.dist.push_back(d.distance);
            r.stag.push_back(map_stagnation_cost(barycentric_map(d.first.plan), ms.lam_v, 2.0) +
                             map_stagnation_cost(barycentric_map(d.second.plan), ms.lam_1mv, 2.0));
            prm.eps = eps;
            r.margin.push_back(at_energy(s, u0, W, prm).total - El);
            r.rel.push_back(r.margin.back() / El);
        }
        return r;
    }();
    return run;
}

Outcome recovery_convergence() {
    Outcome o;
    const auto& r = recovery_run();
    o.require(strictly_decreasing(r.dist), "CL^p distance to the sharp state decreasing " + list(r.dist));
    o.require(strictly_decreasing(r.stag), "stagnation cost of extracted maps decreasing " + list(r.stag, "%.3e"));
    return o;
}

Outcome limsup_witness() {
    Outcome o;
    const auto& r = recovery_run();
    const bool above = std::all_of(r.margin.begin(), r.margin.end(), [](double m) { return m >= 0.0; });
    o.require(above, "recovery energy above the limit energy, margins " + list(r.margin, "%.3e"));
    o.require(strictly_decreasing(r.margin), "margin decreasing");
    o.require(r.rel.back() <= 0.10, "relative margin at eps = 0.02 is " + fmt("%.4f", r.rel.back()) + " <= 0.10");
    return o;
}

Outcome minkowski() {
    Outcome o;
    const Grid g = Grid::unit_square(512);
    const double r = 0.25;
    const auto D = IndicatorField::from_predicate(g, [r](Vec2 x) { return std::hypot(x.x - 0.5, x.y - 0.5) < r; });
    const double a = 0.025;
    const double ratio = minkowski_volume(D, a) / (2 * a);
    const double dev = std::abs(ratio / (2 * std::numbers::pi * r) - 1.0);
    o.require(dev <= 0.03, "disc volume/(2a) = " + fmt("%.5f", ratio) + ", deviation " + fmt("%.4f", dev) + " <= 0.03");
    const auto H = IndicatorField::from_predicate(g, [](Vec2 x) { return x.x < 0.5; });
    double worst = 0.0;
    for (double b : {0.2, 0.1, 0.05, 0.025, 0.0123}) worst = std::max(worst, std::abs(minkowski_volume(H, b) - 2 * b));
    o.require(worst <= 1e-12, "half-plane slab identity, worst error " + fmt("%.2e", worst));
    return o;
}

Outcome figure_one() {
    Outcome o;
    // pixel units, as in the classical Chan-Vese setting
    const Grid g(64, 64, 1.0, 1.0);
    auto u0 = textured_image(g, 0.2, 0.8, 3, 0.15, 11);
    add_uniform_noise(u0, 0.05, 3);
    SolverConfig cfg;
    cfg.mode = SolverMode::piecewise_constant;
    std::vector<double> tv;
    for (double nu : {0.2, 0.6}) {
        EnergyParams prm;
        prm.nu = nu;
        prm.eps = 1.0;
        tv.push_back(tv_isotropic(minimize(u0, make_quartic(), prm, cfg).state.v));
    }
    o.require(tv[1] < tv[0], "TV(v) at nu = 0.6 (" + fmt("%.3f", tv[1]) + ") < at nu = 0.2 (" + fmt("%.3f", tv[0]) + ")");
    return o;
}

} // namespace

int main() {
    run(1, "1D interface energy", 10, modica_mortola);
    run(2, "well-constant quadrature", 1, well_constants);
    run(3, "Gamma-gap decay", 300, gamma_gap);
    run(4, "thresholding gap", 300, thresholding);
    run(5, "diverging mu branch", 300, mu_branch);
    run(6, "CL^p metric", 30, clp_metric);
    run(7, "CL^p convergence of recovery ladder", 120, recovery_convergence);
    run(8, "limsup witness", 120, limsup_witness);
    run(9, "Minkowski content", 30, minkowski);
    run(10, "nu comparison on a textured image", 120, figure_one);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
