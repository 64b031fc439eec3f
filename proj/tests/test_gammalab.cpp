#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "gammaseg/gammalab.hpp"

using namespace gammaseg;

namespace {

const Grid kSquare = Grid::unit_square(32);

SweepPlan small_plan() {
    SweepPlan plan;
    plan.eps_ladder = {0.1, 0.05, 0.025};
    plan.nu = 0.1;
    plan.compute_clp = false;
    return plan;
}

} // namespace

TEST(GammaLab, ModicaMortolaTwoInterfaces) {
    MMOptions opt;
    opt.interfaces = 2;
    const auto W = make_quartic();
    const auto rows = modica_mortola_1d(W, {0.05, 0.02, 0.01}, 4096, opt);
    for (const auto& r : rows) EXPECT_NEAR(r.gl / (2 * W.cw), 1.0, 0.05) << r.eps;
}

TEST(GammaLab, ModicaMortolaSineWell) {
    const auto W = make_sine();
    const auto rows = modica_mortola_1d(W, {0.05, 0.02}, 2048, {});
    for (const auto& r : rows) EXPECT_NEAR(r.ratio, 1.0, 0.05) << r.eps;
}

TEST(GammaLab, ModicaMortolaPreconditionsAndCap) {
    const auto W = make_quartic();
    EXPECT_THROW(modica_mortola_1d(W, {0.05}, 512, {}), std::invalid_argument);
    MMOptions opt;
    opt.max_steps = 3;
    EXPECT_THROW(modica_mortola_1d(W, {0.01}, 1024, opt), NonStationary);
}

TEST(GammaLab, SweepPlanValidation) {
    SweepPlan plan = small_plan();
    plan.eps_ladder = {0.1, 0.05};
    EXPECT_THROW(plan.validate(), std::invalid_argument);
    plan.eps_ladder = {0.1, 0.1, 0.05};
    EXPECT_THROW(plan.validate(), std::invalid_argument);
    plan.eps_ladder = {0.1, 0.05, 0.02};
    plan.mu_rule.kind = MuRule::Kind::sequence;
    plan.mu_rule.values = {1, 2};
    EXPECT_THROW(plan.validate(), std::invalid_argument);
    plan.mu_rule.values = {1, 2, 3};
    EXPECT_NO_THROW(plan.validate());
}

TEST(GammaLab, MuRules) {
    MuRule r;
    r.kind = MuRule::Kind::divergent;
    r.mu0 = 2.0;
    r.alpha = 1.0;
    EXPECT_DOUBLE_EQ(r.at(0, 0.5), 4.0);
    EXPECT_TRUE(r.limit_infinite());
}

TEST(GammaLab, EpsilonSweepGapDecays) {
    const auto W = make_quartic();
    const auto u0 = two_region_image(kSquare, 0.3, 0.7);
    SweepPlan plan = small_plan();
    plan.compute_clp = true;
    const auto rep = epsilon_sweep(u0, W, plan, {});
    ASSERT_EQ(rep.rows.size(), 3u);
    for (std::size_t k = 1; k < 3; ++k) {
        EXPECT_LT(std::abs(rep.rows[k].gap), std::abs(rep.rows[k - 1].gap));
        EXPECT_LT(rep.rows[k].l1_gap, rep.rows[k - 1].l1_gap);
    }
    EXPECT_LE(std::abs(rep.rows.back().gap), 0.1 * rep.rows.back().E_limit);
    EXPECT_GT(rep.rows[0].d_clp, rep.rows[1].d_clp);
    EXPECT_EQ(rep.rows.back().d_clp, 0.0);
    for (const auto& r : rep.rows) {
        EXPECT_TRUE(std::isfinite(r.E_at_norm));
        EXPECT_TRUE(std::isfinite(r.E_limit));
    }
}

TEST(GammaLab, ConstantImageNeedsNoInterface) {
    const auto W = make_quartic();
    const auto rep = epsilon_sweep(MultiField(kSquare, 1, 0.4), W, small_plan(), {});
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.E_limit, 0.0);
        EXPECT_LE(std::abs(r.gap), r.at.gl + 1e-12);
    }
}

TEST(GammaLab, SweepIsDeterministic) {
    const auto W = make_quartic();
    auto u0 = two_region_image(kSquare, 0.3, 0.7);
    add_uniform_noise(u0, 0.05, 1);
    const auto a = epsilon_sweep(u0, W, small_plan(), {});
    const auto b = epsilon_sweep(u0, W, small_plan(), {});
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].E_at_norm, b.rows[k].E_at_norm);
        EXPECT_EQ(a.states[k].v.values, b.states[k].v.values);
    }
}

TEST(GammaLab, ParallelColdLadderMatchesSerial) {
    const auto W = make_quartic();
    const auto u0 = two_region_image(kSquare, 0.3, 0.7);
    SweepPlan plan = small_plan();
    plan.warm_start = false;
    setenv("GAMMASEG_THREADS", "1", 1);
    const auto serial = epsilon_sweep(u0, W, plan, {});
    setenv("GAMMASEG_THREADS", "3", 1);
    const auto par = epsilon_sweep(u0, W, plan, {});
    unsetenv("GAMMASEG_THREADS");
    for (std::size_t k = 0; k < serial.rows.size(); ++k) EXPECT_EQ(serial.rows[k].E_at_norm, par.rows[k].E_at_norm);
}

TEST(GammaLab, ThreadCap) {
    setenv("GAMMASEG_THREADS", "2", 1);
    EXPECT_EQ(sweep_threads(8), 2u);
    EXPECT_EQ(sweep_threads(1), 1u);
    unsetenv("GAMMASEG_THREADS");
    EXPECT_GE(sweep_threads(4), 1u);
}

TEST(GammaLab, WarmStartDoesNotRaiseEnergy) {
    // piecewise-constant mode: the constants are exact, so the solver
    // converges far below the differences being compared
    const auto W = make_quartic();
    const auto u0 = two_region_image(kSquare, 0.3, 0.7);
    SolverConfig cfg;
    cfg.mode = SolverMode::piecewise_constant;
    SweepPlan plan = small_plan();
    const auto warm = epsilon_sweep(u0, W, plan, cfg);
    plan.warm_start = false;
    const auto cold = epsilon_sweep(u0, W, plan, cfg);
    for (std::size_t k = 0; k < plan.eps_ladder.size(); ++k) {
        EnergyParams prm;
        prm.nu = plan.nu;
        prm.mu = 0.0;
        prm.eps = plan.eps_ladder[k];
        prm.normalized = false;
        const double w = at_energy(warm.states[k], u0, W, prm).total;
        const double c = at_energy(cold.states[k], u0, W, prm).total;
        EXPECT_LE(w, c) << k;
    }
}

TEST(GammaLab, MuSweepTracksDataForSmallMu) {
    const auto W = make_quartic();
    const auto u0 = shaded_two_region_image(kSquare, 0.3, 0.7, 0.2);
    const auto rows = mu_sweep(u0, W, {0.01, 1.0, 100.0}, 0.05, 0.1, 2.0, {});
    const auto E = threshold_half(rows[0].state.v);
    double m = 0, n = 0, s = 0;
    for (std::size_t k = 0; k < kSquare.size(); ++k)
        if (E[k]) {
            m += u0.values[k];
            n += 1;
        }
    m /= n;
    for (std::size_t k = 0; k < kSquare.size(); ++k)
        if (E[k]) s += (u0.values[k] - m) * (u0.values[k] - m);
    s = std::sqrt(s / n);
    EXPECT_NEAR(rows[0].std1 / s, 1.0, 0.1);
    EXPECT_GT(rows[0].std1, rows[1].std1);
    EXPECT_GT(rows[1].std1, rows[2].std1);
}

TEST(GammaLab, MuSweepOracleAtHugeMu) {
    // at very large mu the fields are the weighted means of u0
    const auto u0 = shaded_two_region_image(kSquare, 0.3, 0.7, 0.2);
    const auto E = IndicatorField::from_predicate(kSquare, [](Vec2 x) { return x.x >= 0.5; });
    EnergyParams prm;
    prm.mu = 1e6;
    prm.normalized = false;
    const auto f = fit_smooth_fields(E.as_scalar(), u0, prm, {});
    const auto c = fit_constants(E.as_scalar(), u0, 2.0);
    for (std::size_t k = 0; k < kSquare.size(); ++k)
        if (E[k]) {
            EXPECT_NEAR(f.c1.values[k], c.c1[0], 1e-4);
        }
}

TEST(GammaLab, PiecewiseConstantLadder) {
    const auto W = make_quartic();
    auto u0 = two_region_image(kSquare, 0.3, 0.7);
    const double amp = 0.05;
    add_uniform_noise(u0, amp, 4);
    const auto rows = pc_gamma_check(u0, W, small_plan(), {});
    for (std::size_t k = 1; k < rows.size(); ++k) {
        EXPECT_LT(rows[k].gap, rows[k - 1].gap);
        EXPECT_LT(rows[k].dc, rows[k - 1].dc);
    }
    // refit constants of the finest segmentation average the noise away
    const double sigma = amp / std::sqrt(3.0);
    const double tol = 2 * sigma / std::sqrt(kSquare.size() / 2.0);
    EXPECT_NEAR(rows.back().c1_limit[0], 0.7, tol);
    EXPECT_NEAR(rows.back().c2_limit[0], 0.3, tol);
}

TEST(GammaLab, LargerNuShortensTheInterface) {
    const auto W = make_quartic();
    const Grid pixels(48, 48, 1.0, 1.0);
    auto u0 = textured_image(pixels, 0.2, 0.8, 3, 0.15, 11);
    add_uniform_noise(u0, 0.05, 3);
    SolverConfig cfg;
    cfg.mode = SolverMode::piecewise_constant;
    double tv[2];
    for (int k = 0; k < 2; ++k) {
        EnergyParams prm;
        prm.nu = k == 0 ? 0.2 : 0.6;
        prm.eps = 1.0;
        tv[k] = tv_isotropic(minimize(u0, W, prm, cfg).state.v);
    }
    EXPECT_LT(tv[1], tv[0]);
}

TEST(GammaLab, MinkowskiStudy) {
    const auto D = IndicatorField::from_predicate(Grid::unit_square(512), [](Vec2 x) {
        return std::hypot(x.x - 0.5, x.y - 0.5) < 0.25;
    });
    const auto rows = minkowski_study(D, {0.1, 0.05, 0.025});
    const double P = 2 * std::numbers::pi * 0.25;
    const double tol[] = {0.08, 0.05, 0.03};
    for (int k = 0; k < 3; ++k) EXPECT_LT(std::abs(rows[k].ratio - P) / P, tol[k]) << rows[k].a;

    const auto H = IndicatorField::from_predicate(Grid::unit_square(128), [](Vec2 x) { return x.x < 0.5; });
    for (const auto& r : minkowski_study(H, {0.3, 0.1, 0.02})) {
        EXPECT_NEAR(r.volume, 2 * r.a, 1e-12);
        EXPECT_NEAR(r.deviation, 0.0, 1e-11);
    }
    EXPECT_THROW(minkowski_study(H, {0.001}), std::invalid_argument);
}

TEST(GammaLab, SyntheticImages) {
    const auto u = two_region_image(kSquare, 0.2, 0.9);
    EXPECT_EQ(u.values.front(), 0.2);
    EXPECT_EQ(u.values.back(), 0.9);
    auto n = u;
    add_uniform_noise(n, 0.05, 1);
    double worst = 0;
    for (std::size_t k = 0; k < u.values.size(); ++k) worst = std::max(worst, std::abs(n.values[k] - u.values[k]));
    EXPECT_LE(worst, 0.05);
    EXPECT_GT(worst, 0.04);
}
