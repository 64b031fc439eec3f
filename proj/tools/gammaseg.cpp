// gammaseg: command-line front end for segmentation runs and the
// Gamma-convergence experiments.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gammaseg/gammaseg.hpp"

namespace fs = std::filesystem;
using namespace gammaseg;

namespace {

struct ImageArgs {
    std::string input;
    std::string synthetic = "two-region";
    int size = 64;
    double low = 0.35;
    double high = 0.65;
    double slope = 0.2;
    double noise = 0.05;
    std::uint64_t noise_seed = 7;
};

struct Common {
    std::string out = ".";
    std::string well = "quartic";
    double p = 2.0;
    double nu = 0.1;
    double mu = 1.0;
    bool mu_inf = false;
    std::uint64_t seed = 0;
    int max_outer = 2000;
    double tol = 1e-9;
};

void add_image_flags(CLI::App* app, ImageArgs& a) {
    app->add_option("--input", a.input, "binary PGM (P5) or PPM (P6) image, maxval 255; overrides --synthetic")
        ->check(CLI::ExistingFile);
    app->add_option("--synthetic", a.synthetic, "generated image when no --input: two-region | shaded | textured")
        ->check(CLI::IsMember({"two-region", "shaded", "textured"}));
    app->add_option("--size", a.size, "side of the generated square image in cells (int >= 8)")
        ->check(CLI::Range(8, 4096));
    app->add_option("--low", a.low, "generated low intensity (real)");
    app->add_option("--high", a.high, "generated high intensity (real)");
    app->add_option("--slope", a.slope, "linear shading slope of the shaded image (real)");
    app->add_option("--noise", a.noise, "uniform noise amplitude (real >= 0)")->check(CLI::NonNegativeNumber);
    app->add_option("--noise-seed", a.noise_seed, "noise generator seed (uint64)");
}

void add_common_flags(CLI::App* app, Common& c) {
    app->add_option("--out", c.out, "output directory (must be writable; created if missing)");
    app->add_option("--well", c.well, "double-well potential: quartic | sine")
        ->check(CLI::IsMember({"quartic", "sine"}));
    app->add_option("--p", c.p, "data and gradient exponent (real in (1, inf))");
    app->add_option("--nu", c.nu, "interface weight (real > 0)");
    app->add_option("--mu", c.mu, "gradient weight on the fields (real >= 0)");
    app->add_flag("--mu-inf", c.mu_inf, "take mu = infinity (fields forced constant)");
    app->add_option("--seed", c.seed, "initialization seed (uint64)");
    app->add_option("--max-outer", c.max_outer, "outer alternation limit (int >= 1)");
    app->add_option("--tol", c.tol, "relative energy-decrease stopping tolerance (real > 0)");
}

MultiField make_image(const ImageArgs& a) {
    if (!a.input.empty()) return load_image(a.input);
    const Grid g = Grid::unit_square(a.size);
    MultiField u;
    if (a.synthetic == "two-region")
        u = two_region_image(g, a.low, a.high);
    else if (a.synthetic == "shaded")
        u = shaded_two_region_image(g, a.low, a.high, a.slope);
    else
        u = textured_image(g, a.low, a.high, 3, 0.15, a.noise_seed);
    if (a.noise > 0.0) add_uniform_noise(u, a.noise, a.noise_seed);
    return u;
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("output directory not writable: " + dir);
    return fs::path(dir);
}

std::ofstream open_csv(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

std::string num(double x) { return detail::shortest(x); }

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + num(v[k]);
    return s;
}

SolverConfig solver_config(const Common& c) {
    SolverConfig cfg;
    cfg.seed = c.seed;
    cfg.max_outer = c.max_outer;
    cfg.tol = c.tol;
    cfg.validate();
    return cfg;
}

std::vector<double> ladder_or(const std::vector<double>& given, std::vector<double> fallback) {
    return given.empty() ? fallback : given;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phase-field two-region segmentation and Gamma-convergence experiments"};
    app.require_subcommand(1);

    ImageArgs img;
    Common com;

    // segment
    auto* seg = app.add_subcommand("segment", "minimize the phase-field energy at one eps; writes mask.pgm and energy.csv");
    add_image_flags(seg, img);
    add_common_flags(seg, com);
    double seg_eps = 0.025;
    std::string seg_mode = "smooth";
    seg->add_option("--eps", seg_eps, "interface width (real > 0)");
    seg->add_option("--mode", seg_mode, "smooth | pc (piecewise-constant fields)")->check(CLI::IsMember({"smooth", "pc"}));
    bool seg_try_constant = false;
    seg->add_flag("--try-constant", seg_try_constant,
                  "also compare with the interface-free states v = 0, v = 1 and keep the lower energy");

    // sweep
    auto* sw = app.add_subcommand("sweep", "eps ladder with Gamma-gap report; writes report.csv and mask_<k>.pgm");
    add_image_flags(sw, img);
    add_common_flags(sw, com);
    std::vector<double> sw_eps;
    std::string mu_rule = "fixed";
    double mu_alpha = 1.0;
    bool sw_clp = false;
    bool sw_cold = false;
    std::size_t exact_limit = 4096;
    sw->add_option("--eps", sw_eps, "strictly decreasing eps ladder, >= 3 values > 0 (default 0.1 0.05 0.025 0.0125)");
    sw->add_option("--mu-rule", mu_rule, "fixed | divergent (mu_eps = mu / eps^alpha)")
        ->check(CLI::IsMember({"fixed", "divergent"}));
    sw->add_option("--mu-alpha", mu_alpha, "exponent of the divergent mu rule (real > 0)");
    sw->add_flag("--clp", sw_clp, "also compute the CL^p distance to the limit state");
    sw->add_flag("--cold", sw_cold, "independent ladder points (parallel) instead of warm starts");
    sw->add_option("--exact-limit", exact_limit, "largest support for exact transport (int >= 1)");

    // pc-check
    auto* pc = app.add_subcommand("pc-check", "piecewise-constant eps ladder; writes pc.csv");
    add_image_flags(pc, img);
    add_common_flags(pc, com);
    std::vector<double> pc_eps;
    pc->add_option("--eps", pc_eps, "strictly decreasing eps ladder, >= 3 values > 0 (default 0.1 0.05 0.025 0.0125)");

    // mm1d
    auto* mm = app.add_subcommand("mm1d", "1D interface energy against c_W; writes mm1d.csv");
    std::string mm_well = "quartic";
    std::vector<double> mm_eps;
    int mm_cells = 4096;
    int mm_interfaces = 1;
    std::string mm_out = ".";
    mm->add_option("--well", mm_well, "double-well potential: quartic | sine")->check(CLI::IsMember({"quartic", "sine"}));
    mm->add_option("--eps", mm_eps, "eps ladder, values > 0 (default 0.05 0.02 0.01)");
    mm->add_option("--cells", mm_cells, "cells on [0,1] (int >= 1024)")->check(CLI::Range(1024, 1 << 22));
    mm->add_option("--interfaces", mm_interfaces, "1 or 2 interfaces")->check(CLI::IsMember({1, 2}));
    mm->add_option("--out", mm_out, "output directory (must be writable; created if missing)");

    // minkowski
    auto* mk = app.add_subcommand("minkowski", "Minkowski content of a set; writes minkowski.csv");
    std::string mk_input;
    int mk_size = 512;
    double mk_radius = 0.25;
    std::vector<double> mk_a;
    std::string mk_out = ".";
    mk->add_option("--input", mk_input, "P5 mask (thresholded at 1/2); default is a centered disc")->check(CLI::ExistingFile);
    mk->add_option("--size", mk_size, "disc image side in cells (int >= 8)")->check(CLI::Range(8, 8192));
    mk->add_option("--radius", mk_radius, "disc radius (real in (0, 0.5))")->check(CLI::Range(0.0, 0.5));
    mk->add_option("--a", mk_a, "tube radii, each larger than the cell width (default 0.1 0.05 0.025)");
    mk->add_option("--out", mk_out, "output directory (must be writable; created if missing)");

    // transport-dist
    auto* td = app.add_subcommand("transport-dist", "TL^p distance between two images read as (density, intensity) pairs");
    std::string td_a, td_b;
    double td_p = 2.0;
    std::size_t td_limit = 4096;
    bool td_no_fallback = false;
    td->add_option("--a", td_a, "first P5/P6 image")->required()->check(CLI::ExistingFile);
    td->add_option("--b", td_b, "second P5/P6 image with the same channel count")->required()->check(CLI::ExistingFile);
    td->add_option("--p", td_p, "transport exponent (real >= 1)");
    td->add_option("--exact-limit", td_limit, "largest support for exact transport (int >= 1)");
    td->add_flag("--no-fallback", td_no_fallback, "fail instead of using the entropic approximation on large supports");

    // check-potential
    auto* cp = app.add_subcommand("check-potential", "validate a double well and print c_W");
    std::string cp_well = "quartic";
    double cp_scale = 1.0;
    int cp_samples = 2001;
    cp->add_option("--well", cp_well, "double-well potential: quartic | sine")->check(CLI::IsMember({"quartic", "sine"}));
    cp->add_option("--scale", cp_scale, "multiply the well by this factor (real > 0)");
    cp->add_option("--samples", cp_samples, "sample count for the growth check (int >= 100)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*seg) {
            const MultiField u0 = make_image(img);
            const DoubleWell W = well_by_name(com.well);
            EnergyParams prm;
            prm.p = com.p;
            prm.nu = com.nu;
            prm.mu = com.mu;
            prm.mu_infinite = com.mu_inf;
            prm.eps = seg_eps;
            prm.validate();
            SolverConfig cfg = solver_config(com);
            cfg.mode = seg_mode == "pc" ? SolverMode::piecewise_constant : SolverMode::smooth;
            cfg.try_constant_states = seg_try_constant;
            const auto dir = prepare_out(com.out);
            const auto res = minimize(u0, W, prm, cfg);
            const IndicatorField E = threshold_half(res.state.v);
            save_mask(E, (dir / "mask.pgm").string());
            auto out = open_csv(dir / "energy.csv");
            out << "eps,iterations,converged,tv_v,c1_mean,c2_mean\n";
            const auto fit = fit_constants(res.state.v, u0, prm.p);
            out << num(prm.eps) << ',' << res.iterations << ',' << (res.converged ? 1 : 0) << ','
                << num(tv_isotropic(res.state.v)) << ',' << join(fit.c1) << ',' << join(fit.c2) << '\n';
            std::cout << "segment: " << res.iterations << " iterations, converged=" << res.converged
                      << ", TV(v)=" << num(tv_isotropic(res.state.v)) << '\n';
        } else if (*sw) {
            const MultiField u0 = make_image(img);
            const DoubleWell W = well_by_name(com.well);
            SweepPlan plan;
            plan.eps_ladder = ladder_or(sw_eps, {0.1, 0.05, 0.025, 0.0125});
            plan.mu_rule.mu0 = com.mu;
            plan.mu_rule.kind = mu_rule == "divergent" ? MuRule::Kind::divergent : MuRule::Kind::fixed;
            plan.mu_rule.alpha = mu_alpha;
            plan.nu = com.nu;
            plan.p = com.p;
            plan.seeds = {com.seed};
            plan.warm_start = !sw_cold;
            plan.compute_clp = sw_clp;
            plan.transport.exact_limit = exact_limit;
            plan.validate();
            const auto dir = prepare_out(com.out);
            const auto rep = epsilon_sweep(u0, W, plan, solver_config(com));
            write_report(rep, (dir / "report.csv").string());
            for (std::size_t k = 0; k < rep.states.size(); ++k)
                save_mask(threshold_half(rep.states[k].v), (dir / ("mask_" + std::to_string(k) + ".pgm")).string());
            std::cout << "sweep: " << rep.rows.size() << " ladder points written to " << (dir / "report.csv").string()
                      << '\n';
        } else if (*pc) {
            const MultiField u0 = make_image(img);
            const DoubleWell W = well_by_name(com.well);
            SweepPlan plan;
            plan.eps_ladder = ladder_or(pc_eps, {0.1, 0.05, 0.025, 0.0125});
            plan.nu = com.nu;
            plan.p = com.p;
            plan.seeds = {com.seed};
            plan.compute_clp = false;
            plan.validate();
            const auto dir = prepare_out(com.out);
            const auto rows = pc_gamma_check(u0, W, plan, solver_config(com));
            auto out = open_csv(dir / "pc.csv");
            out << "eps,E_eps,E_limit,gap,dc,tv_v,c1,c2,c1_limit,c2_limit\n";
            for (const auto& r : rows)
                out << num(r.eps) << ',' << num(r.E_eps) << ',' << num(r.E_limit) << ',' << num(r.gap) << ','
                    << num(r.dc) << ',' << num(r.tv_v) << ',' << join(r.c1) << ',' << join(r.c2) << ','
                    << join(r.c1_limit) << ',' << join(r.c2_limit) << '\n';
            std::cout << "pc-check: " << rows.size() << " ladder points\n";
        } else if (*mm) {
            const DoubleWell W = well_by_name(mm_well);
            MMOptions opt;
            opt.interfaces = mm_interfaces;
            const auto rows = modica_mortola_1d(W, ladder_or(mm_eps, {0.05, 0.02, 0.01}), mm_cells, opt);
            const auto dir = prepare_out(mm_out);
            auto out = open_csv(dir / "mm1d.csv");
            out << "eps,gl,ratio,steps\n";
            for (const auto& r : rows) {
                out << num(r.eps) << ',' << num(r.gl) << ',' << num(r.ratio) << ',' << r.steps << '\n';
                std::cout << "eps=" << num(r.eps) << " ratio=" << num(r.ratio) << '\n';
            }
        } else if (*mk) {
            IndicatorField E;
            if (!mk_input.empty()) {
                E = threshold_half(load_image(mk_input).channel(0));
            } else {
                const Grid g = Grid::unit_square(mk_size);
                const double r = mk_radius;
                E = IndicatorField::from_predicate(g, [r](Vec2 x) { return std::hypot(x.x - 0.5, x.y - 0.5) < r; });
            }
            const auto rows = minkowski_study(E, ladder_or(mk_a, {0.1, 0.05, 0.025}));
            const auto dir = prepare_out(mk_out);
            auto out = open_csv(dir / "minkowski.csv");
            out << "a,volume,ratio,perimeter,deviation\n";
            for (const auto& r : rows) {
                out << num(r.a) << ',' << num(r.volume) << ',' << num(r.ratio) << ',' << num(r.perimeter) << ','
                    << num(r.deviation) << '\n';
                std::cout << "a=" << num(r.a) << " volume/(2a)=" << num(r.ratio) << '\n';
            }
        } else if (*td) {
            const MultiField fa = load_image(td_a);
            const MultiField fb = load_image(td_b);
            if (fa.channels != fb.channels) throw ShapeMismatch("transport-dist: channel counts differ");
            auto sample = [](const MultiField& f) {
                std::vector<double> dens(f.grid.size(), 0.0);
                for (std::size_t k = 0; k < dens.size(); ++k)
                    for (int ch = 0; ch < f.channels; ++ch) dens[k] += f.at(k, ch);
                return PairedSample(DiscreteMeasure::from_density(f.grid, dens), f.channels, f.values);
            };
            TransportOptions opt;
            opt.exact_limit = td_limit;
            opt.allow_fallback = !td_no_fallback;
            const auto r = tlp_distance(sample(fa), sample(fb), td_p, opt);
            std::cout << num(r.distance) << (r.approximate ? " (approximate)" : "") << '\n';
        } else if (*cp) {
            if (!(cp_scale > 0.0)) throw std::invalid_argument("check-potential: --scale must be > 0");
            DoubleWell W = well_by_name(cp_well);
            if (cp_scale != 1.0) W = scaled(W, cp_scale);
            const auto rep = check_assumption(W, cp_samples);
            if (!rep.ok) throw AssumptionViolation(rep.violation, rep.t);
            std::cout << W.name << ": c_W=" << num(W.cw) << " L=" << num(W.L) << " T=" << num(W.T) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "gammaseg: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
