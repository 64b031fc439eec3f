#pragma once

// Double-well potentials W >= 0 with W = 0 exactly on {0, 1}, linear growth
// at infinity, and the interface constant c_W = 2 * int_0^1 sqrt(W).

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gammaseg/errors.hpp"

namespace gammaseg {

struct DoubleWell {
    std::string name;
    std::function<double(double)> eval;
    std::function<double(double)> deriv;
    double L = 1.0;  // growth certificate: W(t) >= L|t| for |t| >= T
    double T = 2.0;
    double cw = 0.0;
    double curvature = 0.0;  // sup |W''| on [0, 1], sampled
    /// Closed-form solution of q' = sqrt(W(q)), q(0) = 1/2, when one is known.
    std::function<double(double)> profile;

    double operator()(double t) const { return eval(t); }
};

namespace detail {

struct SimpsonCtx {
    const std::function<double(double)>* f;
    int max_depth;
};

inline double simpson_rec(const SimpsonCtx& ctx, double a, double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = (*ctx.f)(lm);
    const double frm = (*ctx.f)(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol && depth >= 4) return left + right + delta / 15.0;
    if (depth >= ctx.max_depth)
        throw QuadratureError("adaptive Simpson: subdivision limit reached on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "]");
    return simpson_rec(ctx, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           simpson_rec(ctx, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

} // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int max_depth = 48) {
    if (!(tol > 0.0)) throw std::invalid_argument("adaptive_simpson: tol must be positive");
    detail::SimpsonCtx ctx{&f, max_depth};
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_rec(ctx, a, b, fa, fm, fb, whole, tol, 0);
}

/// c_W = 2 * int_0^1 sqrt(W), split at the wells and the midpoint where
/// sqrt(W) has kinks.
inline double compute_cw(const DoubleWell& W, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("compute_cw: tol must be positive");
    const std::function<double(double)> root = [&W](double t) { return std::sqrt(std::max(W.eval(t), 0.0)); };
    // the factor 2 doubles the error, and there are two pieces
    const double piece_tol = 0.25 * tol;
    const double cw = 2.0 * (adaptive_simpson(root, 0.0, 0.5, piece_tol) + adaptive_simpson(root, 0.5, 1.0, piece_tol));
    if (!(cw > 0.0)) throw QuadratureError("compute_cw: well constant is not positive");
    return cw;
}

inline constexpr double kCwTol = 1e-12;

/// General well; c_W is computed on construction.
inline DoubleWell make_well(std::string name, std::function<double(double)> eval,
                            std::function<double(double)> deriv, double L, double T) {
    if (!(L > 0.0) || !(T > 0.0)) throw std::invalid_argument("make_well: growth certificate must be positive");
    DoubleWell w{std::move(name), std::move(eval), std::move(deriv), L, T, 0.0, 0.0, {}};
    w.cw = compute_cw(w, kCwTol);
    constexpr int n = 4096;
    for (int k = 0; k < n; ++k)
        w.curvature = std::max(w.curvature, std::abs(w.deriv((k + 1.0) / n) - w.deriv(static_cast<double>(k) / n)) * n);
    return w;
}

/// W(t) = t^2 (t-1)^2.
inline DoubleWell make_quartic() {
    DoubleWell w = make_well(
        "quartic", [](double t) { return t * t * (t - 1.0) * (t - 1.0); },
        [](double t) { return 2.0 * t * (t - 1.0) * (2.0 * t - 1.0); }, 1.0, 2.0);
    w.profile = [](double s) { return 1.0 / (1.0 + std::exp(-s)); };
    return w;
}

/// W(t) = sin^2(pi t)/4 on [0,1], continued by its osculating parabolas
/// pi^2 t^2/4 and pi^2 (t-1)^2/4 outside so the wells stay isolated and W
/// grows at infinity.
inline DoubleWell make_sine() {
    constexpr double pi = std::numbers::pi;
    DoubleWell w = make_well(
        "sine",
        [](double t) {
            if (t < 0.0) return 0.25 * pi * pi * t * t;
            if (t > 1.0) return 0.25 * pi * pi * (t - 1.0) * (t - 1.0);
            const double s = std::sin(pi * t);
            return 0.25 * s * s;
        },
        [](double t) {
            if (t < 0.0) return 0.5 * pi * pi * t;
            if (t > 1.0) return 0.5 * pi * pi * (t - 1.0);
            return 0.25 * pi * std::sin(2.0 * pi * t);
        },
        1.0, 2.0);
    // q' = sin(pi q)/2  =>  tan(pi q / 2) = e^{pi s / 2}
    w.profile = [](double s) { return 2.0 / pi * std::atan(std::exp(0.5 * pi * s)); };
    return w;
}

/// alpha * W, alpha > 0.
inline DoubleWell scaled(const DoubleWell& W, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("scaled: factor must be positive");
    DoubleWell s = make_well(
        W.name + "*" + std::to_string(alpha), [f = W.eval, alpha](double t) { return alpha * f(t); },
        [d = W.deriv, alpha](double t) { return alpha * d(t); }, alpha * W.L, W.T);
    return s;
}

/// Selects a built-in well by its CLI name.
inline DoubleWell well_by_name(const std::string& name) {
    if (name == "quartic") return make_quartic();
    if (name == "sine") return make_sine();
    throw std::invalid_argument("unknown well '" + name + "' (expected quartic or sine)");
}

struct AssumptionReport {
    bool ok = true;
    std::string violation;  // empty when ok
    double t = 0.0;         // first offending sample
    int samples = 0;
};

/// Samples W on [-2T, 2T] (plus the wells themselves) and reports the first
/// violation of: W >= 0, W = 0 only at 0 and 1, W(t) >= L|t| for |t| >= T.
inline AssumptionReport check_assumption(const DoubleWell& W, int samples) {
    if (samples < 100) throw std::invalid_argument("validate_assumption: need at least 100 samples");
    constexpr double zero_tol = 1e-12;
    AssumptionReport rep;
    rep.samples = samples;
    auto fail = [&rep](std::string why, double t) {
        rep.ok = false;
        rep.violation = std::move(why);
        rep.t = t;
        return rep;
    };
    if (std::abs(W.eval(0.0)) > zero_tol) return fail("W(0) != 0", 0.0);
    if (std::abs(W.eval(1.0)) > zero_tol) return fail("W(1) != 0", 1.0);
    const double lo = -2.0 * W.T;
    const double hi = 2.0 * W.T;
    const double step = (hi - lo) / (samples - 1);
    for (int k = 0; k < samples; ++k) {
        const double t = lo + k * step;
        const double w = W.eval(t);
        if (!std::isfinite(w)) return fail("W is not finite", t);
        if (w < 0.0) return fail("W is negative", t);
        const double to_well = std::min(std::abs(t), std::abs(t - 1.0));
        if (w <= zero_tol && to_well > 1e-6) return fail("W vanishes away from {0,1}", t);
        if (std::abs(t) >= W.T && w < W.L * std::abs(t)) return fail("growth bound W(t) >= L|t| fails", t);
    }
    return rep;
}

inline AssumptionReport validate_assumption(const DoubleWell& W, int samples) {
    auto rep = check_assumption(W, samples);
    if (!rep.ok) throw AssumptionViolation("well '" + W.name + "': " + rep.violation, rep.t);
    return rep;
}

/// The optimal interface profile q with q' = sqrt(W(q)), q(0) = 1/2; falls
/// back to an RK4 table when no closed form is attached to the well.
inline std::function<double(double)> optimal_profile(const DoubleWell& W) {
    if (W.profile) return W.profile;
    constexpr double ds = 1e-3;
    constexpr int n = 40000;  // s in [-40, 40]
    auto table = std::make_shared<std::vector<double>>(2 * n + 1);
    auto rhs = [&W](double q) { return std::sqrt(std::max(W.eval(q), 0.0)); };
    auto integrate = [&](double dir) {
        double q = 0.5;
        (*table)[n] = q;
        for (int k = 1; k <= n; ++k) {
            const double k1 = rhs(q);
            const double k2 = rhs(q + 0.5 * dir * ds * k1);
            const double k3 = rhs(q + 0.5 * dir * ds * k2);
            const double k4 = rhs(q + dir * ds * k3);
            q = std::clamp(q + dir * ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0, 1.0);
            (*table)[n + static_cast<int>(dir) * k] = q;
        }
    };
    integrate(1.0);
    integrate(-1.0);
    return [table](double s) {
        const double x = s / ds + n;
        if (x <= 0.0) return table->front();
        if (x >= 2.0 * n) return table->back();
        const int i = static_cast<int>(x);
        const double t = x - i;
        return (1.0 - t) * (*table)[i] + t * (*table)[i + 1];
    };
}

} // namespace gammaseg
