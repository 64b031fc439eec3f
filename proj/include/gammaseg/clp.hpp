#pragma once

// The CL^p distance between segmentation states and its equivalence
// relation.

#include <cmath>
#include <cstdint>

#include "gammaseg/energy.hpp"
#include "gammaseg/transport.hpp"

namespace gammaseg {

inline PairedSample paired_sample(const DiscreteMeasure& lam, const MultiField& c) {
    return PairedSample(lam, c.channels, c.values);
}

struct ClpResult {
    double distance = 0.0;
    TransportResult first;   // (lambda_v, c1) part
    TransportResult second;  // (lambda_{1-v}, c2) part
    bool approximate = false;
};

namespace detail {

/// TL^p term between two possibly-degenerate measures: zero when both are
/// the zero measure, undefined when exactly one is.
inline TransportResult clp_term(const DiscreteMeasure& a, const MultiField& ca, const DiscreteMeasure& b,
                                const MultiField& cb, double p, const TransportOptions& opt) {
    if (a.zero_flag && b.zero_flag) return {};
    if (a.zero_flag || b.zero_flag)
        throw ZeroMeasureError("clp_distance: one state has a zero measure where the other does not");
    return tlp_distance(paired_sample(a, ca), paired_sample(b, cb), p, opt);
}

} // namespace detail

inline ClpResult clp_distance_full(const SegmentationState& s, const SegmentationState& t, double p,
                                   const TransportOptions& opt = {}) {
    if (s.c1.channels != t.c1.channels) throw ShapeMismatch("clp_distance: channel counts differ");
    const Measures ms = measures_from(s.v);
    const Measures mt = measures_from(t.v);
    ClpResult r;
    r.first = detail::clp_term(ms.lam_v, s.c1, mt.lam_v, t.c1, p, opt);
    r.second = detail::clp_term(ms.lam_1mv, s.c2, mt.lam_1mv, t.c2, p, opt);
    r.distance = r.first.distance + r.second.distance;
    r.approximate = r.first.approximate || r.second.approximate;
    return r;
}

/// d_TL^p((lambda_v, c1), (lambda_v~, c1~)) + d_TL^p((lambda_{1-v}, c2), (lambda_{1-v~}, c2~))
inline double clp_distance(const SegmentationState& s, const SegmentationState& t, double p,
                           const TransportOptions& opt = {}) {
    return clp_distance_full(s, t, p, opt).distance;
}

inline constexpr double kEquivTol = 1e-9;

namespace detail {

inline bool all_near(const ScalarField& v, double target) {
    for (double x : v.values)
        if (std::abs(x - target) > kEquivTol) return false;
    return true;
}

/// c == c~ on every cell where the weight is positive.
inline bool equal_on_support(const MultiField& c, const MultiField& d, const DiscreteMeasure& lam) {
    if (lam.zero_flag) return true;
    for (std::size_t k = 0; k < lam.size(); ++k) {
        if (lam.weights[k] <= 0.0) continue;
        for (int ch = 0; ch < c.channels; ++ch)
            if (std::abs(c.at(k, ch) - d.at(k, ch)) > kEquivTol) return false;
    }
    return true;
}

inline bool same_density(const DiscreteMeasure& a, const DiscreteMeasure& b, double area) {
    if (a.zero_flag != b.zero_flag) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (std::abs(a.weights[k] - b.weights[k]) / area > kEquivTol) return false;
    return true;
}

} // namespace detail

/// Three-branch equivalence: both v vanish, both v are identically one, or
/// the normalized measures agree; in each branch the fields must agree
/// almost everywhere for the corresponding measure.
inline bool clp_equivalent(const SegmentationState& s, const SegmentationState& t) {
    require_same_grid(s.grid(), t.grid(), "clp_equivalent");
    if (s.c1.channels != t.c1.channels) return false;
    const Measures ms = measures_from(s.v);
    const Measures mt = measures_from(t.v);
    const bool s_zero = detail::all_near(s.v, 0.0);
    const bool t_zero = detail::all_near(t.v, 0.0);
    const bool s_one = detail::all_near(s.v, 1.0);
    const bool t_one = detail::all_near(t.v, 1.0);
    if (s_zero || t_zero) {
        return s_zero && t_zero && detail::equal_on_support(s.c1, t.c1, ms.lam_v) &&
               detail::equal_on_support(s.c2, t.c2, ms.lam_1mv);
    }
    if (s_one || t_one) {
        return s_one && t_one && detail::equal_on_support(s.c1, t.c1, ms.lam_v) &&
               detail::equal_on_support(s.c2, t.c2, ms.lam_1mv);
    }
    const double area = s.grid().cell_area();
    return detail::same_density(ms.lam_v, mt.lam_v, area) && detail::same_density(ms.lam_1mv, mt.lam_1mv, area) &&
           detail::equal_on_support(s.c1, t.c1, ms.lam_v) && detail::equal_on_support(s.c2, t.c2, ms.lam_1mv);
}

} // namespace gammaseg
