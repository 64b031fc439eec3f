#pragma once

// Discrete optimal transport between grid-supported probability measures:
// an exact transportation simplex for the TL^p distance, an entropic
// fallback for large supports, push-forwards and plan diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gammaseg/errors.hpp"
#include "gammaseg/grid.hpp"

namespace gammaseg {

struct DiscreteMeasure {
    std::vector<Vec2> points;
    std::vector<double> weights;
    bool zero_flag = false;

    DiscreteMeasure() = default;
    DiscreteMeasure(std::vector<Vec2> pts, std::vector<double> w, bool zero = false)
        : points(std::move(pts)), weights(std::move(w)), zero_flag(zero) {
        if (points.size() != weights.size())
            throw ShapeMismatch("DiscreteMeasure: point and weight counts differ");
        double total = 0.0;
        for (double x : weights) {
            if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("DiscreteMeasure: negative weight");
            total += x;
        }
        if (!zero_flag && std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("DiscreteMeasure: weights must sum to 1, got " + std::to_string(total));
        if (zero_flag && total != 0.0) throw std::invalid_argument("DiscreteMeasure: zero measure carries mass");
    }

    static DiscreteMeasure zero(std::vector<Vec2> pts) {
        std::vector<double> w(pts.size(), 0.0);
        return DiscreteMeasure(std::move(pts), std::move(w), true);
    }

    /// Normalizes a nonnegative density sampled at the cell centers of g;
    /// the zero measure when the density integrates to 0.
    static DiscreteMeasure from_density(const Grid& g, std::span<const double> density) {
        if (density.size() != g.size()) throw ShapeMismatch("from_density: density size does not match grid");
        std::vector<Vec2> pts(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) pts[k] = g.center(k);
        double total = 0.0;
        for (double d : density) {
            if (!(d >= 0.0)) throw std::invalid_argument("from_density: negative density");
            total += d;
        }
        if (total == 0.0) return zero(std::move(pts));
        std::vector<double> w(density.begin(), density.end());
        for (double& x : w) x /= total;
        // absorb the rounding residue so the invariant holds to the last bit
        const double resid = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
        *std::max_element(w.begin(), w.end()) += resid;
        return DiscreteMeasure(std::move(pts), std::move(w));
    }

    std::size_t size() const { return points.size(); }
    double mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

/// Sparse transport plan with the support coordinates of both marginals.
struct Coupling {
    struct Entry {
        std::size_t i;
        std::size_t j;
        double mass;
    };
    std::vector<Vec2> source;
    std::vector<Vec2> target;
    std::vector<Entry> entries;

    std::vector<double> row_sums() const {
        std::vector<double> r(source.size(), 0.0);
        for (const Entry& e : entries) r[e.i] += e.mass;
        return r;
    }
    std::vector<double> col_sums() const {
        std::vector<double> c(target.size(), 0.0);
        for (const Entry& e : entries) c[e.j] += e.mass;
        return c;
    }
    /// Largest marginal violation against the given weights.
    double marginal_error(std::span<const double> a, std::span<const double> b) const {
        const auto r = row_sums();
        const auto c = col_sums();
        double err = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) err = std::max(err, std::abs(r[k] - a[k]));
        for (std::size_t k = 0; k < c.size(); ++k) err = std::max(err, std::abs(c[k] - b[k]));
        return err;
    }
};

/// A measure together with an m-vector per support point.
struct PairedSample {
    DiscreteMeasure measure;
    int dim = 1;
    std::vector<double> values;

    PairedSample() = default;
    PairedSample(DiscreteMeasure m, int d, std::vector<double> vals)
        : measure(std::move(m)), dim(d), values(std::move(vals)) {
        if (dim < 1) throw std::invalid_argument("PairedSample: dim must be >= 1");
        if (values.size() != measure.size() * static_cast<std::size_t>(dim))
            throw ShapeMismatch("PairedSample: value count does not match support");
        for (double v : values)
            if (!std::isfinite(v)) throw std::invalid_argument("PairedSample: non-finite value");
    }
    std::span<const double> value(std::size_t k) const {
        return {values.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

struct TransportOptions {
    std::size_t exact_limit = 4096;  // largest support handled by the simplex
    bool allow_fallback = true;
    double sinkhorn_reg = 1e-3;      // relative to the largest cost entry
    int sinkhorn_max_iter = 20000;
};

struct TransportResult {
    double distance = 0.0;  // (optimal cost)^(1/p)
    double cost = 0.0;
    Coupling plan;
    bool approximate = false;
};

/// Dense row-major cost matrix.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> c;
    double operator()(std::size_t i, std::size_t j) const { return c[i * cols + j]; }
};

namespace detail {

/// Transportation simplex on the complete bipartite graph with strongly
/// feasible spanning trees rooted at row 0. Starts from the north-west corner
/// tree (strongly feasible because ties advance the row) and prices arcs in
/// blocks.
class TransportSimplex {
public:
    TransportSimplex(std::span<const double> a, std::span<const double> b, const CostMatrix& cost)
        : n_(a.size()), m_(b.size()), cost_(cost), adj_(n_ + m_) {
        double cmax = 0.0;
        for (double x : cost.c) cmax = std::max(cmax, std::abs(x));
        tol_ = 1e-13 * std::max(cmax, 1.0);
        northwest(a, b);
    }

    void solve() {
        const std::size_t arcs = n_ * m_;
        const std::size_t block = std::max<std::size_t>(
            static_cast<std::size_t>(std::sqrt(static_cast<double>(arcs))), std::min<std::size_t>(arcs, 64));
        std::size_t cursor = 0;
        const long long cap = 200LL * static_cast<long long>(n_ + m_) * static_cast<long long>(n_ + m_) + 10000;
        for (long long iter = 0;; ++iter) {
            if (iter > cap) throw Error("transport simplex: iteration cap exceeded");
            compute_potentials();
            std::size_t enter = arcs;
            double best = -tol_;
            for (std::size_t scanned = 0; scanned < arcs;) {
                const std::size_t len = std::min(block, arcs - scanned);
                for (std::size_t t = 0; t < len; ++t) {
                    const std::size_t k = (cursor + t) % arcs;
                    const double r = reduced(k);
                    if (r < best) {
                        best = r;
                        enter = k;
                    }
                }
                cursor = (cursor + len) % arcs;
                scanned += len;
                if (enter != arcs) break;
            }
            if (enter == arcs) return;
            pivot(enter / m_, enter % m_);
        }
    }

    std::vector<Coupling::Entry> entries() const {
        std::vector<Coupling::Entry> out;
        for (const Edge& e : edges_)
            if (e.alive && e.flow > 0.0) out.push_back({e.r, e.c, e.flow});
        return out;
    }

private:
    struct Edge {
        std::size_t r;
        std::size_t c;
        double flow;
        bool alive;
    };

    double reduced(std::size_t k) const {
        const std::size_t i = k / m_;
        const std::size_t j = k % m_;
        return cost_.c[k] - u_[i] - u_[n_ + j];
    }

    void add_edge(std::size_t r, std::size_t c, double flow) {
        const std::size_t id = edges_.size();
        edges_.push_back({r, c, flow, true});
        adj_[r].push_back(id);
        adj_[n_ + c].push_back(id);
    }

    void remove_edge(std::size_t id) {
        edges_[id].alive = false;
        for (std::size_t node : {edges_[id].r, n_ + edges_[id].c}) {
            auto& l = adj_[node];
            l.erase(std::find(l.begin(), l.end(), id));
        }
    }

    void northwest(std::span<const double> a, std::span<const double> b) {
        std::vector<double> s(a.begin(), a.end());
        std::vector<double> d(b.begin(), b.end());
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < n_ && j < m_) {
            // the last row absorbs rounding residue so no zero arc hangs below it
            const double x = i + 1 == n_ ? d[j] : std::min(s[i], d[j]);
            add_edge(i, j, std::max(x, 0.0));
            s[i] -= x;
            d[j] -= x;
            if (i + 1 < n_ && (j + 1 == m_ || s[i] <= d[j])) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    void compute_potentials() {
        const std::size_t nodes = n_ + m_;
        u_.assign(nodes, 0.0);
        parent_edge_.assign(nodes, npos);
        depth_.assign(nodes, -1);
        queue_.clear();
        queue_.push_back(0);
        depth_[0] = 0;
        for (std::size_t h = 0; h < queue_.size(); ++h) {
            const std::size_t node = queue_[h];
            for (std::size_t id : adj_[node]) {
                const Edge& e = edges_[id];
                const std::size_t other = node < n_ ? n_ + e.c : e.r;
                if (depth_[other] >= 0) continue;
                depth_[other] = depth_[node] + 1;
                parent_edge_[other] = id;
                u_[other] = cost_(e.r, e.c) - u_[node];
                queue_.push_back(other);
            }
        }
    }

    std::size_t parent_of(std::size_t node) const {
        const Edge& e = edges_[parent_edge_[node]];
        return node < n_ ? n_ + e.c : e.r;
    }

    /// Pivots arc (i, j) into the tree. The leaving arc is the last blocking
    /// arc met when walking the cycle from its apex in the direction of the
    /// entering arc, which keeps the tree strongly feasible (every zero-flow
    /// arc points toward the root) and rules out cycling.
    void pivot(std::size_t i, std::size_t j) {
        std::vector<std::size_t> up_from_col;
        std::vector<std::size_t> up_from_row;
        std::size_t x = n_ + j;
        std::size_t y = i;
        while (x != y) {
            if (depth_[x] >= depth_[y]) {
                up_from_col.push_back(parent_edge_[x]);
                x = parent_of(x);
            } else {
                up_from_row.push_back(parent_edge_[y]);
                y = parent_of(y);
            }
        }
        // walk: apex down to row i, across (i, j), column j up to the apex
        cycle_.assign(up_from_row.rbegin(), up_from_row.rend());
        const std::size_t down = cycle_.size();
        cycle_.insert(cycle_.end(), up_from_col.begin(), up_from_col.end());
        backward_.assign(cycle_.size(), false);
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = npos;
        for (std::size_t k = 0; k < cycle_.size(); ++k) {
            const Edge& e = edges_[cycle_[k]];
            const bool child_is_row = depth_[e.r] > depth_[n_ + e.c];
            // arcs run row -> column; a backward arc loses mass
            backward_[k] = k < down ? child_is_row : !child_is_row;
            if (backward_[k] && e.flow <= theta) {
                theta = e.flow;
                leave = cycle_[k];
            }
        }
        for (std::size_t k = 0; k < cycle_.size(); ++k) {
            Edge& e = edges_[cycle_[k]];
            e.flow = backward_[k] ? std::max(e.flow - theta, 0.0) : e.flow + theta;
        }
        remove_edge(leave);
        add_edge(i, j, theta);
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::size_t n_;
    std::size_t m_;
    const CostMatrix& cost_;
    double tol_ = 0.0;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<double> u_;  // row potentials then column potentials
    std::vector<std::size_t> parent_edge_;
    std::vector<int> depth_;
    std::vector<std::size_t> queue_;
    std::vector<std::size_t> cycle_;
    std::vector<bool> backward_;
};

inline double log_sum_exp(std::span<const double> xs) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : xs) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Log-domain Sinkhorn with annealed regularization, followed by the
/// rounding step that projects the scaled kernel onto the coupling polytope.
inline std::vector<Coupling::Entry> sinkhorn(std::span<const double> a, std::span<const double> b,
                                             const CostMatrix& cost, double rel_reg, int max_iter) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    double cmax = 0.0;
    for (double x : cost.c) cmax = std::max(cmax, x);
    const double target_reg = rel_reg * std::max(cmax, 1e-300);
    std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
    std::vector<double> la(n), lb(m);
    for (std::size_t i = 0; i < n; ++i) la[i] = std::log(a[i]);
    for (std::size_t j = 0; j < m; ++j) lb[j] = std::log(b[j]);
    double reg = std::max(cmax, target_reg);
    int iter = 0;
    for (;;) {
        const bool final_stage = reg <= target_reg;
        for (int k = 0; k < (final_stage ? max_iter : 200) && iter < max_iter; ++k, ++iter) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - cost(i, j)) / reg;
                f[i] = reg * (la[i] - log_sum_exp({buf.data(), m}));
            }
            double err = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - cost(i, j)) / reg;
                const double lse = log_sum_exp({buf.data(), n});
                err += std::abs(std::exp(lse + g[j] / reg) - b[j]);
                g[j] = reg * (lb[j] - lse);
            }
            if (err < 1e-10) break;
        }
        if (final_stage || iter >= max_iter) break;
        reg = std::max(0.5 * reg, target_reg);
    }
    std::vector<double> P(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) P[i * m + j] = std::exp((f[i] + g[j] - cost(i, j)) / reg);
    // rounding onto the exact marginals
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < m; ++j) r += P[i * m + j];
        const double s = r > a[i] ? a[i] / r : 1.0;
        for (std::size_t j = 0; j < m; ++j) P[i * m + j] *= s;
    }
    for (std::size_t j = 0; j < m; ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += P[i * m + j];
        const double s = c > b[j] ? b[j] / c : 1.0;
        for (std::size_t i = 0; i < n; ++i) P[i * m + j] *= s;
    }
    std::vector<double> ra(n), rb(m, 0.0);
    double deficit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < m; ++j) r += P[i * m + j];
        ra[i] = a[i] - r;
        deficit += ra[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += P[i * m + j];
        rb[j] = b[j] - c;
    }
    std::vector<Coupling::Entry> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double x = P[i * m + j];
            if (deficit > 0.0) x += ra[i] * rb[j] / deficit;
            if (x > 0.0) out.push_back({i, j, x});
        }
    return out;
}

} // namespace detail

inline double distance_pow(Vec2 x, Vec2 y, double p) {
    return std::pow(std::hypot(x.x - y.x, x.y - y.y), p);
}

/// Exact (or entropic, beyond the size limit) optimal transport between two
/// probability vectors for a given dense cost. Zero-weight points are
/// dropped before solving; plan indices refer to the full supports.
inline std::vector<Coupling::Entry> solve_transport(std::span<const double> a, std::span<const double> b,
                                                    const CostMatrix& cost, const TransportOptions& opt,
                                                    bool* approximate = nullptr) {
    if (cost.rows != a.size() || cost.cols != b.size()) throw ShapeMismatch("solve_transport: cost shape");
    std::vector<std::size_t> ia, ib;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > 0.0) ia.push_back(i);
    for (std::size_t j = 0; j < b.size(); ++j)
        if (b[j] > 0.0) ib.push_back(j);
    if (ia.empty() || ib.empty()) throw ZeroMeasureError("solve_transport: zero measure");
    CostMatrix sub{ia.size(), ib.size(), std::vector<double>(ia.size() * ib.size())};
    std::vector<double> sa(ia.size()), sb(ib.size());
    for (std::size_t i = 0; i < ia.size(); ++i) {
        sa[i] = a[ia[i]];
        for (std::size_t j = 0; j < ib.size(); ++j) sub.c[i * ib.size() + j] = cost(ia[i], ib[j]);
    }
    for (std::size_t j = 0; j < ib.size(); ++j) sb[j] = b[ib[j]];

    std::vector<Coupling::Entry> plan;
    const bool exact = std::max(ia.size(), ib.size()) <= opt.exact_limit;
    if (exact) {
        detail::TransportSimplex lp(sa, sb, sub);
        lp.solve();
        plan = lp.entries();
    } else {
        if (!opt.allow_fallback)
            throw SizeLimitError("transport: support of " + std::to_string(std::max(ia.size(), ib.size())) +
                                 " points exceeds the exact limit " + std::to_string(opt.exact_limit));
        plan = detail::sinkhorn(sa, sb, sub, opt.sinkhorn_reg, opt.sinkhorn_max_iter);
    }
    if (approximate) *approximate = !exact;
    for (auto& e : plan) {
        e.i = ia[e.i];
        e.j = ib[e.j];
    }
    return plan;
}

inline CostMatrix tlp_cost(const PairedSample& a, const PairedSample& b, double p) {
    if (a.dim != b.dim) throw ShapeMismatch("tlp_distance: value dimensions differ");
    CostMatrix C{a.measure.size(), b.measure.size(), std::vector<double>(a.measure.size() * b.measure.size())};
    for (std::size_t i = 0; i < C.rows; ++i) {
        const auto fi = a.value(i);
        for (std::size_t j = 0; j < C.cols; ++j) {
            const auto gj = b.value(j);
            double dv = 0.0;
            for (int k = 0; k < a.dim; ++k) dv += (fi[k] - gj[k]) * (fi[k] - gj[k]);
            C.c[i * C.cols + j] = distance_pow(a.measure.points[i], b.measure.points[j], p) + std::pow(std::sqrt(dv), p);
        }
    }
    return C;
}

/// TL^p distance with cost |x-y|^p + |f(x)-g(y)|^p.
inline TransportResult tlp_distance(const PairedSample& a, const PairedSample& b, double p,
                                    const TransportOptions& opt = {}) {
    if (!(p >= 1.0)) throw std::invalid_argument("tlp_distance: p must be >= 1");
    if (a.measure.zero_flag || b.measure.zero_flag)
        throw ZeroMeasureError("tlp_distance: undefined for the zero measure");
    const CostMatrix C = tlp_cost(a, b, p);
    TransportResult res;
    res.plan.source = a.measure.points;
    res.plan.target = b.measure.points;
    res.plan.entries = solve_transport(a.measure.weights, b.measure.weights, C, opt, &res.approximate);
    double cost = 0.0;
    for (const auto& e : res.plan.entries) cost += e.mass * C(e.i, e.j);
    res.cost = std::max(cost, 0.0);
    res.distance = std::pow(res.cost, 1.0 / p);
    return res;
}

/// Accumulates the weight of every support point at its image.
inline DiscreteMeasure pushforward(std::span<const Vec2> image, const DiscreteMeasure& lam) {
    if (image.size() != lam.size()) throw ShapeMismatch("pushforward: map is not total on the support");
    std::map<std::pair<double, double>, std::size_t> slot;
    std::vector<Vec2> pts;
    std::vector<double> w;
    for (std::size_t k = 0; k < lam.size(); ++k) {
        const auto key = std::make_pair(image[k].x, image[k].y);
        auto [it, fresh] = slot.try_emplace(key, pts.size());
        if (fresh) {
            pts.push_back(image[k]);
            w.push_back(0.0);
        }
        w[it->second] += lam.weights[k];
    }
    DiscreteMeasure out;
    out.points = std::move(pts);
    out.weights = std::move(w);
    out.zero_flag = lam.zero_flag;
    return out;
}

/// sum pi(x,y) |x-y|^p
inline double stagnation_cost(const Coupling& pi, double p) {
    double acc = 0.0;
    for (const auto& e : pi.entries) acc += e.mass * distance_pow(pi.source[e.i], pi.target[e.j], p);
    return acc;
}

/// Barycentric projection T(x_i) = sum_j pi_ij y_j / a_i of a plan; points
/// without source mass map to themselves.
inline std::vector<Vec2> barycentric_map(const Coupling& pi) {
    std::vector<Vec2> acc(pi.source.size());
    std::vector<double> mass(pi.source.size(), 0.0);
    for (const auto& e : pi.entries) {
        acc[e.i].x += e.mass * pi.target[e.j].x;
        acc[e.i].y += e.mass * pi.target[e.j].y;
        mass[e.i] += e.mass;
    }
    for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] = mass[i] > 0.0 ? Vec2{acc[i].x / mass[i], acc[i].y / mass[i]} : pi.source[i];
    return acc;
}

/// int |x - T(x)|^p dlam for a transport map T.
inline double map_stagnation_cost(std::span<const Vec2> map, const DiscreteMeasure& lam, double p) {
    if (map.size() != lam.size()) throw ShapeMismatch("map_stagnation_cost: map is not total on the support");
    double acc = 0.0;
    for (std::size_t k = 0; k < lam.size(); ++k) acc += lam.weights[k] * distance_pow(lam.points[k], map[k], p);
    return acc;
}

} // namespace gammaseg
