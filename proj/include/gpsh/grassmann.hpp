#pragma once

// Families of tangent p-planes ("G") and the cone questions they induce:
// membership in P(G) = {A : tr_W A >= 0 for all W in G}, its interior, the
// Dirichlet dual (tr_W A >= 0 for SOME W), boundary, strictness margins,
// span conditions, free dimension, and the non-closedness probe for
// point-dependent families.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpsh/forms.hpp"

namespace gpsh {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// =====================================================================
// GrassmannSet
// =====================================================================

enum class GrassmannVariant { FullGrassmannian, FinitePlanes, ComplexLines, FiberField };

/// The standard complex structure on R^(2m): J(x; y) = (-y; x), so that
/// J e_1 = e_{m+1}.
inline Mat complex_structure(int n) {
    if (n % 2 != 0) throw DimError("complex structure needs even ambient dimension");
    const int m = n / 2;
    Mat j = Mat::Zero(n, n);
    for (int i = 0; i < m; ++i) {
        j(m + i, i) = 1.0;
        j(i, m + i) = -1.0;
    }
    return j;
}

struct GrassmannSet {
    GrassmannVariant variant = GrassmannVariant::FullGrassmannian;
    int n = 0;  // ambient dimension of the planes
    int p = 0;  // plane dimension
    std::vector<Plane> planes;    // FinitePlanes
    int base_dim = 0;             // FiberField
    std::string fiber_rule;       // FiberField: named builtin id
    int sampler_budget = 4096;
    std::uint64_t seed = 0;

    static GrassmannSet full(int p, int n) {
        if (p < 1 || p > n) throw DimError("full Grassmannian needs 1 <= p <= n");
        GrassmannSet g;
        g.variant = GrassmannVariant::FullGrassmannian;
        g.n = n;
        g.p = p;
        return g;
    }

    static GrassmannSet finite(std::vector<Plane> ws) {
        if (ws.empty()) throw DimError("finite plane family must be nonempty");
        GrassmannSet g;
        g.variant = GrassmannVariant::FinitePlanes;
        g.n = ws.front().ambient_dim();
        g.p = ws.front().plane_dim();
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (ws[i].ambient_dim() != g.n || ws[i].plane_dim() != g.p)
                throw DimError("finite plane family has mixed dimensions");
            for (std::size_t k = 0; k < i; ++k)
                if (ws[i].same_plane(ws[k]))
                    throw DimError("finite plane family has duplicate planes");
        }
        g.planes = std::move(ws);
        return g;
    }

    static GrassmannSet complex_lines(int n) {
        GrassmannSet g;
        g.variant = GrassmannVariant::ComplexLines;
        g.n = n;
        g.p = 2;
        (void)complex_structure(n);  // validates evenness
        return g;
    }

    /// Point-dependent family selected by a named builtin rule; see fiber_at.
    static GrassmannSet fiber_field(const std::string& rule);

    /// Verdict tolerance: closed-form variants answer to 1e-9.
    double tol() const { return 1e-9; }
};

/// Fiber of a FiberField at a base point; nullopt encodes the empty fiber.
/// Builtin rules:
///   "ex2.3", "ex6.6"      : base R; all lines (the single 1-plane) for x >= 0,
///                           empty fiber for x < 0.
///   "sphere_horizontal"   : base R^3; the latitude-circle direction at points
///                           off the vertical axis, empty on the axis.
///   "appA"                : base R, planes in R^2; the x-axis for x >= 0 and
///                           the rotated line span{(1,1)} for x < 0 (a fiber
///                           family whose membership cone is not closed under
///                           pointwise limits along the base).
inline std::optional<GrassmannSet> fiber_at(const GrassmannSet& g, const Vec& x) {
    if (g.variant != GrassmannVariant::FiberField)
        return g;  // constant families are their own fiber everywhere
    if (x.size() != g.base_dim)
        throw DimError("fiber_at: base point dimension mismatch");
    if (g.fiber_rule == "ex2.3" || g.fiber_rule == "ex6.6") {
        if (x(0) < 0.0) return std::nullopt;
        Mat f(1, 1);
        f(0, 0) = 1.0;
        return GrassmannSet::finite({projection_from_frame(f)});
    }
    if (g.fiber_rule == "sphere_horizontal") {
        const double r = std::hypot(x(0), x(1));
        if (r < 1e-8) return std::nullopt;
        Vec d(3);
        d << -x(1) / r, x(0) / r, 0.0;
        return GrassmannSet::finite({line_through(d)});
    }
    if (g.fiber_rule == "appA") {
        Vec d(2);
        if (x(0) >= 0.0)
            d << 1.0, 0.0;
        else
            d << 1.0, 1.0;
        return GrassmannSet::finite({line_through(d.normalized())});
    }
    throw DimError("unknown fiber rule: " + g.fiber_rule);
}

inline GrassmannSet GrassmannSet::fiber_field(const std::string& rule) {
    GrassmannSet g;
    g.variant = GrassmannVariant::FiberField;
    g.fiber_rule = rule;
    if (rule == "ex2.3" || rule == "ex6.6") {
        g.base_dim = 1;
        g.n = 1;
        g.p = 1;
    } else if (rule == "sphere_horizontal") {
        g.base_dim = 3;
        g.n = 3;
        g.p = 1;
    } else if (rule == "appA") {
        g.base_dim = 1;
        g.n = 2;
        g.p = 1;
    } else {
        throw DimError("unknown fiber rule: " + rule);
    }
    return g;
}

// =====================================================================
// Trace extremization
// =====================================================================

struct TraceExtrema {
    double min_trace = kInf;    // +inf sentinel when the fiber is empty
    double max_trace = -kInf;   // -inf sentinel when the fiber is empty
    std::optional<Plane> witness_min;
    std::optional<Plane> witness_max;
    bool empty_fiber = false;
};

namespace detail {

inline Plane eigen_plane(const Mat& vectors, int first, int count) {
    Mat f(vectors.rows(), count);
    for (int k = 0; k < count; ++k) f.col(k) = vectors.col(first + k);
    return projection_from_frame(f);
}

}  // namespace detail

/// Exact (inf, sup) of tr_W A over the (fiber of the) family, with witnesses.
/// FullGrassmannian: partial eigenvalue sums. ComplexLines: tr over span{v,Jv}
/// equals v^T (A - JAJ) v, so the extrema are twice the extreme eigenvalues of
/// the J-symmetrization (1/2)(A - JAJ). FiberField: empty fiber gives the
/// +inf/-inf sentinels.
inline TraceExtrema min_max_trace(const GrassmannSet& g, const SymForm& a,
                                  const std::optional<Vec>& x = std::nullopt) {
    if (g.variant == GrassmannVariant::FiberField) {
        if (!x) throw DimError("min_max_trace: FiberField needs a base point");
        const auto fiber = fiber_at(g, *x);
        if (!fiber) return TraceExtrema{kInf, -kInf, std::nullopt, std::nullopt, true};
        return min_max_trace(*fiber, a);
    }
    if (a.dim() != g.n) throw DimError("min_max_trace: form dimension mismatch");

    TraceExtrema r;
    r.empty_fiber = false;
    switch (g.variant) {
        case GrassmannVariant::FullGrassmannian: {
            const auto [ev, evec] = a.eigensystem();  // ascending
            double lo = 0.0, hi = 0.0;
            for (int i = 0; i < g.p; ++i) {
                lo += ev(i);
                hi += ev(g.n - 1 - i);
            }
            r.min_trace = lo;
            r.max_trace = hi;
            r.witness_min = detail::eigen_plane(evec, 0, g.p);
            r.witness_max = detail::eigen_plane(evec, g.n - g.p, g.p);
            break;
        }
        case GrassmannVariant::FinitePlanes: {
            for (const Plane& w : g.planes) {
                const double t = trace_pairing(a, w);
                if (t < r.min_trace) {
                    r.min_trace = t;
                    r.witness_min = w;
                }
                if (t > r.max_trace) {
                    r.max_trace = t;
                    r.witness_max = w;
                }
            }
            break;
        }
        case GrassmannVariant::ComplexLines: {
            const Mat j = complex_structure(g.n);
            const SymForm m(0.5 * (a.matrix() - j * a.matrix() * j));
            const auto [ev, evec] = m.eigensystem();
            const auto complex_line = [&](const Vec& v) {
                Mat f(g.n, 2);
                f.col(0) = v;
                f.col(1) = j * v;
                return projection_from_frame(f);
            };
            r.min_trace = 2.0 * ev(0);
            r.max_trace = 2.0 * ev(g.n - 1);
            r.witness_min = complex_line(evec.col(0));
            r.witness_max = complex_line(evec.col(g.n - 1));
            break;
        }
        case GrassmannVariant::FiberField:
            break;  // handled above
    }
    return r;
}

/// Monte-Carlo extremization over `budget` sampled planes; the cross-check
/// oracle for the closed forms above (tolerance 1e-3 scale, never used to
/// decide membership on its own).
inline TraceExtrema sampled_min_max_trace(const GrassmannSet& g, const SymForm& a,
                                          int budget, std::uint64_t seed,
                                          const std::optional<Vec>& x = std::nullopt) {
    if (g.variant == GrassmannVariant::FiberField) {
        const auto fiber = fiber_at(g, x.value());
        if (!fiber) return TraceExtrema{kInf, -kInf, std::nullopt, std::nullopt, true};
        return sampled_min_max_trace(*fiber, a, budget, seed);
    }
    std::vector<Plane> ws;
    if (g.variant == GrassmannVariant::FinitePlanes) {
        ws = g.planes;
    } else if (g.variant == GrassmannVariant::FullGrassmannian) {
        ws = sample_frames(g.n, g.p, budget, seed);
    } else {  // ComplexLines
        const Mat j = complex_structure(g.n);
        Rng rng(seed);
        for (int k = 0; k < budget; ++k) {
            const Vec v = sample_unit_vector(g.n, rng);
            Mat f(g.n, 2);
            f.col(0) = v;
            f.col(1) = j * v;
            ws.push_back(projection_from_frame(f));
        }
    }
    TraceExtrema r;
    for (const Plane& w : ws) {
        const double t = trace_pairing(a, w);
        if (t < r.min_trace) {
            r.min_trace = t;
            r.witness_min = w;
        }
        if (t > r.max_trace) {
            r.max_trace = t;
            r.witness_max = w;
        }
    }
    return r;
}

// =====================================================================
// Cone verdicts
// =====================================================================

struct ConeVerdict {
    bool in_P = false;        // tr_W A >= 0 for all W (membership in P(G))
    bool in_IntP = false;     // tr_W A > 0 for all W
    bool in_dual = false;     // tr_W A >= 0 for some W (Dirichlet dual)
    bool on_boundary = false; // in_P and not in_IntP
    double min_trace = kInf;
    double max_trace = -kInf;
    std::optional<Plane> witness_min;
    std::optional<Plane> witness_max;
    double tol = 1e-9;
    bool empty_fiber = false;
};

/// Decide all cone memberships for A against (the fiber of) G.
/// Empty fiber: P(G_x) is an intersection of half-spaces over an empty index
/// set, i.e. everything, so in_P = true (and in_IntP = true) while the dual
/// is empty: in_dual = false.
inline ConeVerdict classify(const GrassmannSet& g, const SymForm& a,
                            const std::optional<Vec>& x = std::nullopt) {
    const TraceExtrema e = min_max_trace(g, a, x);
    ConeVerdict v;
    v.tol = g.tol();
    v.min_trace = e.min_trace;
    v.max_trace = e.max_trace;
    v.witness_min = e.witness_min;
    v.witness_max = e.witness_max;
    v.empty_fiber = e.empty_fiber;
    if (e.empty_fiber) {
        v.in_P = true;
        v.in_IntP = true;
        v.in_dual = false;
        v.on_boundary = false;
        return v;
    }
    v.in_P = e.min_trace >= -v.tol;
    v.in_IntP = e.min_trace > v.tol;
    v.in_dual = e.max_trace >= -v.tol;
    v.on_boundary = v.in_P && !v.in_IntP;
    return v;
}

/// inf over W of (1/p) tr_W A: the signed distance of A to the complement of
/// P(G_x) (negative means A sits that far inside the complement). Empty
/// fiber: +inf sentinel.
inline double strict_margin(const GrassmannSet& g, const SymForm& a,
                            const std::optional<Vec>& x = std::nullopt) {
    const TraceExtrema e = min_max_trace(g, a, x);
    if (e.empty_fiber) return kInf;
    return e.min_trace / static_cast<double>(g.p);
}

/// Membership in the c-strict cone, implemented through the shift identity:
/// tr_W A >= c for all W  <=>  A - (c/p) I in P(G).
inline bool c_strict_member(const GrassmannSet& g, const SymForm& a, double c,
                            const std::optional<Vec>& x = std::nullopt) {
    if (c < 0.0) throw DimError("c_strict_member: c must be >= 0");
    const SymForm shifted = a - (c / static_cast<double>(g.p)) * SymForm::Identity(a.dim());
    return classify(g, shifted, x).in_P;
}

/// A plane certifying A outside P(G): the minimum-trace witness.
inline Plane separating_witness(const GrassmannSet& g, const SymForm& a,
                                const std::optional<Vec>& x = std::nullopt) {
    const ConeVerdict v = classify(g, a, x);
    if (v.in_P)
        throw NoWitness("form is in the cone; no separating plane exists");
    return *v.witness_min;
}

// =====================================================================
// Span analysis (does G involve all the variables?)
// =====================================================================

struct SpanAnalysis {
    std::vector<SymForm> span_basis;        // orthonormal basis of span{P_W}
    bool involves_all = false;
    std::optional<SymForm> positive_witness;  // element of Span G with A > 0
    double witness_min_eig = -kInf;           // smallest eigenvalue of the witness search
    bool paths_agree = true;                  // the two decision paths matched
    std::optional<Vec> orthogonal_direction;  // unit e with P_e perp Span G, when found
};

namespace detail {

/// Euclidean projection of t onto the probability simplex.
inline Vec project_simplex(Vec t) {
    const int k = static_cast<int>(t.size());
    std::vector<double> u(t.data(), t.data() + k);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    int rho = 0;
    double running = 0.0;
    for (int i = 0; i < k; ++i) {
        running += u[static_cast<std::size_t>(i)];
        const double test = u[static_cast<std::size_t>(i)] - (running - 1.0) / (i + 1);
        if (test > 0.0) {
            rho = i + 1;
            css = running;
        }
    }
    theta = (css - 1.0) / rho;
    for (int i = 0; i < k; ++i) t(i) = std::max(0.0, t(i) - theta);
    return t;
}

/// Deterministic generating planes whose projections span Span G.
inline std::vector<Plane> span_generators(const GrassmannSet& g) {
    switch (g.variant) {
        case GrassmannVariant::FinitePlanes:
            return g.planes;
        case GrassmannVariant::FullGrassmannian: {
            // Coordinate p-planes plus Haar samples: together they span the
            // full O(n)-orbit span without enumerating all subsets.
            std::vector<Plane> ws;
            std::vector<int> axes(static_cast<std::size_t>(g.p));
            for (int i = 0; i + g.p <= g.n; ++i) {
                for (int k = 0; k < g.p; ++k) axes[static_cast<std::size_t>(k)] = i + k;
                ws.push_back(coordinate_plane(g.n, axes));
            }
            const int extra = 2 * g.n * (g.n + 1);
            const auto sampled = sample_frames(g.n, g.p, extra, g.seed + 101);
            ws.insert(ws.end(), sampled.begin(), sampled.end());
            return ws;
        }
        case GrassmannVariant::ComplexLines: {
            const Mat j = complex_structure(g.n);
            std::vector<Plane> ws;
            Rng rng(g.seed + 102);
            const int count = 2 * g.n * (g.n + 1);
            for (int k = 0; k < count; ++k) {
                const Vec v = sample_unit_vector(g.n, rng);
                Mat f(g.n, 2);
                f.col(0) = v;
                f.col(1) = j * v;
                ws.push_back(projection_from_frame(f));
            }
            return ws;
        }
        case GrassmannVariant::FiberField:
            throw DimError("span_generators: resolve the fiber first");
    }
    return {};
}

}  // namespace detail

/// Decide "G involves all the variables" by two independent routes that must
/// agree: (i) no unit vector e has P_e orthogonal to Span G — equivalently
/// the aggregated projection sum has trivial kernel, confirmed by the
/// least-squares residual of projecting P_e onto the span basis; (ii) a
/// positive-definite element of Span G found by maximizing the minimum
/// eigenvalue of simplex combinations via projected gradient ascent.
inline SpanAnalysis span_analysis(const GrassmannSet& g,
                                  const std::optional<Vec>& x = std::nullopt) {
    if (g.variant == GrassmannVariant::FiberField) {
        if (!x) throw DimError("span_analysis: FiberField needs a base point");
        const auto fiber = fiber_at(g, *x);
        if (!fiber) return SpanAnalysis{};  // empty fiber spans nothing
        return span_analysis(*fiber);
    }
    const std::vector<Plane> gens = detail::span_generators(g);
    const int n = g.n;
    const int k = static_cast<int>(gens.size());

    SpanAnalysis out;

    // Orthonormal span basis by Gram-Schmidt in the Frobenius inner product.
    for (const Plane& w : gens) {
        Mat m = w.projection().matrix();
        for (const SymForm& b : out.span_basis) m -= b.inner(SymForm(m)) * b.matrix();
        const double norm = m.norm();
        if (norm > 1e-9) out.span_basis.emplace_back(Mat(m / norm));
    }

    // Path (i): kernel of N = sum of generator projections. e in ker N means
    // e is orthogonal to every generating plane, i.e. P_e perp Span G.
    Mat nsum = Mat::Zero(n, n);
    for (const Plane& w : gens) nsum += w.projection().matrix();
    const auto [nev, nvec] = SymForm(nsum).eigensystem();
    const bool path1_all = nev(0) > 1e-8;
    if (!path1_all) {
        const Vec e = nvec.col(0);
        // Least-squares confirmation: P_e should project to ~nothing in the span.
        const SymForm pe = outer(e);
        Mat res = pe.matrix();
        for (const SymForm& b : out.span_basis) res -= b.inner(pe) * b.matrix();
        if (res.norm() >= (1.0 - 1e-6) * pe.matrix().norm())
            out.orthogonal_direction = e;
    }

    // Path (ii): projected gradient ascent of lambda_min(sum t_k P_k) on the
    // simplex; the gradient w.r.t. t_k is v^T P_k v at the minimal eigenvector.
    Vec t = Vec::Constant(k, 1.0 / k);
    double best_min_eig = -kInf;
    Vec best_t = t;
    for (int iter = 0; iter < 100; ++iter) {
        Mat comb = Mat::Zero(n, n);
        for (int i = 0; i < k; ++i) comb += t(i) * gens[static_cast<std::size_t>(i)].projection().matrix();
        const auto [ev, evec] = SymForm(comb).eigensystem();
        if (ev(0) > best_min_eig) {
            best_min_eig = ev(0);
            best_t = t;
        }
        const Vec vmin = evec.col(0);
        Vec grad(k);
        for (int i = 0; i < k; ++i)
            grad(i) = vmin.dot(gens[static_cast<std::size_t>(i)].projection().matrix() * vmin);
        const double step = 0.5 / (1.0 + iter / 20.0);
        t = detail::project_simplex(t + step * grad);
    }
    const bool path2_all = best_min_eig > 1e-8;
    if (path2_all) {
        Mat comb = Mat::Zero(n, n);
        for (int i = 0; i < k; ++i) comb += best_t(i) * gens[static_cast<std::size_t>(i)].projection().matrix();
        out.positive_witness = SymForm(comb);
    }
    out.witness_min_eig = best_min_eig;

    out.paths_agree = (path1_all == path2_all);
    // The eigenvalue route is exact; the witness search can only under-report.
    // Declare false only when path (i) exhibits an orthogonal direction.
    out.involves_all = path1_all;
    return out;
}

// =====================================================================
// Free dimension
// =====================================================================

namespace detail {

/// Positive iff no G-plane is contained in the subspace spanned by `frame`.
/// FinitePlanes: min_k tr(F_k^T (I - P_V) F_k) — zero exactly when some plane
/// sits inside V. ComplexLines: lambda_min of M - JMJ with M = I - P_V — zero
/// exactly when some v has both v and Jv inside V.
inline double freeness_objective(const GrassmannSet& g, const Plane& v) {
    const Mat rest = Mat::Identity(g.n, g.n) - v.projection().matrix();
    if (g.variant == GrassmannVariant::FinitePlanes) {
        double worst = kInf;
        for (const Plane& w : g.planes) {
            const double t = (w.frame().transpose() * rest * w.frame()).trace();
            worst = std::min(worst, t);
        }
        return worst;
    }
    if (g.variant == GrassmannVariant::ComplexLines) {
        const Mat j = complex_structure(g.n);
        const SymForm q(rest - j * rest * j);
        return q.eigenvalues()(0);
    }
    throw DimError("freeness_objective: unsupported variant");
}

inline Plane random_subspace(int n, int q, Rng& rng) {
    Mat f(n, q);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < q; ++c) f(i, c) = rng.gaussian();
    return projection_from_frame(f);
}

/// Simulated annealing over orthonormal q-frames maximizing the freeness
/// objective; returns the best subspace found.
inline std::pair<Plane, double> anneal_free_subspace(const GrassmannSet& g, int q,
                                                     std::uint64_t seed) {
    Rng rng(seed);
    Plane best;
    double best_val = -kInf;
    const int restarts = 50;
    const int steps = 120;
    for (int r = 0; r < restarts; ++r) {
        Plane cur = random_subspace(g.n, q, rng);
        double cur_val = freeness_objective(g, cur);
        double temp = 0.3;
        for (int s = 0; s < steps; ++s, temp *= 0.94) {
            Mat f = cur.frame();
            for (int i = 0; i < g.n; ++i)
                for (int c = 0; c < q; ++c) f(i, c) += temp * rng.gaussian();
            Plane cand;
            try {
                cand = projection_from_frame(f);
            } catch (const RankError&) {
                continue;
            }
            const double val = freeness_objective(g, cand);
            if (val > cur_val || rng.uniform() < std::exp((val - cur_val) / std::max(temp, 1e-6))) {
                cur = cand;
                cur_val = val;
            }
            if (cur_val > best_val) {
                best = cur;
                best_val = cur_val;
            }
        }
    }
    return {best, best_val};
}

/// Certificate pass: re-test a claimed free subspace against `samples` drawn
/// G-planes (all planes, exactly, for finite families).
inline bool certify_free(const GrassmannSet& g, const Plane& v, int samples,
                         std::uint64_t seed) {
    const Mat rest = Mat::Identity(g.n, g.n) - v.projection().matrix();
    if (g.variant == GrassmannVariant::FinitePlanes) {
        for (const Plane& w : g.planes)
            if ((w.frame().transpose() * rest * w.frame()).trace() <= 1e-7) return false;
        return true;
    }
    if (g.variant == GrassmannVariant::ComplexLines) {
        const Mat j = complex_structure(g.n);
        Rng rng(seed);
        for (int s = 0; s < samples; ++s) {
            const Vec u = sample_unit_vector(g.n, rng);
            const Vec ju = j * u;
            const double miss = u.dot(rest * u) + ju.dot(rest * ju);
            if (miss <= 1e-7) return false;
        }
        return true;
    }
    return false;
}

}  // namespace detail

/// Maximal dimension of a subspace containing no G-plane. FullGrassmannian is
/// analytic (any (p-1)-dimensional subspace is too small to hold a p-plane, and
/// every p-dimensional subspace IS a G-plane), giving p-1. Search variants use
/// simulated annealing with a sampled certificate.
inline int free_dimension(const GrassmannSet& g, std::optional<Plane>* witness = nullptr) {
    if (witness) witness->reset();
    if (g.variant == GrassmannVariant::FullGrassmannian) {
        if (witness && g.p >= 2) {
            std::vector<int> axes;
            for (int i = 0; i < g.p - 1; ++i) axes.push_back(i);
            *witness = coordinate_plane(g.n, axes);  // too small to hold any p-plane
        }
        return g.p - 1;
    }
    if (g.variant == GrassmannVariant::FiberField)
        throw DimError("free_dimension: resolve the fiber first");
    if (g.variant == GrassmannVariant::FinitePlanes && g.n > 6)
        throw BudgetExceeded("free_dimension: finite families supported up to n = 6");
    if (g.variant == GrassmannVariant::ComplexLines && g.n > 4)
        throw BudgetExceeded("free_dimension: complex lines supported up to n = 4");

    for (int q = g.n - 1; q >= 1; --q) {
        if (q < g.p) {
            if (witness && q >= 1) {
                std::vector<int> axes;
                for (int i = 0; i < q; ++i) axes.push_back(i);
                *witness = coordinate_plane(g.n, axes);
            }
            return q;  // any q-dim subspace is too small to hold a p-plane
        }
        const auto [cand, val] = detail::anneal_free_subspace(g, q, g.seed + 7919 * static_cast<std::uint64_t>(q));
        if (val > 1e-6 && detail::certify_free(g, cand, 100000, g.seed + 104729)) {
            if (witness) *witness = cand;
            return q;
        }
    }
    return 0;
}

// =====================================================================
// Non-closedness probe for fiber fields
// =====================================================================

/// The boundary-of-closedness witness A = -P_W + (1/eps) P_{W-perp}:
/// any plane V with <P_V, P_{W-perp}> >= eps*p gives tr_V A >= 0, so A lies in
/// P(G_x) whenever the fiber avoids the eps-neighborhood of W, yet tr_W A =
/// -p < 0 kills membership at the limit point whose fiber contains W itself.
/// Verifies the flip along the path and returns A.
inline SymForm nonclosed_probe(const GrassmannSet& g, const std::vector<Vec>& path,
                               const Vec& x, const Plane& w, double eps) {
    if (g.variant != GrassmannVariant::FiberField)
        throw ProbeInvalid("probe requires a point-dependent family");
    if (eps <= 0.0) throw ProbeInvalid("eps must be positive");
    const auto limit_fiber = fiber_at(g, x);
    if (!limit_fiber)
        throw ProbeInvalid("fiber at the limit point is empty");
    {
        bool contains_w = false;
        if (limit_fiber->variant == GrassmannVariant::FinitePlanes) {
            for (const Plane& v : limit_fiber->planes)
                if (v.same_plane(w)) contains_w = true;
        } else {
            contains_w = (limit_fiber->p == w.plane_dim());  // full-type fibers contain every p-plane
        }
        if (!contains_w)
            throw ProbeInvalid("W does not belong to the fiber at the limit point");
    }

    const int n = w.ambient_dim();
    const double p = static_cast<double>(w.plane_dim());
    const SymForm perp(Mat::Identity(n, n) - w.projection().matrix());

    // Hypothesis: fibers along the path avoid the eps-neighborhood of W,
    // i.e. every fiber plane V has <P_V, P_{W-perp}> >= eps * p.
    for (const Vec& xj : path) {
        const auto fiber = fiber_at(g, xj);
        if (!fiber) continue;  // empty fibers avoid everything
        const TraceExtrema e = min_max_trace(*fiber, perp);
        if (e.min_trace < eps * p)
            throw ProbeInvalid("a fiber along the path enters the eps-neighborhood of W");
    }

    const SymForm a = -1.0 * w.projection() + (1.0 / eps) * perp;
    for (const Vec& xj : path) {
        if (!classify(g, a, xj).in_P)
            throw ProbeInvalid("probe form left the cone along the path");
    }
    if (classify(g, a, x).in_P)
        throw ProbeInvalid("probe form failed to exit the cone at the limit point");
    return a;
}

// =====================================================================
// Positive-hull coordinates (used by the distributional pairing)
// =====================================================================

/// Nonnegative least squares of A against the projections of `frames`:
/// returns t >= 0 minimizing ||sum t_k P_k - A||_F via projected gradient.
/// Throws ConeViolation when the residual exceeds `tol` (A is not in the
/// positive hull of the given projections within tolerance).
inline Vec positive_hull_coordinates(const SymForm& a, const std::vector<Plane>& frames,
                                     double tol = 1e-6) {
    const int k = static_cast<int>(frames.size());
    if (k == 0) throw ConeViolation("no generating planes given");
    // Gram matrix and linear term of the quadratic 1/2 t^T G t - b^T t.
    Mat gram(k, k);
    Vec b(k);
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j)
            gram(i, j) = gram(j, i) =
                frames[static_cast<std::size_t>(i)].projection().inner(frames[static_cast<std::size_t>(j)].projection());
        b(i) = frames[static_cast<std::size_t>(i)].projection().inner(a);
    }
    const double lip = gram.operatorNorm();
    Vec t = Vec::Zero(k);
    for (int iter = 0; iter < 2000; ++iter) {
        const Vec grad = gram * t - b;
        Vec next = t - grad / std::max(lip, 1e-12);
        next = next.cwiseMax(0.0);
        if ((next - t).norm() < 1e-13) {
            t = next;
            break;
        }
        t = next;
    }
    Mat rec = Mat::Zero(a.dim(), a.dim());
    for (int i = 0; i < k; ++i) rec += t(i) * frames[static_cast<std::size_t>(i)].projection().matrix();
    if ((rec - a.matrix()).norm() > tol)
        throw ConeViolation("form is not a nonnegative combination of the given projections");
    return t;
}

} // namespace gpsh
