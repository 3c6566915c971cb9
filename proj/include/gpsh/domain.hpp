#pragma once

// Implicitly defined domains {rho < 0}: boundary sampling, second
// fundamental forms, boundary convexity against a plane family, the
// lambda-doubling construction of a globally subharmonic defining function,
// exhaustion calculus, convex-increasing composition, and horizontal
// slice connectivity.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpsh/forms.hpp"
#include "gpsh/grassmann.hpp"

namespace gpsh {

// =====================================================================
// Implicit domains
// =====================================================================

struct ImplicitDomain {
    int n = 0;
    ScalarField rho;           // negative inside, zero on the boundary
    Vec box_lo, box_hi;        // axis-aligned sampling box
    double boundary_tol = 1e-8;
    std::string name;          // builtin id when applicable
};

/// Signed-distance ball: rho = |x| - radius.
inline ImplicitDomain ball_domain(int n, double radius = 1.0) {
    ImplicitDomain d;
    d.n = n;
    d.name = "ball";
    d.rho.dim = n;
    d.rho.eval = [radius](const Vec& x) { return x.norm() - radius; };
    d.rho.grad = [](const Vec& x) { return Vec(x / x.norm()); };
    d.rho.hess = [](const Vec& x) {
        const double r = x.norm();
        const Vec u = x / r;
        return SymForm((Mat::Identity(x.size(), x.size()) - u * u.transpose()) / r);
    };
    d.box_lo = Vec::Constant(n, -1.5 * radius);
    d.box_hi = Vec::Constant(n, 1.5 * radius);
    return d;
}

/// Ellipsoid: rho = sum x_i^2 / a_i^2 - 1.
inline ImplicitDomain ellipse_domain(const Vec& semi_axes) {
    const int n = static_cast<int>(semi_axes.size());
    ImplicitDomain d;
    d.n = n;
    d.name = "ellipse";
    d.rho.dim = n;
    const Vec a2 = semi_axes.cwiseProduct(semi_axes);
    d.rho.eval = [a2](const Vec& x) {
        return (x.cwiseProduct(x).cwiseQuotient(a2)).sum() - 1.0;
    };
    d.rho.grad = [a2](const Vec& x) { return Vec(2.0 * x.cwiseQuotient(a2)); };
    d.rho.hess = [a2](const Vec& x) {
        (void)x;
        return SymForm(Mat((2.0 * a2.cwiseInverse()).asDiagonal()));
    };
    d.box_lo = -(semi_axes.array() + 0.5).matrix();
    d.box_hi = (semi_axes.array() + 0.5).matrix();
    return d;
}

/// One-sheet hyperboloid solid: rho = x^2 + y^2 - z^2 - 1 in R^3.
/// Negated orientation (the region outside the sheet) via sign = -1.
inline ImplicitDomain hyperboloid_domain(double sign = 1.0) {
    ImplicitDomain d;
    d.n = 3;
    d.name = "hyperboloid";
    d.rho.dim = 3;
    d.rho.eval = [sign](const Vec& x) {
        return sign * (x(0) * x(0) + x(1) * x(1) - x(2) * x(2) - 1.0);
    };
    d.rho.grad = [sign](const Vec& x) {
        Vec g(3);
        g << 2.0 * x(0), 2.0 * x(1), -2.0 * x(2);
        return Vec(sign * g);
    };
    d.rho.hess = [sign](const Vec& x) {
        (void)x;
        Vec h(3);
        h << 2.0, 2.0, -2.0;
        return SymForm(Mat((sign * h).asDiagonal()));
    };
    d.box_lo = Vec(3);
    d.box_hi = Vec(3);
    d.box_lo << -2.0, -2.0, -1.1;
    d.box_hi << 2.0, 2.0, 1.1;
    return d;
}

/// Lower half-disk of radius 3 with a notch along [-1,1] x {0} and two lobes
/// poking above the axis around (+-2, 0.3), their tops reaching (+-2, 1).
/// Horizontal slices just above y = 0 are disconnected.
inline ImplicitDomain crescent513_domain() {
    ImplicitDomain d;
    d.n = 2;
    d.name = "crescent513";
    d.rho.dim = 2;
    d.rho.eval = [](const Vec& x) {
        const double half_disk = std::max(x(0) * x(0) + x(1) * x(1) - 9.0, x(1));
        const double lobe_l = (x(0) + 2.0) * (x(0) + 2.0) + (x(1) - 0.3) * (x(1) - 0.3) - 0.49;
        const double lobe_r = (x(0) - 2.0) * (x(0) - 2.0) + (x(1) - 0.3) * (x(1) - 0.3) - 0.49;
        return std::min({half_disk, lobe_l, lobe_r});
    };
    d.box_lo = Vec(2);
    d.box_hi = Vec(2);
    d.box_lo << -3.3, -3.3;
    d.box_hi << 3.3, 1.3;
    return d;
}

/// Builtin dispatcher used by the command-line tools.
inline ImplicitDomain make_domain(const std::string& name, int dim = 2) {
    if (name == "ball") return ball_domain(dim);
    if (name == "ellipse") {
        Vec a(dim);
        if (dim == 2) a << 2.0, 1.0;
        else if (dim == 3) a << 1.5, 1.0, 0.75;
        else a.setOnes();
        return ellipse_domain(a);
    }
    if (name == "hyperboloid") return hyperboloid_domain();
    if (name == "crescent513") return crescent513_domain();
    throw DomainError("unknown domain builtin: " + name);
}

// =====================================================================
// Boundary sampling
// =====================================================================

struct BoundaryPoint {
    Vec x;
    Vec normal;        // unit, inward: grad rho . normal < 0
    Mat tangent_frame; // n x (n-1), orthonormal, perpendicular to normal
    SymForm II;        // (n-1) x (n-1) second fundamental form
    double grad_norm = 0.0;
};

struct BoundarySample {
    std::vector<BoundaryPoint> points;
    int skipped = 0;  // Newton non-convergence / degenerate-gradient count
};

namespace detail {

inline BoundaryPoint boundary_point_data(const ImplicitDomain& d, const Vec& x) {
    BoundaryPoint b;
    b.x = x;
    const Vec g = d.rho.gradient(x);
    b.grad_norm = g.norm();
    if (b.grad_norm < 1e-6)
        throw DegenerateDefiningFunction("gradient of the defining function vanishes at a boundary point");
    b.normal = -g / b.grad_norm;
    b.tangent_frame = orthonormal_complement(b.normal);
    const SymForm h = d.rho.hessian(x);
    b.II = SymForm(Mat(b.tangent_frame.transpose() * h.matrix() * b.tangent_frame) / b.grad_norm);
    return b;
}

}  // namespace detail

/// Scan the box on a grid of pitch grid_h, Newton-project near-boundary nodes
/// onto {rho = 0}, and package each hit with its normal, tangent frame, and
/// second fundamental form. Nodes where Newton stalls are counted, not fatal.
inline BoundarySample sample_boundary(const ImplicitDomain& d, double grid_h,
                                      std::uint64_t seed = 1) {
    if (grid_h <= 0.0) throw DomainError("sample_boundary: grid_h must be positive");
    Rng rng(seed);
    Vec offset(d.n);
    for (int i = 0; i < d.n; ++i) offset(i) = rng.uniform() * grid_h;

    std::vector<int> counts(static_cast<std::size_t>(d.n));
    for (int i = 0; i < d.n; ++i)
        counts[static_cast<std::size_t>(i)] =
            static_cast<int>(std::floor((d.box_hi(i) - d.box_lo(i)) / grid_h)) + 1;

    BoundarySample out;
    bool seen_neg = false, seen_pos = false;
    std::vector<int> idx(static_cast<std::size_t>(d.n), 0);
    while (true) {
        Vec x(d.n);
        for (int i = 0; i < d.n; ++i)
            x(i) = d.box_lo(i) + offset(i) + grid_h * idx[static_cast<std::size_t>(i)];
        bool in_box = true;
        for (int i = 0; i < d.n; ++i) in_box = in_box && x(i) <= d.box_hi(i);
        if (in_box) {
            const double r = d.rho.value(x);
            seen_neg = seen_neg || r < 0.0;
            seen_pos = seen_pos || r > 0.0;
            if (std::abs(r) < grid_h) {
                // Newton projection along the gradient.
                Vec y = x;
                bool ok = false;
                for (int it = 0; it < 60; ++it) {
                    const double ry = d.rho.value(y);
                    if (std::abs(ry) <= d.boundary_tol) {
                        ok = true;
                        break;
                    }
                    const Vec gy = d.rho.gradient(y);
                    const double gn2 = gy.squaredNorm();
                    if (gn2 < 1e-12 || !std::isfinite(gn2)) break;
                    y -= (ry / gn2) * gy;
                }
                if (ok) {
                    try {
                        out.points.push_back(detail::boundary_point_data(d, y));
                    } catch (const DegenerateDefiningFunction&) {
                        ++out.skipped;
                    }
                } else {
                    ++out.skipped;
                }
            }
        }
        // advance the multi-index
        int axis = 0;
        while (axis < d.n) {
            if (++idx[static_cast<std::size_t>(axis)] < counts[static_cast<std::size_t>(axis)]) break;
            idx[static_cast<std::size_t>(axis)] = 0;
            ++axis;
        }
        if (axis == d.n) break;
    }
    if (!(seen_neg && seen_pos))
        throw EmptyBoundary("defining function does not change sign inside the box");
    if (out.points.empty())
        throw EmptyBoundary("no boundary points found at this grid pitch");
    return out;
}

/// Recompute II at a boundary point (Hess rho restricted to the tangent frame,
/// divided by |grad rho|).
inline SymForm second_fundamental_form(const ImplicitDomain& d, const BoundaryPoint& b) {
    return detail::boundary_point_data(d, b.x).II;
}

// =====================================================================
// Boundary convexity
// =====================================================================

enum class ConvexityVerdict { not_convex, convex, strictly_convex, free };

inline const char* to_string(ConvexityVerdict v) {
    switch (v) {
        case ConvexityVerdict::not_convex: return "not_convex";
        case ConvexityVerdict::convex: return "convex";
        case ConvexityVerdict::strictly_convex: return "strictly_convex";
        case ConvexityVerdict::free: return "free";
    }
    return "?";
}

struct BoundaryConvexityPoint {
    BoundaryPoint point;
    double min_tangential_trace = kInf;  // +inf when no tangential plane exists
    ConvexityVerdict verdict = ConvexityVerdict::free;
};

struct BoundaryConvexityReport {
    std::vector<BoundaryConvexityPoint> points;
    double min_tangential_trace = kInf;  // over all non-free points
    bool all_strictly_convex = false;
    bool any_not_convex = false;
};

namespace detail {

/// Min of tr_W II over tangential G-planes at one boundary point; +inf when
/// no G-plane is tangential ("free" boundary point). Tangential means
/// ||P_W normal|| <= 1e-6; for the full Grassmannian those are exactly the
/// p-planes of the tangent space, so the minimum is the sum of the p smallest
/// eigenvalues of II.
inline double min_tangential_trace(const ImplicitDomain& d, const GrassmannSet& g,
                                   const BoundaryPoint& b) {
    const int n = d.n;
    switch (g.variant) {
        case GrassmannVariant::FullGrassmannian: {
            if (g.p > n - 1) return kInf;
            const auto [lo, hi] = eigen_partial_sums(b.II, g.p);
            (void)hi;
            return lo;
        }
        case GrassmannVariant::FinitePlanes: {
            double best = kInf;
            const SymForm hess = d.rho.hessian(b.x);
            for (const Plane& w : g.planes) {
                if ((w.projection().matrix() * b.normal).norm() > 1e-6) continue;
                best = std::min(best, trace_pairing(hess, w) / b.grad_norm);
            }
            return best;
        }
        case GrassmannVariant::ComplexLines: {
            // Tangential complex lines live in the J-invariant subspace
            // {normal, J normal}^perp; restrict and extremize there.
            if (n < 4) return kInf;
            const Mat j = complex_structure(n);
            Mat span(n, 2);
            span.col(0) = b.normal;
            span.col(1) = j * b.normal;
            // Orthonormal basis of the complement of span{normal, J normal}.
            Eigen::HouseholderQR<Mat> qr(span);
            Mat q = qr.householderQ();
            const Mat basis = q.rightCols(n - 2);
            const Mat hs = basis.transpose() * d.rho.hessian(b.x).matrix() * basis / b.grad_norm;
            const Mat js = basis.transpose() * j * basis;
            const SymForm m(hs - js * hs * js);
            return m.eigenvalues()(0);
        }
        case GrassmannVariant::FiberField: {
            const auto fiber = fiber_at(g, b.x);
            if (!fiber) return kInf;
            return min_tangential_trace(d, *fiber, b);
        }
    }
    return kInf;
}

}  // namespace detail

/// Per-boundary-point convexity verdicts against G: not_convex when some
/// tangential trace dips below -1e-9, strictly_convex above strict_eta,
/// free when no G-plane is tangential.
inline BoundaryConvexityReport boundary_convexity(const ImplicitDomain& d,
                                                  const GrassmannSet& g,
                                                  double strict_eta,
                                                  double grid_h = 0.1,
                                                  std::uint64_t seed = 1) {
    const BoundarySample bs = sample_boundary(d, grid_h, seed);
    BoundaryConvexityReport rep;
    rep.all_strictly_convex = true;
    for (const BoundaryPoint& b : bs.points) {
        BoundaryConvexityPoint pt;
        pt.point = b;
        pt.min_tangential_trace = detail::min_tangential_trace(d, g, b);
        if (pt.min_tangential_trace == kInf) {
            pt.verdict = ConvexityVerdict::free;
        } else if (pt.min_tangential_trace < -1e-9) {
            pt.verdict = ConvexityVerdict::not_convex;
            rep.any_not_convex = true;
            rep.all_strictly_convex = false;
        } else if (pt.min_tangential_trace > strict_eta) {
            pt.verdict = ConvexityVerdict::strictly_convex;
        } else {
            pt.verdict = ConvexityVerdict::convex;
            rep.all_strictly_convex = false;
        }
        rep.min_tangential_trace = std::min(rep.min_tangential_trace, pt.min_tangential_trace);
        rep.points.push_back(std::move(pt));
    }
    return rep;
}

// =====================================================================
// Global defining function (lambda-doubling construction)
// =====================================================================

struct GlobalDefining {
    double lambda = 0.0;
    double eta = 0.0;           // certified margin: min over G of tr_W Hess rho~ at boundary samples
    ScalarField rho_tilde;
    double residual = 0.0;      // worst defect of the angle decomposition check
};

/// rho~ = rho + (lambda/2) rho^2, with lambda found by doubling from 1 until
/// min over all W in G of tr_W Hess rho~ >= eta_target at every boundary
/// sample (eta_target = half the strict-convexity margin), and additionally
/// tr stays nonnegative one collar_eps inward. Verifies the boundary
/// decomposition tr_V Hess rho~ = tr_V Hess rho + lambda ||P_V grad rho||^2
/// numerically at every sample.
inline GlobalDefining make_global_defining(const ImplicitDomain& d, const GrassmannSet& g,
                                           double collar_eps = 0.1, double grid_h = 0.1,
                                           std::uint64_t seed = 1) {
    const BoundaryConvexityReport conv = boundary_convexity(d, g, 0.0, grid_h, seed);
    if (conv.any_not_convex || !(conv.min_tangential_trace > 0.0))
        throw NotStrictlyConvex("boundary is not strictly convex for this plane family");
    const double eta_target = 0.5 * conv.min_tangential_trace;

    const auto rho_tilde_field = [&d](double lambda) {
        ScalarField f;
        f.dim = d.n;
        const ScalarField rho = d.rho;  // copy of evaluators
        f.eval = [rho, lambda](const Vec& x) {
            const double r = rho.value(x);
            return r + 0.5 * lambda * r * r;
        };
        f.grad = [rho, lambda](const Vec& x) {
            const double r = rho.value(x);
            return Vec((1.0 + lambda * r) * rho.gradient(x));
        };
        f.hess = [rho, lambda](const Vec& x) {
            const double r = rho.value(x);
            const Vec gr = rho.gradient(x);
            return SymForm(Mat((1.0 + lambda * r) * rho.hessian(x).matrix() +
                               lambda * gr * gr.transpose()));
        };
        return f;
    };

    const BoundarySample bs = sample_boundary(d, grid_h, seed);
    double lambda = 1.0;
    const double cap = std::pow(2.0, 40);
    while (true) {
        const ScalarField rt = rho_tilde_field(lambda);
        bool ok = true;
        for (const BoundaryPoint& b : bs.points) {
            if (min_max_trace(g, rt.hessian(b.x), b.x).min_trace < eta_target) { ok = false; break; }
            const Vec inward = b.x + collar_eps * b.normal;
            if (min_max_trace(g, rt.hessian(inward), inward).min_trace < 0.0) { ok = false; break; }
        }
        if (ok) break;
        lambda *= 2.0;
        if (lambda > cap)
            throw LambdaSearchFailed("doubling search exceeded 2^40 without certifying the margin");
    }

    GlobalDefining out;
    out.lambda = lambda;
    out.rho_tilde = rho_tilde_field(lambda);

    // Certified margin and the angle-decomposition residual at the boundary.
    double eta = kInf, residual = 0.0;
    Rng rng(seed + 31);
    for (const BoundaryPoint& b : bs.points) {
        const SymForm ht = out.rho_tilde.hessian(b.x);
        const SymForm h = d.rho.hessian(b.x);
        const Vec gr = d.rho.gradient(b.x);
        eta = std::min(eta, min_max_trace(g, ht, b.x).min_trace);
        for (int k = 0; k < 8; ++k) {
            const Plane v = sample_frames(d.n, std::min(g.p, d.n), 1, rng.raw()()).front();
            const double lhs = trace_pairing(ht, v);
            const double rhs = trace_pairing(h, v) + lambda * (v.projection().matrix() * gr).squaredNorm();
            residual = std::max(residual, std::abs(lhs - rhs));
        }
    }
    out.eta = eta;
    out.residual = residual;
    return out;
}

// =====================================================================
// Exhaustions and compositions
// =====================================================================

/// -log(-rho): finite exactly on the interior, blowing up at the boundary.
inline ScalarField exhaustion_from_defining(const ImplicitDomain& d) {
    ScalarField f;
    f.dim = d.n;
    const ScalarField rho = d.rho;
    f.eval = [rho](const Vec& x) {
        const double r = rho.value(x);
        if (r >= 0.0) throw DomainError("exhaustion evaluated outside the domain");
        return -std::log(-r);
    };
    f.grad = [rho](const Vec& x) {
        const double r = rho.value(x);
        if (r >= 0.0) throw DomainError("exhaustion evaluated outside the domain");
        return Vec(rho.gradient(x) / (-r));
    };
    f.hess = [rho](const Vec& x) {
        const double r = rho.value(x);
        if (r >= 0.0) throw DomainError("exhaustion evaluated outside the domain");
        const Vec g = rho.gradient(x);
        return SymForm(Mat(rho.hessian(x).matrix() / (-r) + g * g.transpose() / (r * r)));
    };
    return f;
}

struct ConvexIncreasing {
    std::function<double(double)> f, d1, d2;
};

/// phi(u) with chain-rule derivatives: grad = phi' grad u and
/// Hess = phi' Hess u + phi'' grad u (x) grad u. Monotonicity/convexity of
/// phi are checked at every evaluation point.
inline ScalarField compose_convex_increasing(const ScalarField& u, const ConvexIncreasing& phi) {
    if (!phi.f || !phi.d1 || !phi.d2)
        throw CompositionRuleViolated("phi needs value, first, and second derivative");
    ScalarField out;
    out.dim = u.dim;
    const ScalarField base = u;
    const auto check = [phi](double t) {
        if (phi.d1(t) < 0.0 || phi.d2(t) < 0.0)
            throw CompositionRuleViolated("phi must be nondecreasing and convex on the range of u");
    };
    out.eval = [base, phi, check](const Vec& x) {
        const double t = base.value(x);
        check(t);
        return phi.f(t);
    };
    out.grad = [base, phi, check](const Vec& x) {
        const double t = base.value(x);
        check(t);
        return Vec(phi.d1(t) * base.gradient(x));
    };
    out.hess = [base, phi, check](const Vec& x) {
        const double t = base.value(x);
        check(t);
        const Vec g = base.gradient(x);
        return SymForm(Mat(phi.d1(t) * base.hessian(x).matrix() +
                           phi.d2(t) * g * g.transpose()));
    };
    return out;
}

/// The C^2 clamp used to glue exhaustions: constant c on (-inf, c-1],
/// identity on [c+1, inf), quartic spline between. Convex and nondecreasing.
inline ConvexIncreasing glue_clamp(double c) {
    ConvexIncreasing phi;
    phi.f = [c](double t) {
        const double s = t - c;
        if (s <= -1.0) return c;
        if (s >= 1.0) return t;
        return c + 3.0 / 16.0 + 0.5 * s + (3.0 / 8.0) * s * s - s * s * s * s / 16.0;
    };
    phi.d1 = [c](double t) {
        const double s = t - c;
        if (s <= -1.0) return 0.0;
        if (s >= 1.0) return 1.0;
        return 0.5 + 0.75 * s - 0.25 * s * s * s;
    };
    phi.d2 = [c](double t) {
        const double s = t - c;
        if (s <= -1.0 || s >= 1.0) return 0.0;
        return 0.75 * (1.0 - s * s);
    };
    return phi;
}

/// Truncate an exhaustion from below at level c, smoothly: equals v where
/// v >= c+1, constant c where v <= c-1.
inline ScalarField glue_exhaustion(const ScalarField& v, double c) {
    return compose_convex_increasing(v, glue_clamp(c));
}

// =====================================================================
// Slice connectivity
// =====================================================================

struct SliceConnectivity {
    bool g_convex = true;
    std::optional<double> witness_slice;
};

/// Rasterize a 2-D domain and count runs of interior cells per horizontal
/// row; connected (one run) in every row means the domain passes the
/// horizontal-line convexity criterion.
inline SliceConnectivity horizontal_slice_connectivity(const ImplicitDomain& d, double grid_h) {
    if (d.n != 2) throw DomainError("slice connectivity is a planar check");
    SliceConnectivity out;
    const int nx = static_cast<int>(std::floor((d.box_hi(0) - d.box_lo(0)) / grid_h));
    const int ny = static_cast<int>(std::floor((d.box_hi(1) - d.box_lo(1)) / grid_h));
    for (int j = 0; j < ny; ++j) {
        const double y = d.box_lo(1) + (j + 0.5) * grid_h;
        int runs = 0;
        bool prev = false;
        for (int i = 0; i < nx; ++i) {
            Vec x(2);
            x << d.box_lo(0) + (i + 0.5) * grid_h, y;
            const bool inside = d.rho.value(x) < 0.0;
            if (inside && !prev) ++runs;
            prev = inside;
        }
        if (runs > 1) {
            out.g_convex = false;
            out.witness_slice = y;
            return out;
        }
    }
    return out;
}

struct LocalSliceConnectivity {
    bool locally_g_convex = true;
    std::optional<Vec> witness_center;
};

/// Local variant: every window of the given radius centered near the boundary
/// must have connected horizontal slices within the window. A domain can pass
/// locally while failing globally.
inline LocalSliceConnectivity local_slice_connectivity(const ImplicitDomain& d, double grid_h,
                                                       double window_radius = 0.5) {
    if (d.n != 2) throw DomainError("slice connectivity is a planar check");
    LocalSliceConnectivity out;
    const int nx = static_cast<int>(std::floor((d.box_hi(0) - d.box_lo(0)) / grid_h));
    const int ny = static_cast<int>(std::floor((d.box_hi(1) - d.box_lo(1)) / grid_h));
    const auto inside = [&](int i, int j) {
        Vec x(2);
        x << d.box_lo(0) + (i + 0.5) * grid_h, d.box_lo(1) + (j + 0.5) * grid_h;
        return i >= 0 && j >= 0 && i < nx && j < ny && d.rho.value(x) < 0.0;
    };
    const int w = static_cast<int>(std::ceil(window_radius / grid_h));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (!inside(i, j)) continue;
            // only boundary-adjacent centers need checking
            if (inside(i - 1, j) && inside(i + 1, j) && inside(i, j - 1) && inside(i, j + 1))
                continue;
            for (int dj = -w; dj <= w; ++dj) {
                const double yoff = dj * grid_h;
                const double span = window_radius * window_radius - yoff * yoff;
                if (span <= 0.0) continue;
                const int di_max = static_cast<int>(std::floor(std::sqrt(span) / grid_h));
                int runs = 0;
                bool prev = false;
                for (int di = -di_max; di <= di_max; ++di) {
                    const bool in = inside(i + di, j + dj);
                    if (in && !prev) ++runs;
                    prev = in;
                }
                if (runs > 1) {
                    out.locally_g_convex = false;
                    Vec c(2);
                    c << d.box_lo(0) + (i + 0.5) * grid_h, d.box_lo(1) + (j + 0.5) * grid_h;
                    out.witness_center = c;
                    return out;
                }
            }
        }
    }
    return out;
}

} // namespace gpsh
