#pragma once

// Monotone wide-stencil machinery on flat lattices: discrete frame traces,
// Bellman Gauss-Seidel solves for functions whose minimal frame trace
// vanishes, envelopes and hulls, and the property harnesses (maximum
// principle, comparison, closure, distributional pairing).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gpsh/forms.hpp"
#include "gpsh/grassmann.hpp"

namespace gpsh {

// =====================================================================
// Lattice and grid functions
// =====================================================================

enum class CellRole : std::uint8_t { exterior = 0, interior = 1, boundary = 2 };

struct Lattice {
    int dim = 2;
    Vec lo, hi;
    double h = 0.1;
    std::array<int, 3> size{1, 1, 1};
    int band = 1;  // boundary layers; must be >= the stencil radius in use
    std::vector<CellRole> role;

    int count() const { return size[0] * size[1] * size[2]; }

    int flat(int i, int j = 0, int k = 0) const { return (k * size[1] + j) * size[0] + i; }

    std::array<int, 3> coords(int f) const {
        std::array<int, 3> c{};
        c[0] = f % size[0];
        c[1] = (f / size[0]) % size[1];
        c[2] = f / (size[0] * size[1]);
        return c;
    }

    Vec point(int f) const {
        const auto c = coords(f);
        Vec x(dim);
        for (int a = 0; a < dim; ++a) x(a) = lo(a) + h * c[a];
        return x;
    }

    /// Flat index of the neighbor at +- d (integer direction); -1 off-grid.
    int step(int f, const std::array<int, 3>& d, int sgn) const {
        auto c = coords(f);
        for (int a = 0; a < 3; ++a) {
            c[a] += sgn * d[a];
            if (c[a] < 0 || c[a] >= size[a]) return -1;
        }
        return flat(c[0], c[1], c[2]);
    }

    static Lattice box(int dim, const Vec& lo, const Vec& hi, double h, int band = 1) {
        if (dim < 1 || dim > 3) throw DimError("lattice dimension must be 1, 2, or 3");
        Lattice l;
        l.dim = dim;
        l.lo = lo;
        l.hi = hi;
        l.h = h;
        l.band = band;
        for (int a = 0; a < dim; ++a) {
            l.size[a] = static_cast<int>(std::round((hi(a) - lo(a)) / h)) + 1;
            if (l.size[a] < 2 * band + 1) throw DimError("lattice too small for the boundary band");
        }
        l.role.assign(static_cast<std::size_t>(l.count()), CellRole::interior);
        for (int f = 0; f < l.count(); ++f) {
            const auto c = l.coords(f);
            for (int a = 0; a < dim; ++a)
                if (c[a] < band || c[a] >= l.size[a] - band) l.role[static_cast<std::size_t>(f)] = CellRole::boundary;
        }
        return l;
    }

    /// Masked lattice: nodes outside the predicate are exterior; designated
    /// boundary is the outer box band intersected with the mask (the layer
    /// carrying Dirichlet data). Interior mask nodes whose stencil leaves the
    /// mask simply have fewer applicable frames.
    static Lattice masked(int dim, const Vec& lo, const Vec& hi, double h,
                          const std::function<bool(const Vec&)>& inside, int band = 1) {
        Lattice l = box(dim, lo, hi, h, band);
        for (int f = 0; f < l.count(); ++f)
            if (!inside(l.point(f))) l.role[static_cast<std::size_t>(f)] = CellRole::exterior;
        return l;
    }
};

struct GridFunction {
    const Lattice* lat = nullptr;
    std::vector<double> v;

    GridFunction() = default;
    explicit GridFunction(const Lattice& l, double fill = 0.0)
        : lat(&l), v(static_cast<std::size_t>(l.count()), fill) {}

    double& operator[](int f) { return v[static_cast<std::size_t>(f)]; }
    double operator[](int f) const { return v[static_cast<std::size_t>(f)]; }

    void fill_from(const std::function<double(const Vec&)>& fn) {
        for (int f = 0; f < lat->count(); ++f)
            if (lat->role[static_cast<std::size_t>(f)] != CellRole::exterior) v[static_cast<std::size_t>(f)] = fn(lat->point(f));
    }
};

// =====================================================================
// Stencils
// =====================================================================

struct StencilFrame {
    std::vector<std::array<int, 3>> dirs;  // p mutually orthogonal integer directions
    std::vector<double> w;                 // 1/|d|^2
    double wsum = 0.0;
};

struct StencilFamily {
    int dim = 2, p = 1, radius = 1;
    std::vector<StencilFrame> frames;
    double dtheta = 0.0;                    // measured angular resolution
    std::vector<double> snap_angles_deg;    // FinitePlanes snap diagnostics
    bool per_point = false;                 // FiberField: frames restricted per node
    std::vector<std::vector<int>> point_frames;

    const std::vector<int>& frames_at(int f) const {
        static const std::vector<int> empty;
        if (!per_point) {
            static thread_local std::vector<int> all;
            if (all.size() != frames.size()) {
                all.resize(frames.size());
                std::iota(all.begin(), all.end(), 0);
            }
            return all;
        }
        return f < static_cast<int>(point_frames.size()) ? point_frames[static_cast<std::size_t>(f)] : empty;
    }
};

namespace detail {

inline int gcd3(const std::array<int, 3>& d) {
    int g = 0;
    for (int a = 0; a < 3; ++a) g = std::gcd(g, std::abs(d[a]));
    return g;
}

/// Primitive integer directions with infinity-norm <= radius, up to sign
/// (first nonzero entry positive), in the given dimension.
inline std::vector<std::array<int, 3>> primitive_directions(int dim, int radius) {
    std::vector<std::array<int, 3>> dirs;
    const int r = radius;
    for (int i = -r; i <= r; ++i)
        for (int j = (dim >= 2 ? -r : 0); j <= (dim >= 2 ? r : 0); ++j)
            for (int k = (dim >= 3 ? -r : 0); k <= (dim >= 3 ? r : 0); ++k) {
                std::array<int, 3> d{i, j, k};
                if (d == std::array<int, 3>{0, 0, 0}) continue;
                int first = 0;
                for (int a = 0; a < 3; ++a)
                    if (d[a] != 0) { first = d[a]; break; }
                if (first < 0) continue;                 // canonical sign
                if (gcd3(d) != 1) continue;              // primitive
                dirs.push_back(d);
            }
    std::sort(dirs.begin(), dirs.end(), [](const auto& a, const auto& b) {
        const int na = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        const int nb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
        if (na != nb) return na < nb;
        return a < b;
    });
    return dirs;
}

inline int dot3(const std::array<int, 3>& a, const std::array<int, 3>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline StencilFrame make_frame(const std::vector<std::array<int, 3>>& dirs) {
    StencilFrame f;
    f.dirs = dirs;
    for (const auto& d : dirs) {
        f.w.push_back(1.0 / dot3(d, d));
        f.wsum += f.w.back();
    }
    return f;
}

/// Key identifying the plane spanned by a frame (quantized projection).
inline std::string span_key(const StencilFrame& fr, int dim) {
    Mat p = Mat::Zero(dim, dim);
    for (std::size_t i = 0; i < fr.dirs.size(); ++i) {
        Vec d(dim);
        for (int a = 0; a < dim; ++a) d(a) = fr.dirs[i][static_cast<std::size_t>(a)];
        p += d * d.transpose() / d.squaredNorm();
    }
    std::string key;
    key.reserve(static_cast<std::size_t>(dim * dim * 8));
    char buf[24];
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof buf, "%.6f,", p(i, j) + 0.0);
            key += buf;
        }
    return key;
}

/// All mutually orthogonal p-tuples of stencil directions, one frame per
/// distinct spanned plane (first hit wins; directions are pre-sorted so axis
/// frames take precedence).
inline std::vector<StencilFrame> orthogonal_frames(int dim, int p, int radius) {
    const auto dirs = primitive_directions(dim, radius);
    std::vector<StencilFrame> frames;
    std::map<std::string, bool> seen;
    std::vector<int> pick;
    const std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(pick.size()) == p) {
            std::vector<std::array<int, 3>> sel;
            for (int idx : pick) sel.push_back(dirs[static_cast<std::size_t>(idx)]);
            StencilFrame fr = make_frame(sel);
            const std::string key = span_key(fr, dim);
            if (!seen.count(key)) {
                seen[key] = true;
                frames.push_back(std::move(fr));
            }
            return;
        }
        for (int i = start; i < static_cast<int>(dirs.size()); ++i) {
            bool ortho = true;
            for (int idx : pick)
                if (dot3(dirs[static_cast<std::size_t>(idx)], dirs[static_cast<std::size_t>(i)]) != 0) ortho = false;
            if (!ortho) continue;
            pick.push_back(i);
            rec(i + 1);
            pick.pop_back();
        }
    };
    rec(0);
    return frames;
}

inline Plane frame_plane(const StencilFrame& fr, int dim) {
    Mat f(dim, static_cast<Eigen::Index>(fr.dirs.size()));
    for (std::size_t i = 0; i < fr.dirs.size(); ++i) {
        for (int a = 0; a < dim; ++a) f(a, static_cast<Eigen::Index>(i)) = fr.dirs[i][static_cast<std::size_t>(a)];
        f.col(static_cast<Eigen::Index>(i)).normalize();
    }
    return projection_from_frame(f);
}

/// Largest principal angle between two p-planes, in degrees.
inline double max_principal_angle_deg(const Plane& a, const Plane& b) {
    Eigen::JacobiSVD<Mat> svd(a.frame().transpose() * b.frame());
    const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

/// Measured angular resolution: the worst distance from a random plane (or,
/// for p = 1 in 2-D, the exact half-gap between direction angles).
inline double measure_dtheta(const std::vector<StencilFrame>& frames, int dim, int p) {
    if (dim == 2 && p == 1) {
        std::vector<double> angles;
        for (const auto& fr : frames) {
            const double a = std::atan2(static_cast<double>(fr.dirs[0][1]), static_cast<double>(fr.dirs[0][0]));
            angles.push_back(a);
            angles.push_back(a + M_PI);
            angles.push_back(a - M_PI);
        }
        std::sort(angles.begin(), angles.end());
        double gap = 0.0;
        for (std::size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
        return 0.5 * gap;
    }
    std::vector<Plane> planes;
    for (const auto& fr : frames) planes.push_back(frame_plane(fr, dim));
    const auto probes = sample_frames(dim, p, 512, 20240u);
    double worst = 0.0;
    for (const Plane& q : probes) {
        double best = 180.0;
        for (const Plane& w : planes) best = std::min(best, max_principal_angle_deg(q, w));
        worst = std::max(worst, best);
    }
    return worst * M_PI / 180.0;
}

}  // namespace detail

/// Discretize the plane family on a lattice: full families enumerate all
/// orthogonal integer frames up to the radius (deduplicated by span); finite
/// families snap each plane to the nearest integer frame (snap angle capped
/// at 25 degrees); fibered families restrict the frame list per node.
inline StencilFamily build_stencil(const GrassmannSet& g, const Lattice& lat, int radius) {
    if (radius < 1 || radius > 3) throw StencilResolutionError("stencil radius must be 1, 2, or 3");
    StencilFamily s;
    s.dim = lat.dim;
    s.radius = radius;

    if (g.variant == GrassmannVariant::ComplexLines)
        throw StencilResolutionError("complex-line families have no integer-frame discretization here");

    if (g.variant == GrassmannVariant::FullGrassmannian) {
        if (g.n != lat.dim) throw DimError("build_stencil: family/lattice dimension mismatch");
        s.p = g.p;
        s.frames = detail::orthogonal_frames(lat.dim, g.p, radius);
        if (s.frames.empty()) throw StencilResolutionError("no orthogonal frames at this radius");
        s.dtheta = detail::measure_dtheta(s.frames, lat.dim, g.p);
        return s;
    }

    if (g.variant == GrassmannVariant::FinitePlanes) {
        if (g.n != lat.dim) throw DimError("build_stencil: family/lattice dimension mismatch");
        s.p = g.p;
        const auto pool = detail::orthogonal_frames(lat.dim, g.p, 3);
        std::vector<Plane> pool_planes;
        for (const auto& fr : pool) pool_planes.push_back(detail::frame_plane(fr, lat.dim));
        std::map<std::string, bool> seen;
        for (const Plane& w : g.planes) {
            double best = 1e9;
            int best_i = -1;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                // only frames within the requested radius are admissible
                bool within = true;
                for (const auto& d : pool[i].dirs)
                    for (int a = 0; a < 3; ++a) within = within && std::abs(d[a]) <= radius;
                if (!within) continue;
                const double ang = detail::max_principal_angle_deg(w, pool_planes[i]);
                if (ang < best) {
                    best = ang;
                    best_i = static_cast<int>(i);
                }
            }
            if (best_i < 0 || best > 25.0)
                throw StencilResolutionError("a plane lies more than 25 degrees from every integer frame");
            s.snap_angles_deg.push_back(best);
            const std::string key = detail::span_key(pool[static_cast<std::size_t>(best_i)], lat.dim);
            if (!seen.count(key)) {
                seen[key] = true;
                s.frames.push_back(pool[static_cast<std::size_t>(best_i)]);
            }
        }
        s.dtheta = s.snap_angles_deg.empty()
                       ? 0.0
                       : *std::max_element(s.snap_angles_deg.begin(), s.snap_angles_deg.end()) * M_PI / 180.0;
        return s;
    }

    // FiberField: snap each fiber per node.
    if (g.base_dim != lat.dim) throw DimError("build_stencil: fiber base/lattice dimension mismatch");
    s.p = g.p;
    s.per_point = true;
    const auto pool = detail::orthogonal_frames(lat.dim, g.p, radius);
    std::vector<Plane> pool_planes;
    for (const auto& fr : pool) pool_planes.push_back(detail::frame_plane(fr, lat.dim));
    std::map<std::string, int> frame_index;
    s.point_frames.assign(static_cast<std::size_t>(lat.count()), {});
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] == CellRole::exterior) continue;
        const auto fiber = fiber_at(g, lat.point(f));
        if (!fiber) continue;
        if (fiber->variant != GrassmannVariant::FinitePlanes)
            throw StencilResolutionError("only finite fibers are discretized per node");
        for (const Plane& w : fiber->planes) {
            double best = 1e9;
            int best_i = -1;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const double ang = detail::max_principal_angle_deg(w, pool_planes[i]);
                if (ang < best) {
                    best = ang;
                    best_i = static_cast<int>(i);
                }
            }
            if (best_i < 0 || best > 25.0)
                throw StencilResolutionError("a fiber plane lies more than 25 degrees from every integer frame");
            const std::string key = detail::span_key(pool[static_cast<std::size_t>(best_i)], lat.dim);
            auto it = frame_index.find(key);
            int idx;
            if (it == frame_index.end()) {
                idx = static_cast<int>(s.frames.size());
                frame_index[key] = idx;
                s.frames.push_back(pool[static_cast<std::size_t>(best_i)]);
            } else {
                idx = it->second;
            }
            auto& list = s.point_frames[static_cast<std::size_t>(f)];
            if (std::find(list.begin(), list.end(), idx) == list.end()) list.push_back(idx);
        }
    }
    return s;
}

// =====================================================================
// Discrete traces and the Bellman update
// =====================================================================

namespace detail {

inline bool frame_applicable(const Lattice& lat, const StencilFrame& fr, int f) {
    for (const auto& d : fr.dirs) {
        const int up = lat.step(f, d, +1);
        const int dn = lat.step(f, d, -1);
        if (up < 0 || dn < 0) return false;
        if (lat.role[static_cast<std::size_t>(up)] == CellRole::exterior ||
            lat.role[static_cast<std::size_t>(dn)] == CellRole::exterior)
            return false;
    }
    return true;
}

inline double frame_trace(const GridFunction& u, const StencilFrame& fr, int f) {
    const Lattice& lat = *u.lat;
    double tr = 0.0;
    for (std::size_t i = 0; i < fr.dirs.size(); ++i) {
        const int up = lat.step(f, fr.dirs[i], +1);
        const int dn = lat.step(f, fr.dirs[i], -1);
        tr += (u[up] + u[dn] - 2.0 * u[f]) * fr.w[i];
    }
    return tr / (lat.h * lat.h);
}

inline double bellman_average(const GridFunction& u, const StencilFrame& fr, int f) {
    const Lattice& lat = *u.lat;
    double acc = 0.0;
    for (std::size_t i = 0; i < fr.dirs.size(); ++i) {
        const int up = lat.step(f, fr.dirs[i], +1);
        const int dn = lat.step(f, fr.dirs[i], -1);
        acc += (u[up] + u[dn]) * fr.w[i];
    }
    return acc / (2.0 * fr.wsum);
}

}  // namespace detail

struct DiscreteTrace {
    double min_val = kInf;
    double max_val = -kInf;
    int argmin = -1;
    int argmax = -1;
    int applicable = 0;
};

/// Min and max of the discrete frame traces of u at an interior node
/// (the discrete versions of the minimal and maximal W-traces of Hess u).
inline DiscreteTrace discrete_operator(const GridFunction& u, const StencilFamily& s, int f) {
    DiscreteTrace out;
    const Lattice& lat = *u.lat;
    for (int fi : s.frames_at(f)) {
        const StencilFrame& fr = s.frames[static_cast<std::size_t>(fi)];
        if (!detail::frame_applicable(lat, fr, f)) continue;
        const double tr = detail::frame_trace(u, fr, f);
        ++out.applicable;
        if (tr < out.min_val) {
            out.min_val = tr;
            out.argmin = fi;
        }
        if (tr > out.max_val) {
            out.max_val = tr;
            out.argmax = fi;
        }
    }
    return out;
}

// =====================================================================
// Solver plans (precomputed neighbor lists for tight sweeps)
// =====================================================================

namespace detail {

struct PlanFrame {
    std::vector<int> up, dn;  // neighbor flats per direction
    std::vector<double> w;
    double wsum = 0.0;
};

struct PlanNode {
    int f = -1;
    std::vector<PlanFrame> frames;
};

inline std::vector<PlanNode> build_plan(const Lattice& lat, const StencilFamily& s) {
    std::vector<PlanNode> plan;
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] != CellRole::interior) continue;
        PlanNode node;
        node.f = f;
        for (int fi : s.frames_at(f)) {
            const StencilFrame& fr = s.frames[static_cast<std::size_t>(fi)];
            if (!frame_applicable(lat, fr, f)) continue;
            PlanFrame pf;
            pf.w = fr.w;
            pf.wsum = fr.wsum;
            for (const auto& d : fr.dirs) {
                pf.up.push_back(lat.step(f, d, +1));
                pf.dn.push_back(lat.step(f, d, -1));
            }
            node.frames.push_back(std::move(pf));
        }
        if (!node.frames.empty()) plan.push_back(std::move(node));
    }
    return plan;
}

inline double plan_min_average(const std::vector<double>& u, const PlanNode& node) {
    double best = kInf;
    for (const auto& fr : node.frames) {
        double acc = 0.0;
        for (std::size_t i = 0; i < fr.up.size(); ++i)
            acc += (u[static_cast<std::size_t>(fr.up[i])] + u[static_cast<std::size_t>(fr.dn[i])]) * fr.w[i];
        best = std::min(best, acc / (2.0 * fr.wsum));
    }
    return best;
}

inline double plan_max_average(const std::vector<double>& u, const PlanNode& node) {
    double best = -kInf;
    for (const auto& fr : node.frames) {
        double acc = 0.0;
        for (std::size_t i = 0; i < fr.up.size(); ++i)
            acc += (u[static_cast<std::size_t>(fr.up[i])] + u[static_cast<std::size_t>(fr.dn[i])]) * fr.w[i];
        best = std::max(best, acc / (2.0 * fr.wsum));
    }
    return best;
}

/// Symmetric (lex then reverse) sweeps of u <- op(u) until the largest
/// per-node change drops to tol. Returns {residual, sweeps}.
template <typename Update>
inline std::pair<double, int> sweep_to_fixed_point(std::vector<double>& u,
                                                   const std::vector<PlanNode>& plan,
                                                   Update&& update, double tol, int max_sweeps,
                                                   bool jacobi,
                                                   std::vector<double>* history = nullptr) {
    double change = kInf;
    int sweeps = 0;
    std::vector<double> old;
    while (sweeps < max_sweeps) {
        change = 0.0;
        ++sweeps;
        if (jacobi) {
            old = u;
            for (const auto& node : plan) {
                const double nu = update(old, node);
                change = std::max(change, std::abs(nu - u[static_cast<std::size_t>(node.f)]));
                u[static_cast<std::size_t>(node.f)] = nu;
            }
        } else {
            for (auto it = plan.begin(); it != plan.end(); ++it) {
                const double nu = update(u, *it);
                change = std::max(change, std::abs(nu - u[static_cast<std::size_t>(it->f)]));
                u[static_cast<std::size_t>(it->f)] = nu;
            }
            for (auto it = plan.rbegin(); it != plan.rend(); ++it) {
                const double nu = update(u, *it);
                change = std::max(change, std::abs(nu - u[static_cast<std::size_t>(it->f)]));
                u[static_cast<std::size_t>(it->f)] = nu;
            }
        }
        if (history) history->push_back(change);
        if (change <= tol) break;
    }
    return {change, sweeps};
}

}  // namespace detail

// =====================================================================
// Dirichlet solve
// =====================================================================

struct SolveOptions {
    double tol = 1e-10;
    int max_sweeps = 100000;
    bool jacobi = false;
    int radius = 2;
    bool keep_history = false;
};

struct SolveResult {
    GridFunction u;
    double residual = 0.0;
    int sweeps = 0;
    bool mp_warning = false;  // family does not involve all variables
    double min_trace_lo = 0.0, min_trace_hi = 0.0;  // range of discrete min-traces at the end
    std::vector<double> residual_history;
    double dtheta = 0.0;
};

/// Bellman Gauss-Seidel for the discrete boundary problem "minimal frame
/// trace = 0": at each interior node the update replaces u by the smallest
/// weighted frame average. Monotone, hence comparison holds sweep by sweep.
inline SolveResult solve_dirichlet(const GridFunction& g, const GrassmannSet& fam,
                                   const Lattice& lat, const SolveOptions& opts = {}) {
    SolveResult res;
    try {
        res.mp_warning = !span_analysis(fam, fam.variant == GrassmannVariant::FiberField
                                                 ? std::optional<Vec>(lat.point(lat.count() / 2))
                                                 : std::nullopt)
                              .involves_all;
    } catch (const Error&) {
        res.mp_warning = true;
    }
    const StencilFamily s = build_stencil(fam, lat, opts.radius);
    const auto plan = detail::build_plan(lat, s);
    res.u = g;
    res.dtheta = s.dtheta;
    // Converge in trace units: a per-node change below tol/(2 max wsum)
    // guarantees |min frame trace| <= tol/h^2 at the fixed point.
    double wsum_max = 1.0;
    for (const auto& fr : s.frames) wsum_max = std::max(wsum_max, fr.wsum);
    const double eff_tol = opts.tol / (2.0 * wsum_max);
    auto [residual, sweeps] = detail::sweep_to_fixed_point(
        res.u.v, plan,
        [](const std::vector<double>& u, const detail::PlanNode& n) { return detail::plan_min_average(u, n); },
        eff_tol, opts.max_sweeps, opts.jacobi, opts.keep_history ? &res.residual_history : nullptr);
    res.residual = residual;
    res.sweeps = sweeps;
    if (residual > eff_tol)
        throw NotConverged("solve_dirichlet stalled at residual " + std::to_string(residual));
    res.min_trace_lo = kInf;
    res.min_trace_hi = -kInf;
    for (const auto& node : plan) {
        const DiscreteTrace t = discrete_operator(res.u, s, node.f);
        res.min_trace_lo = std::min(res.min_trace_lo, t.min_val);
        res.min_trace_hi = std::max(res.min_trace_hi, t.min_val);
    }
    return res;
}

// =====================================================================
// Envelopes and hulls
// =====================================================================

/// Largest grid function below the obstacle whose discrete frame traces are
/// all nonnegative: iterate u <- min(obstacle, smallest frame average).
inline GridFunction psh_envelope(const GridFunction& obstacle, const GrassmannSet& fam,
                                 const Lattice& lat, const SolveOptions& opts = {}) {
    const StencilFamily s = build_stencil(fam, lat, opts.radius);
    const auto plan = detail::build_plan(lat, s);
    GridFunction u = obstacle;
    const std::vector<double>& obs = obstacle.v;
    auto [residual, sweeps] = detail::sweep_to_fixed_point(
        u.v, plan,
        [&obs](const std::vector<double>& uu, const detail::PlanNode& n) {
            return std::min(obs[static_cast<std::size_t>(n.f)], detail::plan_min_average(uu, n));
        },
        opts.tol, opts.max_sweeps, opts.jacobi, nullptr);
    (void)sweeps;
    if (residual > opts.tol)
        throw NotConverged("psh_envelope stalled at residual " + std::to_string(residual));
    return u;
}

struct HullResult {
    std::vector<std::uint8_t> mask;  // 1 where the hull lives
    GridFunction w;                  // the envelope certificate
    std::vector<std::pair<double, int>> threshold_sweep;  // (threshold, cells)
};

/// Hull of a node set K: envelope of the indicator obstacle (0 on K, 1
/// elsewhere including the boundary band), thresholded at `threshold`.
inline HullResult hull(const std::vector<std::uint8_t>& k_mask, const GrassmannSet& fam,
                       const Lattice& lat, double threshold = 0.05,
                       const SolveOptions& opts = {}) {
    if (static_cast<int>(k_mask.size()) != lat.count()) throw DimError("hull: mask size mismatch");
    bool any = false;
    for (int f = 0; f < lat.count(); ++f)
        any = any || (k_mask[static_cast<std::size_t>(f)] &&
                      lat.role[static_cast<std::size_t>(f)] == CellRole::interior);
    if (!any) throw DomainError("hull: K is empty or entirely outside the interior");
    GridFunction obstacle(lat, 1.0);
    for (int f = 0; f < lat.count(); ++f)
        if (k_mask[static_cast<std::size_t>(f)]) obstacle[f] = 0.0;
    HullResult out;
    out.w = psh_envelope(obstacle, fam, lat, opts);
    out.mask.assign(static_cast<std::size_t>(lat.count()), 0);
    for (int f = 0; f < lat.count(); ++f)
        if (lat.role[static_cast<std::size_t>(f)] != CellRole::exterior && out.w[f] <= threshold)
            out.mask[static_cast<std::size_t>(f)] = 1;
    for (double th : {0.2, 0.1, 0.05, 0.025}) {
        int cells = 0;
        for (int f = 0; f < lat.count(); ++f)
            if (lat.role[static_cast<std::size_t>(f)] != CellRole::exterior && out.w[f] <= th) ++cells;
        out.threshold_sweep.emplace_back(th, cells);
    }
    return out;
}

// =====================================================================
// Property harnesses
// =====================================================================

struct MaxPrincipleReport {
    int violations = 0;
    double worst_gap = -kInf;  // max over trials of interior max - boundary max
    int trials = 0;
};

/// Random grid functions forced dually subharmonic (u <- min(u, largest
/// frame average) to a fixed point), then interior max compared against the
/// designated boundary max. For families involving all variables on a full
/// box this is violation-free; fibered/partial families on masked domains
/// can leave nodes uncontrolled, and violations are reported, not hidden.
inline MaxPrincipleReport max_principle_check(const GrassmannSet& fam, const Lattice& lat,
                                              int trials, std::uint64_t seed,
                                              const SolveOptions& opts = {}) {
    const StencilFamily s = build_stencil(fam, lat, opts.radius);
    const auto plan = detail::build_plan(lat, s);
    MaxPrincipleReport rep;
    rep.trials = trials;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        GridFunction u(lat, 0.0);
        for (int f = 0; f < lat.count(); ++f)
            if (lat.role[static_cast<std::size_t>(f)] != CellRole::exterior) u[f] = rng.uniform();
        detail::sweep_to_fixed_point(
            u.v, plan,
            [](const std::vector<double>& uu, const detail::PlanNode& n) {
                return std::min(uu[static_cast<std::size_t>(n.f)], detail::plan_max_average(uu, n));
            },
            1e-13, 20000, false, nullptr);
        double imax = -kInf, bmax = -kInf;
        for (int f = 0; f < lat.count(); ++f) {
            if (lat.role[static_cast<std::size_t>(f)] == CellRole::interior) imax = std::max(imax, u[f]);
            if (lat.role[static_cast<std::size_t>(f)] == CellRole::boundary) bmax = std::max(bmax, u[f]);
        }
        const double gap = imax - bmax;
        rep.worst_gap = std::max(rep.worst_gap, gap);
        if (gap > 1e-9) ++rep.violations;
    }
    return rep;
}

/// Zero-maximum comparison: u discretely subharmonic, v discretely dually
/// subharmonic, u+v <= 0 on the boundary implies u+v <= 0 inside. Membership
/// preconditions are verified from the discrete traces.
inline bool comparison_check(const GridFunction& u, const GridFunction& v,
                             const GrassmannSet& fam, const Lattice& lat,
                             const SolveOptions& opts = {}) {
    const StencilFamily s = build_stencil(fam, lat, opts.radius);
    const double slack = 1e-7 / (lat.h * lat.h);
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] != CellRole::interior) continue;
        const DiscreteTrace tu = discrete_operator(u, s, f);
        const DiscreteTrace tv = discrete_operator(v, s, f);
        if (tu.applicable == 0) continue;
        if (tu.min_val < -slack) {
            const auto c = lat.coords(f);
            throw PreconditionFailed("u is not discretely subharmonic at node (" +
                                     std::to_string(c[0]) + "," + std::to_string(c[1]) + "," +
                                     std::to_string(c[2]) + ")");
        }
        if (tv.max_val < -slack) {
            const auto c = lat.coords(f);
            throw PreconditionFailed("v is not discretely dually subharmonic at node (" +
                                     std::to_string(c[0]) + "," + std::to_string(c[1]) + "," +
                                     std::to_string(c[2]) + ")");
        }
    }
    double bmax = -kInf, imax = -kInf;
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] == CellRole::boundary) bmax = std::max(bmax, u[f] + v[f]);
        if (lat.role[static_cast<std::size_t>(f)] == CellRole::interior) imax = std::max(imax, u[f] + v[f]);
    }
    if (bmax > 1e-12) return true;  // hypothesis empty; implication vacuous
    return imax <= 1e-9;
}

/// Force a random grid function to be discretely subharmonic for the family
/// (used by the property harnesses below).
inline GridFunction random_psh(const GrassmannSet& fam, const Lattice& lat, Rng& rng,
                               const SolveOptions& opts = {}) {
    const StencilFamily s = build_stencil(fam, lat, opts.radius);
    const auto plan = detail::build_plan(lat, s);
    GridFunction u(lat, 0.0);
    for (int f = 0; f < lat.count(); ++f)
        if (lat.role[static_cast<std::size_t>(f)] != CellRole::exterior) u[f] = rng.uniform(-1.0, 1.0);
    detail::sweep_to_fixed_point(
        u.v, plan,
        [](const std::vector<double>& uu, const detail::PlanNode& n) {
            return std::min(uu[static_cast<std::size_t>(n.f)], detail::plan_min_average(uu, n));
        },
        1e-13, 20000, false, nullptr);
    return u;
}

struct ClosureReport {
    bool max_stable = true;        // pointwise max of two members stays a member
    bool decreasing_stable = true; // decreasing limits of members stay members (constant fibers)
    bool uniform_stable = true;    // uniform limits stay members
    bool envelope_stable = true;   // sups of bounded finite families stay members
    double worst_trace = 0.0;      // most negative min-trace seen across all checks
};

/// Closure properties of the discrete membership on random functions.
inline ClosureReport closure_properties_check(const GrassmannSet& fam, const Lattice& lat,
                                              std::uint64_t seed, int pairs = 100,
                                              const SolveOptions& opts = {}) {
    const StencilFamily s = build_stencil(fam, lat, opts.radius);
    Rng rng(seed);
    ClosureReport rep;
    const double slack = 1e-9 / (lat.h * lat.h);
    const auto min_trace_ok = [&](const GridFunction& w) {
        double worst = 0.0;
        for (int f = 0; f < lat.count(); ++f) {
            if (lat.role[static_cast<std::size_t>(f)] != CellRole::interior) continue;
            const DiscreteTrace t = discrete_operator(w, s, f);
            if (t.applicable > 0) worst = std::min(worst, t.min_val);
        }
        rep.worst_trace = std::min(rep.worst_trace, worst);
        return worst >= -slack;
    };
    for (int k = 0; k < pairs; ++k) {
        GridFunction a = random_psh(fam, lat, rng, opts);
        GridFunction b = random_psh(fam, lat, rng, opts);
        GridFunction mx = a;
        for (int f = 0; f < lat.count(); ++f) mx[f] = std::max(a[f], b[f]);
        if (!min_trace_ok(mx)) rep.max_stable = false;

        // decreasing sequence a + c_k with c_k down to 0: members all along,
        // and the pointwise limit is a itself
        GridFunction lim = a;
        for (double c : {1.0, 0.5, 0.25, 0.125}) {
            GridFunction shifted = a;
            for (int f = 0; f < lat.count(); ++f) shifted[f] += c;
            if (!min_trace_ok(shifted)) rep.decreasing_stable = false;
        }
        if (!min_trace_ok(lim)) rep.decreasing_stable = false;

        // uniform limit of a + eps_k * b0 with b0 a fixed member
        for (double eps : {0.1, 0.01, 0.001}) {
            GridFunction mix = a;
            for (int f = 0; f < lat.count(); ++f) mix[f] += eps * b[f];
            if (!min_trace_ok(mix)) rep.uniform_stable = false;
        }

        // envelope (sup) of a small bounded family
        GridFunction c = random_psh(fam, lat, rng, opts);
        GridFunction sup = a;
        for (int f = 0; f < lat.count(); ++f) sup[f] = std::max({a[f], b[f], c[f]});
        if (!min_trace_ok(sup)) rep.envelope_stable = false;
    }
    return rep;
}

struct Ex66Report {
    bool members_subharmonic = true;   // every shifted function passes on its fiber family
    bool monotone_decreasing = true;   // the family decreases to the limit
    bool limit_fails = false;          // the limit violates membership at the crease
    double limit_second_diff = 0.0;    // offending allowed-direction second difference
};

/// The one-dimensional decreasing-limit counterexample: the fiber family
/// constrains convexity only on x >= 0; left-shifted copies u(x+delta)+delta
/// are all constrained-convex, decrease as delta drops, yet the limit has a
/// negative allowed-direction second difference at x = 0.
inline Ex66Report ex66_closure_failure(double h = 1.0 / 64.0) {
    Vec lo(1), hi(1);
    lo << -1.0;
    hi << 1.0;
    const Lattice lat = Lattice::box(1, lo, hi, h, 1);
    const GrassmannSet fam = GrassmannSet::fiber_field("ex6.6");
    SolveOptions opts;
    opts.radius = 1;
    const StencilFamily s = build_stencil(fam, lat, opts.radius);

    const auto base = [](double x) { return x >= 0.0 ? 0.0 : x * (1.0 - x); };
    const auto shifted = [&](double delta) {
        GridFunction u(lat, 0.0);
        u.fill_from([&](const Vec& x) { return base(x(0) + delta) + delta; });
        return u;
    };

    Ex66Report rep;
    const std::vector<double> deltas{8 * h, 4 * h, 2 * h, h};
    GridFunction prev = shifted(deltas.front());
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        const GridFunction u = shifted(deltas[k]);
        for (int f = 0; f < lat.count(); ++f) {
            if (lat.role[static_cast<std::size_t>(f)] != CellRole::interior) continue;
            const DiscreteTrace t = discrete_operator(u, s, f);
            if (t.applicable > 0 && t.min_val < -1e-9) rep.members_subharmonic = false;
        }
        if (k > 0)
            for (int f = 0; f < lat.count(); ++f)
                if (u[f] > prev[f] + 1e-12) rep.monotone_decreasing = false;
        prev = u;
    }
    GridFunction limit(lat, 0.0);
    limit.fill_from([&](const Vec& x) { return base(x(0)); });
    double worst = kInf;
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] != CellRole::interior) continue;
        const DiscreteTrace t = discrete_operator(limit, s, f);
        if (t.applicable > 0) worst = std::min(worst, t.min_val);
    }
    rep.limit_second_diff = worst;
    rep.limit_fails = worst < -1e-9;
    return rep;
}

// =====================================================================
// Distributional pairing
// =====================================================================

struct DistributionalReport {
    double min_pairing = kInf;
    int bumps = 0;
};

/// Nonnegative-coefficient expansion of A(x) over the stencil frame planes at
/// every interior node (the positive-hull certificate).
inline std::vector<Vec> hull_coordinate_field(const std::function<SymForm(const Vec&)>& a_field,
                                              const StencilFamily& s, const Lattice& lat,
                                              double tol = 1e-6) {
    std::vector<Plane> planes;
    for (const auto& fr : s.frames) planes.push_back(detail::frame_plane(fr, lat.dim));
    std::vector<Vec> coords(static_cast<std::size_t>(lat.count()));
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] == CellRole::exterior) continue;
        coords[static_cast<std::size_t>(f)] = positive_hull_coordinates(a_field(lat.point(f)), planes, tol);
    }
    return coords;
}

/// Direct-side evaluation of the pairing for one bump center: sum over the
/// support of phi(x) * t_F(x) * trace_F(u, x), weighted by the cell volume.
/// Returns nullopt when the bump support leaves the interior.
inline std::optional<double> direct_pairing_at(const GridFunction& u,
                                               const std::vector<Vec>& coords,
                                               const StencilFamily& s, const Lattice& lat,
                                               double mollifier_radius, int center) {
    const int rcells = static_cast<int>(std::ceil(mollifier_radius / lat.h));
    const double hn = std::pow(lat.h, lat.dim);
    double pairing = 0.0;
    for (int dz = (lat.dim >= 3 ? -rcells : 0); dz <= (lat.dim >= 3 ? rcells : 0); ++dz)
        for (int dy = (lat.dim >= 2 ? -rcells : 0); dy <= (lat.dim >= 2 ? rcells : 0); ++dy)
            for (int dx = -rcells; dx <= rcells; ++dx) {
                const std::array<int, 3> off{dx, dy, dz};
                const int f = lat.step(center, off, +1);
                if (f < 0 || lat.role[static_cast<std::size_t>(f)] != CellRole::interior)
                    return std::nullopt;
                const double r2 = (dx * dx + dy * dy + dz * dz) * lat.h * lat.h;
                const double q = 1.0 - r2 / (mollifier_radius * mollifier_radius);
                if (q <= 0.0) continue;
                const double phi = q * q;
                const Vec& t = coords[static_cast<std::size_t>(f)];
                for (int fi : s.frames_at(f)) {
                    if (t(fi) == 0.0) continue;
                    pairing += phi * t(fi) * detail::frame_trace(u, s.frames[static_cast<std::size_t>(fi)], f);
                }
            }
    return pairing * hn;
}

/// Discrete adjoint pairing <u, L_A* bump> over a family of nonnegative test
/// bumps, where L_A is the frame-trace operator with coefficients t_F(x) from
/// the positive-hull expansion; for discretely subharmonic u the pairing is
/// nonnegative up to roundoff. Summation by parts makes the direct-side sum
/// equal to the adjoint-side one, so the cheap side is evaluated here.
inline DistributionalReport distributional_pairing(const GridFunction& u,
                                                   const std::vector<Vec>& coords,
                                                   const StencilFamily& s, const Lattice& lat,
                                                   double mollifier_radius) {
    const int rcells = static_cast<int>(std::ceil(mollifier_radius / lat.h));
    const int margin = rcells + s.radius;
    DistributionalReport rep;
    for (int cf = 0; cf < lat.count(); ++cf) {
        const auto cc = lat.coords(cf);
        bool ok = lat.role[static_cast<std::size_t>(cf)] == CellRole::interior;
        for (int a = 0; a < lat.dim && ok; ++a)
            ok = cc[a] >= lat.band + margin && cc[a] < lat.size[a] - lat.band - margin;
        if (!ok) continue;
        const auto pairing = direct_pairing_at(u, coords, s, lat, mollifier_radius, cf);
        if (!pairing) continue;
        ++rep.bumps;
        rep.min_pairing = std::min(rep.min_pairing, *pairing);
    }
    return rep;
}

/// Adjoint-side evaluation of the same pairing for one bump center: applies
/// the frozen-coefficient stencil to t*phi and sums against u. Used to check
/// the summation-by-parts identity explicitly.
inline double adjoint_pairing_at(const GridFunction& u, const std::vector<Vec>& coords,
                                 const StencilFamily& s, const Lattice& lat,
                                 double mollifier_radius, int center) {
    const int rcells = static_cast<int>(std::ceil(mollifier_radius / lat.h));
    const int reach = rcells + s.radius;
    const double hn = std::pow(lat.h, lat.dim);
    const auto phi_at = [&](int f) {
        if (f < 0) return 0.0;
        const auto a = lat.coords(f);
        const auto b = lat.coords(center);
        double r2 = 0.0;
        for (int d = 0; d < lat.dim; ++d) r2 += (a[d] - b[d]) * (a[d] - b[d]) * lat.h * lat.h;
        const double q = 1.0 - r2 / (mollifier_radius * mollifier_radius);
        return q > 0.0 ? q * q : 0.0;
    };
    const auto tphi = [&](int f, int fi) {
        if (f < 0) return 0.0;
        const double phi = phi_at(f);
        if (phi == 0.0) return 0.0;
        return coords[static_cast<std::size_t>(f)](fi)*phi;
    };
    double total = 0.0;
    for (int dz = (lat.dim >= 3 ? -reach : 0); dz <= (lat.dim >= 3 ? reach : 0); ++dz)
        for (int dy = (lat.dim >= 2 ? -reach : 0); dy <= (lat.dim >= 2 ? reach : 0); ++dy)
            for (int dx = -reach; dx <= reach; ++dx) {
                const std::array<int, 3> off{dx, dy, dz};
                const int f = lat.step(center, off, +1);
                if (f < 0) continue;
                double adj = 0.0;
                for (int fi : s.frames_at(f)) {
                    const StencilFrame& fr = s.frames[static_cast<std::size_t>(fi)];
                    for (std::size_t i = 0; i < fr.dirs.size(); ++i) {
                        const int up = lat.step(f, fr.dirs[i], +1);
                        const int dn = lat.step(f, fr.dirs[i], -1);
                        adj += (tphi(up, fi) + tphi(dn, fi) - 2.0 * tphi(f, fi)) * fr.w[i];
                    }
                }
                total += u[f] * adj / (lat.h * lat.h);
            }
    return total * hn;
}

/// Spec-shaped wrapper: certify the coefficient field and evaluate the
/// pairing over all admissible bumps.
inline DistributionalReport distributional_check(const GridFunction& u,
                                                 const std::function<SymForm(const Vec&)>& a_field,
                                                 const GrassmannSet& fam, const Lattice& lat,
                                                 double mollifier_radius,
                                                 const SolveOptions& opts = {}) {
    const StencilFamily s = build_stencil(fam, lat, opts.radius);
    const auto coords = hull_coordinate_field(a_field, s, lat);
    return distributional_pairing(u, coords, s, lat, mollifier_radius);
}

// =====================================================================
// Consistency measurement
// =====================================================================

struct ConsistencyReport {
    double max_error = 0.0;  // |discrete min-trace - continuum min| on quadratics
    double dtheta = 0.0;
    int frames = 0;
};

/// Frame traces are exact on quadratics, so the only consistency error is
/// angular: the discrete min over frames vs the continuum min over the
/// family. Measured on random unit-norm forms.
inline ConsistencyReport stencil_consistency(const GrassmannSet& fam, int radius, int trials,
                                             std::uint64_t seed) {
    Vec lo = Vec::Constant(fam.n, -1.0), hi = Vec::Constant(fam.n, 1.0);
    const Lattice lat = Lattice::box(fam.n, lo, hi, 0.25, radius);
    const StencilFamily s = build_stencil(fam, lat, radius);
    ConsistencyReport rep;
    rep.dtheta = s.dtheta;
    rep.frames = static_cast<int>(s.frames.size());
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        Mat m(fam.n, fam.n);
        for (int i = 0; i < fam.n; ++i)
            for (int j = 0; j < fam.n; ++j) m(i, j) = rng.gaussian();
        SymForm a(m);
        a = a * (1.0 / std::max(a.frobenius_norm(), 1e-12));
        double dmin = kInf;
        for (const auto& fr : s.frames) {
            double tr = 0.0;
            for (std::size_t i = 0; i < fr.dirs.size(); ++i) {
                Vec d(fam.n);
                for (int x = 0; x < fam.n; ++x) d(x) = fr.dirs[i][static_cast<std::size_t>(x)];
                tr += d.dot(a.matrix() * d) / d.squaredNorm();
            }
            dmin = std::min(dmin, tr);
        }
        const double cmin = min_max_trace(fam, a).min_trace;
        rep.max_error = std::max(rep.max_error, std::abs(dmin - cmin));
    }
    return rep;
}

} // namespace gpsh
