#pragma once

// Single-chart Riemannian computations: Christoffel symbols, the Riemannian
// Hessian, traces over plane fields (with an independent coordinate-form
// evaluation), constant-rank normalization of coefficient fields, the
// restriction identity on parametrized surfaces, and the sphere
// maximum-principle counterexample.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gpsh/forms.hpp"
#include "gpsh/grassmann.hpp"

namespace gpsh {

// =====================================================================
// Chart metrics
// =====================================================================

struct ChartMetric {
    int dim = 0;
    std::function<SymForm(const Vec&)> g;
    double fd_step = 1e-4;
    std::string name;
};

inline ChartMetric euclidean_chart(int n) {
    ChartMetric m;
    m.dim = n;
    m.name = "euclidean";
    m.g = [n](const Vec&) { return SymForm::Identity(n); };
    return m;
}

/// Polar coordinates (r, theta) on the punctured plane: g = diag(1, r^2).
inline ChartMetric polar2_chart() {
    ChartMetric m;
    m.dim = 2;
    m.name = "polar2";
    m.g = [](const Vec& x) {
        Mat g = Mat::Zero(2, 2);
        g(0, 0) = 1.0;
        g(1, 1) = x(0) * x(0);
        return SymForm(g);
    };
    return m;
}

/// Round unit sphere in colatitude/longitude (theta, phi), poles excluded:
/// g = diag(1, sin^2 theta).
inline ChartMetric sphere2_chart() {
    ChartMetric m;
    m.dim = 2;
    m.name = "sphere2";
    m.g = [](const Vec& x) {
        Mat g = Mat::Zero(2, 2);
        g(0, 0) = 1.0;
        const double s = std::sin(x(0));
        g(1, 1) = s * s;
        return SymForm(g);
    };
    return m;
}

namespace detail {

inline SymForm metric_at(const ChartMetric& m, const Vec& x) {
    const SymForm g = m.g(x);
    if (g.dim() != m.dim) throw MetricSingular("metric has the wrong dimension");
    if (g.eigenvalues()(0) <= 1e-8)
        throw MetricSingular("metric is not positive definite at the queried point");
    return g;
}

}  // namespace detail

/// Levi-Civita Christoffel symbols by centered differences of the metric:
/// Gamma[k](i,j) = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij).
inline std::vector<Mat> christoffel(const ChartMetric& m, const Vec& x) {
    const int n = m.dim;
    const SymForm g0 = detail::metric_at(m, x);
    const double h = m.fd_step;
    // dg[l](i,j) = d g_ij / d x_l
    std::vector<Mat> dg(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
        Vec xp = x, xm = x;
        xp(l) += h;
        xm(l) -= h;
        dg[static_cast<std::size_t>(l)] = (m.g(xp).matrix() - m.g(xm).matrix()) / (2.0 * h);
    }
    const Mat ginv = g0.matrix().inverse();
    std::vector<Mat> gamma(static_cast<std::size_t>(n), Mat::Zero(n, n));
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double s = 0.0;
                for (int l = 0; l < n; ++l)
                    s += ginv(k, l) * (dg[static_cast<std::size_t>(i)](j, l) +
                                       dg[static_cast<std::size_t>(j)](i, l) -
                                       dg[static_cast<std::size_t>(l)](i, j));
                gamma[static_cast<std::size_t>(k)](i, j) = 0.5 * s;
                gamma[static_cast<std::size_t>(k)](j, i) = 0.5 * s;
            }
    return gamma;
}

/// (Hess u)_ij = d_i d_j u - Gamma^k_ij d_k u. Reduces to the flat Hessian
/// when the metric is constant.
inline SymForm riemannian_hessian(const ChartMetric& m, const ScalarField& u, const Vec& x) {
    const std::vector<Mat> gamma = christoffel(m, x);
    const Mat d2 = u.hessian(x).matrix();
    const Vec d1 = u.gradient(x);
    Mat h = d2;
    for (int k = 0; k < m.dim; ++k) h -= gamma[static_cast<std::size_t>(k)] * d1(k);
    return SymForm(h);
}

namespace detail {

/// Gram-Schmidt in the g inner product; FrameError when columns are
/// g-dependent.
inline Mat g_orthonormalize(const SymForm& g, const Mat& frame) {
    Mat q = frame;
    const Mat& gm = g.matrix();
    for (int c = 0; c < q.cols(); ++c) {
        for (int b = 0; b < c; ++b)
            q.col(c) -= (q.col(b).transpose() * gm * q.col(c))(0) * q.col(b);
        const double norm2 = (q.col(c).transpose() * gm * q.col(c))(0);
        if (!(norm2 > 1e-12))
            throw FrameError("frame columns are g-linearly dependent");
        q.col(c) /= std::sqrt(norm2);
    }
    return q;
}

}  // namespace detail

/// Trace of the Riemannian Hessian of u over the plane spanned by the given
/// chart-coordinate frame (g-orthonormalized first).
inline double w_laplacian(const ChartMetric& m, const ScalarField& u,
                          const std::function<Mat(const Vec&)>& w_frame, const Vec& x) {
    const SymForm g = detail::metric_at(m, x);
    const Mat e = detail::g_orthonormalize(g, w_frame(x));
    const SymForm hess = riemannian_hessian(m, u, x);
    double tr = 0.0;
    for (int a = 0; a < e.cols(); ++a) tr += (e.col(a).transpose() * hess.matrix() * e.col(a))(0);
    return tr;
}

/// Coordinate-form evaluation: sum over the first p columns of h of
/// e^T D2u e - sum_k (e^T Gamma^k e) d_k u, assembled directly from raw
/// coordinate derivatives and Christoffels rather than through the
/// Riemannian Hessian object.
inline double w_laplacian_coordinate_form(const ChartMetric& m, const ScalarField& u,
                                          const std::function<Mat(const Vec&)>& h_frame,
                                          int p, const Vec& x) {
    const SymForm g = detail::metric_at(m, x);
    Mat h = detail::g_orthonormalize(g, h_frame(x));
    if (p < 1 || p > h.cols()) throw FrameError("coordinate form: invalid plane dimension");
    const std::vector<Mat> gamma = christoffel(m, x);
    const Mat d2 = u.hessian(x).matrix();
    const Vec d1 = u.gradient(x);
    double tr = 0.0;
    for (int a = 0; a < p; ++a) {
        const Vec e = h.col(a);
        double t = (e.transpose() * d2 * e)(0);
        for (int k = 0; k < m.dim; ++k)
            t -= (e.transpose() * gamma[static_cast<std::size_t>(k)] * e)(0) * d1(k);
        tr += t;
    }
    return tr;
}

// =====================================================================
// Constant-rank normalization
// =====================================================================

struct RankNormalization {
    Mat h;            // PSD square root on the range plus kernel projection
    double residual;  // || h P_range h - E ||_F
};

/// For a rank-p PSD coefficient form E, h = sqrt(E)|_range + P_kernel
/// conjugates the standard rank-p projection back to E. The eigenvalue gap
/// (p-th >= 1e-6, (p+1)-th <= 1e-8) guards the rank decision.
inline RankNormalization normalize_constant_rank(const SymForm& e, int p) {
    const int n = e.dim();
    if (p < 1 || p > n) throw RankAmbiguous("rank p out of range");
    const auto [ev, evec] = e.eigensystem();  // ascending
    // descending order indices: ev(n-1) >= ... >= ev(0)
    const double lam_p = ev(n - p);                       // p-th largest
    const double lam_next = (p < n) ? ev(n - p - 1) : 0.0;  // (p+1)-th largest
    if (lam_p < 1e-6 || (p < n && lam_next > 1e-8))
        throw RankAmbiguous("eigenvalue gap does not certify rank p");
    Mat a = Mat::Zero(n, n), b = Mat::Zero(n, n), prange = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const Vec v = evec.col(i);
        if (i >= n - p) {
            a += std::sqrt(ev(i)) * v * v.transpose();
            prange += v * v.transpose();
        } else {
            b += v * v.transpose();
        }
    }
    RankNormalization out;
    out.h = a + b;
    out.residual = (out.h * prange * out.h - e.matrix()).norm();
    return out;
}

/// Field version: normalize E(x) and carry the companion first-order
/// coefficient along unchanged (only E participates in the conjugation).
inline RankNormalization normalize_constant_rank(
    const std::function<SymForm(const Vec&)>& e_field,
    const std::function<Vec(const Vec&)>& b_field, const Vec& x, int p) {
    (void)b_field;
    return normalize_constant_rank(e_field(x), p);
}

// =====================================================================
// Parametrized surfaces and the restriction identity
// =====================================================================

struct ParamSurface {
    int ambient = 3;
    std::function<Vec(double, double)> param;
    double s_lo = 0, s_hi = 1, t_lo = 0, t_hi = 1;
    bool is_minimal = false;
    std::string name;
    double fd1 = 1e-4;  // step for first derivatives of the parametrization
    double fd2 = 1e-3;  // step for second derivatives
};

inline ParamSurface catenoid_surface() {
    ParamSurface m;
    m.name = "catenoid";
    m.is_minimal = true;
    m.param = [](double s, double t) {
        Vec x(3);
        x << std::cosh(s) * std::cos(t), std::cosh(s) * std::sin(t), s;
        return x;
    };
    m.s_lo = -1.0; m.s_hi = 1.0; m.t_lo = 0.0; m.t_hi = 2.0 * M_PI;
    return m;
}

inline ParamSurface helicoid_surface() {
    ParamSurface m;
    m.name = "helicoid";
    m.is_minimal = true;
    m.param = [](double s, double t) {
        Vec x(3);
        x << s * std::cos(t), s * std::sin(t), t;
        return x;
    };
    m.s_lo = -1.0; m.s_hi = 1.0; m.t_lo = 0.0; m.t_hi = 2.0 * M_PI;
    return m;
}

inline ParamSurface plane_surface() {
    ParamSurface m;
    m.name = "plane";
    m.is_minimal = true;
    m.param = [](double s, double t) {
        Vec x(3);
        x << s, t, 0.0;
        return x;
    };
    m.s_lo = -1.0; m.s_hi = 1.0; m.t_lo = -1.0; m.t_hi = 1.0;
    return m;
}

/// Unit sphere in colatitude/longitude; not minimal (mean curvature 2).
inline ParamSurface sphere_surface() {
    ParamSurface m;
    m.name = "sphere";
    m.is_minimal = false;
    m.param = [](double s, double t) {
        Vec x(3);
        x << std::sin(s) * std::cos(t), std::sin(s) * std::sin(t), std::cos(s);
        return x;
    };
    m.s_lo = 0.4; m.s_hi = M_PI - 0.4; m.t_lo = 0.0; m.t_hi = 2.0 * M_PI;
    return m;
}

namespace detail {

struct SurfaceJet {
    Vec x, xs, xt, xss, xst, xtt;
    double E, F, G;   // first fundamental form
    Vec nu;           // unit normal
    Vec hvec;         // mean curvature vector  = Laplace-Beltrami of the position
};

inline SurfaceJet surface_jet(const ParamSurface& m, double s, double t) {
    if (m.ambient != 3) throw SurfaceDegenerate("surface machinery expects ambient R^3");
    SurfaceJet j;
    const double h1 = m.fd1, h2 = m.fd2;
    j.x = m.param(s, t);
    j.xs = (m.param(s + h1, t) - m.param(s - h1, t)) / (2.0 * h1);
    j.xt = (m.param(s, t + h1) - m.param(s, t - h1)) / (2.0 * h1);
    j.xss = (m.param(s + h2, t) - 2.0 * j.x + m.param(s - h2, t)) / (h2 * h2);
    j.xtt = (m.param(s, t + h2) - 2.0 * j.x + m.param(s, t - h2)) / (h2 * h2);
    j.xst = (m.param(s + h2, t + h2) - m.param(s + h2, t - h2) - m.param(s - h2, t + h2) +
             m.param(s - h2, t - h2)) /
            (4.0 * h2 * h2);
    j.E = j.xs.squaredNorm();
    j.F = j.xs.dot(j.xt);
    j.G = j.xt.squaredNorm();
    const double det = j.E * j.G - j.F * j.F;
    if (det < 1e-10) throw SurfaceDegenerate("parametrization is degenerate at a sample");
    Vec n3(3);
    n3 << j.xs(1) * j.xt(2) - j.xs(2) * j.xt(1), j.xs(2) * j.xt(0) - j.xs(0) * j.xt(2),
        j.xs(0) * j.xt(1) - j.xs(1) * j.xt(0);
    j.nu = n3 / n3.norm();
    const double e2 = j.xss.dot(j.nu), f2 = j.xst.dot(j.nu), g2 = j.xtt.dot(j.nu);
    // trace of the shape form against the inverse metric, times the normal
    j.hvec = ((e2 * j.G - 2.0 * f2 * j.F + g2 * j.E) / det) * j.nu;
    return j;
}

}  // namespace detail

/// Mean curvature vector at (s,t) from the fundamental forms.
inline Vec mean_curvature_vector(const ParamSurface& m, double s, double t) {
    return detail::surface_jet(m, s, t).hvec;
}

struct RestrictionReport {
    double max_defect = 0.0;           // three-term identity: |intrinsic - ambient - H-term|
    double max_minimal_defect = 0.0;   // |intrinsic - ambient| (meaningful when minimal)
    double max_mean_curvature = 0.0;   // certificate for the is_minimal flag
    double min_intrinsic = kInf;        // smallest intrinsic Laplacian seen
    std::vector<double> mean_curvature_term;
    int samples = 0;
};

/// At random parameter samples, compare (i) the intrinsic Laplace-Beltrami of
/// u restricted to the surface (via the induced metric and its Christoffels),
/// (ii) the ambient trace of Hess u over the tangent plane, and (iii) the
/// mean-curvature correction <grad u, H>. The identity (i) = (ii) + (iii)
/// holds for any surface; (iii) vanishes exactly when the surface is minimal.
inline RestrictionReport restriction_check(const ParamSurface& m, const ScalarField& u,
                                           int samples, std::uint64_t seed) {
    Rng rng(seed);
    RestrictionReport rep;
    rep.samples = samples;

    // induced metric as a chart on parameter space
    ChartMetric induced;
    induced.dim = 2;
    induced.fd_step = 1e-3;  // outer step; param derivatives inside use m.fd1
    const ParamSurface surf = m;
    induced.g = [surf](const Vec& st) {
        const double h = surf.fd1;
        const Vec xs = (surf.param(st(0) + h, st(1)) - surf.param(st(0) - h, st(1))) / (2.0 * h);
        const Vec xt = (surf.param(st(0), st(1) + h) - surf.param(st(0), st(1) - h)) / (2.0 * h);
        Mat g(2, 2);
        g(0, 0) = xs.squaredNorm();
        g(0, 1) = g(1, 0) = xs.dot(xt);
        g(1, 1) = xt.squaredNorm();
        return SymForm(g);
    };

    ScalarField pulled;
    pulled.dim = 2;
    pulled.fd_step = 1e-3;
    const ScalarField amb = u;
    pulled.eval = [surf, amb](const Vec& st) { return amb.value(surf.param(st(0), st(1))); };

    for (int k = 0; k < samples; ++k) {
        const double margin_s = 0.05 * (m.s_hi - m.s_lo), margin_t = 0.05 * (m.t_hi - m.t_lo);
        const double s = rng.uniform(m.s_lo + margin_s, m.s_hi - margin_s);
        const double t = rng.uniform(m.t_lo + margin_t, m.t_hi - margin_t);
        const auto jet = detail::surface_jet(m, s, t);

        // (i) intrinsic Laplace-Beltrami = g-trace of the Riemannian Hessian
        Vec st(2);
        st << s, t;
        const SymForm hess_in = riemannian_hessian(induced, pulled, st);
        const Mat ginv = induced.g(st).matrix().inverse();
        const double intrinsic = (ginv * hess_in.matrix()).trace();

        // (ii) ambient trace over the tangent plane
        Mat frame(3, 2);
        frame.col(0) = jet.xs;
        frame.col(1) = jet.xt;
        const Plane tangent = projection_from_frame(frame);
        const double ambient_tr = trace_pairing(u.hessian(jet.x), tangent);

        // (iii) mean-curvature term
        const double hterm = u.gradient(jet.x).dot(jet.hvec);

        rep.max_defect = std::max(rep.max_defect, std::abs(intrinsic - ambient_tr - hterm));
        rep.max_minimal_defect = std::max(rep.max_minimal_defect, std::abs(intrinsic - ambient_tr));
        rep.max_mean_curvature = std::max(rep.max_mean_curvature, jet.hvec.norm());
        rep.min_intrinsic = std::min(rep.min_intrinsic, intrinsic);
        rep.mean_curvature_term.push_back(hterm);
    }
    return rep;
}

// =====================================================================
// The sphere maximum-principle counterexample
// =====================================================================

struct SphereCounterexample {
    double max_formula_err = 0.0;   // | tr_H Hess phi - y^2 | over the chart
    double max_ambient_err = 0.0;   // chart Hessian vs ambient-hypersurface formula
    bool psh_everywhere = false;    // tr_H Hess phi >= -tol on the whole band
    bool mp_failure = false;        // interior max exceeds the band-edge max
    double interior_max = 0.0;
    double edge_max = 0.0;
    std::vector<std::pair<double, double>> profile;  // (y, tr_H Hess phi)
};

/// On the unit sphere minus the poles, take the horizontal (latitude)
/// direction field H and phi = (1 - y^2)/2. Then tr_H Hess phi = y^2 >= 0,
/// so phi is subharmonic for the family {H}, yet it attains an interior
/// maximum 1/2 on the equator of any band containing it: the maximum
/// principle fails for this family (the latitude circles are compact leaves).
inline SphereCounterexample sphere_counterexample(int grid) {
    const ChartMetric chart = sphere2_chart();
    ScalarField phi;
    phi.dim = 2;
    phi.eval = [](const Vec& x) {
        const double y = std::cos(x(0));
        return 0.5 * (1.0 - y * y);
    };
    const auto hfield = [](const Vec&) {
        Mat f(2, 1);
        f << 0.0, 1.0;
        return f;
    };

    SphereCounterexample rep;
    const double band = 0.9;  // |y| < band
    const double th_lo = std::acos(band), th_hi = std::acos(-band);
    double interior_max = -kInf;
    for (int i = 0; i <= grid; ++i) {
        const double theta = th_lo + (th_hi - th_lo) * i / grid;
        const double y = std::cos(theta);
        double row_err = 0.0, row_amb = 0.0, trace = 0.0;
        const int jn = std::max(4, grid / 16);
        for (int jj = 0; jj < jn; ++jj) {
            Vec x(2);
            x << theta, 2.0 * M_PI * jj / jn;
            trace = w_laplacian(chart, phi, hfield, x);
            row_err = std::max(row_err, std::abs(trace - y * y));

            // ambient-hypersurface formula in the orthonormal tangent basis
            // {d_theta, d_phi / sin theta}: Hess^X(V,W) = -V3 W3 + <V,W> y^2.
            const SymForm hc = riemannian_hessian(chart, phi, x);
            Mat eframe(2, 2);
            eframe << 1.0, 0.0, 0.0, 1.0 / std::sin(theta);
            // ambient coordinates of the two tangent vectors
            const double st = std::sin(theta), ct = std::cos(theta);
            const double cp = std::cos(x(1)), sp = std::sin(x(1));
            Mat tang(3, 2);
            tang.col(0) << ct * cp, ct * sp, -st;           // d_theta (unit)
            tang.col(1) << -sp, cp, 0.0;                    // d_phi / sin theta (unit)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const double chart_val =
                        (eframe.col(a).transpose() * hc.matrix() * eframe.col(b))(0);
                    const double amb_val = -tang(2, a) * tang(2, b) + (a == b ? y * y : 0.0);
                    row_amb = std::max(row_amb, std::abs(chart_val - amb_val));
                }
        }
        rep.max_formula_err = std::max(rep.max_formula_err, row_err);
        rep.max_ambient_err = std::max(rep.max_ambient_err, row_amb);
        rep.profile.emplace_back(y, trace);
        Vec probe(2);
        probe << theta, 0.0;
        interior_max = std::max(interior_max, phi.value(probe));
    }
    rep.interior_max = interior_max;
    rep.edge_max = 0.5 * (1.0 - band * band);
    rep.psh_everywhere = true;
    for (const auto& [y, tr] : rep.profile)
        if (tr < -1e-6) rep.psh_everywhere = false;
    rep.mp_failure = interior_max > rep.edge_max + 1e-9;
    return rep;
}

} // namespace gpsh
