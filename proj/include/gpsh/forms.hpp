#pragma once

// Symmetric forms, planes-as-projections, scalar fields, and the finite
// difference / sampling primitives everything else is built from.

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gpsh/errors.hpp"
#include "gpsh/rng.hpp"

namespace gpsh {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// =====================================================================
// SymForm: an n x n symmetric matrix viewed as a quadratic form.
// =====================================================================

class SymForm {
public:
    SymForm() = default;

    /// Any square input is symmetrized on construction, so the symmetry
    /// invariant holds by representation.
    explicit SymForm(const Mat& m) {
        if (m.rows() != m.cols())
            throw DimError("SymForm requires a square matrix");
        m_ = 0.5 * (m + m.transpose());
    }

    static SymForm Zero(int n) { return SymForm(Mat::Zero(n, n)); }
    static SymForm Identity(int n) { return SymForm(Mat::Identity(n, n)); }

    int dim() const { return static_cast<int>(m_.rows()); }
    const Mat& matrix() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    /// Eigenvalues in nondecreasing order.
    Vec eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Mat> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    /// Eigenvalues (ascending) with matching orthonormal eigenvectors as columns.
    std::pair<Vec, Mat> eigensystem() const {
        Eigen::SelfAdjointEigenSolver<Mat> es(m_);
        return {es.eigenvalues(), es.eigenvectors()};
    }

    double trace() const { return m_.trace(); }
    double frobenius_norm() const { return m_.norm(); }

    SymForm operator+(const SymForm& o) const { return SymForm(m_ + o.m_); }
    SymForm operator-(const SymForm& o) const { return SymForm(m_ - o.m_); }
    SymForm operator-() const { return SymForm(-m_); }
    SymForm operator*(double t) const { return SymForm(t * m_); }
    friend SymForm operator*(double t, const SymForm& a) { return a * t; }

    /// Frobenius inner product <A,B> = tr(A B).
    double inner(const SymForm& o) const { return (m_.array() * o.m_.array()).sum(); }

private:
    Mat m_;
};

/// Rank-one form v (outer) v.
inline SymForm outer(const Vec& v) { return SymForm(v * v.transpose()); }

// =====================================================================
// Plane: a p-dimensional subspace of R^n as an orthonormal frame + projection.
// =====================================================================

class Plane {
public:
    Plane() = default;

    int ambient_dim() const { return static_cast<int>(frame_.rows()); }
    int plane_dim() const { return static_cast<int>(frame_.cols()); }
    const Mat& frame() const { return frame_; }
    const SymForm& projection() const { return proj_; }

    /// Planes compare equal when their projections coincide (frame-independent).
    bool same_plane(const Plane& o, double tol = 1e-8) const {
        return (proj_.matrix() - o.proj_.matrix()).norm() <= tol;
    }

    friend Plane projection_from_frame(const Mat& frame);

private:
    Mat frame_;     // n x p, orthonormal columns
    SymForm proj_;  // frame * frame^T
};

/// Orthonormalize the given n x p frame (stable QR) and build its plane.
/// Throws RankError when the columns are linearly dependent.
inline Plane projection_from_frame(const Mat& frame) {
    const int n = static_cast<int>(frame.rows());
    const int p = static_cast<int>(frame.cols());
    if (p < 1 || p > n)
        throw RankError("frame must have 1 <= p <= n columns");
    Eigen::ColPivHouseholderQR<Mat> qr(frame);
    qr.setThreshold(1e-10);
    if (qr.rank() < p)
        throw RankError("frame columns are linearly dependent");
    // Thin Q of the *unpivoted* factorization so the span is exactly the input's.
    Eigen::HouseholderQR<Mat> hqr(frame);
    Mat q = hqr.householderQ() * Mat::Identity(n, p);
    Plane w;
    w.frame_ = std::move(q);
    w.proj_ = SymForm(w.frame_ * w.frame_.transpose());
    return w;
}

/// Plane spanned by a subset of coordinate axes.
inline Plane coordinate_plane(int n, const std::vector<int>& axes) {
    Mat f = Mat::Zero(n, static_cast<Eigen::Index>(axes.size()));
    for (std::size_t k = 0; k < axes.size(); ++k) f(axes[k], static_cast<Eigen::Index>(k)) = 1.0;
    return projection_from_frame(f);
}

/// Plane spanned by a single vector.
inline Plane line_through(const Vec& v) {
    Mat f(v.size(), 1);
    f.col(0) = v;
    return projection_from_frame(f);
}

// =====================================================================
// Trace pairing and partial eigenvalue sums.
// =====================================================================

/// tr_W A = <A, P_W>: the trace of A restricted to the plane W.
inline double trace_pairing(const SymForm& a, const Plane& w) {
    if (a.dim() != w.ambient_dim())
        throw DimError("trace_pairing: form and plane dimensions differ");
    return a.inner(w.projection());
}

/// (sum of p smallest eigenvalues, sum of p largest): the exact extrema of
/// tr_W A over all p-planes W of R^n.
inline std::pair<double, double> eigen_partial_sums(const SymForm& a, int p) {
    const int n = a.dim();
    if (p < 1 || p > n)
        throw DimError("eigen_partial_sums: need 1 <= p <= n");
    const Vec ev = a.eigenvalues();  // ascending
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i < p; ++i) {
        lo += ev(i);
        hi += ev(n - 1 - i);
    }
    return {lo, hi};
}

// =====================================================================
// ScalarField: a function on (a box in) R^n with analytic or FD derivatives.
// =====================================================================

struct ScalarField {
    int dim = 0;
    std::function<double(const Vec&)> eval;
    std::function<Vec(const Vec&)> grad;       // optional; FD fallback when null
    std::function<SymForm(const Vec&)> hess;   // optional; FD fallback when null
    double fd_step = 1e-4;

    double value(const Vec& x) const {
        if (!eval) throw FieldEvalError("field has no evaluator");
        const double v = eval(x);
        if (!std::isfinite(v)) throw FieldEvalError("field evaluated to a non-finite value");
        return v;
    }

    Vec gradient(const Vec& x) const;
    SymForm hessian(const Vec& x) const;
};

/// Centered-difference gradient at step f.fd_step.
inline Vec fd_gradient(const ScalarField& f, const Vec& x) {
    const double h = f.fd_step;
    Vec g(f.dim);
    Vec xp = x, xm = x;
    for (int i = 0; i < f.dim; ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        g(i) = (f.value(xp) - f.value(xm)) / (2.0 * h);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

/// Centered second differences, symmetrized; exact (to roundoff) on quadratics.
inline SymForm fd_hessian(const ScalarField& f, const Vec& x) {
    const double h = f.fd_step;
    const int n = f.dim;
    Mat m(n, n);
    const double f0 = f.value(x);
    Vec y = x;
    for (int i = 0; i < n; ++i) {
        y(i) = x(i) + h;
        const double fp = f.value(y);
        y(i) = x(i) - h;
        const double fm = f.value(y);
        y(i) = x(i);
        m(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            y(i) = x(i) + h; y(j) = x(j) + h;
            const double fpp = f.value(y);
            y(j) = x(j) - h;
            const double fpm = f.value(y);
            y(i) = x(i) - h; y(j) = x(j) + h;
            const double fmp = f.value(y);
            y(j) = x(j) - h;
            const double fmm = f.value(y);
            y(i) = x(i); y(j) = x(j);
            m(i, j) = m(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return SymForm(m);
}

inline Vec ScalarField::gradient(const Vec& x) const {
    return grad ? grad(x) : fd_gradient(*this, x);
}

inline SymForm ScalarField::hessian(const Vec& x) const {
    return hess ? hess(x) : fd_hessian(*this, x);
}

// =====================================================================
// Haar-style sampling of planes.
// =====================================================================

/// `count` planes drawn by orthonormalizing standard-Gaussian n x p matrices;
/// deterministic for a fixed seed.
inline std::vector<Plane> sample_frames(int n, int p, int count, std::uint64_t seed) {
    if (p < 1 || p > n) throw DimError("sample_frames: need 1 <= p <= n");
    if (count < 1) throw DimError("sample_frames: count must be >= 1");
    Rng rng(seed);
    std::vector<Plane> out;
    out.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(out.size()) < count) {
        Mat g(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) g(i, j) = rng.gaussian();
        try {
            out.push_back(projection_from_frame(g));
        } catch (const RankError&) {
            // measure-zero event; redraw
        }
    }
    return out;
}

/// Gaussian unit vector (used by the complex-line and free-dimension samplers).
inline Vec sample_unit_vector(int n, Rng& rng) {
    Vec v(n);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
        norm2 = v.squaredNorm();
    } while (norm2 < 1e-12);
    return v / std::sqrt(norm2);
}

/// Orthonormal n x (n-1) completion of a unit vector: columns span v-perp.
inline Mat orthonormal_complement(const Vec& v) {
    const int n = static_cast<int>(v.size());
    if (n < 1 || std::abs(v.norm() - 1.0) > 1e-8)
        throw DimError("orthonormal_complement: need a unit vector");
    Mat full = Mat::Identity(n, n);
    full.col(0) = v;
    Eigen::HouseholderQR<Mat> qr(full);
    Mat q = qr.householderQ();
    // Q's first column is +-v; the rest span the complement either way.
    return q.rightCols(n - 1);
}

} // namespace gpsh
