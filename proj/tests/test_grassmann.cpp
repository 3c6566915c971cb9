#include <catch2/catch_amalgamated.hpp>

#include "gpsh/forms.hpp"
#include "gpsh/grassmann.hpp"

using namespace gpsh;

namespace {

SymForm diag2(double a, double b) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return SymForm(m);
}

Vec pt1(double x) {
    Vec v(1);
    v << x;
    return v;
}

}  // namespace

// ====================================================================
// Trace extrema and membership
// ====================================================================

TEST_CASE("full grassmannian trace extrema are eigenvalue partial sums") {
    Rng rng(21);
    for (int n = 2; n <= 5; ++n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = rng.gaussian();
        const SymForm a(m);
        for (int p = 1; p <= n; ++p) {
            const auto g = GrassmannSet::full(p, n);
            const TraceExtrema e = min_max_trace(g, a);
            const auto [lo, hi] = eigen_partial_sums(a, p);
            CHECK(e.min_trace == Catch::Approx(lo).margin(1e-10));
            CHECK(e.max_trace == Catch::Approx(hi).margin(1e-10));
            // witnesses attain the extrema
            REQUIRE(e.witness_min);
            REQUIRE(e.witness_max);
            CHECK(trace_pairing(a, *e.witness_min) == Catch::Approx(lo).margin(1e-10));
            CHECK(trace_pairing(a, *e.witness_max) == Catch::Approx(hi).margin(1e-10));
        }
    }
}

TEST_CASE("classification flags on the full grassmannian") {
    const auto g = GrassmannSet::full(1, 2);

    const ConeVerdict interior = classify(g, diag2(1, 2));
    CHECK(interior.in_P);
    CHECK(interior.in_IntP);
    CHECK(interior.in_dual);
    CHECK_FALSE(interior.on_boundary);

    const ConeVerdict outside = classify(g, diag2(-1, 5));
    CHECK_FALSE(outside.in_P);
    CHECK(outside.in_dual);  // some direction still has positive trace

    const ConeVerdict edge = classify(g, diag2(0, 3));
    CHECK(edge.in_P);
    CHECK_FALSE(edge.in_IntP);
    CHECK(edge.on_boundary);

    const ConeVerdict negdef = classify(g, diag2(-1, -2));
    CHECK_FALSE(negdef.in_P);
    CHECK_FALSE(negdef.in_dual);
}

TEST_CASE("boundary detection is tolerance-aware") {
    const auto g = GrassmannSet::full(1, 2);
    CHECK(classify(g, diag2(-1e-10, 1)).in_P);         // inside tol
    CHECK(classify(g, diag2(-1e-10, 1)).on_boundary);
    CHECK_FALSE(classify(g, diag2(-1e-6, 1)).in_P);    // outside tol
    CHECK(classify(g, diag2(1e-10, 1)).on_boundary);   // barely positive is still boundary
    CHECK_FALSE(classify(g, diag2(1e-6, 1)).on_boundary);
}

TEST_CASE("finite families minimize by enumeration") {
    const std::vector<Plane> axes = {coordinate_plane(2, {0}), coordinate_plane(2, {1})};
    const auto g = GrassmannSet::finite(axes);
    Mat m(2, 2);
    m << 3.0, 1.0, 1.0, -2.0;
    const SymForm a(m);
    const TraceExtrema e = min_max_trace(g, a);
    CHECK(e.min_trace == Catch::Approx(-2.0));
    CHECK(e.max_trace == Catch::Approx(3.0));
    CHECK(e.witness_min->same_plane(axes[1]));
    CHECK(e.witness_max->same_plane(axes[0]));

    // membership only constrains the listed planes: off-diagonal is invisible
    CHECK(classify(g, SymForm(Mat{{1.0, 5.0}, {5.0, 1.0}})).in_P);
    CHECK_FALSE(classify(GrassmannSet::full(1, 2), SymForm(Mat{{1.0, 5.0}, {5.0, 1.0}})).in_P);
}

TEST_CASE("complex line traces reduce to an invariant eigenproblem") {
    // tr over span{v, Jv} equals v' (A - JAJ) v, so the extrema over complex
    // lines are the extreme eigenvalues of A - JAJ.
    Rng rng(31);
    for (int n : {2, 4}) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = rng.gaussian();
        const SymForm a(m);
        const Mat j = complex_structure(n);
        const SymForm invariant(a.matrix() - j * a.matrix() * j);

        const auto g = GrassmannSet::complex_lines(n);
        const TraceExtrema e = min_max_trace(g, a);
        const Vec ev = invariant.eigenvalues();
        CHECK(e.min_trace == Catch::Approx(ev(0)).margin(1e-10));
        CHECK(e.max_trace == Catch::Approx(ev(n - 1)).margin(1e-10));

        // witnesses are genuine complex lines: J-invariant planes attaining the value
        REQUIRE(e.witness_min);
        const Mat pw = e.witness_min->projection().matrix();
        CHECK((j * pw * j.transpose() - pw).norm() <= 1e-9);
        CHECK(trace_pairing(a, *e.witness_min) == Catch::Approx(e.min_trace).margin(1e-9));
    }
}

TEST_CASE("complex line extrema dominate any sampled complex line") {
    Rng rng(7);
    Mat m(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = rng.gaussian();
    const SymForm a(m);
    const Mat j = complex_structure(4);
    const TraceExtrema e = min_max_trace(GrassmannSet::complex_lines(4), a);
    for (int s = 0; s < 400; ++s) {
        const Vec v = sample_unit_vector(4, rng);
        Mat f(4, 2);
        f.col(0) = v;
        f.col(1) = j * v;
        const double t = trace_pairing(a, projection_from_frame(f));
        CHECK(t >= e.min_trace - 1e-9);
        CHECK(t <= e.max_trace + 1e-9);
    }
}

TEST_CASE("sampled extrema approach the closed form") {
    Mat m(4, 4);
    m << 3, 1, 0, 0, 1, -2, 0, 1, 0, 0, 1, 0, 0, 1, 0, 2;
    const SymForm a(m);
    const auto g = GrassmannSet::full(2, 4);
    const TraceExtrema exact = min_max_trace(g, a);
    const TraceExtrema approx = sampled_min_max_trace(g, a, 20000, 99);
    CHECK(approx.min_trace >= exact.min_trace - 1e-9);  // sampling can't undershoot
    CHECK(approx.max_trace <= exact.max_trace + 1e-9);
    CHECK(std::abs(approx.min_trace - exact.min_trace) <= 0.2);
    CHECK(std::abs(approx.max_trace - exact.max_trace) <= 0.2);
}

// ====================================================================
// Derived membership predicates
// ====================================================================

TEST_CASE("strict margin is the normalized minimum trace") {
    const auto g = GrassmannSet::full(2, 3);
    Mat m = Mat::Zero(3, 3);
    m(0, 0) = 1;
    m(1, 1) = 2;
    m(2, 2) = 7;
    const SymForm a(m);
    CHECK(strict_margin(g, a) == Catch::Approx(1.5));  // (1+2)/2
}

TEST_CASE("c-strict membership matches the shifted cone") {
    const auto g = GrassmannSet::full(1, 2);
    const SymForm a = diag2(2, 5);  // min trace 2
    CHECK(c_strict_member(g, a, 0.0));
    CHECK(c_strict_member(g, a, 1.9));
    CHECK(c_strict_member(g, a, 2.0));          // equality sits inside tol
    CHECK_FALSE(c_strict_member(g, a, 2.1));
    CHECK_THROWS_AS(c_strict_member(g, a, -0.5), DimError);

    // identity audit: membership at level c == plain membership of the shift
    for (double c : {0.3, 1.0, 3.0}) {
        const SymForm shifted = a - (c / 1.0) * SymForm::Identity(2);
        CHECK(c_strict_member(g, a, c) == classify(g, shifted).in_P);
    }
}

TEST_CASE("separating witness certifies exclusion") {
    const auto g = GrassmannSet::full(1, 2);
    const SymForm a = diag2(-1, 5);
    const Plane w = separating_witness(g, a);
    CHECK(trace_pairing(a, w) < 0.0);
    CHECK(trace_pairing(a, w) == Catch::Approx(-1.0).margin(1e-10));
    CHECK_THROWS_AS(separating_witness(g, SymForm::Identity(2)), NoWitness);
}

// ====================================================================
// Point-dependent families
// ====================================================================

TEST_CASE("fiber rules produce the documented fibers") {
    const auto g = GrassmannSet::fiber_field("ex2.3");
    CHECK(fiber_at(g, pt1(0.5)).has_value());
    CHECK_FALSE(fiber_at(g, pt1(-0.5)).has_value());
    CHECK(fiber_at(g, pt1(0.0)).has_value());  // closed side owns the origin

    const auto ga = GrassmannSet::fiber_field("appA");
    const auto right = fiber_at(ga, pt1(0.25));
    const auto left = fiber_at(ga, pt1(-0.25));
    REQUIRE(right);
    REQUIRE(left);
    CHECK(right->planes.front().same_plane(coordinate_plane(2, {0})));
    Vec d(2);
    d << 1.0, 1.0;
    CHECK(left->planes.front().same_plane(line_through(d)));

    const auto gs = GrassmannSet::fiber_field("sphere_horizontal");
    Vec x3(3);
    x3 << 1.0, 0.0, 0.3;
    const auto circ = fiber_at(gs, x3);
    REQUIRE(circ);
    CHECK(circ->planes.front().same_plane(coordinate_plane(3, {1})));
    x3 << 0.0, 0.0, 0.7;
    CHECK_FALSE(fiber_at(gs, x3).has_value());  // vertical axis: no latitude direction

    CHECK_THROWS_AS(GrassmannSet::fiber_field("nope"), DimError);
}

TEST_CASE("empty fibers give vacuous membership and an empty dual") {
    const auto g = GrassmannSet::fiber_field("ex2.3");
    const SymForm a = SymForm(-3.0 * Mat::Identity(1, 1));
    const ConeVerdict v = classify(g, a, pt1(-1.0));
    CHECK(v.empty_fiber);
    CHECK(v.in_P);
    CHECK(v.in_IntP);
    CHECK_FALSE(v.in_dual);
    CHECK(v.min_trace == kInf);
    CHECK(v.max_trace == -kInf);
    CHECK(strict_margin(g, a, pt1(-1.0)) == kInf);

    // on the nonempty side the same form is rejected
    CHECK_FALSE(classify(g, a, pt1(1.0)).in_P);

    // fiber fields demand a base point
    CHECK_THROWS_AS(classify(g, a), DimError);
}

TEST_CASE("membership can flip along a base path when fibers jump") {
    const auto g = GrassmannSet::fiber_field("appA");
    const Plane w = coordinate_plane(2, {0});
    std::vector<Vec> path;
    for (int j = 1; j <= 6; ++j) path.push_back(pt1(-1.0 / j));

    const SymForm probe = nonclosed_probe(g, path, pt1(0.0), w, 0.45);
    for (const Vec& xj : path) CHECK(classify(g, probe, xj).in_P);
    CHECK_FALSE(classify(g, probe, pt1(0.0)).in_P);
}

TEST_CASE("probe construction validates its hypotheses") {
    const auto g = GrassmannSet::fiber_field("appA");
    const Plane w = coordinate_plane(2, {0});
    std::vector<Vec> path = {pt1(-0.5), pt1(-0.25)};

    // eps too wide: the left-side fiber sits at squared overlap 1/2 from W
    CHECK_THROWS_AS(nonclosed_probe(g, path, pt1(0.0), w, 0.6), ProbeInvalid);
    CHECK_THROWS_AS(nonclosed_probe(g, path, pt1(0.0), w, -0.1), ProbeInvalid);
    // limit plane must live in the limit fiber
    CHECK_THROWS_AS(nonclosed_probe(g, path, pt1(-1.0), w, 0.45), ProbeInvalid);
    // constant families cannot exhibit the jump
    CHECK_THROWS_AS(
        nonclosed_probe(GrassmannSet::full(1, 2), path, pt1(0.0), w, 0.45),
        ProbeInvalid);
    // a path point whose fiber contains W itself invalidates the construction
    std::vector<Vec> bad_path = {pt1(-0.5), pt1(0.25)};
    CHECK_THROWS_AS(nonclosed_probe(g, bad_path, pt1(0.0), w, 0.45), ProbeInvalid);
}

// ====================================================================
// Span analysis
// ====================================================================

TEST_CASE("span analysis flags families that miss a direction") {
    const auto g = GrassmannSet::finite({coordinate_plane(2, {0})});
    const SpanAnalysis s = span_analysis(g);
    CHECK_FALSE(s.involves_all);
    CHECK(s.paths_agree);
    REQUIRE(s.orthogonal_direction);
    CHECK(std::abs((*s.orthogonal_direction)(1)) == Catch::Approx(1.0));
    CHECK_FALSE(s.positive_witness.has_value());
}

TEST_CASE("span analysis certifies full involvement with a positive witness") {
    const auto g =
        GrassmannSet::finite({coordinate_plane(2, {0}), coordinate_plane(2, {1})});
    const SpanAnalysis s = span_analysis(g);
    CHECK(s.involves_all);
    CHECK(s.paths_agree);
    REQUIRE(s.positive_witness);
    CHECK(s.witness_min_eig > 0.0);
    CHECK(s.positive_witness->eigenvalues()(0) > 0.0);
    // the witness must lie in the span: here, diagonal matrices
    CHECK(std::abs((*s.positive_witness)(0, 1)) <= 1e-8);

    const SpanAnalysis f = span_analysis(GrassmannSet::full(1, 3));
    CHECK(f.involves_all);
    CHECK(f.paths_agree);
}

TEST_CASE("span analysis of a fiber field resolves through the base point") {
    const auto g = GrassmannSet::fiber_field("appA");
    CHECK_THROWS_AS(span_analysis(g), DimError);
    const SpanAnalysis s = span_analysis(g, pt1(0.5));
    CHECK_FALSE(s.involves_all);  // single line in the plane
}

// ====================================================================
// Free directions
// ====================================================================

TEST_CASE("full grassmannian frees exactly p-1 dimensions") {
    CHECK(free_dimension(GrassmannSet::full(1, 3)) == 0);
    CHECK(free_dimension(GrassmannSet::full(2, 4)) == 1);
    std::optional<Plane> w;
    CHECK(free_dimension(GrassmannSet::full(3, 5), &w) == 2);
    REQUIRE(w);
    CHECK(w->plane_dim() == 2);
    // no sampled 3-plane fits inside the 2-dim witness: restricted trace of
    // I - P_V stays >= p - dim V = 1
    const Mat rest = Mat::Identity(5, 5) - w->projection().matrix();
    for (const Plane& s : sample_frames(5, 3, 2000, 5))
        CHECK((s.frame().transpose() * rest * s.frame()).trace() >= 1.0 - 1e-9);
}

TEST_CASE("finite and complex families report certified free dimensions") {
    const auto axis = GrassmannSet::finite({coordinate_plane(2, {0})});
    std::optional<Plane> w;
    CHECK(free_dimension(axis, &w) == 1);
    REQUIRE(w);
    CHECK(detail::freeness_objective(axis, *w) > 1e-6);

    // complex lines in R^4: a maximal totally-real plane is free
    const auto cl = GrassmannSet::complex_lines(4);
    std::optional<Plane> wc;
    CHECK(free_dimension(cl, &wc) == 2);
    REQUIRE(wc);
    CHECK(detail::certify_free(cl, *wc, 20000, 11));

    CHECK_THROWS_AS(free_dimension(GrassmannSet::complex_lines(6)), BudgetExceeded);
    CHECK_THROWS_AS(free_dimension(GrassmannSet::fiber_field("appA")), DimError);
}

// ====================================================================
// Positive hull coordinates
// ====================================================================

TEST_CASE("positive hull coordinates recover known combinations") {
    const std::vector<Plane> gens = {coordinate_plane(2, {0}), coordinate_plane(2, {1})};
    const SymForm a = diag2(2.0, 3.0);
    const Vec t = positive_hull_coordinates(a, gens);
    CHECK(t(0) == Catch::Approx(2.0).margin(1e-5));
    CHECK(t(1) == Catch::Approx(3.0).margin(1e-5));

    CHECK_THROWS_AS(positive_hull_coordinates(diag2(1.0, -1.0), gens), ConeViolation);
    CHECK_THROWS_AS(positive_hull_coordinates(a, {}), ConeViolation);
}
