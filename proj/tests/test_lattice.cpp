#include <catch2/catch_amalgamated.hpp>

#include "gpsh/lattice.hpp"

using namespace gpsh;

namespace {

Lattice unit_box_2d(double h, int band = 2) {
    Vec lo = Vec::Constant(2, -1.0), hi = Vec::Constant(2, 1.0);
    return Lattice::box(2, lo, hi, h, band);
}

double second_partial_sum(const GridFunction& a, const GridFunction& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i)
        m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace

// ====================================================================
// Lattice bookkeeping
// ====================================================================

TEST_CASE("box lattices index, locate, and label correctly") {
    Vec lo = Vec::Constant(2, -1.0), hi = Vec::Constant(2, 1.0);
    const Lattice lat = Lattice::box(2, lo, hi, 0.5, 1);
    CHECK(lat.size[0] == 5);
    CHECK(lat.size[1] == 5);
    CHECK(lat.count() == 25);

    const int center = lat.flat(2, 2);
    CHECK(lat.point(center).norm() <= 1e-12);
    CHECK(lat.role[static_cast<std::size_t>(center)] == CellRole::interior);
    CHECK(lat.role[static_cast<std::size_t>(lat.flat(0, 2))] == CellRole::boundary);
    CHECK(lat.role[static_cast<std::size_t>(lat.flat(4, 4))] == CellRole::boundary);

    const std::array<int, 3> ex{1, 0, 0};
    CHECK(lat.step(center, ex, +1) == lat.flat(3, 2));
    CHECK(lat.step(lat.flat(4, 2), ex, +1) == -1);  // off-grid

    CHECK_THROWS_AS(Lattice::box(4, Vec::Zero(4), Vec::Ones(4), 0.5, 1), DimError);
    CHECK_THROWS_AS(Lattice::box(2, lo, hi, 0.9, 2), DimError);  // too few layers
}

TEST_CASE("masked lattices mark nodes outside the predicate as exterior") {
    Vec lo = Vec::Constant(2, -1.0), hi = Vec::Constant(2, 1.0);
    const Lattice lat = Lattice::masked(
        2, lo, hi, 0.25, [](const Vec& x) { return x.norm() <= 1.0; }, 1);
    CHECK(lat.role[static_cast<std::size_t>(lat.flat(0, 0))] == CellRole::exterior);  // corner
    CHECK(lat.role[static_cast<std::size_t>(lat.flat(4, 4))] == CellRole::interior);  // center

    GridFunction u(lat, -7.0);
    u.fill_from([](const Vec&) { return 1.0; });
    CHECK(u[lat.flat(0, 0)] == -7.0);  // exterior untouched
    CHECK(u[lat.flat(4, 4)] == 1.0);
}

// ====================================================================
// Stencil construction
// ====================================================================

TEST_CASE("primitive direction counts per dimension and radius") {
    CHECK(detail::primitive_directions(2, 1).size() == 4);
    CHECK(detail::primitive_directions(2, 2).size() == 8);
    CHECK(detail::primitive_directions(3, 1).size() == 13);
    CHECK(detail::primitive_directions(1, 2).size() == 1);  // only the unit step survives gcd
}

TEST_CASE("orthogonal frames are orthonormal in span with inverse-square weights") {
    const auto frames = detail::orthogonal_frames(3, 2, 1);
    REQUIRE(!frames.empty());
    std::set<std::string> keys;
    for (const auto& fr : frames) {
        REQUIRE(fr.dirs.size() == 2);
        CHECK(detail::dot3(fr.dirs[0], fr.dirs[1]) == 0);
        for (std::size_t i = 0; i < fr.dirs.size(); ++i) {
            const auto& d = fr.dirs[i];
            const double n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            CHECK(fr.w[i] == Catch::Approx(1.0 / n2));
        }
        keys.insert(detail::span_key(fr, 3));
    }
    CHECK(keys.size() == frames.size());  // span-deduplicated

    // in 2D every orthogonal pair spans the whole plane: one frame remains
    CHECK(detail::orthogonal_frames(2, 2, 1).size() == 1);
    CHECK(detail::orthogonal_frames(2, 1, 2).size() == 8);
}

TEST_CASE("full-family stencils report their angular resolution") {
    const Lattice lat = unit_box_2d(0.25, 2);
    const auto g = GrassmannSet::full(1, 2);
    const StencilFamily s1 = build_stencil(g, lat, 1);
    CHECK(s1.frames.size() == 4);
    CHECK(s1.dtheta == Catch::Approx(22.5 * M_PI / 180.0).margin(1e-12));
    const StencilFamily s2 = build_stencil(g, lat, 2);
    CHECK(s2.frames.size() == 8);
    // largest angular gap at radius 2 is atan(1/2), half of it on either side
    CHECK(s2.dtheta == Catch::Approx(0.5 * std::atan(0.5)).margin(1e-12));
    CHECK(s2.dtheta < s1.dtheta);
}

TEST_CASE("finite planes snap to the nearest admissible integer frame") {
    const Lattice lat = unit_box_2d(0.25, 3);
    Vec d(2);
    d << std::cos(20.0 * M_PI / 180.0), std::sin(20.0 * M_PI / 180.0);
    const auto g = GrassmannSet::finite({line_through(d)});

    const StencilFamily coarse = build_stencil(g, lat, 1);
    REQUIRE(coarse.snap_angles_deg.size() == 1);
    CHECK(coarse.snap_angles_deg[0] == Catch::Approx(20.0).margin(1e-6));
    CHECK(coarse.frames[0].dirs[0] == std::array<int, 3>{1, 0, 0});

    const StencilFamily fine = build_stencil(g, lat, 3);
    CHECK(fine.snap_angles_deg[0] ==
          Catch::Approx(20.0 - std::atan2(1.0, 3.0) * 180.0 / M_PI).margin(1e-6));
}

TEST_CASE("directions beyond the snap cap are refused") {
    // the deep hole between the axis, face-diagonal, and body-diagonal dirs
    Vec lo = Vec::Constant(3, -1.0), hi = Vec::Constant(3, 1.0);
    const Lattice lat = Lattice::box(3, lo, hi, 0.25, 1);
    Vec d(3);
    d << 1.0, std::sqrt(2.0) - 1.0, std::sqrt(3.0) - std::sqrt(2.0);
    const auto g = GrassmannSet::finite({line_through(d)});
    CHECK_THROWS_AS(build_stencil(g, lat, 1), StencilResolutionError);
    const StencilFamily fine = build_stencil(g, lat, 3);  // radius 3 reaches it
    CHECK(fine.snap_angles_deg[0] <= 5.0);
}

TEST_CASE("unsupported stencil requests fail loudly") {
    const Lattice lat = unit_box_2d(0.25);
    CHECK_THROWS_AS(build_stencil(GrassmannSet::complex_lines(2), lat, 1),
                    StencilResolutionError);
    CHECK_THROWS_AS(build_stencil(GrassmannSet::full(1, 2), lat, 0), StencilResolutionError);
    CHECK_THROWS_AS(build_stencil(GrassmannSet::full(1, 2), lat, 4), StencilResolutionError);
    CHECK_THROWS_AS(build_stencil(GrassmannSet::full(1, 3), lat, 1), DimError);
}

TEST_CASE("fiber fields restrict frames per node") {
    Vec lo(1), hi(1);
    lo << -1.0;
    hi << 1.0;
    const Lattice lat = Lattice::box(1, lo, hi, 0.25, 1);
    const auto g = GrassmannSet::fiber_field("ex2.3");
    const StencilFamily s = build_stencil(g, lat, 1);
    CHECK(s.per_point);
    REQUIRE(s.frames.size() == 1);
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] == CellRole::exterior) continue;
        const bool constrained = lat.point(f)(0) >= 0.0;
        CHECK(s.frames_at(f).size() == (constrained ? 1u : 0u));
    }
}

// ====================================================================
// Discrete traces
// ====================================================================

TEST_CASE("frame traces are exact on quadratics") {
    const Lattice lat = unit_box_2d(0.25, 2);
    Mat hm(2, 2);
    hm << 3.0, 1.0, 1.0, -1.0;
    const SymForm a(hm);
    GridFunction u(lat);
    u.fill_from([&](const Vec& x) { return 0.5 * x.dot(a.matrix() * x); });

    const StencilFamily s = build_stencil(GrassmannSet::full(1, 2), lat, 2);
    const int center = lat.flat(4, 4);
    const DiscreteTrace t = discrete_operator(u, s, center);
    CHECK(t.applicable == 8);

    double expect_min = kInf, expect_max = -kInf;
    for (const auto& fr : s.frames) {
        Vec d(2);
        d << fr.dirs[0][0], fr.dirs[0][1];
        const double tr = d.dot(a.matrix() * d) / d.squaredNorm();
        expect_min = std::min(expect_min, tr);
        expect_max = std::max(expect_max, tr);
    }
    CHECK(t.min_val == Catch::Approx(expect_min).margin(1e-10));
    CHECK(t.max_val == Catch::Approx(expect_max).margin(1e-10));
    CHECK(t.argmin >= 0);
    CHECK(t.argmax >= 0);

    // one cell from the grid edge: radius-2 directions exit the grid
    const DiscreteTrace edge = discrete_operator(u, s, lat.flat(1, 4));
    CHECK(edge.applicable < 8);
}

// ====================================================================
// The Dirichlet solver
// ====================================================================

TEST_CASE("harmonic boundary data is reproduced exactly") {
    // p = n: the only frame is the full plane and the scheme is the Laplacian;
    // x^2 - y^2 is a discrete fixed point up to the stopping tolerance
    const Lattice lat = unit_box_2d(1.0 / 16.0, 2);
    GridFunction g(lat);
    g.fill_from([](const Vec& x) { return x(0) * x(0) - x(1) * x(1); });
    const SolveResult res = solve_dirichlet(g, GrassmannSet::full(2, 2), lat);

    GridFunction exact(lat);
    exact.fill_from([](const Vec& x) { return x(0) * x(0) - x(1) * x(1); });
    CHECK(second_partial_sum(res.u, exact) <= 1e-8);
    CHECK_FALSE(res.mp_warning);
    CHECK(res.sweeps > 0);

    // discrete minimal trace vanishes to tol/h^2 at the fixed point
    const double bound = 1e-10 * 16.0 * 16.0;
    CHECK(res.min_trace_lo >= -bound);
    CHECK(res.min_trace_hi <= bound);
}

TEST_CASE("lowest-direction curvature vanishes for the line family") {
    // u = x^2 already has zero second difference along the y frame, so it
    // solves the degenerate equation for the full line family
    const Lattice lat = unit_box_2d(1.0 / 16.0, 2);
    GridFunction g(lat);
    g.fill_from([](const Vec& x) { return x(0) * x(0); });
    const SolveResult res = solve_dirichlet(g, GrassmannSet::full(1, 2), lat);
    GridFunction exact(lat);
    exact.fill_from([](const Vec& x) { return x(0) * x(0); });
    CHECK(second_partial_sum(res.u, exact) <= 1e-7);
    const double bound = 1e-10 * 16.0 * 16.0;
    CHECK(res.min_trace_lo >= -bound);
    CHECK(res.min_trace_hi <= bound);
}

TEST_CASE("the solver is monotone in its boundary data") {
    const Lattice lat = unit_box_2d(0.125, 2);
    GridFunction g1(lat), g2(lat);
    g1.fill_from([](const Vec& x) { return std::sin(3.0 * x(0)) + x(1); });
    g2 = g1;
    for (int f = 0; f < lat.count(); ++f)
        if (lat.role[static_cast<std::size_t>(f)] == CellRole::boundary) g2[f] += 0.1;
    const auto g = GrassmannSet::full(1, 2);
    const SolveResult r1 = solve_dirichlet(g1, g, lat);
    const SolveResult r2 = solve_dirichlet(g2, g, lat);
    for (int f = 0; f < lat.count(); ++f) CHECK(r2.u[f] >= r1.u[f] - 1e-9);
}

TEST_CASE("jacobi and gauss-seidel sweeps land on the same fixed point") {
    const Lattice lat = unit_box_2d(0.125, 2);
    GridFunction g(lat);
    g.fill_from([](const Vec& x) { return std::cos(2.0 * x(0)) * x(1); });
    SolveOptions gs, jac;
    jac.jacobi = true;
    const SolveResult a = solve_dirichlet(g, GrassmannSet::full(1, 2), lat, gs);
    const SolveResult b = solve_dirichlet(g, GrassmannSet::full(1, 2), lat, jac);
    CHECK(second_partial_sum(a.u, b.u) <= 1e-7);
}

TEST_CASE("sweep starvation raises NotConverged and history records progress") {
    const Lattice lat = unit_box_2d(0.125, 2);
    GridFunction g(lat);
    g.fill_from([](const Vec& x) { return x(0) * x(1); });
    SolveOptions starved;
    starved.max_sweeps = 2;
    CHECK_THROWS_AS(solve_dirichlet(g, GrassmannSet::full(1, 2), lat, starved), NotConverged);

    SolveOptions hist;
    hist.keep_history = true;
    const SolveResult res = solve_dirichlet(g, GrassmannSet::full(1, 2), lat, hist);
    REQUIRE(res.residual_history.size() >= 2);
    CHECK(res.residual_history.back() < res.residual_history.front());
}

TEST_CASE("families that miss variables carry a maximum-principle warning") {
    const Lattice lat = unit_box_2d(0.25, 2);
    GridFunction g(lat);
    g.fill_from([](const Vec& x) { return x(0); });
    const auto axis = GrassmannSet::finite({coordinate_plane(2, {0})});
    const SolveResult res = solve_dirichlet(g, axis, lat);
    CHECK(res.mp_warning);
}

TEST_CASE("three-dimensional solves satisfy the trace stopping bound") {
    Vec lo = Vec::Constant(3, -1.0), hi = Vec::Constant(3, 1.0);
    const Lattice lat = Lattice::box(3, lo, hi, 0.25, 1);
    GridFunction g(lat);
    g.fill_from([](const Vec& x) { return x.squaredNorm(); });
    SolveOptions opts;
    opts.radius = 1;
    const SolveResult res = solve_dirichlet(g, GrassmannSet::full(1, 3), lat, opts);
    const double bound = 1e-10 / (0.25 * 0.25);
    CHECK(res.min_trace_lo >= -bound);
    CHECK(res.min_trace_hi <= bound);
}

// ====================================================================
// Envelopes
// ====================================================================

TEST_CASE("double-well obstacle produces the glued flat-bottom envelope") {
    Vec lo(1), hi(1);
    lo << -2.0;
    hi << 2.0;
    const Lattice lat = Lattice::box(1, lo, hi, 1.0 / 32.0, 1);
    GridFunction obstacle(lat);
    obstacle.fill_from([](const Vec& x) {
        const double q = x(0) * x(0) - 1.0;
        return q * q;
    });
    SolveOptions opts;
    opts.radius = 1;
    opts.tol = 1e-12;
    const GridFunction env = psh_envelope(obstacle, GrassmannSet::full(1, 1), lat, opts);

    GridFunction glued(lat);
    glued.fill_from([](const Vec& x) {
        const double q = x(0) * x(0) - 1.0;
        return std::abs(x(0)) <= 1.0 ? 0.0 : q * q;
    });
    CHECK(second_partial_sum(env, glued) <= 1e-6);
}

TEST_CASE("envelopes are idempotent, monotone, and fix admissible obstacles") {
    const Lattice lat = unit_box_2d(0.1, 2);
    const auto g = GrassmannSet::full(1, 2);

    GridFunction obstacle(lat);
    obstacle.fill_from([](const Vec& x) { return std::cos(3.0 * x(0)) + 0.5 * x(1); });
    const GridFunction env = psh_envelope(obstacle, g, lat);
    for (int f = 0; f < lat.count(); ++f) CHECK(env[f] <= obstacle[f] + 1e-12);

    const GridFunction env2 = psh_envelope(env, g, lat);
    CHECK(second_partial_sum(env2, env) <= 1e-8);

    GridFunction higher = obstacle;
    for (int f = 0; f < lat.count(); ++f) higher[f] += 0.25;
    const GridFunction envh = psh_envelope(higher, g, lat);
    for (int f = 0; f < lat.count(); ++f) CHECK(envh[f] >= env[f] - 1e-9);

    // an obstacle that is already admissible is returned unchanged
    GridFunction convex(lat);
    convex.fill_from([](const Vec& x) { return x.squaredNorm(); });
    const GridFunction envc = psh_envelope(convex, g, lat);
    CHECK(second_partial_sum(envc, convex) <= 1e-12);
}

// ====================================================================
// Hulls
// ====================================================================

namespace {

// Triangle (-1,-1), (1,-1), (0,1): every edge runs along a stencil direction.
bool triangle_inside_by(const Vec& x, double margin) {
    const double s5 = std::sqrt(5.0);
    const double d_bottom = x(1) + 1.0;
    const double d_left = (2.0 * x(0) - x(1) + 1.0) / s5;
    const double d_right = (1.0 - 2.0 * x(0) - x(1)) / s5;
    return d_bottom >= margin && d_left >= margin && d_right >= margin;
}

}  // namespace

TEST_CASE("hull of stencil-aligned points fills the straight segment exactly") {
    const double h = 1.0 / 16.0;
    Vec lo = Vec::Constant(2, -1.5), hi = Vec::Constant(2, 1.5);
    const Lattice lat = Lattice::box(2, lo, hi, h, 2);
    std::vector<std::uint8_t> k(static_cast<std::size_t>(lat.count()), 0);
    const int row = 24;  // y = 0
    k[static_cast<std::size_t>(lat.flat(8, row))] = 1;   // x = -1
    k[static_cast<std::size_t>(lat.flat(40, row))] = 1;  // x = +1
    const HullResult res = hull(k, GrassmannSet::full(1, 2), lat, h / 2.0);
    for (int i = 8; i <= 40; ++i) CHECK(res.mask[static_cast<std::size_t>(lat.flat(i, row))] == 1);
    // off the segment the envelope must clear the threshold
    CHECK(res.mask[static_cast<std::size_t>(lat.flat(24, row + 4))] == 0);
    CHECK(res.threshold_sweep.size() == 4);
}

TEST_CASE("hull of a triangle matches the geometric hull to one cell layer") {
    const double h = 1.0 / 16.0;
    Vec lo = Vec::Constant(2, -1.5), hi = Vec::Constant(2, 1.5);
    const Lattice lat = Lattice::box(2, lo, hi, h, 2);
    std::vector<std::uint8_t> k(static_cast<std::size_t>(lat.count()), 0);
    std::vector<std::uint8_t> k2 = k;
    k[static_cast<std::size_t>(lat.flat(8, 8))] = 1;    // (-1, -1)
    k[static_cast<std::size_t>(lat.flat(40, 8))] = 1;   // (+1, -1)
    k[static_cast<std::size_t>(lat.flat(24, 40))] = 1;  // (0, +1)
    const HullResult res = hull(k, GrassmannSet::full(1, 2), lat, h / 2.0);

    int mislabeled = 0;
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] != CellRole::interior) continue;
        const Vec x = lat.point(f);
        if (triangle_inside_by(x, 1.01 * h) && res.mask[static_cast<std::size_t>(f)] != 1) ++mislabeled;
        if (!triangle_inside_by(x, -1.01 * h) && res.mask[static_cast<std::size_t>(f)] != 0) ++mislabeled;
    }
    CHECK(mislabeled == 0);

    // hulls grow monotonically with K
    k2 = k;
    k2[static_cast<std::size_t>(lat.flat(24, 8))] = 1;  // extra point on the bottom edge
    const HullResult res2 = hull(k2, GrassmannSet::full(1, 2), lat, h / 2.0);
    for (int f = 0; f < lat.count(); ++f)
        if (res.mask[static_cast<std::size_t>(f)])
            CHECK(res2.mask[static_cast<std::size_t>(f)] == 1);

    CHECK_THROWS_AS(
        hull(std::vector<std::uint8_t>(static_cast<std::size_t>(lat.count()), 0),
             GrassmannSet::full(1, 2), lat, h / 2.0),
        DomainError);
    CHECK_THROWS_AS(hull(std::vector<std::uint8_t>(3, 1), GrassmannSet::full(1, 2), lat),
                    DimError);
}

// ====================================================================
// Maximum principle and comparison harnesses
// ====================================================================

TEST_CASE("forced dually-subharmonic functions obey the maximum principle on a box") {
    const Lattice lat = unit_box_2d(0.125, 2);
    const MaxPrincipleReport rep =
        max_principle_check(GrassmannSet::full(1, 2), lat, 50, 7);
    CHECK(rep.trials == 50);
    CHECK(rep.violations == 0);
    CHECK(rep.worst_gap <= 1e-9);
}

TEST_CASE("disconnected single-direction geometry defeats the maximum principle") {
    // strips above the axis are cut off from the Dirichlet band along x, so
    // their nodes have no applicable frame and stay at their random values
    Vec lo = Vec::Constant(2, -1.0), hi = Vec::Constant(2, 1.0);
    const Lattice lat = Lattice::masked(
        2, lo, hi, 0.2,
        [](const Vec& x) { return x(1) < 0.0 || std::abs(x(0)) > 0.5; }, 1);
    const auto axis = GrassmannSet::finite({coordinate_plane(2, {0})});
    SolveOptions opts;
    opts.radius = 1;
    const MaxPrincipleReport rep = max_principle_check(axis, lat, 50, 7, opts);
    CHECK(rep.violations > 0);
    CHECK(rep.worst_gap > 1e-9);
}

TEST_CASE("comparison holds for certified inputs and rejects bad ones") {
    const Lattice lat = unit_box_2d(0.125, 2);
    const auto g = GrassmannSet::full(1, 2);
    GridFunction u(lat), v(lat), w(lat);
    u.fill_from([](const Vec& x) { return x(0) * x(0) - 0.25; });
    v.fill_from([](const Vec& x) { return -x(0) * x(0); });
    w.fill_from([](const Vec& x) { return -x.squaredNorm(); });

    CHECK(comparison_check(u, v, g, lat));
    CHECK_THROWS_AS(comparison_check(w, v, g, lat), PreconditionFailed);  // w not subharmonic
    CHECK_THROWS_AS(comparison_check(u, w, g, lat), PreconditionFailed);  // w not dual either
}

TEST_CASE("random subharmonic functions pass closure property checks") {
    const Lattice lat = unit_box_2d(0.2, 2);
    const ClosureReport rep = closure_properties_check(GrassmannSet::full(1, 2), lat, 3, 20);
    CHECK(rep.max_stable);
    CHECK(rep.decreasing_stable);
    CHECK(rep.uniform_stable);
    CHECK(rep.envelope_stable);
    CHECK(rep.worst_trace >= -1e-6);
}

TEST_CASE("the decreasing-limit counterexample behaves as designed") {
    const double h = 1.0 / 64.0;
    const Ex66Report rep = ex66_closure_failure(h);
    CHECK(rep.members_subharmonic);
    CHECK(rep.monotone_decreasing);
    CHECK(rep.limit_fails);
    // crease second difference: left arm has slope 1+h into the origin
    CHECK(rep.limit_second_diff == Catch::Approx(-(1.0 + h) / h).margin(1e-6));
}

// ====================================================================
// Distributional pairing
// ====================================================================

TEST_CASE("adjoint and direct pairings agree to roundoff") {
    const Lattice lat = unit_box_2d(0.1, 2);
    const StencilFamily s = build_stencil(GrassmannSet::full(1, 2), lat, 2);
    const auto coeff = [](const Vec& x) {
        Mat m(2, 2);
        m << 2.0 + x(0), 0.0, 0.0, 1.0;
        return SymForm(m);
    };
    const auto coords = hull_coordinate_field(coeff, s, lat);

    Rng rng(99);
    GridFunction u(lat);
    u.fill_from([&](const Vec&) { return rng.uniform(-1.0, 1.0); });  // arbitrary data

    const int center = lat.flat(10, 10);
    const auto direct = direct_pairing_at(u, coords, s, lat, 0.3, center);
    REQUIRE(direct);
    const double adjoint = adjoint_pairing_at(u, coords, s, lat, 0.3, center);
    CHECK(*direct == Catch::Approx(adjoint).margin(1e-10));

    // bumps that overflow the interior are refused
    CHECK_FALSE(direct_pairing_at(u, coords, s, lat, 0.3, lat.flat(3, 10)).has_value());
}

TEST_CASE("subharmonic functions pair nonnegatively against hull coefficients") {
    const Lattice lat = unit_box_2d(0.1, 2);
    const auto g = GrassmannSet::full(1, 2);
    const auto identity_coeff = [](const Vec&) { return SymForm::Identity(2); };

    GridFunction u(lat);
    u.fill_from([](const Vec& x) { return x.squaredNorm(); });
    const DistributionalReport rep = distributional_check(u, identity_coeff, g, lat, 0.3);
    CHECK(rep.bumps > 0);
    CHECK(rep.min_pairing > 0.0);  // trace of |x|^2 along every line is 2

    Rng rng(5);
    const GridFunction r = random_psh(g, lat, rng);
    const DistributionalReport rrep = distributional_check(r, identity_coeff, g, lat, 0.3);
    CHECK(rrep.min_pairing >= -1e-8);

    // a planted concave function is flagged, not smoothed over
    GridFunction bad(lat);
    bad.fill_from([](const Vec& x) { return -x.squaredNorm(); });
    const DistributionalReport brep = distributional_check(bad, identity_coeff, g, lat, 0.3);
    CHECK(brep.min_pairing < 0.0);

    // coefficients outside the positive hull of the frame planes are rejected
    const auto indefinite = [](const Vec&) {
        Mat m(2, 2);
        m << 1.0, 0.0, 0.0, -1.0;
        return SymForm(m);
    };
    CHECK_THROWS_AS(distributional_check(u, indefinite, g, lat, 0.3), ConeViolation);
}

// ====================================================================
// Consistency order
// ====================================================================

TEST_CASE("angular resolution drives the consistency error") {
    const auto g = GrassmannSet::full(1, 2);
    const ConsistencyReport r2 = stencil_consistency(g, 2, 200, 11);
    const ConsistencyReport r3 = stencil_consistency(g, 3, 200, 11);
    CHECK(r2.dtheta > r3.dtheta);
    CHECK(r3.max_error < r2.max_error);
    const double ratio = r2.max_error / r3.max_error;
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 3.0);
    // the error is capped by the squared angular gap on unit-norm forms
    CHECK(r2.max_error <= 2.0 * r2.dtheta * r2.dtheta);
    CHECK(r3.max_error <= 2.0 * r3.dtheta * r3.dtheta);
}
