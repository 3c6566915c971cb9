// Batch frontend: classify forms against plane families, check boundary
// convexity, solve Dirichlet problems on lattices, compute envelopes and
// hulls, and run the named reproduction scenarios. Every run writes a
// manifest echoing the resolved configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpsh/gpsh.hpp"

namespace fs = std::filesystem;
using gpsh::json;
using gpsh::Vec;
using gpsh::Mat;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 1;
    std::string out = "out";
    double tol = 1e-9;
};

struct FamilyOpts {
    std::string file;      // JSON file takes precedence
    std::string variant;   // full | finite | complex_lines | fiber_field
    int n = 2;
    int p = 1;
    std::string rule;      // fiber rule id
};

void add_family_options(CLI::App* cmd, FamilyOpts& fam) {
    cmd->add_option("--family", fam.file, "plane-family JSON file");
    cmd->add_option("--variant", fam.variant, "full | complex_lines | fiber_field")
        ->check(CLI::IsMember({"full", "complex_lines", "fiber_field"}));
    cmd->add_option("--n", fam.n, "ambient dimension");
    cmd->add_option("--p", fam.p, "plane dimension");
    cmd->add_option("--rule", fam.rule, "fiber rule id");
}

gpsh::GrassmannSet resolve_family(const FamilyOpts& fam) {
    if (!fam.file.empty()) {
        std::ifstream is(fam.file);
        if (!is) throw gpsh::DomainError("cannot open family file: " + fam.file);
        json j;
        is >> j;
        return gpsh::grassmann_from_json(j);
    }
    if (fam.variant == "full" || fam.variant.empty()) return gpsh::GrassmannSet::full(fam.p, fam.n);
    if (fam.variant == "complex_lines") return gpsh::GrassmannSet::complex_lines(fam.n);
    if (fam.variant == "fiber_field") return gpsh::GrassmannSet::fiber_field(fam.rule);
    throw gpsh::DomainError("unknown family variant: " + fam.variant);
}

json family_config(const FamilyOpts& fam) {
    json j;
    if (!fam.file.empty()) {
        j["file"] = fam.file;
    } else {
        j["variant"] = fam.variant.empty() ? "full" : fam.variant;
        j["n"] = fam.n;
        j["p"] = fam.p;
        if (!fam.rule.empty()) j["rule"] = fam.rule;
    }
    return j;
}

Vec parse_vec(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    Vec v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
    return v;
}

void write_manifest_file(const GlobalOpts& g, const std::string& command, json config) {
    fs::create_directories(g.out);
    config["seed"] = g.seed;
    config["tol"] = g.tol;
    config["out"] = g.out;
    const json manifest = gpsh::make_manifest(command, config);
    std::ofstream os(fs::path(g.out) / "manifest.json");
    os << manifest.dump(2) << "\n";
}

void write_json_file(const GlobalOpts& g, const std::string& name, const json& j) {
    fs::create_directories(g.out);
    std::ofstream os(fs::path(g.out) / name);
    os << j.dump(2) << "\n";
}

void write_text_file(const GlobalOpts& g, const std::string& name, const std::string& text) {
    fs::create_directories(g.out);
    std::ofstream os(fs::path(g.out) / name);
    os << text;
}

std::string surface_plot_script(const std::string& csv, int dim) {
    std::string s = "set datafile separator ','\n";
    if (dim == 2) {
        s += "set pm3d map\n";
        s += "splot '" + csv + "' using 1:2:3 with pm3d notitle\n";
    } else {
        s += "plot '" + csv + "' using 1:2 with lines notitle\n";
    }
    return s;
}

// ---------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------

int cmd_classify(const GlobalOpts& g, const FamilyOpts& fam, const std::string& form_file,
                 const std::string& point_csv) {
    std::ifstream is(form_file);
    if (!is) throw gpsh::DomainError("cannot open form file: " + form_file);
    json fj;
    is >> fj;
    const gpsh::SymForm a = gpsh::symform_from_json(fj);
    const gpsh::GrassmannSet fam_set = resolve_family(fam);
    std::optional<Vec> x;
    if (!point_csv.empty()) x = parse_vec(point_csv);

    const gpsh::ConeVerdict v = gpsh::classify(fam_set, a, x);
    json out;
    out["in_P"] = v.in_P;
    out["in_interior"] = v.in_IntP;
    out["in_dual"] = v.in_dual;
    out["on_boundary"] = v.on_boundary;
    out["empty_fiber"] = v.empty_fiber;
    if (std::isfinite(v.min_trace)) out["min_trace"] = v.min_trace;
    if (std::isfinite(v.max_trace)) out["max_trace"] = v.max_trace;
    if (v.witness_min) out["witness_min"] = gpsh::to_json(*v.witness_min);
    if (v.witness_max) out["witness_max"] = gpsh::to_json(*v.witness_max);
    if (!v.in_P && !v.empty_fiber) {
        const gpsh::Plane w = gpsh::separating_witness(fam_set, a, x);
        out["separating_witness"] = gpsh::to_json(w);
    }
    write_json_file(g, "verdict.json", out);

    json config;
    config["form"] = form_file;
    config["family"] = family_config(fam);
    if (!point_csv.empty()) config["point"] = point_csv;
    write_manifest_file(g, "classify", config);

    std::cout << (v.in_P ? "in_P" : "not_in_P") << " min_trace="
              << (std::isfinite(v.min_trace) ? gpsh::csv_number(v.min_trace) : "inf")
              << " dual=" << (v.in_dual ? "true" : "false") << "\n";
    return v.in_P ? 0 : 1;
}

// ---------------------------------------------------------------------
// boundary
// ---------------------------------------------------------------------

int cmd_boundary(const GlobalOpts& g, const FamilyOpts& fam, const std::string& domain,
                 int dim, double strict_eta, double grid_h) {
    const gpsh::ImplicitDomain d = gpsh::make_domain(domain, dim);
    const gpsh::GrassmannSet fam_set = resolve_family(fam);
    const gpsh::BoundaryConvexityReport rep =
        gpsh::boundary_convexity(d, fam_set, strict_eta, grid_h, g.seed);

    std::vector<std::string> header;
    for (int i = 0; i < d.n; ++i) header.push_back("x" + std::to_string(i));
    header.push_back("min_tangential_trace");
    header.push_back("verdict");
    std::vector<std::vector<double>> rows;
    int counts[4] = {0, 0, 0, 0};
    for (const auto& pt : rep.points) {
        std::vector<double> row;
        for (int i = 0; i < d.n; ++i) row.push_back(pt.point.x(i));
        row.push_back(std::isfinite(pt.min_tangential_trace) ? pt.min_tangential_trace : 1e300);
        row.push_back(static_cast<double>(static_cast<int>(pt.verdict)));
        ++counts[static_cast<int>(pt.verdict)];
        rows.push_back(std::move(row));
    }
    fs::create_directories(g.out);
    gpsh::write_csv((fs::path(g.out) / "boundary.csv").string(), header, rows);

    json out;
    out["points"] = rep.points.size();
    out["min_tangential_trace"] = rep.min_tangential_trace;
    out["all_strictly_convex"] = rep.all_strictly_convex;
    out["any_not_convex"] = rep.any_not_convex;
    out["counts"] = {{"not_convex", counts[0]},
                     {"convex", counts[1]},
                     {"strictly_convex", counts[2]},
                     {"free", counts[3]}};
    write_json_file(g, "report.json", out);

    json config;
    config["domain"] = domain;
    config["dim"] = dim;
    config["family"] = family_config(fam);
    config["strict_eta"] = strict_eta;
    config["grid_h"] = grid_h;
    write_manifest_file(g, "boundary", config);

    std::cout << "boundary points=" << rep.points.size()
              << " all_strictly_convex=" << (rep.all_strictly_convex ? "true" : "false")
              << " any_not_convex=" << (rep.any_not_convex ? "true" : "false") << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// lattice helpers shared by solve / envelope / hull / mp-check
// ---------------------------------------------------------------------

struct LatticeOpts {
    std::string lo = "-1,-1";
    std::string hi = "1,1";
    double h = 1.0 / 32.0;
    int radius = 2;
};

void add_lattice_options(CLI::App* cmd, LatticeOpts& lo) {
    cmd->add_option("--lo", lo.lo, "lattice lower corner, comma separated");
    cmd->add_option("--hi", lo.hi, "lattice upper corner, comma separated");
    cmd->add_option("--spacing", lo.h, "lattice spacing");
    cmd->add_option("--radius", lo.radius, "stencil radius (1-3)");
}

gpsh::Lattice resolve_lattice(const LatticeOpts& lo) {
    const Vec a = parse_vec(lo.lo);
    const Vec b = parse_vec(lo.hi);
    if (a.size() != b.size()) throw gpsh::DimError("--lo and --hi disagree on dimension");
    return gpsh::Lattice::box(static_cast<int>(a.size()), a, b, lo.h, lo.radius);
}

json lattice_config(const LatticeOpts& lo) {
    json j;
    j["lo"] = lo.lo;
    j["hi"] = lo.hi;
    j["h"] = lo.h;
    j["radius"] = lo.radius;
    return j;
}

std::function<double(const Vec&)> resolve_boundary_data(const std::string& name,
                                                        const std::string& data_file,
                                                        const gpsh::Lattice& lat) {
    if (name != "custom-csv") return gpsh::named_boundary_data(name);
    if (data_file.empty()) throw gpsh::DomainError("custom-csv needs --data-file");
    const auto rows = gpsh::read_csv(data_file);
    const double h = lat.h;
    return [rows, h](const Vec& x) {
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != x.size() + 1) continue;
            bool hit = true;
            for (int i = 0; i < x.size(); ++i)
                hit = hit && std::abs(row[static_cast<std::size_t>(i)] - x(i)) <= 0.5 * h;
            if (hit) return row.back();
        }
        throw gpsh::DomainError("custom-csv has no row for a boundary node");
    };
}

void write_field_csv(const GlobalOpts& g, const std::string& name, const gpsh::GridFunction& u,
                     const std::vector<const gpsh::GridFunction*>& extra = {},
                     const std::vector<std::string>& extra_names = {}) {
    const gpsh::Lattice& lat = *u.lat;
    std::vector<std::string> header;
    for (int i = 0; i < lat.dim; ++i) header.push_back("x" + std::to_string(i));
    header.push_back("u");
    for (const auto& n : extra_names) header.push_back(n);
    std::vector<std::vector<double>> rows;
    for (int f = 0; f < lat.count(); ++f) {
        if (lat.role[static_cast<std::size_t>(f)] == gpsh::CellRole::exterior) continue;
        const Vec x = lat.point(f);
        std::vector<double> row;
        for (int i = 0; i < lat.dim; ++i) row.push_back(x(i));
        row.push_back(u[f]);
        for (const auto* e : extra) row.push_back((*e)[f]);
        rows.push_back(std::move(row));
    }
    fs::create_directories(g.out);
    gpsh::write_csv((fs::path(g.out) / name).string(), header, rows);
}

// ---------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------

int cmd_solve(const GlobalOpts& g, const FamilyOpts& fam, const LatticeOpts& lopts,
              const std::string& data, const std::string& data_file, int max_sweeps,
              bool jacobi) {
    const gpsh::Lattice lat = resolve_lattice(lopts);
    const gpsh::GrassmannSet fam_set = resolve_family(fam);
    const auto bdata = resolve_boundary_data(data, data_file, lat);

    gpsh::GridFunction g0(lat, 0.0);
    for (int f = 0; f < lat.count(); ++f)
        if (lat.role[static_cast<std::size_t>(f)] == gpsh::CellRole::boundary) g0[f] = bdata(lat.point(f));

    gpsh::SolveOptions sopts;
    sopts.radius = lopts.radius;
    sopts.max_sweeps = max_sweeps;
    sopts.jacobi = jacobi;
    sopts.keep_history = true;
    const gpsh::SolveResult res = gpsh::solve_dirichlet(g0, fam_set, lat, sopts);

    write_field_csv(g, "solution.csv", res.u);
    std::vector<std::vector<double>> hist;
    for (std::size_t i = 0; i < res.residual_history.size(); ++i)
        hist.push_back({static_cast<double>(i + 1), res.residual_history[i]});
    gpsh::write_csv((fs::path(g.out) / "residuals.csv").string(), {"sweep", "residual"}, hist);
    write_text_file(g, "plot.gp", surface_plot_script("solution.csv", lat.dim));

    json out;
    out["residual"] = res.residual;
    out["sweeps"] = res.sweeps;
    out["min_trace_range"] = {res.min_trace_lo, res.min_trace_hi};
    out["mp_warning"] = res.mp_warning;
    out["dtheta"] = res.dtheta;
    write_json_file(g, "report.json", out);

    json config;
    config["family"] = family_config(fam);
    config["lattice"] = lattice_config(lopts);
    config["data"] = data;
    if (!data_file.empty()) config["data_file"] = data_file;
    config["max_sweeps"] = max_sweeps;
    config["jacobi"] = jacobi;
    write_manifest_file(g, "solve", config);

    std::cout << "solved sweeps=" << res.sweeps << " residual=" << gpsh::csv_number(res.residual)
              << " min_trace=[" << gpsh::csv_number(res.min_trace_lo) << ","
              << gpsh::csv_number(res.min_trace_hi) << "]"
              << (res.mp_warning ? " mp_warning" : "") << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// envelope
// ---------------------------------------------------------------------

int cmd_envelope(const GlobalOpts& g, const FamilyOpts& fam, const LatticeOpts& lopts,
                 const std::string& obstacle, const std::string& data_file) {
    const gpsh::Lattice lat = resolve_lattice(lopts);
    const gpsh::GrassmannSet fam_set = resolve_family(fam);

    gpsh::GridFunction psi(lat, 0.0);
    if (obstacle == "double-well") {
        psi.fill_from([](const Vec& x) {
            const double q = x(0) * x(0) - 1.0;
            return q * q;
        });
    } else if (obstacle == "custom-csv") {
        const auto bdata = resolve_boundary_data("custom-csv", data_file, lat);
        psi.fill_from(bdata);
    } else {
        throw gpsh::DomainError("unknown obstacle: " + obstacle + " (double-well, custom-csv)");
    }

    gpsh::SolveOptions sopts;
    sopts.radius = lopts.radius;
    const gpsh::GridFunction u = gpsh::psh_envelope(psi, fam_set, lat, sopts);

    write_field_csv(g, "envelope.csv", u, {&psi}, {"obstacle"});
    write_text_file(g, "plot.gp", surface_plot_script("envelope.csv", lat.dim));

    double max_drop = 0.0;
    for (int f = 0; f < lat.count(); ++f) max_drop = std::max(max_drop, psi[f] - u[f]);
    json out;
    out["max_drop"] = max_drop;
    write_json_file(g, "report.json", out);

    json config;
    config["family"] = family_config(fam);
    config["lattice"] = lattice_config(lopts);
    config["obstacle"] = obstacle;
    if (!data_file.empty()) config["data_file"] = data_file;
    write_manifest_file(g, "envelope", config);

    std::cout << "envelope max_drop=" << gpsh::csv_number(max_drop) << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// hull
// ---------------------------------------------------------------------

int cmd_hull(const GlobalOpts& g, const FamilyOpts& fam, const LatticeOpts& lopts,
             const std::string& points, double threshold) {
    const gpsh::Lattice lat = resolve_lattice(lopts);
    const gpsh::GrassmannSet fam_set = resolve_family(fam);

    std::vector<std::uint8_t> mask(static_cast<std::size_t>(lat.count()), 0);
    std::stringstream ss(points);
    std::string part;
    int placed = 0;
    while (std::getline(ss, part, ';')) {
        const Vec x = parse_vec(part);
        if (x.size() != lat.dim) throw gpsh::DimError("--points entries must match lattice dim");
        std::array<int, 3> c{0, 0, 0};
        for (int a = 0; a < lat.dim; ++a)
            c[a] = static_cast<int>(std::round((x(a) - lat.lo(a)) / lat.h));
        const int f = lat.flat(c[0], c[1], c[2]);
        mask[static_cast<std::size_t>(f)] = 1;
        ++placed;
    }
    if (placed == 0) throw gpsh::DomainError("--points is empty");

    gpsh::SolveOptions sopts;
    sopts.radius = lopts.radius;
    const gpsh::HullResult res = gpsh::hull(mask, fam_set, lat, threshold, sopts);

    gpsh::GridFunction mask_fn(lat, 0.0);
    for (int f = 0; f < lat.count(); ++f) mask_fn[f] = res.mask[static_cast<std::size_t>(f)];
    write_field_csv(g, "hull.csv", res.w, {&mask_fn}, {"in_hull"});
    write_text_file(g, "plot.gp", surface_plot_script("hull.csv", lat.dim));

    json out;
    json sweep = json::array();
    for (const auto& [th, cells] : res.threshold_sweep) sweep.push_back({{"threshold", th}, {"cells", cells}});
    out["threshold_sweep"] = sweep;
    int cells = 0;
    for (auto b : res.mask) cells += b;
    out["cells"] = cells;
    write_json_file(g, "report.json", out);

    json config;
    config["family"] = family_config(fam);
    config["lattice"] = lattice_config(lopts);
    config["points"] = points;
    config["threshold"] = threshold;
    write_manifest_file(g, "hull", config);

    std::cout << "hull cells=" << cells << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// span / freedim
// ---------------------------------------------------------------------

int cmd_span(const GlobalOpts& g, const FamilyOpts& fam, const std::string& point_csv) {
    const gpsh::GrassmannSet fam_set = resolve_family(fam);
    std::optional<Vec> x;
    if (!point_csv.empty()) x = parse_vec(point_csv);
    const gpsh::SpanAnalysis rep = gpsh::span_analysis(fam_set, x);
    json out;
    out["involves_all"] = rep.involves_all;
    out["span_dimension"] = rep.span_basis.size();
    out["witness_min_eig"] = rep.witness_min_eig;
    out["paths_agree"] = rep.paths_agree;
    if (rep.positive_witness) out["positive_witness"] = gpsh::to_json(*rep.positive_witness);
    if (rep.orthogonal_direction) {
        std::vector<double> dir;
        for (int i = 0; i < rep.orthogonal_direction->size(); ++i) dir.push_back((*rep.orthogonal_direction)(i));
        out["uninvolved_direction"] = dir;
    }
    write_json_file(g, "span.json", out);
    json config;
    config["family"] = family_config(fam);
    if (!point_csv.empty()) config["point"] = point_csv;
    write_manifest_file(g, "span", config);
    std::cout << "involves_all=" << (rep.involves_all ? "true" : "false")
              << " witness_min_eig=" << gpsh::csv_number(rep.witness_min_eig) << "\n";
    return 0;
}

int cmd_freedim(const GlobalOpts& g, const FamilyOpts& fam) {
    const gpsh::GrassmannSet fam_set = resolve_family(fam);
    const int dim = gpsh::free_dimension(fam_set);
    json out;
    out["free_dimension"] = dim;
    write_json_file(g, "freedim.json", out);
    json config;
    config["family"] = family_config(fam);
    write_manifest_file(g, "freedim", config);
    std::cout << "free_dimension=" << dim << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// mp-check
// ---------------------------------------------------------------------

int cmd_mp_check(const GlobalOpts& g, const FamilyOpts& fam, const LatticeOpts& lopts,
                 int trials) {
    const gpsh::Lattice lat = resolve_lattice(lopts);
    const gpsh::GrassmannSet fam_set = resolve_family(fam);
    gpsh::SolveOptions sopts;
    sopts.radius = lopts.radius;
    const gpsh::MaxPrincipleReport rep = gpsh::max_principle_check(fam_set, lat, trials, g.seed, sopts);
    json out;
    out["trials"] = rep.trials;
    out["violations"] = rep.violations;
    out["worst_gap"] = rep.worst_gap;
    write_json_file(g, "mp.json", out);
    json config;
    config["family"] = family_config(fam);
    config["lattice"] = lattice_config(lopts);
    config["trials"] = trials;
    write_manifest_file(g, "mp-check", config);
    std::cout << "violations=" << rep.violations << " worst_gap=" << gpsh::csv_number(rep.worst_gap)
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// repro scenarios
// ---------------------------------------------------------------------

struct ReproResult {
    bool pass = false;
    json details;
};

ReproResult repro_membership_flip(const std::string& rule, double eps) {
    // A point-dependent family whose membership cone loses closedness in the
    // limit: the probe form stays in the cone along the path but exits at 0.
    const gpsh::GrassmannSet g = gpsh::GrassmannSet::fiber_field(rule);
    std::vector<Vec> path;
    for (int j = 1; j <= 6; ++j) {
        Vec x(1);
        x << -1.0 / j;
        path.push_back(x);
    }
    Vec limit(1);
    limit << 0.0;
    Mat frame(g.n, 1);
    frame.setZero();
    frame(0, 0) = 1.0;
    const gpsh::Plane w = gpsh::projection_from_frame(frame);
    ReproResult r;
    const gpsh::SymForm a = gpsh::nonclosed_probe(g, path, limit, w, eps);
    bool along = true;
    for (const Vec& x : path) along = along && gpsh::classify(g, a, x).in_P;
    const bool at_limit = gpsh::classify(g, a, limit).in_P;
    r.pass = along && !at_limit;
    r.details["in_P_along_path"] = along;
    r.details["in_P_at_limit"] = at_limit;
    r.details["probe_form"] = gpsh::to_json(a);
    r.details["eps"] = eps;
    return r;
}

ReproResult repro_slices() {
    const gpsh::ImplicitDomain d = gpsh::make_domain("crescent513", 2);
    const gpsh::SliceConnectivity global = gpsh::horizontal_slice_connectivity(d, 0.02);
    const gpsh::LocalSliceConnectivity local = gpsh::local_slice_connectivity(d, 0.02, 0.5);
    ReproResult r;
    r.pass = local.locally_g_convex && !global.g_convex && global.witness_slice.has_value();
    r.details["locally_convex"] = local.locally_g_convex;
    r.details["globally_convex"] = global.g_convex;
    if (global.witness_slice) r.details["witness_slice_height"] = *global.witness_slice;
    return r;
}

ReproResult repro_decreasing_limit() {
    const gpsh::Ex66Report rep = gpsh::ex66_closure_failure();
    ReproResult r;
    r.pass = rep.members_subharmonic && rep.monotone_decreasing && rep.limit_fails;
    r.details["members_subharmonic"] = rep.members_subharmonic;
    r.details["monotone_decreasing"] = rep.monotone_decreasing;
    r.details["limit_fails"] = rep.limit_fails;
    r.details["limit_second_diff"] = rep.limit_second_diff;
    return r;
}

ReproResult repro_sphere_band(const GlobalOpts& g) {
    const gpsh::SphereCounterexample rep = gpsh::sphere_counterexample(128);
    ReproResult r;
    r.pass = rep.max_formula_err <= 1e-4 && rep.max_ambient_err <= 1e-4 && rep.psh_everywhere &&
             rep.mp_failure;
    r.details["max_formula_err"] = rep.max_formula_err;
    r.details["max_ambient_err"] = rep.max_ambient_err;
    r.details["psh_everywhere"] = rep.psh_everywhere;
    r.details["mp_failure"] = rep.mp_failure;
    r.details["interior_max"] = rep.interior_max;
    r.details["edge_max"] = rep.edge_max;
    std::vector<std::vector<double>> rows;
    for (const auto& [y, tr] : rep.profile) rows.push_back({y, tr});
    fs::create_directories(g.out);
    gpsh::write_csv((fs::path(g.out) / "band_trace.csv").string(), {"height", "trace"}, rows);
    return r;
}

ReproResult repro_radial_hessian(const GlobalOpts& g) {
    gpsh::Rng rng(g.seed + 7);
    gpsh::ScalarField norm_field;
    norm_field.dim = 3;
    norm_field.eval = [](const Vec& x) { return x.norm(); };
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) x(i) = rng.gaussian();
        x *= rng.uniform(0.5, 2.0) / x.norm();
        const gpsh::SymForm fd = norm_field.hessian(x);
        const Vec xh = x.normalized();
        const gpsh::SymForm exact(
            (Mat::Identity(3, 3) - xh * xh.transpose()) / x.norm());
        worst = std::max(worst, (fd - exact).frobenius_norm());
    }

    // block form of the exhaustion Hessian on the unit ball
    const gpsh::ImplicitDomain ball = gpsh::make_domain("ball", 3);
    const gpsh::ScalarField u = gpsh::exhaustion_from_defining(ball);
    double worst_block = 0.0;
    for (int k = 0; k < 100; ++k) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) x(i) = rng.gaussian();
        const double r = rng.uniform(0.2, 0.9);
        x *= r / x.norm();
        const double delta = 1.0 - r;
        const Vec xh = x / r;
        const Mat radial = xh * xh.transpose();
        const gpsh::SymForm block(
            (radial / delta + (Mat::Identity(3, 3) - radial) / r) / delta);
        worst_block = std::max(worst_block, (u.hessian(x) - block).frobenius_norm());
    }
    ReproResult r;
    r.pass = worst <= 1e-5 && worst_block <= 1e-4;
    r.details["hessian_err"] = worst;
    r.details["block_form_err"] = worst_block;
    return r;
}

int cmd_repro(const GlobalOpts& g, const std::string& name) {
    ReproResult r;
    if (name == "ex2.3")
        r = repro_membership_flip("ex2.3", 0.5);
    else if (name == "appA-nonclosed")
        r = repro_membership_flip("appA", 0.45);
    else if (name == "ex5.13")
        r = repro_slices();
    else if (name == "ex6.6")
        r = repro_decreasing_limit();
    else if (name == "ex8.6")
        r = repro_sphere_band(g);
    else if (name == "remark5.10")
        r = repro_radial_hessian(g);
    else {
        std::cerr << "unknown scenario: " << name << "\n";
        return 2;
    }
    json out;
    out["scenario"] = name;
    out["pass"] = r.pass;
    out["details"] = r.details;
    write_json_file(g, "repro-" + name + ".json", out);
    json config;
    config["scenario"] = name;
    write_manifest_file(g, "repro", config);
    std::cout << name << ": " << (r.pass ? "PASS" : "FAIL") << "\n";
    return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plane-family convexity toolkit"};
    app.set_config("--config", "", "key=value config file");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--tol", g.tol, "verdict tolerance");

    // classify
    FamilyOpts cl_fam;
    std::string cl_form, cl_point;
    auto* classify = app.add_subcommand("classify", "membership of a form in the trace cone");
    classify->add_option("--form", cl_form, "symmetric form JSON file")->required();
    classify->add_option("--point", cl_point, "base point for fibered families");
    add_family_options(classify, cl_fam);

    // boundary
    FamilyOpts bd_fam;
    std::string bd_domain = "ball";
    int bd_dim = 2;
    double bd_eta = 1e-6, bd_h = 0.1;
    auto* boundary = app.add_subcommand("boundary", "boundary convexity of a builtin domain");
    boundary->add_option("--domain", bd_domain, "ball | ellipse | hyperboloid | crescent513");
    boundary->add_option("--dim", bd_dim, "ambient dimension");
    boundary->add_option("--strict-eta", bd_eta, "strictness threshold");
    boundary->add_option("--grid-h", bd_h, "boundary sampling pitch");
    add_family_options(boundary, bd_fam);

    // solve
    FamilyOpts sv_fam;
    LatticeOpts sv_lat;
    std::string sv_data = "saddle", sv_file;
    int sv_sweeps = 100000;
    bool sv_jacobi = false;
    auto* solve = app.add_subcommand("solve", "Dirichlet solve: minimal frame trace = 0");
    solve->add_option("--data", sv_data, "saddle | xsq | abs | custom-csv");
    solve->add_option("--data-file", sv_file, "CSV for custom boundary data");
    solve->add_option("--max-sweeps", sv_sweeps, "sweep budget");
    solve->add_flag("--jacobi", sv_jacobi, "Jacobi instead of Gauss-Seidel");
    add_family_options(solve, sv_fam);
    add_lattice_options(solve, sv_lat);

    // envelope
    FamilyOpts en_fam;
    LatticeOpts en_lat;
    std::string en_obstacle = "double-well", en_file;
    auto* envelope = app.add_subcommand("envelope", "largest subharmonic minorant of an obstacle");
    envelope->add_option("--obstacle", en_obstacle, "double-well | custom-csv");
    envelope->add_option("--data-file", en_file, "CSV obstacle for custom-csv");
    add_family_options(envelope, en_fam);
    add_lattice_options(envelope, en_lat);

    // hull
    FamilyOpts hl_fam;
    LatticeOpts hl_lat;
    std::string hl_points = "0,0";
    double hl_threshold = 0.05;
    auto* hullc = app.add_subcommand("hull", "hull of a node set");
    hullc->add_option("--points", hl_points, "seed points 'x,y;x,y;...'");
    hullc->add_option("--threshold", hl_threshold, "hull level threshold");
    add_family_options(hullc, hl_fam);
    add_lattice_options(hullc, hl_lat);

    // span
    FamilyOpts sp_fam;
    std::string sp_point;
    auto* span = app.add_subcommand("span", "does the family involve all variables?");
    span->add_option("--point", sp_point, "base point for fibered families");
    add_family_options(span, sp_fam);

    // freedim
    FamilyOpts fd_fam;
    auto* freedim = app.add_subcommand("freedim", "largest plane-free subspace dimension");
    add_family_options(freedim, fd_fam);

    // mp-check
    FamilyOpts mp_fam;
    LatticeOpts mp_lat;
    int mp_trials = 200;
    auto* mpc = app.add_subcommand("mp-check", "discrete maximum principle trials");
    mpc->add_option("--trials", mp_trials, "number of random trials");
    add_family_options(mpc, mp_fam);
    add_lattice_options(mpc, mp_lat);

    // repro
    std::string rp_name;
    auto* repro = app.add_subcommand("repro", "run a named reproduction scenario");
    repro->add_option("name", rp_name, "scenario id")->required();

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
        if (classify->parsed()) return cmd_classify(g, cl_fam, cl_form, cl_point);
        if (boundary->parsed()) return cmd_boundary(g, bd_fam, bd_domain, bd_dim, bd_eta, bd_h);
        if (solve->parsed())
            return cmd_solve(g, sv_fam, sv_lat, sv_data, sv_file, sv_sweeps, sv_jacobi);
        if (envelope->parsed()) return cmd_envelope(g, en_fam, en_lat, en_obstacle, en_file);
        if (hullc->parsed()) return cmd_hull(g, hl_fam, hl_lat, hl_points, hl_threshold);
        if (span->parsed()) return cmd_span(g, sp_fam, sp_point);
        if (freedim->parsed()) return cmd_freedim(g, fd_fam);
        if (mpc->parsed()) return cmd_mp_check(g, mp_fam, mp_lat, mp_trials);
        if (repro->parsed()) return cmd_repro(g, rp_name);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
