#include <catch2/catch_amalgamated.hpp>

#include <gpsh/io.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using gpsh::json;
using gpsh::Mat;

namespace {

// Binary under test, injected by the build system.
const std::string kCli = GPSH_CLI_PATH;

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "gpsh_cli_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

json read_json_file(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    json j;
    is >> j;
    return j;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_form(const fs::path& dir, const std::string& name, const Mat& m) {
    const fs::path p = dir / name;
    std::ofstream os(p);
    os << gpsh::to_json(gpsh::SymForm(m)).dump(2) << "\n";
    return p;
}

void require_valid_manifest(const fs::path& out_dir, const std::string& command) {
    const json m = read_json_file(out_dir / "manifest.json");
    std::string why;
    INFO(why);
    REQUIRE(gpsh::manifest_valid(m, &why));
    REQUIRE(m.at("command").get<std::string>() == command);
    // exactly the five published keys, and the globals echoed in config
    REQUIRE(m.size() == 5);
    for (const char* key : {"seed", "tol", "out"}) REQUIRE(m.at("config").contains(key));
}

}  // namespace

// =====================================================================
// classify: exit 0 in the cone, 1 outside, 2 on error
// =====================================================================

TEST_CASE("classify maps cone membership to exit codes") {
    const fs::path dir = fresh_dir("classify");
    const fs::path inside = write_form(dir, "inside.json", Mat{{1.0, 0.0}, {0.0, 2.0}});
    const fs::path outside = write_form(dir, "outside.json", Mat{{-1.0, 0.0}, {0.0, 5.0}});

    SECTION("positive definite form on line family: exit 0, interior verdict") {
        const fs::path out = dir / "r_in";
        REQUIRE(run_cli("--out " + q(out) + " classify --form " + q(inside)) == 0);
        const json v = read_json_file(out / "verdict.json");
        REQUIRE(v.at("in_P").get<bool>());
        REQUIRE(v.at("in_interior").get<bool>());
        REQUIRE_FALSE(v.at("on_boundary").get<bool>());
        REQUIRE(v.at("min_trace").get<double>() == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(v.at("max_trace").get<double>() == Catch::Approx(2.0).margin(1e-9));
        REQUIRE(v.contains("witness_min"));
        require_valid_manifest(out, "classify");
    }

    SECTION("indefinite form: exit 1, dual flag, separating witness recorded") {
        const fs::path out = dir / "r_out";
        REQUIRE(run_cli("--out " + q(out) + " classify --form " + q(outside)) == 1);
        const json v = read_json_file(out / "verdict.json");
        REQUIRE_FALSE(v.at("in_P").get<bool>());
        REQUIRE(v.at("in_dual").get<bool>());
        REQUIRE(v.at("min_trace").get<double>() == Catch::Approx(-1.0).margin(1e-9));
        REQUIRE(v.contains("separating_witness"));
        const gpsh::Plane w = gpsh::plane_from_json(v.at("separating_witness"));
        const Mat a = Mat{{-1.0, 0.0}, {0.0, 5.0}};
        REQUIRE((w.frame().transpose() * a * w.frame()).trace() < 0.0);
    }

    SECTION("malformed matrix file: exit 2") {
        const fs::path bad = dir / "bad.json";
        std::ofstream(bad) << "{\"dim\": 2, \"entries\": [1.0, 2.0, 3.0]}\n";
        REQUIRE(run_cli("--out " + q(dir / "r_bad") + " classify --form " + q(bad)) == 2);
    }

    SECTION("missing form file: exit 2") {
        REQUIRE(run_cli("--out " + q(dir / "r_miss") + " classify --form " +
                        q(dir / "nope.json")) == 2);
    }

    SECTION("unknown fiber rule: exit 2") {
        REQUIRE(run_cli("--out " + q(dir / "r_rule") + " classify --form " + q(inside) +
                        " --variant fiber_field --rule no-such-rule --point 0.5") == 2);
    }

    SECTION("missing required --form: parse error, nonzero exit") {
        REQUIRE(run_cli("--out " + q(dir / "r_parse") + " classify") != 0);
    }
}

TEST_CASE("classify consults the fiber at the supplied base point") {
    const fs::path dir = fresh_dir("classify_fiber");
    const fs::path neg = write_form(dir, "neg.json", Mat{{-1.0}});
    const std::string fam = " --variant fiber_field --rule ex2.3";

    // Left of the origin the fiber is empty, so every form passes vacuously.
    const fs::path out_empty = dir / "empty";
    REQUIRE(run_cli("--out " + q(out_empty) + " classify --form " + q(neg) + fam +
                    " --point -0.5") == 0);
    const json ve = read_json_file(out_empty / "verdict.json");
    REQUIRE(ve.at("empty_fiber").get<bool>());
    REQUIRE(ve.at("in_P").get<bool>());

    // Right of the origin the full line is active and a negative form fails.
    const fs::path out_full = dir / "full";
    REQUIRE(run_cli("--out " + q(out_full) + " classify --form " + q(neg) + fam +
                    " --point 0.5") == 1);
    const json vf = read_json_file(out_full / "verdict.json");
    REQUIRE_FALSE(vf.at("empty_fiber").get<bool>());
    REQUIRE_FALSE(vf.at("in_P").get<bool>());
}

// =====================================================================
// solve: artifacts, manifest schema, byte-identical reruns
// =====================================================================

TEST_CASE("solve writes artifacts and reruns are byte-identical") {
    const fs::path dir = fresh_dir("solve");
    const std::string args =
        " solve --data saddle --variant full --n 2 --p 2"
        " --lo -1,-1 --hi 1,1 --spacing 0.125 --radius 1";

    const fs::path out = dir / "run";
    REQUIRE(run_cli("--out " + q(out) + args) == 0);
    for (const char* name :
         {"solution.csv", "residuals.csv", "plot.gp", "report.json", "manifest.json"}) {
        INFO(name);
        REQUIRE(fs::exists(out / name));
    }

    require_valid_manifest(out, "solve");
    json a = read_json_file(out / "manifest.json");
    REQUIRE(a.at("config").at("data").get<std::string>() == "saddle");
    REQUIRE(a.at("config").at("lattice").at("h").get<double>() ==
            Catch::Approx(0.125).margin(1e-15));

    // The saddle is an exact discrete solution for the 2-plane family, so the
    // solver converges to machine-level interior traces.
    const json rep = read_json_file(out / "report.json");
    REQUIRE(rep.at("residual").get<double>() <= 1e-8);
    REQUIRE(std::abs(rep.at("min_trace_range")[0].get<double>()) <= 1e-6);
    REQUIRE(std::abs(rep.at("min_trace_range")[1].get<double>()) <= 1e-6);
    REQUIRE_FALSE(rep.at("mp_warning").get<bool>());

    // Rerun the identical config into the same directory: every CSV byte
    // matches, and the manifests agree on everything except the timestamp.
    const std::string csv1 = slurp(out / "solution.csv");
    const std::string res1 = slurp(out / "residuals.csv");
    REQUIRE(run_cli("--out " + q(out) + args) == 0);
    REQUIRE(slurp(out / "solution.csv") == csv1);
    REQUIRE(slurp(out / "residuals.csv") == res1);

    json b = read_json_file(out / "manifest.json");
    REQUIRE(b.at("timestamp").get<std::string>().size() == 20);
    a.erase("timestamp");
    b.erase("timestamp");
    REQUIRE(a == b);

    // Solution CSV parses back to the lattice size: 17x17 nodes.
    const auto rows = gpsh::read_csv((out / "solution.csv").string());
    REQUIRE(rows.size() == 17 * 17);
}

TEST_CASE("solve with a missing custom data file exits 2") {
    const fs::path dir = fresh_dir("solve_missing");
    REQUIRE(run_cli("--out " + q(dir / "r") +
                    " solve --data custom-csv --data-file " + q(dir / "absent.csv") +
                    " --spacing 0.25") == 2);
}

// =====================================================================
// repro: scripted scenario dispatch
// =====================================================================

TEST_CASE("repro runs named scenarios and rejects unknown names") {
    const fs::path dir = fresh_dir("repro");

    SECTION("membership-flip scenario passes") {
        const fs::path out = dir / "flip";
        REQUIRE(run_cli("--out " + q(out) + " repro ex2.3") == 0);
        const json r = read_json_file(out / "repro-ex2.3.json");
        REQUIRE(r.at("pass").get<bool>());
        REQUIRE(r.at("details").at("in_P_along_path").get<bool>());
        REQUIRE_FALSE(r.at("details").at("in_P_at_limit").get<bool>());
        require_valid_manifest(out, "repro");
    }

    SECTION("unknown scenario: exit 2") {
        REQUIRE(run_cli("--out " + q(dir / "u") + " repro no-such-scenario") == 2);
    }
}

// =====================================================================
// remaining commands: smoke runs with sanity checks on the reports
// =====================================================================

TEST_CASE("boundary reports strict convexity of the ball") {
    const fs::path out = fresh_dir("boundary") / "ball";
    REQUIRE(run_cli("--out " + q(out) + " boundary --domain ball --dim 2 --grid-h 0.25") == 0);
    REQUIRE(fs::exists(out / "boundary.csv"));
    const json rep = read_json_file(out / "report.json");
    REQUIRE(rep.at("all_strictly_convex").get<bool>());
    REQUIRE_FALSE(rep.at("any_not_convex").get<bool>());
    REQUIRE(rep.at("points").get<int>() > 0);
    require_valid_manifest(out, "boundary");
}

TEST_CASE("envelope flattens the double well") {
    const fs::path out = fresh_dir("envelope") / "dw";
    REQUIRE(run_cli("--out " + q(out) +
                    " envelope --obstacle double-well --variant full --n 1 --p 1"
                    " --lo -2 --hi 2 --spacing 0.125 --radius 1") == 0);
    REQUIRE(fs::exists(out / "envelope.csv"));
    const json rep = read_json_file(out / "report.json");
    // The obstacle is 1 at the hump center while the envelope glues to 0 there.
    REQUIRE(rep.at("max_drop").get<double>() == Catch::Approx(1.0).margin(1e-2));
    require_valid_manifest(out, "envelope");
}

TEST_CASE("hull of two seed points fills the connecting segment") {
    const fs::path out = fresh_dir("hull") / "seg";
    REQUIRE(run_cli("--out " + q(out) +
                    " hull --points '0.5,0;-0.5,0' --threshold 0.0625"
                    " --lo -1,-1 --hi 1,1 --spacing 0.125 --radius 1") == 0);
    const json rep = read_json_file(out / "report.json");
    const int cells = rep.at("cells").get<int>();
    REQUIRE(cells >= 9);   // the 9 nodes of the segment itself
    REQUIRE(cells <= 45);  // at most a one-cell layer around it
    REQUIRE(rep.at("threshold_sweep").size() == 4);
    require_valid_manifest(out, "hull");
}

TEST_CASE("span and freedim answer on the default family") {
    const fs::path dir = fresh_dir("span_freedim");

    const fs::path s = dir / "span";
    REQUIRE(run_cli("--out " + q(s) + " span") == 0);
    const json sj = read_json_file(s / "span.json");
    REQUIRE(sj.at("involves_all").get<bool>());
    REQUIRE(sj.at("witness_min_eig").get<double>() > 0.0);
    REQUIRE(sj.at("paths_agree").get<bool>());
    require_valid_manifest(s, "span");

    const fs::path f = dir / "freedim";
    REQUIRE(run_cli("--out " + q(f) + " freedim --variant full --n 3 --p 2") == 0);
    const json fj = read_json_file(f / "freedim.json");
    REQUIRE(fj.at("free_dimension").get<int>() == 1);
    require_valid_manifest(f, "freedim");
}

TEST_CASE("mp-check finds no violations on an unconstrained box") {
    const fs::path out = fresh_dir("mp") / "box";
    REQUIRE(run_cli("--out " + q(out) +
                    " mp-check --trials 10 --spacing 0.25 --radius 1") == 0);
    const json rep = read_json_file(out / "mp.json");
    REQUIRE(rep.at("trials").get<int>() == 10);
    REQUIRE(rep.at("violations").get<int>() == 0);
    REQUIRE(rep.at("worst_gap").get<double>() <= 1e-9);
    require_valid_manifest(out, "mp-check");
}
