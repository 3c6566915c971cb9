#pragma once

// Serialization: JSON round-trips for forms, planes, and plane families;
// deterministic CSV (printf %.17g); run manifests; named boundary data.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpsh/forms.hpp"
#include "gpsh/grassmann.hpp"
#include "gpsh/version.hpp"

namespace gpsh {

using json = nlohmann::json;

// =====================================================================
// JSON round-trips
// =====================================================================

inline json to_json(const SymForm& a) {
    json j;
    j["dim"] = a.dim();
    std::vector<double> entries;
    entries.reserve(static_cast<std::size_t>(a.dim() * a.dim()));
    for (int i = 0; i < a.dim(); ++i)
        for (int k = 0; k < a.dim(); ++k) entries.push_back(a.matrix()(i, k));
    j["entries"] = entries;  // row-major
    return j;
}

inline SymForm symform_from_json(const json& j) {
    const int n = j.at("dim").get<int>();
    const auto entries = j.at("entries").get<std::vector<double>>();
    if (static_cast<int>(entries.size()) != n * n)
        throw DimError("symform_from_json: entry count does not match dim");
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) m(i, k) = entries[static_cast<std::size_t>(i * n + k)];
    return SymForm(m);
}

inline json to_json(const Plane& w) {
    json j;
    j["n"] = w.ambient_dim();
    j["p"] = w.plane_dim();
    std::vector<std::vector<double>> cols;
    for (int c = 0; c < w.plane_dim(); ++c) {
        std::vector<double> col;
        for (int r = 0; r < w.ambient_dim(); ++r) col.push_back(w.frame()(r, c));
        cols.push_back(std::move(col));
    }
    j["frame"] = cols;
    return j;
}

inline Plane plane_from_json(const json& j) {
    const int n = j.at("n").get<int>();
    const int p = j.at("p").get<int>();
    const auto cols = j.at("frame").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(cols.size()) != p) throw DimError("plane_from_json: column count mismatch");
    Mat f(n, p);
    for (int c = 0; c < p; ++c) {
        if (static_cast<int>(cols[static_cast<std::size_t>(c)].size()) != n)
            throw DimError("plane_from_json: column length mismatch");
        for (int r = 0; r < n; ++r) f(r, c) = cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
    }
    return projection_from_frame(f);
}

inline json to_json(const GrassmannSet& g) {
    json j;
    switch (g.variant) {
        case GrassmannVariant::FullGrassmannian: j["variant"] = "full"; break;
        case GrassmannVariant::FinitePlanes: j["variant"] = "finite"; break;
        case GrassmannVariant::ComplexLines: j["variant"] = "complex_lines"; break;
        case GrassmannVariant::FiberField: j["variant"] = "fiber_field"; break;
    }
    j["n"] = g.n;
    j["p"] = g.p;
    if (g.variant == GrassmannVariant::FinitePlanes) {
        json planes = json::array();
        for (const Plane& w : g.planes) planes.push_back(to_json(w));
        j["planes"] = planes;
    }
    if (g.variant == GrassmannVariant::FiberField) {
        j["base_dim"] = g.base_dim;
        j["rule"] = g.fiber_rule;
    }
    j["sampler_budget"] = g.sampler_budget;
    j["seed"] = g.seed;
    return j;
}

inline GrassmannSet grassmann_from_json(const json& j) {
    const std::string variant = j.at("variant").get<std::string>();
    GrassmannSet g;
    if (variant == "full") {
        g = GrassmannSet::full(j.at("n").get<int>(), j.at("p").get<int>());
    } else if (variant == "finite") {
        std::vector<Plane> planes;
        for (const auto& pj : j.at("planes")) planes.push_back(plane_from_json(pj));
        g = GrassmannSet::finite(std::move(planes));
    } else if (variant == "complex_lines") {
        g = GrassmannSet::complex_lines(j.at("n").get<int>());
    } else if (variant == "fiber_field") {
        g = GrassmannSet::fiber_field(j.at("rule").get<std::string>());
    } else {
        throw DimError("grassmann_from_json: unknown variant " + variant);
    }
    if (j.contains("sampler_budget")) g.sampler_budget = j.at("sampler_budget").get<int>();
    if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
    return g;
}

// =====================================================================
// CSV
// =====================================================================

/// Shortest round-trip double; byte-stable across runs for identical values.
inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_number(row[i]);
        os << "\n";
    }
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    if (!os) throw DomainError("cannot open " + path + " for writing");
    write_csv(os, header, rows);
}

inline std::vector<std::vector<double>> read_csv(const std::string& path,
                                                 std::vector<std::string>* header = nullptr) {
    std::ifstream is(path);
    if (!is) throw DomainError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (first) {
            first = false;
            bool numeric = true;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) {
                cells.push_back(cell);
                char* end = nullptr;
                std::strtod(cell.c_str(), &end);
                if (end == cell.c_str()) numeric = false;
            }
            if (!numeric) {
                if (header) *header = cells;
                continue;
            }
            std::vector<double> row;
            for (const auto& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
            rows.push_back(std::move(row));
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

// =====================================================================
// Run manifests
// =====================================================================

/// Manifest describing one CLI run: resolved configuration, library version,
/// and a wall-clock timestamp (the single field exempt from determinism).
inline json make_manifest(const std::string& command, const json& resolved_config,
                          std::time_t now = std::time(nullptr)) {
    json j;
    j["tool"] = "gpsh";
    j["version"] = version_string;
    j["command"] = command;
    j["config"] = resolved_config;
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    j["timestamp"] = buf;
    return j;
}

/// Structural validation mirroring docs/manifest.schema.json.
inline bool manifest_valid(const json& j, std::string* why = nullptr) {
    const auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (!j.is_object()) return fail("manifest is not an object");
    for (const char* key : {"tool", "version", "command", "timestamp"})
        if (!j.contains(key) || !j[key].is_string()) return fail(std::string("missing string field: ") + key);
    if (!j.contains("config") || !j["config"].is_object()) return fail("missing object field: config");
    if (j["tool"].get<std::string>() != "gpsh") return fail("tool must be 'gpsh'");
    const std::string ts = j["timestamp"].get<std::string>();
    if (ts.size() != 20 || ts[4] != '-' || ts[7] != '-' || ts[10] != 'T' || ts.back() != 'Z')
        return fail("timestamp is not ISO-8601 UTC");
    return true;
}

// =====================================================================
// Named boundary data
// =====================================================================

/// Builtin Dirichlet data for the solver CLI: "saddle" (x^2 - y^2, the
/// canonical harmonic for line families), "xsq" (x^2, degenerate convex),
/// "abs" (a smooth concave radial dip, forcing a ruled envelope solution).
inline std::function<double(const Vec&)> named_boundary_data(const std::string& name) {
    if (name == "saddle")
        return [](const Vec& x) { return x(0) * x(0) - (x.size() > 1 ? x(1) * x(1) : 0.0); };
    if (name == "xsq")
        return [](const Vec& x) { return x(0) * x(0); };
    if (name == "abs")
        return [](const Vec& x) { return -std::sqrt(x.squaredNorm() + 0.1); };
    throw DomainError("unknown boundary data: " + name +
                      " (builtins: saddle, xsq, abs; or use custom-csv)");
}

} // namespace gpsh
