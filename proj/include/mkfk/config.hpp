#pragma once

// Run configuration: one INI file with a section per module, dotted-path
// overrides, and a canonical dump used for hashing and --print-config.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mkfk/core.hpp"
#include "mkfk/errors.hpp"
#include "mkfk/fk_solver.hpp"
#include "mkfk/initial_density.hpp"
#include "mkfk/io.hpp"
#include "mkfk/particle_sim.hpp"
#include "mkfk/pde_oracle.hpp"

namespace mkfk {

struct FKSolveConfig {
    std::size_t P = 32;
    double tol = 1e-10;
    std::size_t max_iter = 200;
    Quadrature quadrature = Quadrature::left;
};

struct PDESection {
    double L = 12.0;
    std::size_t n_cells = 1200;
    double dt = 1e-4;
    CalciteMode mode = CalciteMode::nonlocal;
    std::size_t snapshot_stride = 1000;
};

struct StudyConfig {
    std::vector<std::size_t> Ns{50, 100, 200, 400, 800};
    std::size_t N_ref = 4000;
    std::size_t replicas = 8;
    double slope_min = -1.4;
    double slope_max = -0.6;
    std::vector<std::size_t> d2_Ns{16, 64, 256};
    std::size_t d2_replicas = 200;
    std::size_t d2_reference = 10000;
    std::size_t d2_field_N = 1000;
    std::vector<std::size_t> compare_Ns{500, 2000, 4000};
    double compare_tol = 0.1;
};

struct OutputConfig {
    std::string dir = "out";
    bool write_field = false;
    bool write_paths = false;
};

struct RunConfig {
    ModelParams model;
    double eps = 0.1;
    std::size_t n_steps = 1000;
    std::size_t N = 1000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    DiagnosticsSpec diag;
    InitSpec init;
    FKSolveConfig fk;
    PDESection pde;
    StudyConfig study;
    OutputConfig output;

    SimConfig sim_config() const {
        SimConfig c;
        c.params = model;
        c.kernel = KernelSpec(eps);
        c.grid = TimeGrid(model.T, n_steps);
        c.N = N;
        c.seed = seed;
        c.init = init;
        c.store_paths = output.write_paths;
        c.workers = workers;
        c.diag = diag;
        return c;
    }

    PDEConfig pde_config() const {
        PDEConfig c;
        c.grid = {pde.L, pde.n_cells};
        c.dt = pde.dt;
        c.mode = pde.mode;
        c.kernel = KernelSpec(eps);
        c.params = model;
        c.snapshot_stride = pde.snapshot_stride;
        return c;
    }

    std::vector<std::string> violations() const;
    void validate() const {
        auto v = violations();
        if (!v.empty()) throw ConfigError(v);
    }
};

namespace config_detail {

template <class T>
T parse_number(const std::string& s) {
    T v{};
    const char* b = s.data();
    const char* e = s.data() + s.size();
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e) throw std::invalid_argument("expected a number, got '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument("expected true/false, got '" + s + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(parse_number<std::size_t>(item));
    }
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list of counts");
    return out;
}

inline std::string list_str(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct Key {
    std::string path;  ///< section.key
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define MKFK_DOUBLE(path_, member)                                                                     \
    Key { path_, [](const RunConfig& c) { return format_double(c.member); },                          \
          [](RunConfig& c, const std::string& s) { c.member = parse_number<double>(s); } }
#define MKFK_COUNT(path_, member)                                                                      \
    Key { path_, [](const RunConfig& c) { return std::to_string(c.member); },                         \
          [](RunConfig& c, const std::string& s) { c.member = parse_number<std::size_t>(s); } }
#define MKFK_BOOL(path_, member)                                                                       \
    Key { path_, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); },        \
          [](RunConfig& c, const std::string& s) { c.member = parse_bool(s); } }
#define MKFK_LIST(path_, member)                                                                       \
    Key { path_, [](const RunConfig& c) { return list_str(c.member); },                               \
          [](RunConfig& c, const std::string& s) { c.member = parse_list(s); } }

/// Every recognised key, in canonical order.
inline const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        MKFK_DOUBLE("model.lambda", model.lambda),
        MKFK_DOUBLE("model.c0", model.c0),
        MKFK_DOUBLE("model.phi0", model.phi0),
        MKFK_DOUBLE("model.phi1", model.phi1),
        MKFK_DOUBLE("model.T", model.T),
        MKFK_DOUBLE("model.s_cap", model.s_cap),
        MKFK_DOUBLE("model.phi_bar", model.phi_bar),
        MKFK_DOUBLE("kernel.eps", eps),
        MKFK_COUNT("grid.n_steps", n_steps),
        MKFK_COUNT("sim.N", N),
        Key{"sim.seed", [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& s) { c.seed = parse_number<std::uint64_t>(s); }},
        MKFK_COUNT("sim.workers", workers),
        MKFK_DOUBLE("sim.diag_y_min", diag.y_min),
        MKFK_DOUBLE("sim.diag_y_max", diag.y_max),
        MKFK_COUNT("sim.diag_n_y", diag.n_y),
        MKFK_COUNT("sim.diag_stride", diag.stride),
        Key{"init.kind", [](const RunConfig& c) { return std::string(c.init.kind == InitSpec::Kind::gaussian ? "gaussian" : "bump"); },
            [](RunConfig& c, const std::string& s) {
                if (s == "gaussian") c.init.kind = InitSpec::Kind::gaussian;
                else if (s == "bump") c.init.kind = InitSpec::Kind::bump;
                else throw std::invalid_argument("expected gaussian or bump, got '" + s + "'");
            }},
        MKFK_DOUBLE("init.mean", init.mean),
        MKFK_DOUBLE("init.sigma", init.sigma),
        MKFK_DOUBLE("init.half_width", init.half_width),
        MKFK_COUNT("fk.P", fk.P),
        MKFK_DOUBLE("fk.tol", fk.tol),
        MKFK_COUNT("fk.max_iter", fk.max_iter),
        Key{"fk.quadrature", [](const RunConfig& c) { return std::string(c.fk.quadrature == Quadrature::left ? "left" : "trapezoid"); },
            [](RunConfig& c, const std::string& s) {
                if (s == "left") c.fk.quadrature = Quadrature::left;
                else if (s == "trapezoid") c.fk.quadrature = Quadrature::trapezoid;
                else throw std::invalid_argument("expected left or trapezoid, got '" + s + "'");
            }},
        MKFK_DOUBLE("pde.L", pde.L),
        MKFK_COUNT("pde.n_cells", pde.n_cells),
        MKFK_DOUBLE("pde.dt", pde.dt),
        Key{"pde.mode", [](const RunConfig& c) { return std::string(c.pde.mode == CalciteMode::local ? "local" : "nonlocal"); },
            [](RunConfig& c, const std::string& s) {
                if (s == "local") c.pde.mode = CalciteMode::local;
                else if (s == "nonlocal") c.pde.mode = CalciteMode::nonlocal;
                else throw std::invalid_argument("expected local or nonlocal, got '" + s + "'");
            }},
        MKFK_COUNT("pde.snapshot_stride", pde.snapshot_stride),
        MKFK_LIST("study.Ns", study.Ns),
        MKFK_COUNT("study.N_ref", study.N_ref),
        MKFK_COUNT("study.replicas", study.replicas),
        MKFK_DOUBLE("study.slope_min", study.slope_min),
        MKFK_DOUBLE("study.slope_max", study.slope_max),
        MKFK_LIST("study.d2_Ns", study.d2_Ns),
        MKFK_COUNT("study.d2_replicas", study.d2_replicas),
        MKFK_COUNT("study.d2_reference", study.d2_reference),
        MKFK_COUNT("study.d2_field_N", study.d2_field_N),
        MKFK_LIST("study.compare_Ns", study.compare_Ns),
        MKFK_DOUBLE("study.compare_tol", study.compare_tol),
        Key{"output.dir", [](const RunConfig& c) { return c.output.dir; },
            [](RunConfig& c, const std::string& s) { c.output.dir = s; }},
        MKFK_BOOL("output.write_field", output.write_field),
        MKFK_BOOL("output.write_paths", output.write_paths),
    };
    return k;
}

#undef MKFK_DOUBLE
#undef MKFK_COUNT
#undef MKFK_BOOL
#undef MKFK_LIST

inline const Key* find_key(const std::string& path) {
    for (const auto& k : keys())
        if (k.path == path) return &k;
    return nullptr;
}

} // namespace config_detail

inline std::vector<std::string> RunConfig::violations() const {
    std::vector<std::string> v = model.violations();
    auto add = [&](bool bad, const std::string& msg) {
        if (bad) v.push_back(msg);
    };
    add(!(eps > 0.0), "kernel.eps: must be > 0");
    add(n_steps < 1, "grid.n_steps: must be >= 1");
    add(N < 1, "sim.N: must be >= 1");
    add(workers < 1, "sim.workers: must be >= 1");
    add(diag.n_y < 1 || !(diag.y_max >= diag.y_min), "sim.diag_*: need n_y >= 1 and y_max >= y_min");
    for (auto& s : init.violations(model.s_cap)) v.push_back(s);
    add(fk.P < 1, "fk.P: must be >= 1");
    add(!(fk.tol > 0.0), "fk.tol: must be > 0");
    add(fk.max_iter < 1, "fk.max_iter: must be >= 1");
    if (v.empty()) {
        const PDEConfig pc = pde_config();
        for (auto& s : pc.violations())
            if (s.rfind("model.", 0) != 0) v.push_back(s);
        for (auto& s : pc.domain_violations(init)) v.push_back(s);
    }
    add(std::any_of(study.Ns.begin(), study.Ns.end(), [&](std::size_t n) { return n >= study.N_ref; }),
        "study.N_ref: must exceed every entry of study.Ns");
    add(std::any_of(study.Ns.begin(), study.Ns.end(), [](std::size_t n) { return n < 1; }), "study.Ns: counts must be >= 1");
    add(study.replicas < 1, "study.replicas: must be >= 1");
    add(!(study.slope_min < study.slope_max), "study.slope_min: must be below study.slope_max");
    add(study.d2_replicas < 30, "study.d2_replicas: at least 30 replicas are required");
    add(study.d2_reference < 1 || study.d2_field_N < 1, "study.d2_reference/d2_field_N: must be >= 1");
    add(!(study.compare_tol > 0.0), "study.compare_tol: must be > 0");
    add(output.dir.empty(), "output.dir: must not be empty");
    return v;
}

/// Canonical INI dump of every key; the basis of the config hash.
inline std::string dump_config(const RunConfig& c) {
    std::string out, section;
    for (const auto& k : config_detail::keys()) {
        const auto dot = k.path.find('.');
        const std::string sec = k.path.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
            section = sec;
        }
        out += k.path.substr(dot + 1) + " = " + k.get(c) + "\n";
    }
    return out;
}

/// Hash of the canonical dump with the keys that cannot change results
/// (worker count, output directory) pinned, so reruns compare equal.
inline std::string config_hash(const RunConfig& c) {
    RunConfig pinned = c;
    pinned.workers = 1;
    pinned.output.dir = "out";
    return fnv1a64_hex(dump_config(pinned));
}

/// Applies "section.key=value" to cfg; problems are appended to errors.
inline void apply_override(RunConfig& cfg, const std::string& assignment, std::vector<std::string>& errors) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        errors.push_back("override '" + assignment + "': expected section.key=value");
        return;
    }
    auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        return s;
    };
    const std::string path = trim(assignment.substr(0, eq)), value = trim(assignment.substr(eq + 1));
    const auto* key = config_detail::find_key(path);
    if (!key) {
        errors.push_back(path + ": unknown key");
        return;
    }
    try {
        key->set(cfg, value);
    } catch (const std::invalid_argument& e) {
        errors.push_back(path + ": " + e.what());
    }
}

/// Reads an INI stream (may be empty), applies overrides, validates.
/// Parse errors carry the line number; validation lists every violation.
inline RunConfig parse_config_stream(std::istream& in, const std::string& source,
                                     const std::vector<std::string>& overrides = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig cfg;
    std::vector<std::string> errors;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            errors.push_back(source + ": key '" + section + "' outside any section");
            continue;
        }
        for (const auto& [key, node] : body) apply_override(cfg, section + "." + key + "=" + node.data(), errors);
    }
    for (const auto& o : overrides) apply_override(cfg, o, errors);
    for (auto& v : cfg.violations()) errors.push_back(std::move(v));
    if (!errors.empty()) throw ConfigError(errors);
    return cfg;
}

inline RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    return parse_config_stream(in, path.string(), overrides);
}

} // namespace mkfk
