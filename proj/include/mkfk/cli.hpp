#pragma once

// Subcommand dispatch, artifact bookkeeping and the run manifest.

#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mkfk/checks.hpp"
#include "mkfk/config.hpp"
#include "mkfk/errors.hpp"
#include "mkfk/io.hpp"
#include "mkfk/studies.hpp"

namespace mkfk {

inline constexpr const char* kVersion = "1.0.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;        ///< I/O and other unexpected errors
inline constexpr int config = 2;
inline constexpr int numerical = 3;
inline constexpr int check_failed = 4;
inline constexpr int usage = 64;
} // namespace exit_code

inline const std::array<const char*, 7>& subcommands() {
    static const std::array<const char*, 7> names{"fk-solve", "simulate", "pde", "chaos-study",
                                                  "d2-study", "compare", "invariants"};
    return names;
}

inline bool is_subcommand(const std::string& name) {
    for (const char* s : subcommands())
        if (name == s) return true;
    return false;
}

inline std::string usage_text() {
    std::string s = "usage: mkfk_cli <command> [--config FILE] [--set section.key=value ...] [--out DIR]\n"
                    "                [--workers N] [--print-config]\ncommands:";
    for (const char* c : subcommands()) s += std::string(" ") + c;
    return s + "\n";
}

/// Files written by one run, in creation order; every one lands in the manifest.
class Artifacts {
public:
    explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::filesystem::path add(const std::string& name) {
        names_.push_back(name);
        return dir_ / name;
    }
    const std::vector<std::string>& names() const { return names_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> names_;
};

/// Thrown by a driver whose checks ran to completion but failed.
class CheckFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace cli_detail {

inline nlohmann::ordered_json verdicts_json(const std::vector<Check>& checks) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : checks)
        arr.push_back({{"check", c.name},
                       {"value", c.value},
                       {"bound", c.bound},
                       {"tolerance", c.tolerance},
                       {"verdict", c.pass ? "pass" : "fail"}});
    return arr;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

/// Writes verdicts.json and throws CheckFailure naming the failed checks.
inline void emit_verdicts(Artifacts& art, const std::vector<Check>& checks) {
    write_json(art.add("verdicts.json"), verdicts_json(checks));
    std::string failed;
    for (const auto& c : checks)
        if (!c.pass) failed += (failed.empty() ? "" : ", ") + c.name;
    if (!failed.empty()) throw CheckFailure("failed checks: " + failed);
}

inline void profile_csv(const std::filesystem::path& path, const TimeGrid& grid, const std::vector<double>& y,
                        const std::vector<std::size_t>& steps, const std::vector<std::vector<FieldValue>>& prof) {
    CsvWriter w(path, {"step", "time", "y", "u", "grad_u"});
    for (std::size_t s = 0; s < steps.size(); ++s)
        for (std::size_t j = 0; j < y.size(); ++j) w.row(steps[s], grid.time(steps[s]), y[j], prof[s][j].u, prof[s][j].grad);
}

inline void cmd_fk_solve(const RunConfig& cfg, Artifacts& art) {
    const FKSolveResult r = run_fk_solve(cfg);
    const auto& rep = r.solution.report;
    profile_csv(art.add("fk_field.csv"), r.solution.field.grid(), r.diag_y, r.steps, r.profiles);
    CsvWriter res(art.add("picard.csv"), {"iteration", "residual"});
    for (std::size_t i = 0; i < rep.residuals.size(); ++i) res.row(i + 1, rep.residuals[i]);
    std::vector<Check> checks{make_check("picard.converged", rep.converged ? 0.0 : 1.0, 0, 0)};
    if (!std::isnan(rep.contraction_factor))
        checks.push_back(make_check("picard.contraction_factor", rep.contraction_factor, 1.0, -1e-12));
    emit_verdicts(art, checks);
}

inline void cmd_simulate(const RunConfig& cfg, Artifacts& art) {
    const SimConfig sc = cfg.sim_config();
    const InteractingRun run = simulate_interacting(sc);
    write_summary_csv(art.add("summary.csv"), run.record);
    write_snapshots_csv(art.add("snapshots.csv"), run.record);
    if (cfg.output.write_field) write_field_csv(art.add("field.csv"), run.field);
    if (cfg.output.write_paths) write_path_dump(art.add("paths.bin"), run.record, config_hash(cfg));
    std::vector<Check> checks = check_field_snapshots(run.record, sc.kernel);
    checks.push_back(check_mean_weight_monotone(run.record));
    emit_verdicts(art, checks);
}

inline void cmd_pde(const RunConfig& cfg, Artifacts& art) {
    const PDEConfig pc = cfg.pde_config();
    const PDESolution sol = pde_solve(pc, cfg.init);
    CsvWriter snap(art.add("pde_snapshots.csv"), {"step", "time", "x", "rho", "c"});
    for (const auto& s : sol.snapshots)
        for (std::size_t i = 0; i < s.rho.size(); ++i) snap.row(s.step, s.t, pc.grid.center(i), s.rho[i], s.c[i]);
    CsvWriter mass(art.add("pde_mass.csv"), {"step", "time", "mass", "reacted"});
    for (std::size_t k = 0; k < sol.mass.size(); ++k)
        mass.row(k, static_cast<double>(k) * pc.dt, sol.mass[k], k == 0 ? 0.0 : sol.reacted[k - 1]);
    double balance = 0.0;
    for (std::size_t k = 0; k < sol.reacted.size(); ++k)
        balance = std::max(balance, std::abs(sol.mass[k + 1] - sol.mass[k] + sol.reacted[k]));
    emit_verdicts(art, {make_check("pde.mass_balance_residual", balance, 0, 1e-8)});
}

inline void cmd_chaos(const RunConfig& cfg, Artifacts& art) {
    const ChaosResult r = run_chaos_study(cfg);
    CsvWriter w(art.add("chaos.csv"), {"N", "path_err", "path_err_pooled", "path_err_stderr", "field_sup_sq",
                                       "field_sup_sq_stderr", "field_l2_sq", "field_l2_sq_stderr"});
    for (const auto& row : r.study.rows)
        w.row(row.N, row.path_err, row.path_err_pooled, row.path_err_stderr, row.field_sup_sq, row.field_sup_sq_stderr,
              row.field_l2_sq, row.field_l2_sq_stderr);
    nlohmann::ordered_json s;
    s["N_ref"] = r.study.N_ref;
    s["replicas"] = r.study.replicas;
    s["tracked"] = r.study.n_track;
    s["slope"] = r.fit.slope;
    s["slope_stderr"] = r.fit.std_err;
    s["intercept"] = r.fit.intercept;
    write_json(art.add("chaos_summary.json"), s);
    emit_verdicts(art, {make_check("chaos.slope_above_max", r.fit.slope, cfg.study.slope_max, 0),
                        make_check("chaos.slope_below_min", -r.fit.slope, -cfg.study.slope_min, 0),
                        make_check("chaos.field_sup_not_decreasing", r.field_sup_decreasing ? 0.0 : 1.0, 0, 0),
                        make_check("chaos.field_l2_not_decreasing", r.field_l2_decreasing ? 0.0 : 1.0, 0, 0)});
}

inline void cmd_d2(const RunConfig& cfg, Artifacts& art) {
    const auto rows = run_d2_study(cfg);
    CsvWriter w(art.add("d2.csv"), {"N", "value", "stderr", "bound", "argmax"});
    std::vector<Check> checks;
    for (const auto& r : rows) {
        w.row(r.N, r.estimate.value, r.estimate.std_err, r.bound, r.estimate.argmax);
        checks.push_back(make_check("d2.N" + std::to_string(r.N), r.estimate.value, r.bound, 0));
    }
    emit_verdicts(art, checks);
}

inline void cmd_compare(const RunConfig& cfg, Artifacts& art) {
    const CompareResult r = run_compare(cfg);
    CsvWriter w(art.add("compare.csv"), {"N", "pde_step", "time", "l2", "rel_l2", "sup"});
    for (const auto& row : r.rows) w.row(row.N, row.pde_step, row.time, row.l2, row.rel_l2, row.sup);
    emit_verdicts(art, {make_check("compare.final_rel_l2", r.final_rel.back(), r.tol, -1e-15),
                        make_check("compare.not_decreasing_in_N", r.decreasing() ? 0.0 : 1.0, 0, 0)});
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace cli_detail

/// Runs one subcommand into cfg.output.dir and returns the exit status.
/// Artifacts written before a failure are kept, flagged by a FAILED file.
inline int run_subcommand(const std::string& name, const RunConfig& cfg, const std::string& command_line,
                          std::ostream& log = std::cerr) {
    if (!is_subcommand(name)) {
        log << "unknown command '" << name << "'\n" << usage_text();
        return exit_code::usage;
    }
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output.dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        log << "cannot create output directory " << dir << ": " << ec.message() << '\n';
        return exit_code::failure;
    }
    fs::remove(dir / "FAILED", ec);

    Artifacts art(dir);
    int status = exit_code::ok;
    std::string message;
    try {
        std::ofstream(art.add("config.ini")) << dump_config(cfg);
        if (name == "fk-solve") cli_detail::cmd_fk_solve(cfg, art);
        else if (name == "simulate") cli_detail::cmd_simulate(cfg, art);
        else if (name == "pde") cli_detail::cmd_pde(cfg, art);
        else if (name == "chaos-study") cli_detail::cmd_chaos(cfg, art);
        else if (name == "d2-study") cli_detail::cmd_d2(cfg, art);
        else if (name == "compare") cli_detail::cmd_compare(cfg, art);
        else cli_detail::emit_verdicts(art, run_invariant_suite(cfg));
    } catch (const ConfigError& e) {
        status = exit_code::config;
        message = e.what();
    } catch (const NumericalError& e) {
        status = exit_code::numerical;
        message = e.what();
    } catch (const CheckFailure& e) {
        status = exit_code::check_failed;
        message = e.what();
    } catch (const std::exception& e) {
        status = exit_code::failure;
        message = e.what();
    }
    if (status != exit_code::ok) {
        log << name << ": " << message << '\n';
        std::ofstream(art.add("FAILED")) << message << '\n';
    }

    nlohmann::ordered_json m;
    m["command"] = command_line;
    m["subcommand"] = name;
    m["config_hash"] = config_hash(cfg);
    m["seed"] = cfg.seed;
    m["artifacts"] = art.names();
    m["status"] = status == exit_code::ok ? "ok" : "failed";
    m["exit_code"] = status;
    if (!message.empty()) m["message"] = message;
    m["version"] = kVersion;
    m["compiler"] = __VERSION__;
    m["timestamp"] = cli_detail::utc_timestamp();
    try {
        cli_detail::write_json(dir / "manifest.json", m);
    } catch (const std::exception& e) {
        log << "cannot write manifest: " << e.what() << '\n';
        if (status == exit_code::ok) status = exit_code::failure;
    }
    return status;
}

} // namespace mkfk
