// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Sizes and tolerances are fixed here and must not be loosened.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mkfk/mkfk.hpp"

using namespace mkfk;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

/// Parses defaults plus overrides; acceptance configs never touch a file.
RunConfig config(const std::vector<std::string>& overrides) {
    std::istringstream empty;
    return parse_config_stream(empty, "<acceptance>", overrides);
}

double normal_pdf(double x, double var) { return std::exp(-x * x / (2 * var)) / std::sqrt(2 * std::numbers::pi * var); }

/// (K * N(0, var))(y) by Simpson quadrature over the kernel support.
double smoothed_normal(const KernelSpec& k, double y, double var) {
    const int n = 2000;
    const double r = k.r_cut(), h = 2 * r / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
        const double z = -r + i * h;
        s += (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)) * k(z) * normal_pdf(y - z, var);
    }
    return s * h / 3;
}

std::string failed_names(const std::vector<Check>& checks) {
    std::string s;
    for (const auto& c : checks)
        if (!c.pass) s += " " + c.name + "=" + fmt(c.value);
    return s;
}

bool all_pass(const std::vector<Check>& checks) {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

// ------------------------------------------------------------------- 1
Outcome kernel_certificate() {
    const auto t0 = Clock::now();
    std::vector<Check> checks;
    double worst_mass = 0;
    for (double eps : {0.05, 0.1, 0.3, 1.0}) {
        const KernelSpec k(eps);
        const Check m = check_kernel_mass(k);
        worst_mass = std::max(worst_mass, m.value);
        checks.push_back(m);
        for (auto& c : check_kernel_bounds(k, 100000, 7)) checks.push_back(c);
    }
    const double t = seconds_since(t0);
    checks.push_back(make_check("runtime_s", t, 1.0, 0));
    return {all_pass(checks), "max|mass-1|=" + fmt(worst_mass) + ", 1e5 samples x 4 bandwidths, " + fmt(t) + "s" +
                                  failed_names(checks)};
}

// ------------------------------------------------------------------- 2
Outcome lambda_v_lemmas() {
    const auto t0 = Clock::now();
    std::vector<Check> checks;
    for (auto [lam, c0] : {std::pair{1.0, 1.0}, {2.5, 0.7}, {0.3, 2.0}}) {
        ModelParams p;
        p.lambda = lam;
        p.c0 = c0;
        p.phi1 = 0.2;
        for (auto& c : check_lambda_v(p, 10000, 11)) checks.push_back(c);
    }
    const double t = seconds_since(t0);
    checks.push_back(make_check("runtime_s", t, 1.0, 0));
    return {all_pass(checks), "1e4 pairs x 3 parameter sets, slack -1e-12, " + fmt(t) + "s" + failed_names(checks)};
}

// ------------------------------------------------------------------- 3
Outcome picard_fixed_point() {
    const auto t0 = Clock::now();
    const TimeGrid g(1.0, 1000);
    const PathEnsemble paths = brownian_paths(g, 32, InitSpec{}, NoiseSource(3));
    const KernelSpec k(0.3);
    ModelParams p;
    PicardOptions opt;
    opt.tol = 1e-10;
    const FKSolution a = fk_solve(paths, k, p, opt);
    PicardOptions opt_b = opt;
    opt_b.initial_value = k.M_K();
    const FKSolution b = fk_solve(paths, k, p, opt_b);
    double start_gap = 0;
    for (std::size_t i = 0; i < a.along_path.size(); ++i)
        start_gap = std::max(start_gap, std::abs(a.along_path[i] - b.along_path[i]));
    const FKSolution half = restrict_and_resolve(paths, 0.5, k, p, opt);
    double causal_gap = 0;
    const std::size_t np_full = g.n_points(), np_half = half.field.grid().n_points();
    for (std::size_t q = 0; q < paths.n_paths(); ++q)
        for (std::size_t s = 0; s < np_half; ++s)
            causal_gap = std::max(causal_gap, std::abs(a.along_path[q * np_full + s] - half.along_path[q * np_half + s]));
    const double t = seconds_since(t0);
    const bool ok = a.report.converged && b.report.converged && a.report.contraction_factor < 1.0 &&
                    start_gap <= 10 * opt.tol && causal_gap <= opt.tol && t < 30.0;
    return {ok, "iterations=" + std::to_string(a.report.iterations) + " contraction=" + fmt(a.report.contraction_factor) +
                    " start_gap=" + fmt(start_gap) + " causal_gap=" + fmt(causal_gap) + " weighted=" +
                    (a.report.weighted ? "yes" : "no") + ", " + fmt(t) + "s"};
}

// ------------------------------------------------------------------- 4
Outcome scalar_oracle() {
    // One frozen path sees only its own atom: u = K(0) V, so (z, A, B) obey
    // A' = K(0) exp(-lambda c0 B), B' = exp(-lambda A), independent of the path.
    const KernelSpec k(0.3);
    ModelParams p;
    p.lambda = 1.2;
    p.c0 = 0.8;
    const double T = 1.0, dt = 1e-4;
    const std::size_t n = static_cast<std::size_t>(std::llround(T / dt));
    const double k0 = k(0.0);
    auto rhs = [&](double A, double B) {
        return std::pair{k0 * std::exp(-p.lambda * p.c0 * B), std::exp(-p.lambda * A)};
    };
    std::vector<double> z(n + 1);
    double A = 0, B = 0;
    z[0] = k0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [a1, b1] = rhs(A, B);
        const auto [a2, b2] = rhs(A + 0.5 * dt * a1, B + 0.5 * dt * b1);
        const auto [a3, b3] = rhs(A + 0.5 * dt * a2, B + 0.5 * dt * b2);
        const auto [a4, b4] = rhs(A + dt * a3, B + dt * b3);
        A += dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
        B += dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
        z[i + 1] = k0 * std::exp(-p.lambda * p.c0 * B);
    }
    const TimeGrid g(T, n);
    const PathEnsemble path = brownian_paths(g, 1, InitSpec{}, NoiseSource(5));
    const FKSolution sol = fk_solve(path, k, p);
    double worst = 0;
    for (std::size_t s = 0; s <= n; ++s) worst = std::max(worst, std::abs(sol.along_path[s] - z[s]) / z[s]);
    return {sol.report.converged && worst < 1e-3, "max relative error=" + fmt(worst)};
}

// ------------------------------------------------------------------- 5
Outcome field_bounds() {
    std::vector<Check> checks;
    std::size_t runs = 0;
    for (double eps : {0.1, 0.3})
        for (double phi1 : {0.3, -0.3})
            for (double lam : {1.0, 3.0}) {
                const RunConfig cfg =
                    config({"kernel.eps=" + format_double(eps), "model.phi1=" + format_double(phi1),
                            "model.lambda=" + format_double(lam), "sim.N=500", "sim.seed=" + std::to_string(17 + runs),
                            "sim.diag_stride=10", "sim.diag_n_y=481", "pde.dt=5e-5", "pde.L=14", "pde.n_cells=1400"});
                const SimConfig sc = cfg.sim_config();
                const InteractingRun run = simulate_interacting(sc);  // bounds are asserted at every step
                for (auto& c : check_field_snapshots(run.record, sc.kernel)) checks.push_back(c);
                ++runs;
            }
    return {all_pass(checks), std::to_string(runs) + " interacting runs, 101 snapshots x 481 points each" + failed_names(checks)};
}

// ------------------------------------------------------------------- 6
double heat_rel_l2(double h, double dt) {
    PDEConfig c;
    c.grid = {9.0, static_cast<std::size_t>(std::llround(18.0 / h))};
    c.dt = dt;
    c.params.lambda = 0.0;
    c.params.T = 0.5;
    const PDESolution sol = pde_solve(c, InitSpec{});
    double num = 0, den = 0;
    for (std::size_t i = 0; i < c.grid.n_cells; ++i) {
        const double exact = normal_pdf(c.grid.center(i), 1.0 + 2 * 0.5);
        num += std::pow(sol.final_state.rho[i] - exact, 2);
        den += exact * exact;
    }
    return std::sqrt(num / den);
}

Outcome lambda_zero_reduction() {
    const auto t0 = Clock::now();
    const RunConfig cfg = config({"model.lambda=0", "model.T=0.5", "grid.n_steps=500", "sim.N=4000", "kernel.eps=0.5",
                                  "sim.diag_stride=0"});
    const SimConfig sc = cfg.sim_config();
    const InteractingRun run = simulate_interacting(sc);
    const KernelSpec& k = sc.kernel;
    double num = 0, den = 0;
    for (double y = -8; y <= 8 + 1e-9; y += 0.02) {
        const double exact = smoothed_normal(k, y, 1.0 + 2 * 0.5);
        num += std::pow(run.field.at_step(sc.grid.n_steps, y).u - exact, 2);
        den += exact * exact;
    }
    const double particle = std::sqrt(num / den);
    const double pde = heat_rel_l2(0.02, 1e-4);
    const double t = seconds_since(t0);
    return {particle < 0.05 && pde < 1e-3 && t < 120.0,
            "particle rel L2=" + fmt(particle) + " (eps=0.5), PDE rel L2=" + fmt(pde) + ", " + fmt(t) + "s"};
}

// ------------------------------------------------------------------- 7
Outcome pde_structure() {
    std::vector<Check> checks;
    for (auto mode : {CalciteMode::local, CalciteMode::nonlocal})
        for (double phi1 : {0.3, -0.3}) {
            PDEConfig c;
            c.grid = {9.0, 450};
            c.dt = 2e-4;
            c.mode = mode;
            c.kernel = KernelSpec(0.1);
            c.params.lambda = 2.0;
            c.params.phi1 = phi1;
            c.params.T = 0.5;
            for (auto& ch : check_pde_structure(c, InitSpec{})) checks.push_back(ch);
        }
    PDEConfig c0;
    c0.grid = {9.0, 450};
    c0.dt = 2e-4;
    c0.params.lambda = 0.0;
    c0.params.T = 0.5;
    InitSpec bump;
    bump.kind = InitSpec::Kind::bump;
    const auto lam0 = check_pde_structure(c0, bump);
    checks.insert(checks.end(), lam0.begin(), lam0.end());
    const double ratio = heat_rel_l2(0.1, 2e-3) / heat_rel_l2(0.05, 5e-4);
    const bool ok = all_pass(checks) && ratio >= 3.0 && ratio <= 5.0;
    double balance = 0;
    for (const auto& ch : checks)
        if (ch.name == "pde.mass_balance_residual") balance = std::max(balance, ch.value);
    return {ok, "max balance residual=" + fmt(balance) + " lambda0 drift=" + fmt(lam0.back().value) +
                    " convergence ratio=" + fmt(ratio) + failed_names(checks)};
}

// ------------------------------------------------------------------- 8
Outcome d2_bound() {
    const auto t0 = Clock::now();
    const RunConfig cfg = config({"grid.n_steps=100", "study.d2_Ns=16,64,256", "study.d2_replicas=200",
                                  "study.d2_reference=10000", "study.d2_field_N=1000", "sim.seed=23"});
    const auto rows = run_d2_study(cfg);
    bool ok = TestFunctionDictionary::standard().size() >= 20;
    std::string detail;
    for (const auto& r : rows) {
        ok = ok && r.pass();
        detail += "N=" + std::to_string(r.N) + ": " + fmt(r.estimate.value) + " <= " + fmt(r.bound) + "; ";
    }
    const double t = seconds_since(t0);
    ok = ok && t < 300.0;
    return {ok, detail + fmt(t) + "s"};
}

// ------------------------------------------------------------------- 9
Outcome propagation_of_chaos() {
    const auto t0 = Clock::now();
    const RunConfig cfg = config({"grid.n_steps=1000", "model.T=1", "study.Ns=50,100,200,400,800", "study.N_ref=4000",
                                  "study.replicas=8", "sim.seed=29"});
    const ChaosResult r = run_chaos_study(cfg);
    std::string detail = "slope=" + fmt(r.fit.slope) + "+-" + fmt(r.fit.std_err) + " path_err:";
    for (const auto& row : r.study.rows) detail += " " + fmt(row.path_err);
    detail += " field_sup_sq:";
    for (const auto& row : r.study.rows) detail += " " + fmt(row.field_sup_sq);
    detail += " field_l2_sq:";
    for (const auto& row : r.study.rows) detail += " " + fmt(row.field_l2_sq);
    const double t = seconds_since(t0);
    return {r.pass() && t < 900.0, detail + ", " + fmt(t) + "s"};
}

// ------------------------------------------------------------------ 10
Outcome probabilistic_interpretation() {
    const RunConfig cfg = config({"kernel.eps=0.1", "pde.mode=nonlocal", "study.compare_Ns=500,2000,4000",
                                  "study.compare_tol=0.1", "sim.seed=31", "sim.diag_stride=0"});
    const CompareResult r = run_compare(cfg);
    std::string detail = "final rel L2 over N=500,2000,4000:";
    for (double v : r.final_rel) detail += " " + fmt(v);
    return {r.pass(), detail};
}

// ------------------------------------------------------------------ 11
Outcome weak_pide() {
    struct Level {
        double dt;
        std::size_t N;
    };
    const std::vector<Level> levels{{2e-3, 1000}, {1e-3, 2000}, {5e-4, 4000}};
    const double T = 0.5, half_window_t = 0.01;
    const auto tests = standard_smooth_tests();
    std::vector<std::vector<double>> rms(tests.size());
    std::vector<double> C;
    for (const auto& lv : levels) {
        const auto n_steps = static_cast<std::size_t>(std::llround(T / lv.dt));
        const RunConfig cfg = config({"model.T=" + format_double(T), "grid.n_steps=" + std::to_string(n_steps),
                                      "sim.N=" + std::to_string(lv.N), "kernel.eps=0.2", "sim.diag_stride=0",
                                      "output.write_paths=true", "sim.seed=37"});
        const SimConfig sc = cfg.sim_config();
        const InteractingRun run = simulate_interacting(sc);
        const auto m = static_cast<std::size_t>(std::llround(half_window_t / lv.dt));
        double worst = 0;
        for (std::size_t f = 0; f < tests.size(); ++f) {
            double acc = 0;
            int count = 0;
            for (int j = 1; j <= 20; ++j) {
                const double t = 0.05 + 0.4 * (j - 1) / 19.0;
                const auto k = static_cast<std::size_t>(std::llround(t / lv.dt));
                const double res = weak_pide_residual(run.record, sc.params, tests[f], k, m);
                acc += res * res;
                ++count;
            }
            rms[f].push_back(std::sqrt(acc / count));
            worst = std::max(worst, rms[f].back());
        }
        C.push_back(worst / (lv.dt + 1.0 / std::sqrt(static_cast<double>(lv.N))));
    }
    bool ok = true;
    std::string detail = "rms residuals:";
    for (std::size_t f = 0; f < tests.size(); ++f) {
        detail += " " + tests[f].name + "[";
        for (std::size_t l = 0; l < levels.size(); ++l) detail += (l ? " " : "") + fmt(rms[f][l]);
        detail += "]";
        ok = ok && strictly_decreasing(rms[f]);
    }
    const auto [cmin, cmax] = std::minmax_element(C.begin(), C.end());
    detail += " C=";
    for (double c : C) detail += fmt(c) + " ";
    ok = ok && *cmax / *cmin <= 4.0;
    return {ok, detail};
}

// ------------------------------------------------------------------ 12
Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "mkfk_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::string> small{"model.T=0.5", "grid.n_steps=50", "sim.N=150", "sim.diag_stride=10",
                                         "kernel.eps=0.2", "fk.P=8", "pde.L=10", "pde.n_cells=200", "pde.dt=1e-3",
                                         "pde.snapshot_stride=100", "study.Ns=20,40,80,200", "study.N_ref=300",
                                         "study.replicas=2", "study.d2_Ns=8,16", "study.d2_replicas=30",
                                         "study.d2_reference=300", "study.d2_field_N=100",
                                         "study.compare_Ns=60,120", "study.compare_tol=1",
                                         "study.slope_min=-100", "study.slope_max=100", "output.write_field=true"};
    std::size_t compared = 0, mismatched = 0;
    std::string bad;
    for (const char* cmd : subcommands()) {
        std::vector<fs::path> dirs;
        for (const std::string run : {"w1", "w3", "w1again"}) {
            auto overrides = small;
            overrides.push_back("sim.workers=" + std::string(run == "w3" ? "3" : "1"));
            overrides.push_back("output.dir=" + (root / cmd / run).string());
            const RunConfig cfg = config(overrides);
            std::ostringstream log;
            run_subcommand(cmd, cfg, "acceptance", log);  // exit status is irrelevant here; bytes are compared
            dirs.push_back(cfg.output.dir);
        }
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            const auto ext = e.path().extension();
            if (ext != ".csv" && e.path().filename() != "verdicts.json") continue;
            std::ifstream a(e.path(), std::ios::binary);
            const std::string body((std::istreambuf_iterator<char>(a)), {});
            for (std::size_t j = 1; j < dirs.size(); ++j) {
                std::ifstream b(dirs[j] / e.path().filename(), std::ios::binary);
                const std::string other((std::istreambuf_iterator<char>(b)), {});
                ++compared;
                if (body != other) {
                    ++mismatched;
                    bad += " " + std::string(cmd) + "/" + e.path().filename().string();
                }
            }
        }
    }
    fs::remove_all(root);
    return {mismatched == 0 && compared >= 20,
            std::to_string(compared) + " file comparisons over 7 subcommands, workers 1/3/1, mismatches=" +
                std::to_string(mismatched) + bad};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"mollifier certificate", kernel_certificate},
        {"Lambda/V lemmas", lambda_v_lemmas},
        {"Picard fixed point", picard_fixed_point},
        {"scalar oracle", scalar_oracle},
        {"field bounds", field_bounds},
        {"lambda=0 reduction", lambda_zero_reduction},
        {"PDE structure", pde_structure},
        {"d2 bound", d2_bound},
        {"propagation of chaos", propagation_of_chaos},
        {"particle vs PDE", probabilistic_interpretation},
        {"weak PIDE residual", weak_pide},
        {"determinism", determinism},
    };
    // Optional argument: a comma-free list of criterion numbers to run.
    std::vector<bool> selected(criteria.size(), argc <= 1);
    for (int a = 1; a < argc; ++a) {
        const int i = std::atoi(argv[a]);
        if (i >= 1 && i <= static_cast<int>(criteria.size())) selected[i - 1] = true;
    }
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected[i]) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
