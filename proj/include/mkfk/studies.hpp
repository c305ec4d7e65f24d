#pragma once

// Experiment drivers shared by the CLI and the acceptance binary. Each
// returns plain tables; writing them out is the caller's business.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mkfk/config.hpp"
#include "mkfk/fk_solver.hpp"
#include "mkfk/metrics.hpp"
#include "mkfk/particle_sim.hpp"
#include "mkfk/pde_oracle.hpp"

namespace mkfk {

/// P Brownian paths dX = sqrt(2) dW started from rho_0, on the given grid.
inline PathEnsemble brownian_paths(const TimeGrid& grid, std::size_t P, const InitSpec& init, const NoiseSource& noise) {
    PathEnsemble e(grid, P);
    const double s = std::sqrt(2.0 * grid.dt());
    for (std::size_t p = 0; p < P; ++p) {
        e(p, 0) = init.sample(noise, p);
        for (std::size_t k = 0; k < grid.n_steps; ++k) e(p, k + 1) = e(p, k) + s * noise.increment(p, k);
    }
    return e;
}

// ---------------------------------------------------------------- fk-solve

struct FKSolveResult {
    FKSolution solution;
    std::vector<double> diag_y;
    std::vector<std::size_t> steps;  ///< diagnostics steps recorded in profiles
    std::vector<std::vector<FieldValue>> profiles;
};

inline FKSolveResult run_fk_solve(const RunConfig& cfg) {
    const SimConfig sc = cfg.sim_config();
    const PathEnsemble paths = brownian_paths(sc.grid, cfg.fk.P, cfg.init, sc.noise());
    PicardOptions opt;
    opt.tol = cfg.fk.tol;
    opt.max_iter = cfg.fk.max_iter;
    opt.quadrature = cfg.fk.quadrature;
    FKSolveResult r{fk_solve(paths, sc.kernel, cfg.model, opt), cfg.diag.points(), {}, {}};
    for (std::size_t k = 0; k < sc.grid.n_points(); ++k) {
        if (!cfg.diag.is_snapshot(k, sc.grid.n_steps)) continue;
        r.steps.push_back(k);
        auto& prof = r.profiles.emplace_back();
        for (double y : r.diag_y) prof.push_back(r.solution.field.at_step(k, y));
    }
    return r;
}

// ------------------------------------------------------------- chaos-study

struct ChaosResult {
    CouplingStudy study;
    SlopeFit fit;
    bool field_sup_decreasing = false;
    bool field_l2_decreasing = false;
    bool slope_in_range = false;
    bool pass() const { return slope_in_range && field_sup_decreasing && field_l2_decreasing; }
};

inline bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

inline ChaosResult run_chaos_study(const RunConfig& cfg) {
    SimConfig base = cfg.sim_config();
    base.store_paths = false;
    ChaosResult r;
    r.study = couple_systems(base, cfg.study.Ns, cfg.study.N_ref, cfg.study.replicas);
    std::vector<double> ns, errs, sup, l2;
    for (const auto& row : r.study.rows) {
        ns.push_back(static_cast<double>(row.N));
        errs.push_back(row.path_err);
        sup.push_back(row.field_sup_sq);
        l2.push_back(row.field_l2_sq);
    }
    r.fit = chaos_slope(ns, errs);
    r.slope_in_range = r.fit.slope >= cfg.study.slope_min && r.fit.slope <= cfg.study.slope_max;
    r.field_sup_decreasing = strictly_decreasing(sup);
    r.field_l2_decreasing = strictly_decreasing(l2);
    return r;
}

// ---------------------------------------------------------------- d2-study

struct D2Row {
    std::size_t N = 0;
    D2Estimate estimate;
    double bound = 0.0;  ///< 1/N + 3 stderr + 1/M
    bool pass() const { return estimate.value <= bound; }
};

/// The i.i.d. system: particles driven by one frozen field u_ref obtained
/// from an interacting run. Replicas of size N are compared with a size-M
/// reference drawn from the same law.
inline std::vector<D2Row> run_d2_study(const RunConfig& cfg) {
    SimConfig base = cfg.sim_config();
    base.store_paths = false;
    base.diag.stride = 0;
    const std::size_t R = cfg.study.d2_replicas;
    const std::size_t last_replica = 2 + cfg.study.d2_Ns.size() * R;
    if (last_replica >= (std::size_t{1} << 20)) throw ConfigError("study.d2_replicas: too many replicas for the noise key space");

    SimConfig field_cfg = base;
    field_cfg.N = cfg.study.d2_field_N;
    field_cfg.replica = 0;
    const FKField field = simulate_interacting(field_cfg).field;

    auto driven_paths = [&](std::size_t N, std::uint32_t replica) {
        SimConfig c = base;
        c.N = N;
        c.replica = replica;
        c.store_paths = true;
        return tracked_paths(simulate_driven(c, field), N);
    };
    const PathEnsemble reference = driven_paths(cfg.study.d2_reference, 1);
    const auto dict = TestFunctionDictionary::standard();

    std::vector<D2Row> rows;
    for (std::size_t j = 0; j < cfg.study.d2_Ns.size(); ++j) {
        const std::size_t N = cfg.study.d2_Ns[j];
        std::vector<PathEnsemble> reps;
        reps.reserve(R);
        for (std::size_t r = 0; r < R; ++r) reps.push_back(driven_paths(N, static_cast<std::uint32_t>(2 + j * R + r)));
        D2Row row;
        row.N = N;
        row.estimate = d2_estimate(reps, reference, dict);
        row.bound = 1.0 / static_cast<double>(N) + 3.0 * row.estimate.std_err +
                    1.0 / static_cast<double>(cfg.study.d2_reference);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ----------------------------------------------------------------- compare

struct CompareRow {
    std::size_t N = 0;
    std::size_t pde_step = 0;
    double time = 0.0;
    double l2 = 0.0;      ///< ||u^{mu_N}(t) - (K * rho)(t)||_2 on the PDE cells
    double rel_l2 = 0.0;  ///< divided by ||(K * rho)(t)||_2
    double sup = 0.0;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    std::vector<double> final_rel;  ///< per N in compare_Ns, at t = T
    double tol = 0.1;
    bool decreasing() const { return strictly_decreasing(final_rel); }
    bool pass() const { return !final_rel.empty() && final_rel.back() < tol && decreasing(); }
};

inline CompareResult run_compare(const RunConfig& cfg) {
    const PDEConfig pc = cfg.pde_config();
    const PDESolution pde = pde_solve(pc, cfg.init);
    const std::vector<double> x = pc.grid.centers();
    const double h = pc.grid.h();
    std::vector<std::vector<double>> reference;
    for (const auto& snap : pde.snapshots) reference.push_back(mollify_density(snap.rho, pc.grid, pc.kernel));

    CompareResult out;
    out.tol = cfg.study.compare_tol;
    for (std::size_t N : cfg.study.compare_Ns) {
        SimConfig sc = cfg.sim_config();
        sc.N = N;
        sc.store_paths = false;
        sc.diag.stride = 0;
        const InteractingRun run = simulate_interacting(sc);
        double last = 0.0;
        for (std::size_t s = 0; s < pde.snapshots.size(); ++s) {
            const double t = pde.snapshots[s].t;
            const double ks = t / sc.grid.dt();
            const auto k = static_cast<std::size_t>(std::llround(ks));
            if (std::abs(ks - static_cast<double>(k)) > 1e-6 || k > sc.grid.n_steps) continue;
            double num = 0.0, den = 0.0, sup = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double d = run.field.at_step(k, x[i]).u - reference[s][i];
                num += d * d * h;
                den += reference[s][i] * reference[s][i] * h;
                sup = std::max(sup, std::abs(d));
            }
            CompareRow row{N, pde.snapshots[s].step, t, std::sqrt(num), den > 0.0 ? std::sqrt(num / den) : 0.0, sup};
            last = row.rel_l2;
            out.rows.push_back(row);
        }
        out.final_rel.push_back(last);
    }
    return out;
}

} // namespace mkfk
