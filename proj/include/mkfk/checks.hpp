#pragma once

// Property checks with explicit verdicts, used by the `invariants`
// subcommand and by the acceptance binary.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mkfk/config.hpp"
#include "mkfk/fk_solver.hpp"
#include "mkfk/noise.hpp"
#include "mkfk/particle_sim.hpp"
#include "mkfk/pde_oracle.hpp"
#include "mkfk/studies.hpp"

namespace mkfk {

/// One verdict: passes when value <= bound + tolerance.
struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

inline Check make_check(std::string name, double value, double bound, double tolerance) {
    return {std::move(name), value, bound, tolerance, std::isfinite(value) && value <= bound + tolerance};
}

/// |int K - 1| by composite Simpson on the support.
inline Check check_kernel_mass(const KernelSpec& k) {
    const int n = 20000;
    const double a = -k.r_cut(), h = 2.0 * k.r_cut() / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) s += (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)) * k(a + i * h);
    return make_check("kernel.mass", std::abs(s * h / 3.0 - 1.0), 0.0, 1e-6);
}

/// Counts of sampled violations of |K| <= M_K, |K'| <= M_K', and the
/// Lipschitz bound, over n random points and nearby pairs.
inline std::vector<Check> check_kernel_bounds(const KernelSpec& k, std::size_t n, std::uint64_t seed) {
    const NoiseSource noise(seed);
    const double span = 1.2 * k.r_cut();
    double bad_sup = 0, bad_grad = 0, bad_lip = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto u = noise.uniforms(Stream::initial, i, 0);
        const double y = span * (2.0 * u[0] - 1.0);
        const double y2 = y + k.eps() * (2.0 * u[1] - 1.0);
        if (std::abs(k(y)) > k.M_K() * (1.0 + 1e-12)) ++bad_sup;
        if (std::abs(k.grad(y)) > k.M_K_prime() * (1.0 + 1e-12)) ++bad_grad;
        if (std::abs(k(y) - k(y2)) > k.L_K() * std::abs(y - y2) * (1.0 + 1e-12) + 1e-300) ++bad_lip;
    }
    return {make_check("kernel.sup_violations", bad_sup, 0, 0), make_check("kernel.grad_violations", bad_grad, 0, 0),
            make_check("kernel.lipschitz_violations", bad_lip, 0, 0)};
}

/// Lambda/V lemmas on n random accumulator pairs; each value is the worst
/// bound excess, so the check passes when it stays below the slack.
inline std::vector<Check> check_lambda_v(const ModelParams& p, std::size_t n, std::uint64_t seed) {
    const NoiseSource noise(seed, 1);
    double lam_sup = -1e300, v_range = -1e300, lam_lip = -1e300, v_lip = -1e300;
    const double a_scale = 5.0 / std::max(p.lambda, 1e-3);
    for (std::size_t i = 0; i < n; ++i) {
        const auto u = noise.uniforms(Stream::initial, i, 0);
        const auto w = noise.uniforms(Stream::initial, i, 1);
        const double A = a_scale * u[0], A2 = a_scale * u[1];
        const double B = p.T * w[0], B2 = p.T * w[1];
        const double L1 = lambda_fn(p, A), L2 = lambda_fn(p, A2);
        const double V1 = v_weight(p, B), V2 = v_weight(p, B2);
        lam_sup = std::max(lam_sup, std::abs(L1) - p.lambda * p.c0);
        v_range = std::max({v_range, V1 - 1.0, V2 - 1.0, V1 > 0.0 ? -1.0 : 1.0});
        lam_lip = std::max(lam_lip, std::abs(L1 - L2) - p.lambda * p.lambda * p.c0 * std::abs(A - A2));
        v_lip = std::max(v_lip, std::abs(V1 - V2) - p.lambda * p.c0 * std::abs(B - B2));
    }
    return {make_check("lemma.lambda_sup_excess", lam_sup, 0, 1e-12), make_check("lemma.v_range_excess", v_range, 0, 1e-12),
            make_check("lemma.lambda_lipschitz_excess", lam_lip, 0, 1e-12),
            make_check("lemma.v_lipschitz_excess", v_lip, 0, 1e-12)};
}

/// Worst excess of u, |grad u| and the finite-difference slope of u over
/// the certified constants on every diagnostics snapshot.
inline std::vector<Check> check_field_snapshots(const TrajectoryRecord& rec, const KernelSpec& k) {
    double u_excess = -1e300, u_neg = -1e300, g_excess = -1e300, lip_excess = -1e300;
    for (const auto& s : rec.snapshots) {
        for (std::size_t j = 0; j < s.u.size(); ++j) {
            u_excess = std::max(u_excess, s.u[j] - k.M_K());
            u_neg = std::max(u_neg, -s.u[j]);
            g_excess = std::max(g_excess, std::abs(s.grad[j]) - k.M_K_prime());
            if (j > 0) {
                const double dy = rec.diag_y[j] - rec.diag_y[j - 1];
                if (dy > 0.0) lip_excess = std::max(lip_excess, std::abs(s.u[j] - s.u[j - 1]) / dy - k.L_K());
            }
        }
    }
    return {make_check("field.u_above_MK", u_excess, 0, 1e-12 * k.M_K()),
            make_check("field.u_negative", u_neg, 0, 0),
            make_check("field.grad_above_MKprime", g_excess, 0, 1e-12 * k.M_K_prime()),
            make_check("field.lipschitz_above_LK", lip_excess, 0, 1e-12 * k.L_K())};
}

/// Largest increase of the mean weight between consecutive steps.
inline Check check_mean_weight_monotone(const TrajectoryRecord& rec) {
    double worst = -1e300;
    for (std::size_t k = 1; k < rec.summary.size(); ++k)
        worst = std::max(worst, rec.summary[k].mean_V - rec.summary[k - 1].mean_V);
    return make_check("sim.mean_V_increase", worst, 0, 0);
}

/// PDE structure: positivity, calcite monotonicity, split mass balance, and
/// mass conservation when lambda = 0.
inline std::vector<Check> check_pde_structure(const PDEConfig& cfg, const InitSpec& init) {
    double rho_neg = 0.0, c_increase = -1e300, balance = 0.0;
    std::vector<double> prev_c;
    const PDESolution sol = pde_solve(cfg, init, [&](const PDEState& s) {
        for (std::size_t i = 0; i < s.rho.size(); ++i) {
            rho_neg = std::max(rho_neg, -s.rho[i]);
            if (!prev_c.empty()) c_increase = std::max(c_increase, s.c[i] - prev_c[i]);
        }
        prev_c = s.c;
    });
    for (std::size_t k = 0; k < sol.reacted.size(); ++k)
        balance = std::max(balance, std::abs(sol.mass[k + 1] - sol.mass[k] + sol.reacted[k]));
    std::vector<Check> out{make_check("pde.rho_negative", rho_neg, 0, 0), make_check("pde.c_increase", c_increase, 0, 0),
                           make_check("pde.mass_balance_residual", balance, 0, 1e-8)};
    if (cfg.params.lambda == 0.0) {
        double drift = 0.0;
        for (double m : sol.mass) drift = std::max(drift, std::abs(m - sol.mass.front()));
        out.push_back(make_check("pde.mass_drift_lambda0", drift, 0, 1e-10));
    }
    return out;
}

/// The property suite run by `invariants`, sized by the configuration.
inline std::vector<Check> run_invariant_suite(const RunConfig& cfg) {
    std::vector<Check> out;
    auto append = [&](std::vector<Check> v) { out.insert(out.end(), v.begin(), v.end()); };
    const KernelSpec k(cfg.eps);
    out.push_back(check_kernel_mass(k));
    append(check_kernel_bounds(k, 10000, cfg.seed));
    append(check_lambda_v(cfg.model, 10000, cfg.seed));

    // Picard on a small Brownian ensemble.
    const SimConfig sc = cfg.sim_config();
    const PathEnsemble paths = brownian_paths(sc.grid, cfg.fk.P, cfg.init, sc.noise());
    PicardOptions opt;
    opt.tol = cfg.fk.tol;
    opt.max_iter = cfg.fk.max_iter;
    opt.quadrature = cfg.fk.quadrature;
    const FKSolution fk = fk_solve(paths, k, cfg.model, opt);
    out.push_back(make_check("picard.converged", fk.report.converged ? 0.0 : 1.0, 0, 0));
    out.push_back(make_check("picard.contraction_factor",
                             std::isnan(fk.report.contraction_factor) ? 0.0 : fk.report.contraction_factor, 1.0, -1e-12));
    out.push_back(make_check("picard.defect", picard_defect(paths, k, cfg.model, fk, cfg.fk.quadrature), 2.0 * cfg.fk.tol, 0));

    // Interacting run: the always-on bounds throw on violation; the rest is checked here.
    const InteractingRun run = simulate_interacting(sc);
    append(check_field_snapshots(run.record, k));
    out.push_back(check_mean_weight_monotone(run.record));
    SimConfig other = sc;
    other.workers = sc.workers == 1 ? 2 : 1;
    const InteractingRun again = simulate_interacting(other);
    double mismatch = 0.0;
    for (std::size_t i = 0; i < run.final_state.size(); ++i)
        mismatch += run.final_state.x[i] != again.final_state.x[i] ? 1.0 : 0.0;
    out.push_back(make_check("sim.worker_count_mismatches", mismatch, 0, 0));

    append(check_pde_structure(cfg.pde_config(), cfg.init));
    return out;
}

} // namespace mkfk
