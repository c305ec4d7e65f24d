#pragma once

// Explicit finite-volume oracle for the sulphation ODE-PDE system in flux
// form, d_t rho = d_x(phi(c) d_x(rho / phi(c))) - lambda c rho, with the
// calcite ODE in local or mollified (nonlocal) form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mkfk/core.hpp"
#include "mkfk/errors.hpp"
#include "mkfk/initial_density.hpp"

namespace mkfk {

/// Cell-centred grid on [-L, L].
struct SpatialGrid {
    double L = 10.0;
    std::size_t n_cells = 1000;

    double h() const { return 2.0 * L / static_cast<double>(n_cells); }
    double center(std::size_t i) const { return -L + (static_cast<double>(i) + 0.5) * h(); }

    std::vector<double> centers() const {
        std::vector<double> x(n_cells);
        for (std::size_t i = 0; i < n_cells; ++i) x[i] = center(i);
        return x;
    }
};

enum class CalciteMode { local, nonlocal };

struct PDEConfig {
    SpatialGrid grid;
    double dt = 1e-4;
    CalciteMode mode = CalciteMode::local;
    KernelSpec kernel{0.1};
    ModelParams params;
    std::size_t snapshot_stride = 0;  ///< 0 keeps only the initial and final states

    std::size_t n_steps() const { return static_cast<std::size_t>(std::llround(params.T / dt)); }

    /// Largest face-to-cell porosity ratio; the effective diffusivity.
    double max_diffusivity() const { return params.max_porosity() / params.min_porosity(); }

    std::vector<std::string> violations() const {
        auto v = params.violations();
        if (!(grid.L > 0.0) || grid.n_cells < 3) v.emplace_back("pde.L/pde.n_cells: need L > 0 and at least 3 cells");
        if (!(dt > 0.0)) v.emplace_back("pde.dt: must be > 0");
        else if (dt > grid.h() * grid.h() / (2.0 * max_diffusivity()))
            v.emplace_back("pde.dt: CFL condition dt <= h^2/(2 D) violated (D = " + std::to_string(max_diffusivity()) +
                           ")");
        if (dt > 0.0 && std::abs(n_steps() * dt - params.T) > 1e-9 * params.T)
            v.emplace_back("pde.dt: must divide model.T");
        return v;
    }

    /// Domain rule L >= |mean| + 6 sqrt(var0 + 2T) + 6 eps.
    std::vector<std::string> domain_violations(const InitSpec& init) const {
        std::vector<std::string> v;
        const double need = std::abs(init.mean) + 6.0 * std::sqrt(init.variance() + 2.0 * params.T) +
                            (mode == CalciteMode::nonlocal ? kernel.r_cut() : 0.0);
        if (grid.L < need) v.emplace_back("pde.L: half-width " + std::to_string(grid.L) + " below required " + std::to_string(need));
        return v;
    }
};

struct PDEState {
    std::size_t step = 0;
    double t = 0.0;
    std::vector<double> rho;
    std::vector<double> c;
};

/// mollify_density: (K * rho)_i = sum_j K(x_i - x_j) rho_j h, zero padded.
inline std::vector<double> mollify_density(std::span<const double> rho, const SpatialGrid& grid, const KernelSpec& k) {
    const double h = grid.h();
    const auto reach = static_cast<std::ptrdiff_t>(std::floor(k.r_cut() / h));
    std::vector<double> stencil(static_cast<std::size_t>(reach) + 1);
    for (std::ptrdiff_t m = 0; m <= reach; ++m) stencil[static_cast<std::size_t>(m)] = k(static_cast<double>(m) * h) * h;
    const auto n = static_cast<std::ptrdiff_t>(rho.size());
    std::vector<double> out(rho.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double s = 0.0;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - reach), hi = std::min<std::ptrdiff_t>(n - 1, i + reach);
        for (std::ptrdiff_t j = lo; j <= hi; ++j) s += stencil[static_cast<std::size_t>(std::abs(i - j))] * rho[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

/// Mass removed by the reaction sub-step of the last pde_step.
struct StepBalance {
    double reacted = 0.0;
};

/// pde_step: exact calcite update, conservative flux step, exact reaction.
/// Porosity and reaction both read the calcite at the start of the step.
inline StepBalance pde_step(PDEState& s, const PDEConfig& cfg) {
    const ModelParams& p = cfg.params;
    const std::size_t n = s.rho.size();
    const double h = cfg.grid.h();
    const double dt = cfg.dt;
    if (dt > h * h / (2.0 * cfg.max_diffusivity())) throw NumericalError("pde_step: CFL condition violated");

    std::vector<double> phi(n), sconc(n);
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = p.porosity(s.c[i]);
        sconc[i] = s.rho[i] / phi[i];
    }
    std::vector<double> driver;
    if (cfg.mode == CalciteMode::nonlocal) driver = mollify_density(s.rho, cfg.grid, cfg.kernel);
    const std::vector<double>& c_driver = cfg.mode == CalciteMode::nonlocal ? driver : s.rho;

    std::vector<double> flux(n + 1, 0.0);  // flux[i] sits on the face left of cell i
    for (std::size_t i = 1; i < n; ++i) {
        const double phi_face = 0.5 * (phi[i - 1] + phi[i]);
        flux[i] = phi_face * (sconc[i] - sconc[i - 1]) / h;
    }
    double rho_max = 0.0;
    for (double r : s.rho) rho_max = std::max(rho_max, r);

    StepBalance bal;
    for (std::size_t i = 0; i < n; ++i) {
        double r = s.rho[i] + dt / h * (flux[i + 1] - flux[i]);
        if (r < 0.0) {
            if (r < -1e-13 * rho_max) throw NumericalError("pde_step: negative density in cell " + std::to_string(i));
            r = 0.0;
        }
        const double decay = std::exp(-p.lambda * s.c[i] * dt);
        bal.reacted += h * r * (1.0 - decay);
        // c_driver may alias rho; read it before rho[i] is overwritten.
        s.c[i] *= std::exp(-p.lambda * c_driver[i] * dt);
        s.rho[i] = r * decay;
    }
    s.step += 1;
    s.t = static_cast<double>(s.step) * dt;
    return bal;
}

struct PDESolution {
    std::vector<PDEState> snapshots;  ///< initial, every snapshot_stride steps, final
    std::vector<double> mass;         ///< int rho per step, size n_steps + 1
    std::vector<double> reacted;      ///< mass removed by reaction in each step
    PDEState final_state;
};

inline PDEState initial_state(const PDEConfig& cfg, const InitSpec& init) {
    PDEState s;
    s.rho.resize(cfg.grid.n_cells);
    s.c.assign(cfg.grid.n_cells, cfg.params.c0);
    for (std::size_t i = 0; i < cfg.grid.n_cells; ++i) s.rho[i] = init.density(cfg.grid.center(i));
    return s;
}

inline double total_mass(std::span<const double> rho, double h) {
    double m = 0.0;
    for (double r : rho) m += r;
    return m * h;
}

/// pde_solve from rho0 on the grid and constant c0; observer sees every state.
inline PDESolution pde_solve(const PDEConfig& cfg, PDEState s,
                             const std::function<void(const PDEState&)>& observer = {}) {
    auto v = cfg.violations();
    if (!v.empty()) throw ConfigError(v);
    for (double r : s.rho)
        if (!(r >= 0.0 && r <= cfg.params.s_cap)) throw ConfigError("pde: initial density must lie in [0, s_cap]");
    PDESolution sol;
    const double h = cfg.grid.h();
    const std::size_t n_steps = cfg.n_steps();
    sol.snapshots.push_back(s);
    sol.mass.push_back(total_mass(s.rho, h));
    if (observer) observer(s);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const auto bal = pde_step(s, cfg);
        sol.reacted.push_back(bal.reacted);
        sol.mass.push_back(total_mass(s.rho, h));
        if (observer) observer(s);
        if (k + 1 == n_steps || (cfg.snapshot_stride > 0 && (k + 1) % cfg.snapshot_stride == 0)) sol.snapshots.push_back(s);
    }
    sol.final_state = s;
    return sol;
}

inline PDESolution pde_solve(const PDEConfig& cfg, const InitSpec& init,
                             const std::function<void(const PDEState&)>& observer = {}) {
    return pde_solve(cfg, initial_state(cfg, init), observer);
}

} // namespace mkfk
