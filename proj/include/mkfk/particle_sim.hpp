#pragma once

// Euler-Maruyama simulation of the empirical MKFK particle system and of
// particles driven by a frozen field.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkfk/core.hpp"
#include "mkfk/errors.hpp"
#include "mkfk/field.hpp"
#include "mkfk/fk_solver.hpp"
#include "mkfk/initial_density.hpp"
#include "mkfk/metrics.hpp"
#include "mkfk/noise.hpp"
#include "mkfk/parallel.hpp"
#include "mkfk/time_grid.hpp"
#include "mkfk/trajectory.hpp"

namespace mkfk {

/// Points at which u and grad u are recorded, and how often.
struct DiagnosticsSpec {
    double y_min = -6.0;
    double y_max = 6.0;
    std::size_t n_y = 241;
    std::size_t stride = 100;  ///< snapshot every stride steps (and always the last)

    std::vector<double> points() const {
        std::vector<double> y(n_y);
        for (std::size_t i = 0; i < n_y; ++i)
            y[i] = n_y == 1 ? y_min : y_min + (y_max - y_min) * static_cast<double>(i) / static_cast<double>(n_y - 1);
        return y;
    }

    bool is_snapshot(std::size_t k, std::size_t n_steps) const {
        return k == n_steps || (stride > 0 && k % stride == 0);
    }
};

struct SimConfig {
    ModelParams params;
    KernelSpec kernel{0.1};
    TimeGrid grid{1.0, 1000};
    std::size_t N = 1000;
    std::uint64_t seed = 1;
    std::uint32_t replica = 0;
    InitSpec init;
    bool store_paths = false;
    std::size_t workers = 1;
    DiagnosticsSpec diag;

    NoiseSource noise() const { return NoiseSource(seed, replica); }

    std::vector<std::string> violations() const {
        auto v = params.violations();
        if (N < 1) v.emplace_back("sim.N: must be >= 1");
        if (std::abs(grid.T - params.T) > 1e-12 * params.T) v.emplace_back("grid.T: must equal model.T");
        auto iv = init.violations(params.s_cap);
        v.insert(v.end(), iv.begin(), iv.end());
        return v;
    }

    void validate() const {
        auto v = violations();
        if (!v.empty()) throw ConfigError(v);
    }
};

struct EnsembleState {
    std::size_t step = 0;
    std::vector<double> x;
    std::vector<PathAccumulators> acc;
    std::vector<std::uint64_t> label;  ///< noise substream of each particle

    std::size_t size() const { return x.size(); }

    std::vector<double> weights() const {
        std::vector<double> w(acc.size());
        for (std::size_t i = 0; i < acc.size(); ++i) w[i] = acc[i].V;
        return w;
    }
};

/// init_ensemble: i.i.d. draws from rho_0, empty accumulators.
inline EnsembleState init_ensemble(const SimConfig& cfg) {
    cfg.validate();
    EnsembleState s;
    s.x.resize(cfg.N);
    s.acc.assign(cfg.N, PathAccumulators{});
    s.label.resize(cfg.N);
    const NoiseSource noise = cfg.noise();
    for (std::size_t i = 0; i < cfg.N; ++i) {
        s.x[i] = cfg.init.sample(noise, i);
        s.label[i] = i;
    }
    return s;
}

namespace detail {

// Always-on field and drift bound checks; relative slack covers rounding.
inline void check_field_bounds(const KernelSpec& k, const FieldValue& fv, std::size_t step) {
    const double slack = 1e-12;
    if (!(fv.u >= 0.0 && fv.u <= k.M_K() * (1.0 + slack)) || !(std::abs(fv.grad) <= k.M_K_prime() * (1.0 + slack)))
        throw NumericalError("field bound violated at step " + std::to_string(step) + ": u=" + std::to_string(fv.u) +
                             " grad=" + std::to_string(fv.grad));
}

/// Steps (3) and (4) for one particle: accumulate at the left endpoint, then move.
inline void advance_particle(const SimConfig& cfg, const FieldValue& fv, double noise, std::size_t step, double& x,
                             PathAccumulators& acc) {
    const ModelParams& p = cfg.params;
    const double dt = cfg.grid.dt();
    check_field_bounds(cfg.kernel, fv, step);
    acc.advance(p, fv.u, fv.grad, dt);
    const double b = drift_b(p, acc.A, acc.G);
    const double bound = drift_bound(p, cfg.kernel, cfg.grid.time(step + 1));
    if (!(std::abs(b) <= bound * (1.0 + 1e-9) + 1e-300))
        throw NumericalError("drift bound violated at step " + std::to_string(step));
    x += b * dt + std::sqrt(2.0 * dt) * noise;
    if (!std::isfinite(x)) throw NumericalError("non-finite position at step " + std::to_string(step));
}

class Recorder {
public:
    Recorder(const SimConfig& cfg, TrajectoryRecord& rec) : cfg_(cfg), rec_(rec) {
        rec.grid = cfg.grid;
        rec.n_particles = cfg.N;
        rec.seed = cfg.seed;
        rec.diag_y = cfg.diag.points();
        rec.has_paths = cfg.store_paths;
        if (cfg.store_paths) {
            const std::size_t n = cfg.N * cfg.grid.n_points();
            rec.paths.n_particles = cfg.N;
            rec.paths.x.reserve(n);
            rec.paths.A.reserve(n);
            rec.paths.G.reserve(n);
            rec.paths.V.reserve(n);
        }
    }

    void record(const EnsembleState& s, const FKField* field) {
        const std::size_t k = s.step;
        StepSummary sum;
        sum.step = k;
        sum.time = cfg_.grid.time(k);
        const double n = static_cast<double>(s.size());
        double mx = 0.0, mv = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            mx += s.x[i];
            mv += s.acc[i].V;
        }
        mx /= n;
        double var = 0.0;
        for (double xi : s.x) var += (xi - mx) * (xi - mx);
        sum.mean_x = mx;
        sum.var_x = var / n;
        sum.mean_V = mv / n;
        rec_.summary.push_back(sum);
        if (field && cfg_.diag.is_snapshot(k, cfg_.grid.n_steps)) {
            FieldSnapshot snap;
            snap.step = k;
            for (double y : rec_.diag_y) {
                const auto fv = field->at_step(k, y);
                snap.u.push_back(fv.u);
                snap.grad.push_back(fv.grad);
            }
            rec_.snapshots.push_back(std::move(snap));
        }
        if (cfg_.store_paths) {
            for (std::size_t i = 0; i < s.size(); ++i) {
                rec_.paths.x.push_back(s.x[i]);
                rec_.paths.A.push_back(s.acc[i].A);
                rec_.paths.G.push_back(s.acc[i].G);
                rec_.paths.V.push_back(s.acc[i].V);
            }
        }
    }

private:
    const SimConfig& cfg_;
    TrajectoryRecord& rec_;
};

} // namespace detail

/// Moves every particle one step using u, grad u from the given slice.
inline void advance_in_slice(EnsembleState& state, const SimConfig& cfg, const NoiseSource& noise,
                             const FieldSlice& slice) {
    if (state.step >= cfg.grid.n_steps) throw std::out_of_range("step_interacting: already at the horizon");
    if (state.label.size() != state.size() || state.acc.size() != state.size())
        throw std::invalid_argument("step_interacting: inconsistent ensemble state");
    const std::size_t k = state.step;
    parallel_for(state.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const FieldValue fv = slice.eval(cfg.kernel, state.x[i]);
            detail::advance_particle(cfg, fv, noise.increment(state.label[i], k), k, state.x[i], state.acc[i]);
        }
    });
    state.step = k + 1;
}

/// step_interacting: one explicit step of the empirical MKFK system. The
/// slice built from the pre-move state is returned for recording.
inline FieldSlice step_interacting(EnsembleState& state, const SimConfig& cfg, const NoiseSource& noise) {
    FieldSlice slice(state.x, state.weights());
    advance_in_slice(state, cfg, noise, slice);
    return slice;
}

struct InteractingRun {
    TrajectoryRecord record;
    FKField field;
    EnsembleState final_state;
};

/// simulate_interacting: n_steps of step_interacting plus the empirical field.
inline InteractingRun simulate_interacting(const SimConfig& cfg) {
    cfg.validate();
    InteractingRun run;
    run.field = FKField(cfg.kernel, cfg.grid);
    detail::Recorder recorder(cfg, run.record);
    EnsembleState s = init_ensemble(cfg);
    const NoiseSource noise = cfg.noise();
    while (s.step < cfg.grid.n_steps) {
        const std::size_t k = s.step;
        run.field.set_slice(k, FieldSlice(s.x, s.weights()));
        recorder.record(s, &run.field);
        advance_in_slice(s, cfg, noise, run.field.slice(k));
    }
    run.field.set_slice(s.step, FieldSlice(s.x, s.weights()));
    recorder.record(s, &run.field);
    run.final_state = std::move(s);
    return run;
}

/// simulate_driven: the same stepping with u, grad u read from a frozen field.
inline TrajectoryRecord simulate_driven(const SimConfig& cfg, const FKField& field) {
    cfg.validate();
    if (!(field.grid() == cfg.grid)) throw std::invalid_argument("simulate_driven: field/grid mismatch");
    if (!(field.kernel() == cfg.kernel)) throw std::invalid_argument("simulate_driven: field/kernel mismatch");
    TrajectoryRecord rec;
    detail::Recorder recorder(cfg, rec);
    EnsembleState s = init_ensemble(cfg);
    const NoiseSource noise = cfg.noise();
    while (s.step < cfg.grid.n_steps) {
        const std::size_t k = s.step;
        recorder.record(s, &field);
        parallel_for(s.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const FieldValue fv = field.at_step(k, s.x[i]);
                detail::advance_particle(cfg, fv, noise.increment(s.label[i], k), k, s.x[i], s.acc[i]);
            }
        });
        s.step = k + 1;
    }
    recorder.record(s, &field);
    return rec;
}

/// Positions of the first n_track particles as a path ensemble.
inline PathEnsemble tracked_paths(const TrajectoryRecord& rec, std::size_t n_track) {
    if (!rec.has_paths) throw std::invalid_argument("tracked_paths: record has no paths");
    if (n_track > rec.n_particles) throw std::invalid_argument("tracked_paths: more tracked than simulated");
    PathEnsemble out(rec.grid, n_track);
    for (std::size_t i = 0; i < n_track; ++i)
        for (std::size_t k = 0; k < rec.grid.n_points(); ++k) out(i, k) = rec.paths.at(rec.paths.x, k, i);
    return out;
}

struct CouplingRow {
    std::size_t N = 0;
    double path_err = 0.0;          ///< max_i replica-mean of sup_k |xi_i - Y_i|^2
    double path_err_pooled = 0.0;   ///< same quantity pooled over tracked i
    double path_err_stderr = 0.0;
    double field_sup_sq = 0.0;      ///< replica mean of max_k ||u^{mu_N} - u_ref||_inf^2
    double field_l2_sq = 0.0;       ///< replica mean of max_k ||u^{mu_N} - u_ref||_2^2
    double field_sup_sq_stderr = 0.0;
    double field_l2_sq_stderr = 0.0;
};

struct CouplingStudy {
    std::size_t N_ref = 0;
    std::size_t replicas = 0;
    std::size_t n_track = 0;
    std::vector<CouplingRow> rows;
};

/// Coupled pair for one replica: interacting-N and driven-N in ref_field
/// with identical noise and initial draws.
struct CoupledPair {
    PathEnsemble interacting;  ///< tracked particles
    PathEnsemble driven;
    double field_sup_sq = 0.0;
    double field_l2_sq = 0.0;
};

inline CoupledPair run_coupled_pair(const SimConfig& base, std::size_t N, const FKField& ref_field,
                                    std::size_t n_track) {
    SimConfig cfg = base;
    cfg.N = N;
    cfg.store_paths = true;
    const InteractingRun inter = simulate_interacting(cfg);
    const TrajectoryRecord driven = simulate_driven(cfg, ref_field);
    CoupledPair out{tracked_paths(inter.record, n_track), tracked_paths(driven, n_track)};
    const auto y = cfg.diag.points();
    for (std::size_t k = 0; k < cfg.grid.n_points(); ++k) {
        if (!cfg.diag.is_snapshot(k, cfg.grid.n_steps)) continue;
        const double s = field_distance(inter.field, ref_field, y, FieldNorm::sup, k);
        const double l = field_distance(inter.field, ref_field, y, FieldNorm::l2, k);
        out.field_sup_sq = std::max(out.field_sup_sq, s * s);
        out.field_l2_sq = std::max(out.field_l2_sq, l * l);
    }
    return out;
}

/// couple_systems: per replica, an N_ref interacting run supplies the
/// reference field; each N runs interacting and driven with shared noise.
/// Path errors are taken over the first min(Ns) particles, present for every N.
inline CouplingStudy couple_systems(const SimConfig& base, const std::vector<std::size_t>& Ns, std::size_t N_ref,
                                    std::size_t replicas) {
    if (Ns.empty()) throw std::invalid_argument("couple_systems: empty N list");
    const std::size_t n_max = *std::max_element(Ns.begin(), Ns.end());
    if (N_ref <= n_max) throw std::invalid_argument("couple_systems: N_ref must exceed max(Ns)");
    if (replicas < 1) throw std::invalid_argument("couple_systems: replicas must be >= 1");
    CouplingStudy study;
    study.N_ref = N_ref;
    study.replicas = replicas;
    study.n_track = *std::min_element(Ns.begin(), Ns.end());

    std::vector<std::vector<PathEnsemble>> inter(Ns.size()), driven(Ns.size());
    std::vector<std::vector<double>> fsup(Ns.size()), fl2(Ns.size());
    for (std::size_t r = 0; r < replicas; ++r) {
        SimConfig cfg = base;
        cfg.replica = static_cast<std::uint32_t>(r);
        cfg.N = N_ref;
        cfg.store_paths = false;
        const InteractingRun ref = simulate_interacting(cfg);
        for (std::size_t j = 0; j < Ns.size(); ++j) {
            auto pair = run_coupled_pair(cfg, Ns[j], ref.field, study.n_track);
            inter[j].push_back(std::move(pair.interacting));
            driven[j].push_back(std::move(pair.driven));
            fsup[j].push_back(pair.field_sup_sq);
            fl2[j].push_back(pair.field_l2_sq);
        }
    }
    for (std::size_t j = 0; j < Ns.size(); ++j) {
        const SupDistance d = sup_path_distance_sq(inter[j], driven[j]);
        CouplingRow row;
        row.N = Ns[j];
        row.path_err = d.max;
        row.path_err_pooled = d.pooled;
        row.path_err_stderr = d.pooled_stderr;
        row.field_sup_sq = detail::mean(fsup[j]);
        row.field_l2_sq = detail::mean(fl2[j]);
        row.field_sup_sq_stderr = detail::stderr_of_mean(fsup[j]);
        row.field_l2_sq_stderr = detail::stderr_of_mean(fl2[j]);
        study.rows.push_back(row);
    }
    return study;
}

} // namespace mkfk
