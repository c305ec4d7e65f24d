#pragma once

// Picard solver for the regularised Feynman-Kac equation on a frozen
// ensemble of sample paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mkfk/core.hpp"
#include "mkfk/errors.hpp"
#include "mkfk/field.hpp"
#include "mkfk/time_grid.hpp"

namespace mkfk {

/// P sample paths on a shared grid, stored path-major.
class PathEnsemble {
public:
    PathEnsemble() = default;
    PathEnsemble(TimeGrid grid, std::size_t n_paths)
        : grid_(grid), n_paths_(n_paths), data_(n_paths * grid.n_points(), 0.0) {
        if (n_paths == 0) throw std::invalid_argument("path ensemble needs at least one path");
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_points() const { return grid_.n_points(); }

    std::span<double> path(std::size_t p) { return {data_.data() + p * n_points(), n_points()}; }
    std::span<const double> path(std::size_t p) const { return {data_.data() + p * n_points(), n_points()}; }
    double operator()(std::size_t p, std::size_t k) const { return data_[p * n_points() + k]; }
    double& operator()(std::size_t p, std::size_t k) { return data_[p * n_points() + k]; }

    /// Copy of the paths restricted to steps 0..k_last.
    PathEnsemble truncated(std::size_t k_last) const {
        if (k_last > grid_.n_steps) throw std::out_of_range("truncation beyond horizon");
        PathEnsemble out(TimeGrid(grid_.time(k_last), k_last), n_paths_);
        for (std::size_t p = 0; p < n_paths_; ++p)
            for (std::size_t k = 0; k <= k_last; ++k) out(p, k) = (*this)(p, k);
        return out;
    }

    void check_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) throw std::invalid_argument("path ensemble contains non-finite positions");
    }

private:
    TimeGrid grid_;
    std::size_t n_paths_ = 0;
    std::vector<double> data_;
};

enum class Quadrature { left, trapezoid };

struct PicardOptions {
    double tol = 1e-10;
    std::size_t max_iter = 200;
    double initial_value = 0.0;      ///< constant initial iterate
    double norm_weight = -1.0;       ///< < 0 selects M automatically
    Quadrature quadrature = Quadrature::left;
};

struct PicardReport {
    std::size_t iterations = 0;
    std::vector<double> residuals;   ///< weighted-norm change per sweep
    double contraction_factor = std::numeric_limits<double>::quiet_NaN();
    double norm_weight = 0.0;        ///< M actually used (0 means plain sup norm)
    bool weighted = true;            ///< false when the M search hit its cap
    bool converged = false;
    bool exact = false;              ///< map independent of the iterate (lambda = 0)
};

struct NormWeight {
    double M = 0.0;
    bool weighted = false;
};

/// Norm weight M with M > M_K lambda^2 c0 T e^{MT}: iterate
/// M <- 2 M_K lambda^2 c0 T e^{MT} from M = 1; fall back to the plain sup
/// norm (M = 0) when the iteration runs past the cap.
inline NormWeight select_norm_weight(double m_k, const ModelParams& p, double horizon) {
    constexpr double cap = 1e6;
    const double a = 2.0 * m_k * p.lambda * p.lambda * p.c0 * horizon;
    double M = 1.0;
    for (int i = 0; i < 50; ++i) {
        const double next = a * std::exp(M * horizon);
        if (!std::isfinite(next) || next > cap) return {0.0, false};
        if (std::abs(next - M) <= 1e-14 * std::max(1.0, M)) {
            M = next;
            break;
        }
        M = next;
    }
    // Guard the contraction condition itself; a slow iterate may sit below it.
    if (!(M > 0.5 * a * std::exp(M * horizon))) return {0.0, false};
    return {M, true};
}

/// contraction_estimate: geometric-mean ratio of consecutive residuals.
inline double contraction_estimate(const PicardReport& report) {
    if (report.exact) return 0.0;
    const auto& r = report.residuals;
    if (r.size() < 3) throw std::invalid_argument("contraction estimate needs at least 3 residuals");
    for (std::size_t i = 1; i < r.size(); ++i)
        if (r[i] == 0.0) return 0.0;
    return std::pow(r.back() / r.front(), 1.0 / static_cast<double>(r.size() - 1));
}

namespace detail {

// Killing weights per (path, step) from the iterate Z.
inline void weights_from_iterate(const ModelParams& p, const TimeGrid& g, std::size_t n_paths,
                                 const std::vector<double>& z, Quadrature q, std::vector<double>& w) {
    const std::size_t np = g.n_points();
    const double dt = g.dt();
    for (std::size_t path = 0; path < n_paths; ++path) {
        const double* zp = z.data() + path * np;
        double* wp = w.data() + path * np;
        if (q == Quadrature::left) {
            PathAccumulators acc;
            wp[0] = acc.V;
            for (std::size_t k = 1; k < np; ++k) {
                acc.advance(p, zp[k - 1], 0.0, dt);
                wp[k] = acc.V;
            }
        } else {
            double A = 0.0, B = 0.0;
            wp[0] = 1.0;
            for (std::size_t k = 1; k < np; ++k) {
                const double a_prev = A;
                A += 0.5 * (zp[k - 1] + zp[k]) * dt;
                B += 0.5 * (std::exp(-p.lambda * a_prev) + std::exp(-p.lambda * A)) * dt;
                wp[k] = std::exp(-p.lambda * p.c0 * B);
            }
        }
    }
}

struct StepOrder {
    std::vector<std::size_t> order;  // paths sorted by position at this step
    std::vector<double> sorted_x;
};

inline std::vector<StepOrder> sort_steps(const PathEnsemble& paths) {
    std::vector<StepOrder> out(paths.n_points());
    for (std::size_t k = 0; k < paths.n_points(); ++k) {
        auto& so = out[k];
        so.order.resize(paths.n_paths());
        std::iota(so.order.begin(), so.order.end(), std::size_t{0});
        std::stable_sort(so.order.begin(), so.order.end(),
                         [&](std::size_t a, std::size_t b) { return paths(a, k) < paths(b, k); });
        so.sorted_x.reserve(so.order.size());
        for (auto q : so.order) so.sorted_x.push_back(paths(q, k));
    }
    return out;
}

inline FieldSlice slice_for(const StepOrder& so, const std::vector<double>& w, std::size_t k, std::size_t np) {
    std::vector<double> ws;
    ws.reserve(so.order.size());
    for (auto q : so.order) ws.push_back(w[q * np + k]);
    return FieldSlice::from_sorted(so.sorted_x, std::move(ws));
}

} // namespace detail

struct FKSolution {
    FKField field;
    PicardReport report;
    std::vector<double> along_path;  ///< converged u along each path, path-major
};

/// fk_solve: Picard iteration Z <- (tau o T^m)(Z) on the frozen ensemble.
inline FKSolution fk_solve(const PathEnsemble& paths, const KernelSpec& k, const ModelParams& p,
                           const PicardOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("fk_solve: tol must be > 0");
    if (opt.max_iter < 1) throw std::invalid_argument("fk_solve: max_iter must be >= 1");
    paths.check_finite();

    const TimeGrid& g = paths.grid();
    const std::size_t np = g.n_points();
    const std::size_t P = paths.n_paths();

    PicardReport rep;
    if (opt.norm_weight >= 0.0) {
        rep.norm_weight = opt.norm_weight;
        rep.weighted = opt.norm_weight > 0.0;
    } else {
        auto nw = select_norm_weight(k.M_K(), p, g.T);
        rep.norm_weight = nw.M;
        rep.weighted = nw.weighted;
    }
    rep.exact = (p.lambda == 0.0);

    std::vector<double> discount(np);
    for (std::size_t s = 0; s < np; ++s) discount[s] = std::exp(-rep.norm_weight * g.time(s));

    const auto orders = detail::sort_steps(paths);
    std::vector<double> z(P * np, opt.initial_value);
    std::vector<double> z_next(P * np, 0.0);
    std::vector<double> w(P * np, 1.0);

    auto sweep = [&]() {
        detail::weights_from_iterate(p, g, P, z, opt.quadrature, w);
        for (std::size_t s = 0; s < np; ++s) {
            const FieldSlice slice = detail::slice_for(orders[s], w, s, np);
            for (std::size_t q = 0; q < P; ++q) z_next[q * np + s] = slice.eval(k, paths(q, s)).u;
        }
        double res = 0.0;
        for (std::size_t q = 0; q < P; ++q) {
            double worst = 0.0;
            for (std::size_t s = 0; s < np; ++s) {
                const double d = z_next[q * np + s] - z[q * np + s];
                if (!std::isfinite(d)) throw NumericalError("fk_solve: non-finite Picard iterate");
                worst = std::max(worst, discount[s] * std::abs(d));
            }
            res += worst;
        }
        return res / static_cast<double>(P);
    };

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        const double res = sweep();
        rep.residuals.push_back(res);
        rep.iterations = it + 1;
        std::swap(z, z_next);
        if (rep.exact || res < opt.tol) {
            rep.converged = true;
            break;
        }
    }
    if (rep.exact)
        rep.contraction_factor = 0.0;
    else if (rep.residuals.size() >= 3)
        rep.contraction_factor = contraction_estimate(rep);

    detail::weights_from_iterate(p, g, P, z, opt.quadrature, w);
    FKField field(k, g);
    for (std::size_t s = 0; s < np; ++s) field.set_slice(s, detail::slice_for(orders[s], w, s, np));
    return {std::move(field), std::move(rep), std::move(z)};
}

/// restrict_and_resolve: solve on the paths restricted to [0, t_cut].
inline FKSolution restrict_and_resolve(const PathEnsemble& paths, double t_cut, const KernelSpec& k,
                                       const ModelParams& p, const PicardOptions& opt = {}) {
    const TimeGrid& g = paths.grid();
    if (!(t_cut > 0.0 && t_cut <= g.T * (1.0 + 1e-12)))
        throw std::invalid_argument("restrict_and_resolve: t_cut must lie in (0, T]");
    const double steps = t_cut / g.dt();
    const auto k_cut = static_cast<std::size_t>(std::llround(steps));
    if (std::abs(steps - static_cast<double>(k_cut)) > 1e-9 * std::max(1.0, steps))
        throw std::invalid_argument("restrict_and_resolve: t_cut must be a grid point");
    if (k_cut == g.n_steps) return fk_solve(paths, k, p, opt);
    return fk_solve(paths.truncated(k_cut), k, p, opt);
}

/// One more Picard sweep applied to a converged solution; returns the
/// weighted-norm change. Used to certify the fixed-point residual.
inline double picard_defect(const PathEnsemble& paths, const KernelSpec& k, const ModelParams& p,
                            const FKSolution& sol, Quadrature q = Quadrature::left) {
    const TimeGrid& g = paths.grid();
    const std::size_t np = g.n_points();
    const std::size_t P = paths.n_paths();
    std::vector<double> w(P * np);
    detail::weights_from_iterate(p, g, P, sol.along_path, q, w);
    const auto orders = detail::sort_steps(paths);
    std::vector<double> worst(P, 0.0);
    for (std::size_t s = 0; s < np; ++s) {
        const FieldSlice slice = detail::slice_for(orders[s], w, s, np);
        const double disc = std::exp(-sol.report.norm_weight * g.time(s));
        for (std::size_t path = 0; path < P; ++path) {
            const double d = slice.eval(k, paths(path, s)).u - sol.along_path[path * np + s];
            worst[path] = std::max(worst[path], disc * std::abs(d));
        }
    }
    const double res = std::accumulate(worst.begin(), worst.end(), 0.0);
    return res / static_cast<double>(P);
}

} // namespace mkfk
