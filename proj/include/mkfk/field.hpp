#pragma once

// Weighted kernel mixtures representing u(t, .) and grad u(t, .).

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mkfk/core.hpp"
#include "mkfk/time_grid.hpp"

namespace mkfk {

struct FieldValue {
    double u = 0.0;
    double grad = 0.0;
};

/// One time slice: u(y) = (1/N) sum_j w_j K(y - x_j).
///
/// Centres are stored sorted by position (ties by weight) and every sum runs
/// in that order, so results do not depend on particle labelling and the
/// windowed evaluation is bit-identical to the full sum.
class FieldSlice {
public:
    FieldSlice() = default;

    FieldSlice(std::span<const double> centers, std::span<const double> weights) {
        if (centers.size() != weights.size())
            throw std::invalid_argument("field slice: centers/weights size mismatch");
        std::vector<std::size_t> order(centers.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (centers[a] != centers[b]) return centers[a] < centers[b];
            return weights[a] < weights[b];
        });
        x_.reserve(order.size());
        w_.reserve(order.size());
        for (auto i : order) {
            x_.push_back(centers[i]);
            w_.push_back(weights[i]);
        }
    }

    /// Build from data already in slice order (e.g. reloaded from CSV).
    static FieldSlice from_sorted(std::vector<double> centers, std::vector<double> weights) {
        FieldSlice s;
        s.x_ = std::move(centers);
        s.w_ = std::move(weights);
        if (s.x_.size() != s.w_.size() || !std::is_sorted(s.x_.begin(), s.x_.end()))
            throw std::invalid_argument("field slice: sorted construction needs ordered, matched data");
        return s;
    }

    std::size_t size() const { return x_.size(); }
    std::span<const double> centers() const { return x_; }
    std::span<const double> weights() const { return w_; }

    FieldValue eval(const KernelSpec& k, double y) const {
        if (x_.empty()) return {};
        const double r = k.r_cut();
        // Widened window; the |d| > r test below decides membership exactly.
        const double pad = r * 1e-12;
        auto first = std::lower_bound(x_.begin(), x_.end(), y - r - pad);
        FieldValue acc;
        for (auto it = first; it != x_.end() && *it <= y + r + pad; ++it) {
            const double d = y - *it;
            if (std::abs(d) > r) continue;
            const double w = w_[static_cast<std::size_t>(it - x_.begin())];
            double kv, kg;
            k.eval_inside(d, kv, kg);
            acc.u += w * kv;
            acc.grad += w * kg;
        }
        const double n = static_cast<double>(x_.size());
        return {acc.u / n, acc.grad / n};
    }

    /// Reference O(N) evaluation over every centre.
    FieldValue eval_brute(const KernelSpec& k, double y) const {
        if (x_.empty()) return {};
        FieldValue acc;
        for (std::size_t j = 0; j < x_.size(); ++j) {
            acc.u += w_[j] * k(y - x_[j]);
            acc.grad += w_[j] * k.grad(y - x_[j]);
        }
        const double n = static_cast<double>(x_.size());
        return {acc.u / n, acc.grad / n};
    }

    double mean_weight() const {
        if (w_.empty()) return 0.0;
        return std::accumulate(w_.begin(), w_.end(), 0.0) / static_cast<double>(w_.size());
    }

private:
    std::vector<double> x_;
    std::vector<double> w_;
};

/// Time-indexed field, piecewise constant in time at the left endpoint.
class FKField {
public:
    FKField() = default;
    FKField(KernelSpec kernel, TimeGrid grid) : kernel_(kernel), grid_(grid) { slices_.resize(grid.n_points()); }

    const KernelSpec& kernel() const { return kernel_; }
    const TimeGrid& grid() const { return grid_; }

    void set_slice(std::size_t k, FieldSlice s) { slices_.at(k) = std::move(s); }
    const FieldSlice& slice(std::size_t k) const { return slices_.at(k); }
    std::size_t n_slices() const { return slices_.size(); }

    FieldValue at_step(std::size_t k, double y) const { return slices_.at(k).eval(kernel_, y); }

    /// field_eval: t on or between grid points, outside [0, T] rejected.
    FieldValue eval(double t, double y) const { return at_step(grid_.step_at(t), y); }

    /// A field that is identically zero on the grid.
    static FKField zero(KernelSpec kernel, TimeGrid grid) { return FKField(kernel, grid); }

private:
    KernelSpec kernel_;
    TimeGrid grid_;
    std::vector<FieldSlice> slices_;
};

} // namespace mkfk
