#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace mkfk {

/// Uniform grid t_k = k dt on [0, T].
struct TimeGrid {
    double T = 1.0;
    std::size_t n_steps = 1000;

    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps) : T(horizon), n_steps(steps) {
        if (!(T > 0.0)) throw std::invalid_argument("time grid horizon must be > 0");
    }

    double dt() const { return n_steps == 0 ? 0.0 : T / static_cast<double>(n_steps); }
    double time(std::size_t k) const { return static_cast<double>(k) * dt(); }
    std::size_t n_points() const { return n_steps + 1; }

    /// Left-endpoint step containing t; t must lie in [0, T].
    std::size_t step_at(double t) const {
        if (!(t >= 0.0 && t <= T * (1.0 + 1e-12)))
            throw std::out_of_range("time outside [0, T]");
        if (n_steps == 0) return 0;
        auto k = static_cast<std::size_t>(std::floor(t / dt() * (1.0 + 1e-12)));
        return k > n_steps ? n_steps : k;
    }

    bool operator==(const TimeGrid&) const = default;
};

} // namespace mkfk
