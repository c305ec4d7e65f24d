#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mkfk/time_grid.hpp"

namespace mkfk {

struct StepSummary {
    std::size_t step = 0;
    double time = 0.0;
    double mean_x = 0.0;
    double var_x = 0.0;
    double mean_V = 0.0;
};

/// u and grad u on the diagnostics grid at one step.
struct FieldSnapshot {
    std::size_t step = 0;
    std::vector<double> u;
    std::vector<double> grad;
};

/// Full per-particle history, step-major: value(k, i) = data[k * N + i].
struct PathStore {
    std::size_t n_particles = 0;
    std::vector<double> x, A, G, V;

    double at(const std::vector<double>& v, std::size_t k, std::size_t i) const { return v[k * n_particles + i]; }
};

struct TrajectoryRecord {
    TimeGrid grid;
    std::size_t n_particles = 0;
    std::uint64_t seed = 0;
    std::vector<StepSummary> summary;
    std::vector<double> diag_y;
    std::vector<FieldSnapshot> snapshots;
    bool has_paths = false;
    PathStore paths;
};

} // namespace mkfk
