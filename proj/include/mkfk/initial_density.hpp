#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkfk/noise.hpp"

namespace mkfk {

/// Initial SO2 density rho_0: a Gaussian or a smooth compact bump
/// proportional to exp(-1 / (1 - ((x - mean)/half_width)^2)).
struct InitSpec {
    enum class Kind { gaussian, bump };

    Kind kind = Kind::gaussian;
    double mean = 0.0;
    double sigma = 1.0;       ///< gaussian
    double half_width = 2.0;  ///< bump

    static constexpr double bump_mass_unit() {
        // int_{-1}^{1} exp(-1/(1 - s^2)) ds
        return 0.44399381616807937;
    }

    double density(double x) const {
        if (kind == Kind::gaussian) {
            const double z = (x - mean) / sigma;
            return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
        }
        const double s = (x - mean) / half_width;
        if (std::abs(s) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - s * s)) / (half_width * bump_mass_unit());
    }

    double sup_density() const {
        if (kind == Kind::gaussian) return 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
        return std::exp(-1.0) / (half_width * bump_mass_unit());
    }

    double variance() const {
        if (kind == Kind::gaussian) return sigma * sigma;
        // int s^2 exp(-1/(1-s^2)) ds / int exp(-1/(1-s^2)) ds on (-1, 1)
        return 0.15811363626379824 * half_width * half_width;
    }

    /// Half-width of the region holding essentially all of the mass.
    double reach() const { return kind == Kind::gaussian ? 6.0 * sigma : half_width; }

    std::vector<std::string> violations(double s_cap) const {
        std::vector<std::string> out;
        if (!std::isfinite(mean)) out.emplace_back("init.mean: must be finite");
        if (kind == Kind::gaussian && !(sigma > 0.0)) out.emplace_back("init.sigma: must be > 0");
        if (kind == Kind::bump && !(half_width > 0.0)) out.emplace_back("init.half_width: must be > 0");
        if (out.empty() && !(sup_density() <= s_cap))
            out.emplace_back("init: sup of initial density " + std::to_string(sup_density()) +
                             " exceeds model.s_cap " + std::to_string(s_cap));
        return out;
    }

    /// Draw for particle i; bump draws use counter-indexed rejection.
    double sample(const NoiseSource& noise, std::uint64_t particle) const {
        if (kind == Kind::gaussian) return mean + sigma * noise.normal(Stream::initial, particle, 0);
        const double fmax = std::exp(-1.0);
        for (std::uint64_t attempt = 0;; ++attempt) {
            const auto u = noise.uniforms(Stream::initial, particle, attempt);
            const double s = 2.0 * u[0] - 1.0;
            if (std::abs(s) >= 1.0) continue;
            if (u[1] * fmax <= std::exp(-1.0 / (1.0 - s * s))) return mean + half_width * s;
        }
    }
};

} // namespace mkfk
