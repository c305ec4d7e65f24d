#pragma once

// Pointwise model mathematics: constants, mollifier kernel, killing
// functionals and the path-dependent drift.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkfk/errors.hpp"

namespace mkfk {

/// Physical/chemical constants of the sulphation model (nondimensional).
struct ModelParams {
    double lambda = 1.0;  ///< reaction rate
    double c0 = 1.0;      ///< initial calcite density
    double phi0 = 0.5;    ///< base porosity
    double phi1 = 0.3;    ///< porosity slope, any sign
    double T = 1.0;       ///< horizon
    double s_cap = 1.0;   ///< cap on the SO2 density, in (0, 1]
    double phi_bar = 1.0; ///< upper bound on admissible porosity

    double porosity(double c) const { return phi0 + phi1 * c; }

    /// Smallest value the porosity takes for c in [0, c0].
    double min_porosity() const { return std::min(phi0, phi0 + phi1 * c0); }
    double max_porosity() const { return std::max(phi0, phi0 + phi1 * c0); }

    /// All violated invariants, named by field. Empty means admissible.
    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            out.emplace_back("model.lambda: must be finite and >= 0");
        if (!(c0 > 0.0) || !std::isfinite(c0))
            out.emplace_back("model.c0: must be > 0");
        if (!(T > 0.0) || !std::isfinite(T))
            out.emplace_back("model.T: must be > 0");
        if (!(phi0 > 0.0))
            out.emplace_back("model.phi0: porosity invariant violated, phi0 must be > 0");
        if (!(phi0 + phi1 * c0 > 0.0))
            out.emplace_back("model.phi1: porosity invariant violated, phi0 + phi1*c0 must be > 0");
        if (!(phi0 < phi_bar) || !(phi0 + phi1 * c0 < phi_bar))
            out.emplace_back("model.phi_bar: porosity invariant violated, phi0 and phi0 + phi1*c0 must be < phi_bar");
        if (!(s_cap > 0.0 && s_cap <= 1.0))
            out.emplace_back("model.s_cap: must lie in (0, 1]");
        return out;
    }

    void validate() const {
        auto v = violations();
        if (!v.empty()) throw ConfigError(v);
    }
};

/// Truncated Gaussian mollifier with bandwidth eps and support [-6 eps, 6 eps].
///
/// K(y) = (g(y) - g(r_cut)) / Z on |y| <= r_cut, zero outside, where g is the
/// centred normal density. Shifting by g(r_cut) keeps K continuous, and Z is
/// the exact mass of the shifted profile, so the kernel integrates to one.
/// The certified constants are fixed at construction.
class KernelSpec {
public:
    static constexpr double kCutoffMultiple = 6.0;

    KernelSpec() : KernelSpec(1.0) {}

    explicit KernelSpec(double eps) : eps_(eps) {
        if (!(eps > 0.0) || !std::isfinite(eps))
            throw std::invalid_argument("kernel.eps must be > 0");
        r_cut_ = kCutoffMultiple * eps_;
        inv_two_var_ = 1.0 / (2.0 * eps_ * eps_);
        const double peak = 1.0 / (eps_ * std::sqrt(2.0 * std::numbers::pi));
        const double g_cut = peak * std::exp(-r_cut_ * r_cut_ * inv_two_var_);
        const double mass = std::erf(r_cut_ / (eps_ * std::numbers::sqrt2)) - 2.0 * r_cut_ * g_cut;
        scale_ = peak / mass;
        shift_ = g_cut / mass;
        m_k_ = scale_ - shift_;
        m_k_prime_ = scale_ * std::exp(-0.5) / eps_;
        l_k_ = m_k_prime_;
        f_k_ = fourier_l1_bound();
    }

    double eps() const { return eps_; }
    double r_cut() const { return r_cut_; }
    double M_K() const { return m_k_; }
    double M_K_prime() const { return m_k_prime_; }
    double L_K() const { return l_k_; }
    double F_K() const { return f_k_; }

    double operator()(double y) const {
        if (std::abs(y) > r_cut_) return 0.0;
        return std::max(0.0, scale_ * std::exp(-y * y * inv_two_var_) - shift_);
    }

    double grad(double y) const {
        if (std::abs(y) > r_cut_) return 0.0;
        const double e = scale_ * std::exp(-y * y * inv_two_var_);
        return -y * (2.0 * inv_two_var_) * e;
    }

    /// Value and gradient with a single exponential; caller guarantees |y| <= r_cut.
    void eval_inside(double y, double& value, double& gradient) const {
        const double e = scale_ * std::exp(-y * y * inv_two_var_);
        value = std::max(0.0, e - shift_);
        gradient = -y * (2.0 * inv_two_var_) * e;
    }

    bool operator==(const KernelSpec& o) const { return eps_ == o.eps_; }

private:
    // Upper bound on the L1 norm of the unitary Fourier transform: Simpson
    // quadrature up to a frequency cutoff plus an integration-by-parts tail.
    double fourier_l1_bound() const {
        const int ny = 1200;
        const int nxi = 1200;
        const double xi_max = 60.0 / eps_;
        const double hy = r_cut_ / ny;
        const double hxi = xi_max / nxi;
        const double norm = 2.0 / std::sqrt(2.0 * std::numbers::pi);
        std::vector<double> f(ny + 1);
        for (int j = 0; j <= ny; ++j) f[j] = (*this)(j * hy);
        auto simpson_w = [](int j, int n) { return (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0); };
        double l1 = 0.0;
        for (int i = 0; i <= nxi; ++i) {
            const double xi = i * hxi;
            double acc = 0.0;
            for (int j = 0; j <= ny; ++j) acc += simpson_w(j, ny) * f[j] * std::cos(xi * j * hy);
            const double fhat = norm * acc * hy / 3.0;
            l1 += simpson_w(i, nxi) * std::abs(fhat);
        }
        l1 *= 2.0 * hxi / 3.0;
        // |F(xi)| <= norm * (|K'(r_cut)| + int_0^r |K''|) / xi^2 beyond xi_max.
        const double kink = std::abs(grad(r_cut_));
        const double curvature = 2.0 * m_k_prime_;
        l1 += 2.0 * norm * (kink + curvature) / xi_max;
        return l1;
    }

    double eps_ = 1.0;
    double r_cut_ = 6.0;
    double inv_two_var_ = 0.5;
    double scale_ = 0.0;
    double shift_ = 0.0;
    double m_k_ = 0.0;
    double m_k_prime_ = 0.0;
    double l_k_ = 0.0;
    double f_k_ = 0.0;
};

inline void require_nonnegative(double v, const char* what) {
    if (!(v >= 0.0)) throw std::domain_error(std::string(what) + " must be >= 0");
}

/// Instantaneous killing rate read through the accumulated field A.
inline double lambda_fn(const ModelParams& p, double A) {
    require_nonnegative(A, "accumulated field A");
    return -p.lambda * p.c0 * std::exp(-p.lambda * A);
}

/// Feynman-Kac killing weight for the killing integral B.
inline double v_weight(const ModelParams& p, double B) {
    require_nonnegative(B, "killing integral B");
    return std::exp(-p.lambda * p.c0 * B);
}

/// Calcite density seen along a path with accumulated field A.
inline double calcite_along_path(const ModelParams& p, double A) {
    require_nonnegative(A, "accumulated field A");
    return p.c0 * std::exp(-p.lambda * A);
}

/// Porosity-gradient drift grad(phi)/phi written through the accumulators.
inline double drift_b(const ModelParams& p, double A, double G) {
    require_nonnegative(A, "accumulated field A");
    const double e = std::exp(-p.lambda * A);
    const double denom = p.phi0 + p.phi1 * p.c0 * e;
    if (!(denom > 0.0)) throw std::domain_error("porosity denominator must be > 0");
    return -p.phi1 * p.lambda * p.c0 * e * G / denom;
}

/// Drift bound per unit accumulated gradient: |phi1| c0 lambda M_K' / min porosity.
inline double drift_bound_rate(const ModelParams& p, const KernelSpec& k) {
    return std::abs(p.phi1) * p.c0 * p.lambda * k.M_K_prime() / p.min_porosity();
}

/// Bound on |drift_b| at time t, given |G| <= M_K' t.
inline double drift_bound(const ModelParams& p, const KernelSpec& k, double t) {
    return drift_bound_rate(p, k) * t;
}

/// Lipschitz constant of drift_b in (A, G) w.r.t. |dA| + |dG| on the box
/// A >= 0, |G| <= g_max.
inline double drift_lipschitz(const ModelParams& p, double g_max) {
    const double dmin = p.min_porosity();
    const double in_g = std::abs(p.phi1) * p.lambda * p.c0 / dmin;
    const double in_a = std::abs(p.phi1) * p.lambda * p.lambda * p.c0 * p.phi0 * g_max / (dmin * dmin);
    return std::max(in_g, in_a);
}

/// Per-path history: A = int u, G = int grad u, B = int exp(-lambda A), V = exp(-lambda c0 B).
struct PathAccumulators {
    double A = 0.0;
    double G = 0.0;
    double B = 0.0;
    double V = 1.0;

    /// Left-endpoint update over one step with field value u and gradient g
    /// read at the start of the step.
    void advance(const ModelParams& p, double u, double g, double dt) {
        B += std::exp(-p.lambda * A) * dt;
        A += u * dt;
        G += g * dt;
        V = std::exp(-p.lambda * p.c0 * B);
    }
};

} // namespace mkfk
