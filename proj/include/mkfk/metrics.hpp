#pragma once

// Distances, residuals and study statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkfk/core.hpp"
#include "mkfk/field.hpp"
#include "mkfk/fk_solver.hpp"
#include "mkfk/trajectory.hpp"

namespace mkfk {

namespace detail {

inline void check_coupled(std::span<const PathEnsemble> a, std::span<const PathEnsemble> b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("coupled inputs: replica counts differ or are empty");
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (!(a[r].grid() == b[r].grid())) throw std::invalid_argument("coupled inputs: grids differ");
        if (a[r].n_paths() != b[r].n_paths() || a[r].n_paths() != a[0].n_paths())
            throw std::invalid_argument("coupled inputs: path counts differ");
    }
}

inline double sup_sq(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s = std::max(s, (a[k] - b[k]) * (a[k] - b[k]));
    return s;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Standard error of the mean.
inline double stderr_of_mean(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

} // namespace detail

struct SupDistance {
    std::vector<double> per_index;  ///< replica mean of sup_k |a - b|^2, per path index
    double max = 0.0;               ///< max over indices
    double pooled = 0.0;            ///< mean over indices and replicas
    double pooled_stderr = 0.0;     ///< stderr of the per-replica index means
};

/// sup_path_distance_sq over index-aligned coupled replicas.
inline SupDistance sup_path_distance_sq(std::span<const PathEnsemble> a, std::span<const PathEnsemble> b) {
    detail::check_coupled(a, b);
    const std::size_t P = a[0].n_paths();
    SupDistance out;
    out.per_index.assign(P, 0.0);
    std::vector<double> replica_means;
    for (std::size_t r = 0; r < a.size(); ++r) {
        double rm = 0.0;
        for (std::size_t i = 0; i < P; ++i) {
            const double s = detail::sup_sq(a[r].path(i), b[r].path(i));
            out.per_index[i] += s;
            rm += s;
        }
        replica_means.push_back(rm / static_cast<double>(P));
    }
    for (auto& v : out.per_index) v /= static_cast<double>(a.size());
    out.max = *std::max_element(out.per_index.begin(), out.per_index.end());
    out.pooled = detail::mean(replica_means);
    out.pooled_stderr = detail::stderr_of_mean(replica_means);
    return out;
}

/// Coupling estimate of E[sup |a - b|^2] (or with the ^1 cutoff): an upper
/// bound on the squared path-space Wasserstein distance.
inline double wasserstein_upper_bound(std::span<const PathEnsemble> a, std::span<const PathEnsemble> b, bool cutoff) {
    detail::check_coupled(a, b);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t i = 0; i < a[r].n_paths(); ++i) {
            double s = detail::sup_sq(a[r].path(i), b[r].path(i));
            if (cutoff) s = std::min(s, 1.0);
            total += s;
            ++count;
        }
    return total / static_cast<double>(count);
}

/// Bounded path functional, |phi| <= 1 by outer clipping.
struct PathFunctional {
    std::string name;
    std::function<double(std::span<const double>, const TimeGrid&)> raw;

    double operator()(std::span<const double> path, const TimeGrid& g) const {
        return std::clamp(raw(path, g), -1.0, 1.0);
    }
};

/// Finite family of test functionals on paths standing in for the class of
/// all continuous functionals bounded by one.
class TestFunctionDictionary {
public:
    TestFunctionDictionary() = default;
    explicit TestFunctionDictionary(std::vector<PathFunctional> members) : members_(std::move(members)) {}

    /// The 20-member default: trigonometric and sigmoid functionals of the
    /// path at fixed fractions of the horizon, plus running max/min/integral.
    static TestFunctionDictionary standard() {
        std::vector<PathFunctional> m;
        auto at = [](std::span<const double> p, double frac) {
            const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(p.size() - 1)));
            return p[k];
        };
        for (double frac : {0.25, 0.5, 0.75, 1.0}) {
            const std::string tag = std::to_string(frac).substr(0, 4);
            m.push_back({"sin_x@" + tag, [=](auto p, auto&) { return std::sin(at(p, frac)); }});
            m.push_back({"cos_x@" + tag, [=](auto p, auto&) { return std::cos(at(p, frac)); }});
            m.push_back({"tanh4_x@" + tag, [=](auto p, auto&) { return std::tanh(4.0 * at(p, frac)); }});
        }
        m.push_back({"tanh_increment", [=](auto p, auto&) { return std::tanh(2.0 * (at(p, 1.0) - at(p, 0.5))); }});
        m.push_back({"sigmoid_x@1", [=](auto p, auto&) { return 2.0 / (1.0 + std::exp(-3.0 * at(p, 1.0))) - 1.0; }});
        m.push_back({"running_max", [](auto p, auto&) { return *std::max_element(p.begin(), p.end()) / 3.0; }});
        m.push_back({"running_min", [](auto p, auto&) { return *std::min_element(p.begin(), p.end()) / 3.0; }});
        m.push_back({"running_integral", [](auto p, const TimeGrid& g) {
                         double s = 0.0;
                         for (std::size_t k = 0; k + 1 < p.size(); ++k) s += p[k] * g.dt();
                         return s / (2.0 * g.T);
                     }});
        m.push_back({"sin_integral", [](auto p, const TimeGrid& g) {
                         double s = 0.0;
                         for (std::size_t k = 0; k + 1 < p.size(); ++k) s += p[k] * g.dt();
                         return std::sin(2.0 * s);
                     }});
        m.push_back({"range_minus_two", [](auto p, auto&) {
                         auto [lo, hi] = std::minmax_element(p.begin(), p.end());
                         return std::tanh(*hi - *lo - 2.0);
                     }});
        m.push_back({"cos_product", [=](auto p, auto&) { return std::cos(at(p, 1.0) * at(p, 0.5)); }});
        return TestFunctionDictionary(std::move(m));
    }

    std::size_t size() const { return members_.size(); }
    const PathFunctional& operator[](std::size_t i) const { return members_[i]; }
    void add(PathFunctional f) { members_.push_back(std::move(f)); }

private:
    std::vector<PathFunctional> members_;
};

struct D2Estimate {
    double value = 0.0;     ///< dictionary max of E <mu_N - m, phi>^2
    double std_err = 0.0;    ///< Monte Carlo stderr of the maximiser
    std::string argmax;
    std::vector<double> per_function;
};

/// d2_estimate: lower bound on d_2^2(mu_N, m) over a finite dictionary.
inline D2Estimate d2_estimate(std::span<const PathEnsemble> sample_replicas, const PathEnsemble& reference,
                              const TestFunctionDictionary& dict) {
    if (sample_replicas.size() < 30) throw std::invalid_argument("d2_estimate: at least 30 replicas are required");
    if (dict.size() == 0) throw std::invalid_argument("d2_estimate: empty dictionary");
    const TimeGrid& g = reference.grid();
    D2Estimate out;
    out.per_function.resize(dict.size());
    double best = -1.0;
    for (std::size_t f = 0; f < dict.size(); ++f) {
        double ref_mean = 0.0;
        for (std::size_t i = 0; i < reference.n_paths(); ++i) ref_mean += dict[f](reference.path(i), g);
        ref_mean /= static_cast<double>(reference.n_paths());
        std::vector<double> sq;
        sq.reserve(sample_replicas.size());
        for (const auto& rep : sample_replicas) {
            if (!(rep.grid() == g)) throw std::invalid_argument("d2_estimate: sample grid differs from reference");
            double m = 0.0;
            for (std::size_t i = 0; i < rep.n_paths(); ++i) m += dict[f](rep.path(i), g);
            m /= static_cast<double>(rep.n_paths());
            sq.push_back((m - ref_mean) * (m - ref_mean));
        }
        const double v = detail::mean(sq);
        out.per_function[f] = v;
        if (v > best) {
            best = v;
            out.value = v;
            out.std_err = detail::stderr_of_mean(sq);
            out.argmax = dict[f].name;
        }
    }
    return out;
}

enum class FieldNorm { sup, l2 };

/// Distance between two sampled profiles on the grid y (trapezoid for L2).
inline double profile_distance(std::span<const double> a, std::span<const double> b, std::span<const double> y,
                               FieldNorm norm) {
    if (a.size() != b.size() || a.size() != y.size()) throw std::invalid_argument("profile distance: size mismatch");
    if (norm == FieldNorm::sup) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
        return s;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        const double d0 = a[i] - b[i], d1 = a[i + 1] - b[i + 1];
        acc += 0.5 * (d0 * d0 + d1 * d1) * (y[i + 1] - y[i]);
    }
    return std::sqrt(acc);
}

inline double profile_norm(std::span<const double> a, std::span<const double> y, FieldNorm norm) {
    std::vector<double> zero(a.size(), 0.0);
    return profile_distance(a, zero, y, norm);
}

/// field_distance at one step, or the max over all steps when step is empty.
inline double field_distance(const FKField& a, const FKField& b, std::span<const double> y, FieldNorm norm,
                             std::optional<std::size_t> step = std::nullopt) {
    if (!(a.grid() == b.grid())) throw std::invalid_argument("field distance: time grids differ");
    auto at = [&](std::size_t k) {
        std::vector<double> ua(y.size()), ub(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            ua[i] = a.at_step(k, y[i]).u;
            ub[i] = b.at_step(k, y[i]).u;
        }
        return profile_distance(ua, ub, y, norm);
    };
    if (step) return at(*step);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.n_slices(); ++k) worst = std::max(worst, at(k));
    return worst;
}

struct SlopeFit {
    double slope = 0.0;
    double std_err = 0.0;
    double intercept = 0.0;
};

/// chaos_slope: least-squares slope of log err against log N.
inline SlopeFit chaos_slope(std::span<const double> Ns, std::span<const double> errs) {
    if (Ns.size() != errs.size()) throw std::invalid_argument("chaos_slope: size mismatch");
    if (Ns.size() < 4) throw std::invalid_argument("chaos_slope: need at least 4 N values");
    const auto [lo, hi] = std::minmax_element(Ns.begin(), Ns.end());
    if (!(*lo > 0.0) || *hi / *lo < 10.0) throw std::invalid_argument("chaos_slope: N values must span a decade");
    for (double e : errs)
        if (!(e > 0.0)) throw std::invalid_argument("chaos_slope: errors must be positive");
    const std::size_t n = Ns.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(Ns[i]), y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    const double sxx_c = sxx - sx * sx / dn;
    SlopeFit fit;
    fit.slope = (sxy - sx * sy / dn) / sxx_c;
    fit.intercept = (sy - fit.slope * sx) / dn;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log(errs[i]) - fit.intercept - fit.slope * std::log(Ns[i]);
        rss += r * r;
    }
    fit.std_err = std::sqrt(rss / (dn - 2.0) / sxx_c);
    return fit;
}

/// Smooth test function with its first two derivatives.
struct SmoothTestFunction {
    std::string name;
    std::function<double(double)> f, df, d2f;
};

inline std::vector<SmoothTestFunction> standard_smooth_tests() {
    return {
        {"gauss", [](double x) { return std::exp(-0.5 * x * x); },
         [](double x) { return -x * std::exp(-0.5 * x * x); },
         [](double x) { return (x * x - 1.0) * std::exp(-0.5 * x * x); }},
        {"x_gauss", [](double x) { return x * std::exp(-0.5 * x * x); },
         [](double x) { return (1.0 - x * x) * std::exp(-0.5 * x * x); },
         [](double x) { return (x * x * x - 3.0 * x) * std::exp(-0.5 * x * x); }},
        {"cos_gauss", [](double x) { return std::cos(x) * std::exp(-x * x / 8.0); },
         [](double x) { return (-std::sin(x) - 0.25 * x * std::cos(x)) * std::exp(-x * x / 8.0); },
         [](double x) {
             const double e = std::exp(-x * x / 8.0);
             return (-std::cos(x) + 0.5 * x * std::sin(x) + (x * x / 16.0 - 0.25) * std::cos(x)) * e;
         }},
    };
}

/// weak_pide_residual at step k: central difference of gamma_t(f) over
/// [t_{k-m}, t_{k+m}] minus the trapezoid time-average of the weighted
/// generator term f'' + b f' - lambda c0 e^{-lambda A} f.
inline double weak_pide_residual(const TrajectoryRecord& rec, const ModelParams& p, const SmoothTestFunction& f,
                                 std::size_t k, std::size_t half_window = 1) {
    if (!rec.has_paths) throw std::invalid_argument("weak_pide_residual: trajectory stored without paths");
    if (half_window == 0 || k < half_window || k + half_window > rec.grid.n_steps)
        throw std::invalid_argument("weak_pide_residual: step must be interior to the window");
    const auto& ps = rec.paths;
    const std::size_t N = ps.n_particles;
    const double dt = rec.grid.dt();
    auto gamma = [&](std::size_t j) {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) s += ps.at(ps.V, j, i) * f.f(ps.at(ps.x, j, i));
        return s / static_cast<double>(N);
    };
    auto generator = [&](std::size_t j) {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double x = ps.at(ps.x, j, i);
            const double A = ps.at(ps.A, j, i);
            const double b = drift_b(p, A, ps.at(ps.G, j, i));
            const double kill = p.lambda * p.c0 * std::exp(-p.lambda * A);
            s += ps.at(ps.V, j, i) * (f.d2f(x) + b * f.df(x) - kill * f.f(x));
        }
        return s / static_cast<double>(N);
    };
    const std::size_t m = half_window;
    const double diff = (gamma(k + m) - gamma(k - m)) / (2.0 * static_cast<double>(m) * dt);
    double avg = 0.0;
    for (std::size_t j = k - m; j <= k + m; ++j) {
        const double w = (j == k - m || j == k + m) ? 0.5 : 1.0;
        avg += w * generator(j);
    }
    avg /= 2.0 * static_cast<double>(m);
    return diff - avg;
}

} // namespace mkfk
