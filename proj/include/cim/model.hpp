#pragma once

// Physical parameters, ramp schedules, and the classical (deterministic) reference dynamics.
//
// All operational formulas use the total signal loss gamma = gamma_s + gamma_m, so that the
// classical threshold and amplitudes line up with the stochastic modules.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cim/error.hpp"
#include "cim/format.hpp"
#include "cim/problems.hpp"

namespace cim {

using cplx = std::complex<double>;

/// Rates in inverse time units; zeta is the (baseline) feedback strength.
struct CimParams {
    double gamma_s = 1.0;
    double gamma_m = 0.1;
    double gamma_p = 10.0;
    double kappa = 0.1;
    double zeta = 0.0;

    void validate() const {
        require(std::isfinite(gamma_s) && gamma_s >= 0.0, "gamma_s must be a nonnegative real");
        require(std::isfinite(gamma_m) && gamma_m >= 0.0, "gamma_m must be a nonnegative real");
        require(std::isfinite(gamma_p) && gamma_p > 0.0, "gamma_p must be positive");
        require(std::isfinite(kappa) && kappa > 0.0, "kappa must be positive");
        require(std::isfinite(zeta) && zeta >= 0.0, "zeta must be a nonnegative real");
        require(!(gamma_m == 0.0 && zeta > 0.0),
                "feedback (zeta > 0) needs a measurement channel: gamma_m == 0 makes f = zeta/sqrt(2 gamma_m) "
                "undefined");
    }

    double gamma() const noexcept { return gamma_s + gamma_m; }
    double gamma_prime() const noexcept { return gamma() - kappa * kappa / (4.0 * gamma_p); }

    /// f = zeta / sqrt(2 gamma_m) for a given feedback strength; zero when zeta == 0.
    double feedback_noise_scale(double zeta_now) const {
        if (zeta_now == 0.0) {
            return 0.0;
        }
        require(gamma_m > 0.0, "feedback noise scale undefined for gamma_m == 0");
        return zeta_now / std::sqrt(2.0 * gamma_m);
    }
    double feedback_noise_scale() const { return feedback_noise_scale(zeta); }

    friend bool operator==(const CimParams &, const CimParams &) = default;
};

/// Piecewise-linear pump and feedback ramps over [0, t_max], clamped outside.
struct RampSchedule {
    double t_max = 1.0;
    double pump_start = 0.0;
    double pump_end = 0.0;
    double zeta_start = 0.0;
    double zeta_end = 0.0;

    static RampSchedule constant(double t_max, double pump, double zeta) {
        return {t_max, pump, pump, zeta, zeta};
    }

    void validate() const {
        require(std::isfinite(t_max) && t_max > 0.0, "t_max must be positive");
        require(pump_start >= 0.0 && pump_end >= 0.0, "pump endpoints must be nonnegative");
        require(zeta_start >= 0.0 && zeta_end >= 0.0, "zeta endpoints must be nonnegative");
    }

    double fraction(double t) const noexcept { return std::clamp(t / t_max, 0.0, 1.0); }
    double pump(double t) const noexcept { return pump_start + (pump_end - pump_start) * fraction(t); }
    double zeta(double t) const noexcept { return zeta_start + (zeta_end - zeta_start) * fraction(t); }

    friend bool operator==(const RampSchedule &, const RampSchedule &) = default;
};

/// eps_p,th = gamma gamma_p / kappa with gamma the total signal loss.
inline double pump_threshold(const CimParams &params) {
    return params.gamma() * params.gamma_p / params.kappa;
}

/// chi(alpha) = (kappa / gamma_p) [eps_p - (kappa / 2) alpha^2].
inline cplx chi(cplx alpha, double eps_p, const CimParams &params) {
    return (params.kappa / params.gamma_p) * (eps_p - 0.5 * params.kappa * alpha * alpha);
}

struct SteadyState {
    double alpha_s;
    double alpha_p;
    bool stable;
};

namespace detail {

// Jacobian of the classical signal/pump equations in real coordinates
// (Re alpha_s, Im alpha_s, Re alpha_p, Im alpha_p), evaluated at a real fixed point.
inline bool classical_fixed_point_stable(double as, double ap, const CimParams &params) {
    const double g = params.gamma();
    const double k = params.kappa;
    Eigen::Matrix4d jac;
    // d alpha_s/dt = -g alpha_s + k conj(alpha_s) alpha_p
    // d alpha_p/dt = E - gamma_p alpha_p - (k/2) alpha_s^2
    jac << -g + k * ap, 0.0, k * as, 0.0,  //
        0.0, -g - k * ap, 0.0, k * as,     //
        -k * as, 0.0, -params.gamma_p, 0.0,  //
        0.0, -k * as, 0.0, -params.gamma_p;
    const Eigen::Vector4cd eig = jac.eigenvalues();
    double max_re = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        max_re = std::max(max_re, eig[i].real());
    }
    return max_re <= 1e-12;
}

}  // namespace detail

/// Classical steady states of a single DPO. Below threshold only the trivial state;
/// at or above threshold the trivial state plus the two symmetric bistable branches.
inline std::vector<SteadyState> dpo_steady_states(const CimParams &params, double eps_p) {
    require(eps_p >= 0.0, "pump amplitude must be nonnegative");
    const double threshold = pump_threshold(params);
    std::vector<SteadyState> out;
    const double ap0 = eps_p / params.gamma_p;
    out.push_back({0.0, ap0, detail::classical_fixed_point_stable(0.0, ap0, params)});
    if (eps_p >= threshold) {
        const double amp = std::sqrt(std::max(0.0, (2.0 / params.kappa) * (eps_p - threshold)));
        const double ap = params.gamma() / params.kappa;
        out.push_back({amp, ap, detail::classical_fixed_point_stable(amp, ap, params)});
        out.push_back({-amp, ap, detail::classical_fixed_point_stable(-amp, ap, params)});
    }
    return out;
}

/// d alpha_i/dt = zeta sum_j J_ij alpha_j + (kappa eps_p / gamma_p - gamma) alpha_i - kappa^2 alpha_i^3 / (2 gamma_p).
/// The phase-space feedback zeta J (alpha + beta) matches this with zeta doubled when alpha = beta.
inline std::vector<double> classical_network_rhs(std::span<const double> alpha, double eps_p,
                                                 const CimParams &params, const IsingProblem &problem) {
    require(alpha.size() == problem.size(), "amplitude vector length does not match problem size");
    std::vector<double> out(alpha.size());
    problem.J().apply(alpha, std::span<double>(out));
    const double gain = params.kappa * eps_p / params.gamma_p - params.gamma();
    const double sat = params.kappa * params.kappa / (2.0 * params.gamma_p);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out[i] = params.zeta * out[i] + gain * alpha[i] - sat * alpha[i] * alpha[i] * alpha[i];
    }
    return out;
}

/// Potential whose negative gradient is classical_network_rhs. The coupling term carries zeta/2
/// under the ordered-pair sum so that the gradient relation is exact.
inline double classical_potential(std::span<const double> alpha, double eps_p, const CimParams &params,
                                  const IsingProblem &problem) {
    require(alpha.size() == problem.size(), "amplitude vector length does not match problem size");
    std::vector<double> Ja(alpha.size());
    problem.J().apply(alpha, std::span<double>(Ja));
    const double gain = params.kappa * eps_p / params.gamma_p - params.gamma();
    double coupling = 0.0;
    double quad = 0.0;
    double quartic = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double a2 = alpha[i] * alpha[i];
        coupling += alpha[i] * Ja[i];
        quad += a2;
        quartic += a2 * a2;
    }
    return -0.5 * params.zeta * coupling - 0.5 * gain * quad +
           params.kappa * params.kappa / (8.0 * params.gamma_p) * quartic;
}

}  // namespace cim
