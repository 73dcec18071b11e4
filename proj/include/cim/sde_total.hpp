#pragma once

// Positive-P stochastic integration of the unconditional (total) feedback master equation.
//
// Per trajectory and mode (Ito form):
//   d alpha_i = [eps_i - gamma alpha_i + beta_i chi(alpha_i)] dt + sqrt(chi(alpha_i)) dW^a_i + f sum_j J_ij dW_j
//   d beta_i  = [eps_i - gamma beta_i  + alpha_i chi(beta_i)] dt + sqrt(chi(beta_i))  dW^b_i + f sum_j J_ij dW_j
// with eps_i = zeta sum_j J_ij (alpha_j + beta_j) from the trajectory's own coordinates and
// f = zeta / sqrt(2 gamma_m). The feedback noise dW_j is shared between the alpha and beta equations.
// The Stratonovich form replaces gamma by gamma' = gamma - kappa^2 / (4 gamma_p).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cim/error.hpp"
#include "cim/model.hpp"
#include "cim/parallel.hpp"
#include "cim/problems.hpp"
#include "cim/rng.hpp"

namespace cim {

/// Doubled phase-space coordinates for n_modes x n_traj samples, trajectory-major.
struct PhaseEnsemble {
    std::size_t n_modes = 0;
    std::size_t n_traj = 0;
    std::vector<cplx> alpha;
    std::vector<cplx> beta;
    double t = 0.0;

    static PhaseEnsemble vacuum(std::size_t n_modes, std::size_t n_traj) {
        require(n_modes >= 1 && n_traj >= 1, "ensemble needs at least one mode and one trajectory");
        return {n_modes, n_traj, std::vector<cplx>(n_modes * n_traj), std::vector<cplx>(n_modes * n_traj), 0.0};
    }

    std::span<cplx> alpha_row(std::size_t k) { return {alpha.data() + k * n_modes, n_modes}; }
    std::span<cplx> beta_row(std::size_t k) { return {beta.data() + k * n_modes, n_modes}; }
    std::span<const cplx> alpha_row(std::size_t k) const { return {alpha.data() + k * n_modes, n_modes}; }
    std::span<const cplx> beta_row(std::size_t k) const { return {beta.data() + k * n_modes, n_modes}; }

    cplx x(std::size_t k, std::size_t i) const { return alpha[k * n_modes + i] + beta[k * n_modes + i]; }

    bool trajectory_finite(std::size_t k) const {
        for (std::size_t i = 0; i < n_modes; ++i) {
            const cplx a = alpha[k * n_modes + i];
            const cplx b = beta[k * n_modes + i];
            if (!std::isfinite(a.real()) || !std::isfinite(a.imag()) || !std::isfinite(b.real()) ||
                !std::isfinite(b.imag())) {
                return false;
            }
        }
        return true;
    }

    /// Throws DivergenceError naming the lowest-index non-finite trajectory.
    void check_finite() const {
        for (std::size_t k = 0; k < n_traj; ++k) {
            if (!trajectory_finite(k)) {
                throw DivergenceError(k, t);
            }
        }
    }
};

/// Drift (or noise) values with the same layout as PhaseEnsemble.
struct DriftPair {
    std::vector<cplx> alpha;
    std::vector<cplx> beta;
};

enum class TotalScheme {
    kStratonovichRK4,  ///< RK4 on the Stratonovich drift, noise frozen across substages
    kItoEuler,         ///< Euler-Maruyama on the Ito drift
};

struct TotalOptions {
    TotalScheme scheme = TotalScheme::kStratonovichRK4;
    bool noise = true;  ///< false drops every stochastic term (classical reduction)
};

namespace detail {

/// Deterministic drift of one trajectory with linear damping gamma_eff.
/// scratch must hold 2 * n values.
inline void trajectory_drift(std::span<const cplx> a, std::span<const cplx> b, double eps_p, double zeta,
                             double gamma_eff, const CimParams &params, const CouplingMatrix &J, std::span<cplx> da,
                             std::span<cplx> db, std::span<cplx> scratch) {
    const std::size_t n = a.size();
    const std::span<cplx> x = scratch.first(n);
    const std::span<cplx> jx = scratch.subspan(n, n);
    const double c0 = params.kappa * eps_p / params.gamma_p;
    const double c2 = 0.5 * params.kappa * params.kappa / params.gamma_p;
    if (zeta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a[i] + b[i];
        }
        J.apply(std::span<const cplx>(x), jx);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const cplx fb = zeta != 0.0 ? zeta * jx[i] : cplx{};
        const cplx chi_a = c0 - c2 * a[i] * a[i];
        const cplx chi_b = c0 - c2 * b[i] * b[i];
        da[i] = fb - gamma_eff * a[i] + b[i] * chi_a;
        db[i] = fb - gamma_eff * b[i] + a[i] * chi_b;
    }
}

inline void check_drift_inputs(const PhaseEnsemble &state, const IsingProblem &problem) {
    require(state.n_modes == problem.size(), "ensemble mode count does not match problem size");
    require(state.alpha.size() == state.n_modes * state.n_traj && state.beta.size() == state.alpha.size(),
            "ensemble storage inconsistent with its dimensions");
    state.check_finite();
}

inline DriftPair ensemble_drift(const PhaseEnsemble &state, double eps_p, double zeta, double gamma_eff,
                                const CimParams &params, const IsingProblem &problem) {
    check_drift_inputs(state, problem);
    DriftPair out{std::vector<cplx>(state.alpha.size()), std::vector<cplx>(state.beta.size())};
    std::vector<cplx> scratch(2 * state.n_modes);
    const std::size_t n = state.n_modes;
    for (std::size_t k = 0; k < state.n_traj; ++k) {
        trajectory_drift(state.alpha_row(k), state.beta_row(k), eps_p, zeta, gamma_eff, params, problem.J(),
                         std::span<cplx>(out.alpha.data() + k * n, n), std::span<cplx>(out.beta.data() + k * n, n),
                         scratch);
    }
    return out;
}

}  // namespace detail

/// Ito drift of the total-master-equation SDEs.
inline DriftPair total_drift(const PhaseEnsemble &state, double eps_p, double zeta, const CimParams &params,
                             const IsingProblem &problem) {
    return detail::ensemble_drift(state, eps_p, zeta, params.gamma(), params, problem);
}

/// Stratonovich drift: total_drift with gamma -> gamma'.
inline DriftPair strat_drift(const PhaseEnsemble &state, double eps_p, double zeta, const CimParams &params,
                             const IsingProblem &problem) {
    return detail::ensemble_drift(state, eps_p, zeta, params.gamma_prime(), params, problem);
}

/// Number of standard normals consumed per trajectory per step: (xi^alpha, xi^beta, xi).
inline std::size_t total_noise_width(std::size_t n_modes) { return 3 * n_modes; }

/// Noise coefficients applied to unit gaussians (per unit sqrt(time)):
///   sqrt(chi(alpha_i)) xi^a_i + f sum_j J_ij xi_j, and likewise for beta with the same xi_j.
/// gaussians is trajectory-major with 3 n_modes entries per trajectory laid out [xi^a | xi^b | xi].
inline DriftPair total_noise(const PhaseEnsemble &state, double eps_p, double zeta, const CimParams &params,
                             const IsingProblem &problem, std::span<const double> gaussians) {
    detail::check_drift_inputs(state, problem);
    const std::size_t n = state.n_modes;
    require(gaussians.size() == state.n_traj * total_noise_width(n), "expected 3*n_modes gaussians per trajectory");
    const double f = params.feedback_noise_scale(zeta);
    DriftPair out{std::vector<cplx>(state.alpha.size()), std::vector<cplx>(state.beta.size())};
    std::vector<double> jxi(n);
    for (std::size_t k = 0; k < state.n_traj; ++k) {
        const double *g = gaussians.data() + k * 3 * n;
        if (f != 0.0) {
            problem.J().apply(std::span<const double>(g + 2 * n, n), std::span<double>(jxi));
        } else {
            std::fill(jxi.begin(), jxi.end(), 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const cplx a = state.alpha[k * n + i];
            const cplx b = state.beta[k * n + i];
            out.alpha[k * n + i] = std::sqrt(chi(a, eps_p, params)) * g[i] + f * jxi[i];
            out.beta[k * n + i] = std::sqrt(chi(b, eps_p, params)) * g[n + i] + f * jxi[i];
        }
    }
    return out;
}

namespace detail {

/// Per-chunk workspace for the trajectory integrators.
struct TotalWorkspace {
    explicit TotalWorkspace(std::size_t n)
        : gauss(3 * n), jw(n), a0(n), b0(n), at(n), bt(n), ka(4 * n), kb(4 * n), scratch(2 * n) {}
    std::vector<double> gauss;
    std::vector<double> jw;
    std::vector<cplx> a0, b0, at, bt, ka, kb, scratch;
};

// Derivative with frozen noise increments: drift + B * (dW / dt).
inline void frozen_noise_rhs(std::span<const cplx> a, std::span<const cplx> b, double t, double dt,
                             const RampSchedule &ramp, const CimParams &params, const CouplingMatrix &J,
                             TotalWorkspace &ws, bool noise, std::span<cplx> da, std::span<cplx> db) {
    const std::size_t n = a.size();
    const double eps_p = ramp.pump(t);
    const double zeta = ramp.zeta(t);
    // Without noise there is no Ito/Stratonovich distinction and the plain loss rate applies.
    trajectory_drift(a, b, eps_p, zeta, noise ? params.gamma_prime() : params.gamma(), params, J, da, db,
                     ws.scratch);
    if (!noise) {
        return;
    }
    const double inv_dt = 1.0 / dt;
    const double f = params.feedback_noise_scale(zeta);
    for (std::size_t i = 0; i < n; ++i) {
        const double fb = f * ws.jw[i] * inv_dt;
        da[i] += std::sqrt(chi(a[i], eps_p, params)) * (ws.gauss[i] * inv_dt) + fb;
        db[i] += std::sqrt(chi(b[i], eps_p, params)) * (ws.gauss[n + i] * inv_dt) + fb;
    }
}

inline void advance_trajectory(std::span<cplx> a, std::span<cplx> b, double t, double dt, const RampSchedule &ramp,
                               const CimParams &params, const CouplingMatrix &J, TotalWorkspace &ws,
                               const TotalOptions &options) {
    const std::size_t n = a.size();
    if (options.scheme == TotalScheme::kItoEuler) {
        const double eps_p = ramp.pump(t);
        const double zeta = ramp.zeta(t);
        const std::span<cplx> da(ws.ka.data(), n);
        const std::span<cplx> db(ws.kb.data(), n);
        trajectory_drift(a, b, eps_p, zeta, params.gamma(), params, J, da, db, ws.scratch);
        const double f = params.feedback_noise_scale(zeta);
        for (std::size_t i = 0; i < n; ++i) {
            cplx na = a[i] + da[i] * dt;
            cplx nb = b[i] + db[i] * dt;
            if (options.noise) {
                na += std::sqrt(chi(a[i], eps_p, params)) * ws.gauss[i] + f * ws.jw[i];
                nb += std::sqrt(chi(b[i], eps_p, params)) * ws.gauss[n + i] + f * ws.jw[i];
            }
            a[i] = na;
            b[i] = nb;
        }
        return;
    }

    std::copy(a.begin(), a.end(), ws.a0.begin());
    std::copy(b.begin(), b.end(), ws.b0.begin());
    auto stage = [&](int s) { return std::span<cplx>(ws.ka.data() + s * n, n); };
    auto stage_b = [&](int s) { return std::span<cplx>(ws.kb.data() + s * n, n); };
    const std::span<const cplx> a0(ws.a0), b0(ws.b0);

    frozen_noise_rhs(a0, b0, t, dt, ramp, params, J, ws, options.noise, stage(0), stage_b(0));
    const double half[3] = {0.5 * dt, 0.5 * dt, dt};
    const double times[3] = {t + 0.5 * dt, t + 0.5 * dt, t + dt};
    for (int s = 1; s < 4; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            ws.at[i] = a0[i] + half[s - 1] * stage(s - 1)[i];
            ws.bt[i] = b0[i] + half[s - 1] * stage_b(s - 1)[i];
        }
        frozen_noise_rhs(ws.at, ws.bt, times[s - 1], dt, ramp, params, J, ws, options.noise, stage(s), stage_b(s));
    }
    const double w = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = a0[i] + w * (stage(0)[i] + 2.0 * stage(1)[i] + 2.0 * stage(2)[i] + stage(3)[i]);
        b[i] = b0[i] + w * (stage_b(0)[i] + 2.0 * stage_b(1)[i] + 2.0 * stage_b(2)[i] + stage_b(3)[i]);
    }
}

inline constexpr std::size_t kChunk = 64;

}  // namespace detail

/// Advances every trajectory by one step of size dt, in place. Noise for trajectory k at this
/// step comes from the stream (seed, k, step_index, kTotalNoise) and is shared by all substages.
inline void advance_total(PhaseEnsemble &state, double dt, const RampSchedule &ramp, const CimParams &params,
                          const IsingProblem &problem, std::uint64_t seed, std::uint32_t step_index,
                          const TotalOptions &options = {}) {
    require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
    require(state.n_modes == problem.size(), "ensemble mode count does not match problem size");
    const std::size_t n = state.n_modes;
    const std::size_t chunks = (state.n_traj + detail::kChunk - 1) / detail::kChunk;
    const double sqrt_dt = std::sqrt(dt);
    const double t = state.t;
    std::vector<std::size_t> first_bad(chunks, std::numeric_limits<std::size_t>::max());

    parallel_for(chunks, [&](std::size_t c) {
        detail::TotalWorkspace ws(n);
        const std::size_t end = std::min(state.n_traj, (c + 1) * detail::kChunk);
        for (std::size_t k = c * detail::kChunk; k < end; ++k) {
            if (options.noise) {
                RandomStream stream(seed, static_cast<std::uint32_t>(k), step_index, Substream::kTotalNoise);
                stream.fill_normal(ws.gauss);
                for (double &g : ws.gauss) {
                    g *= sqrt_dt;
                }
                problem.J().apply(std::span<const double>(ws.gauss.data() + 2 * n, n), std::span<double>(ws.jw));
            }
            detail::advance_trajectory(state.alpha_row(k), state.beta_row(k), t, dt, ramp, params, problem.J(), ws,
                                       options);
            if (first_bad[c] == std::numeric_limits<std::size_t>::max() && !state.trajectory_finite(k)) {
                first_bad[c] = k;
            }
        }
    });
    state.t = t + dt;
    for (std::size_t bad : first_bad) {
        if (bad != std::numeric_limits<std::size_t>::max()) {
            throw DivergenceError(bad, state.t);
        }
    }
}

/// Value-semantics wrapper around advance_total.
inline PhaseEnsemble step_total(PhaseEnsemble state, double dt, const RampSchedule &ramp, const CimParams &params,
                                const IsingProblem &problem, std::uint64_t seed, std::uint32_t step_index,
                                const TotalOptions &options = {}) {
    advance_total(state, dt, ramp, params, problem, seed, step_index, options);
    return state;
}

/// Per-mode ensemble means of x = alpha + beta.
struct StepRecord {
    double t = 0.0;
    std::vector<cplx> mean_x;
    std::vector<double> std_err;  ///< standard error of Re x
};

/// Ising energy statistics over trajectories, with spins read from sign(Re x).
struct EnergyRecord {
    double t = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    double std_err = 0.0;
};

struct RecordingConfig {
    std::size_t stride = 0;  ///< 0 -> max(1, n_steps / 100)
    bool energies = true;
    std::size_t snapshot_stride = 0;  ///< 0 -> no per-trajectory snapshots

    std::size_t resolved_stride(std::size_t n_steps) const {
        return stride > 0 ? stride : std::max<std::size_t>(1, n_steps / 100);
    }
};

struct TotalRunRecord {
    std::vector<StepRecord> steps;
    std::vector<EnergyRecord> energies;
    std::vector<PhaseEnsemble> snapshots;
    PhaseEnsemble final_state;
};

/// s_i = +1 if Re x_i >= 0 else -1.
inline void signs_from_x(std::span<const cplx> a, std::span<const cplx> b, std::span<int> out) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = (a[i] + b[i]).real() >= 0.0 ? 1 : -1;
    }
}

/// Final per-trajectory Ising energies.
inline std::vector<double> trajectory_energies(const PhaseEnsemble &state, const IsingProblem &problem) {
    std::vector<double> out(state.n_traj);
    const std::size_t chunks = (state.n_traj + detail::kChunk - 1) / detail::kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        std::vector<int> spins(state.n_modes);
        const std::size_t end = std::min(state.n_traj, (c + 1) * detail::kChunk);
        for (std::size_t k = c * detail::kChunk; k < end; ++k) {
            signs_from_x(state.alpha_row(k), state.beta_row(k), spins);
            out[k] = ising_energy(problem, std::span<const int>(spins));
        }
    });
    return out;
}

inline StepRecord record_step(const PhaseEnsemble &state) {
    const std::size_t n = state.n_modes;
    StepRecord rec{state.t, std::vector<cplx>(n), std::vector<double>(n)};
    std::vector<cplx> xs(state.n_traj);
    std::vector<double> sq(state.n_traj);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < state.n_traj; ++k) {
            xs[k] = state.x(k, i);
        }
        const cplx mean = pairwise_sum(xs) / static_cast<double>(state.n_traj);
        for (std::size_t k = 0; k < state.n_traj; ++k) {
            const double d = xs[k].real() - mean.real();
            sq[k] = d * d;
        }
        rec.mean_x[i] = mean;
        rec.std_err[i] = state.n_traj > 1 ? std::sqrt(pairwise_sum(sq) / static_cast<double>(state.n_traj - 1) /
                                                      static_cast<double>(state.n_traj))
                                          : 0.0;
    }
    return rec;
}

inline EnergyRecord summarize_energies(double t, std::span<const double> energies) {
    EnergyRecord rec;
    rec.t = t;
    const double m = static_cast<double>(energies.size());
    rec.mean = pairwise_sum(energies) / m;
    std::vector<double> sq(energies.size());
    for (std::size_t k = 0; k < energies.size(); ++k) {
        sq[k] = (energies[k] - rec.mean) * (energies[k] - rec.mean);
    }
    rec.stddev = energies.size() > 1 ? std::sqrt(pairwise_sum(sq) / (m - 1.0)) : 0.0;
    rec.std_err = rec.stddev / std::sqrt(m);
    return rec;
}

inline void validate_schedule_against(const RampSchedule &schedule, const CimParams &params) {
    schedule.validate();
    params.validate();
    require(params.gamma_m > 0.0 || (schedule.zeta_start == 0.0 && schedule.zeta_end == 0.0),
            "feedback ramp needs gamma_m > 0 (f = zeta/sqrt(2 gamma_m))");
}

/// Integrates t in [0, t_max] with dt = t_max / n_steps from the given initial ensemble.
inline TotalRunRecord run_total(const IsingProblem &problem, const CimParams &params, const RampSchedule &schedule,
                                PhaseEnsemble initial, std::size_t n_steps, std::uint64_t seed,
                                const RecordingConfig &recording = {}, const TotalOptions &options = {}) {
    validate_schedule_against(schedule, params);
    require(n_steps >= 1, "n_steps must be at least 1");
    require(n_steps < std::numeric_limits<std::uint32_t>::max(), "n_steps exceeds the 32-bit step counter");
    require(initial.n_modes == problem.size(), "initial ensemble does not match problem size");
    initial.check_finite();

    const double dt = schedule.t_max / static_cast<double>(n_steps);
    const std::size_t stride = recording.resolved_stride(n_steps);
    TotalRunRecord out;
    PhaseEnsemble &state = initial;

    auto record = [&](std::size_t step) {
        if (step % stride == 0 || step == n_steps) {
            out.steps.push_back(record_step(state));
            if (recording.energies) {
                const auto e = trajectory_energies(state, problem);
                out.energies.push_back(summarize_energies(state.t, e));
            }
        }
        if (recording.snapshot_stride > 0 && (step % recording.snapshot_stride == 0 || step == n_steps)) {
            out.snapshots.push_back(state);
        }
    };

    record(0);
    for (std::size_t step = 0; step < n_steps; ++step) {
        advance_total(state, dt, schedule, params, problem, seed, static_cast<std::uint32_t>(step), options);
        state.t = static_cast<double>(step + 1) * dt;
        record(step + 1);
    }
    out.final_state = std::move(state);
    return out;
}

/// Vacuum-start overload.
inline TotalRunRecord run_total(const IsingProblem &problem, const CimParams &params, const RampSchedule &schedule,
                                std::size_t n_traj, std::size_t n_steps, std::uint64_t seed,
                                const RecordingConfig &recording = {}, const TotalOptions &options = {}) {
    return run_total(problem, params, schedule, PhaseEnsemble::vacuum(problem.size(), n_traj), n_steps, seed,
                     recording, options);
}

}  // namespace cim
