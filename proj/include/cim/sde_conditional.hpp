#pragma once

// Weighted-trajectory simulation of the conditional (measurement-resolved) feedback dynamics.
//
// Stratonovich SDEs per trajectory, with real noise xi^r shared by the whole ensemble and
// fictitious noises xi^a, xi^b drawn per trajectory:
//   d alpha_i = [eps_i - gamma' alpha_i + beta_i chi(alpha_i)] dt + sqrt(chi(alpha_i)) dV^a_i
//   d beta_i  = [eps_i - gamma' beta_i  + alpha_i chi(beta_i)] dt + sqrt(chi(beta_i))  dV^b_i
//   d w'      = gamma_m sum_i x_i (2 <x_i> - x_i) dt + sqrt(2 gamma_m) sum_i x_i dW^r_i
//   eps_i     = zeta sum_j J_ij (<x_j> + xi^r_j / sqrt(2 gamma_m))
// where x = alpha + beta, <.> is the weighted ensemble mean (frozen within a step) and w' = log w.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "cim/error.hpp"
#include "cim/model.hpp"
#include "cim/parallel.hpp"
#include "cim/problems.hpp"
#include "cim/rng.hpp"
#include "cim/sde_total.hpp"

namespace cim {

struct WeightedEnsemble {
    PhaseEnsemble states;
    std::vector<double> log_weights;
    std::size_t breed_count = 0;

    static WeightedEnsemble vacuum(std::size_t n_modes, std::size_t n_traj) {
        return {PhaseEnsemble::vacuum(n_modes, n_traj), std::vector<double>(n_traj, 0.0), 0};
    }

    std::size_t size() const noexcept { return states.n_traj; }
};

/// Unit gaussians for one step. real_noises has n_modes entries and is shared by every trajectory;
/// fictitious_alpha/beta are trajectory-major n_traj x n_modes.
struct NoiseDraw {
    std::vector<double> real_noises;
    std::vector<double> fictitious_alpha;
    std::vector<double> fictitious_beta;

    static NoiseDraw zeros(std::size_t n_modes, std::size_t n_traj) {
        return {std::vector<double>(n_modes), std::vector<double>(n_modes * n_traj),
                std::vector<double>(n_modes * n_traj)};
    }
};

/// Draws the step's noise: real from (seed, shared, step, kRealNoise), fictitious from
/// (seed, k, step, kFictitiousNoise) with the alpha block first.
inline NoiseDraw draw_noise(std::size_t n_modes, std::size_t n_traj, std::uint64_t seed, std::uint32_t step) {
    NoiseDraw draw = NoiseDraw::zeros(n_modes, n_traj);
    RandomStream real(seed, kSharedTrajectory, step, Substream::kRealNoise);
    real.fill_normal(draw.real_noises);
    const std::size_t chunks = (n_traj + detail::kChunk - 1) / detail::kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t end = std::min(n_traj, (c + 1) * detail::kChunk);
        for (std::size_t k = c * detail::kChunk; k < end; ++k) {
            RandomStream stream(seed, static_cast<std::uint32_t>(k), step, Substream::kFictitiousNoise);
            stream.fill_normal(std::span<double>(draw.fictitious_alpha.data() + k * n_modes, n_modes));
            stream.fill_normal(std::span<double>(draw.fictitious_beta.data() + k * n_modes, n_modes));
        }
    });
    return draw;
}

namespace detail {

// Linear weights exp(w' - max w'); the largest entry is exactly 1.
inline std::vector<double> relative_weights(std::span<const double> log_weights, double &shift) {
    require(!log_weights.empty(), "weighted ensemble is empty");
    shift = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) {
        if (!std::isfinite(lw)) {
            throw NumericalError("non-finite log-weight in weighted ensemble");
        }
        shift = std::max(shift, lw);
    }
    std::vector<double> w(log_weights.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = std::exp(log_weights[k] - shift);
    }
    return w;
}

}  // namespace detail

/// sum_k w_k f_k / sum_k w_k for explicit linear weights.
inline double weighted_mean(std::span<const double> weights, std::span<const double> values) {
    require(weights.size() == values.size() && !weights.empty(), "weights and values must be nonempty and equal length");
    std::vector<double> wf(weights.size());
    for (std::size_t k = 0; k < wf.size(); ++k) {
        wf[k] = weights[k] * values[k];
    }
    const double total = pairwise_sum(weights);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw NumericalError("total weight is zero or non-finite (sum = " + format_double(total) + ")");
    }
    return pairwise_sum(wf) / total;
}

/// Weighted ensemble average of the per-trajectory observable f(k).
template <class F>
auto weighted_mean(const WeightedEnsemble &ensemble, F &&f) {
    using R = std::decay_t<decltype(f(std::size_t{}))>;
    double shift = 0.0;
    const std::vector<double> w = detail::relative_weights(ensemble.log_weights, shift);
    std::vector<R> wf(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        wf[k] = w[k] * f(k);
    }
    return pairwise_sum(wf) / pairwise_sum(w);
}

/// Weighted means of x_i = alpha_i + beta_i for every mode.
inline std::vector<cplx> weighted_mean_x(const WeightedEnsemble &ensemble) {
    double shift = 0.0;
    const std::vector<double> w = detail::relative_weights(ensemble.log_weights, shift);
    const double total = pairwise_sum(w);
    const std::size_t n = ensemble.states.n_modes;
    std::vector<cplx> out(n);
    std::vector<cplx> wx(w.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < w.size(); ++k) {
            wx[k] = w[k] * ensemble.states.x(k, i);
        }
        out[i] = pairwise_sum(wx) / total;
    }
    return out;
}

enum class RealNoiseCoupling {
    kSummedWithJ,  ///< eps_i = zeta sum_j J_ij (<x_j> + xi^r_j / sqrt(2 gamma_m))
    kPrinted,      ///< eps_i = zeta sum_j J_ij <x_j> + zeta (sum_j J_ij) xi^r_i / sqrt(2 gamma_m)
};

enum class DampingForm {
    kLinear,     ///< -gamma' alpha_i
    kQuadratic,  ///< -gamma' alpha_i^2, kept only for comparison runs
};

enum class ConditionalScheme {
    kRK4,       ///< RK4 with noise frozen across substages
    kMidpoint,  ///< explicit midpoint with frozen noise
};

struct ConditionalOptions {
    RealNoiseCoupling coupling = RealNoiseCoupling::kSummedWithJ;
    DampingForm damping = DampingForm::kLinear;
    ConditionalScheme scheme = ConditionalScheme::kRK4;
};

namespace detail {

struct ConditionalWorkspace {
    explicit ConditionalWorkspace(std::size_t n)
        : a0(n), b0(n), at(n), bt(n), ka(4 * n), kb(4 * n), xs(n), jx(n) {}
    std::vector<cplx> a0, b0, at, bt, ka, kb, xs, jx;
    double kw[4] = {0, 0, 0, 0};
};

// Per-step quantities shared by every trajectory.
struct ConditionalStepContext {
    const CimParams &params;
    const CouplingMatrix &J;
    const RampSchedule &ramp;
    const ConditionalOptions &options;
    double t;
    double dt;
    std::span<const cplx> mean_x;
    std::span<const double> real_noise;  // increments dW^r
    std::vector<cplx> feedback_mean;     // J <x>
    std::vector<double> feedback_noise;  // J xi^r (summed) or row_sum * xi^r (printed)
};

inline void conditional_rhs(std::span<const cplx> a, std::span<const cplx> b, double tt,
                            const ConditionalStepContext &ctx, std::span<const double> va,
                            std::span<const double> vb, std::span<cplx> da,
                            std::span<cplx> db, double &dw) {
    const std::size_t n = a.size();
    const CimParams &p = ctx.params;
    const double eps_p = ctx.ramp.pump(tt);
    const double zeta = ctx.ramp.zeta(tt);
    const double gp = p.gamma_prime();
    const double inv_dt = 1.0 / ctx.dt;
    const double inv_sqrt_2gm = 1.0 / std::sqrt(2.0 * p.gamma_m);
    const double sqrt_2gm = std::sqrt(2.0 * p.gamma_m);
    double weight_rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const cplx eps_i = zeta * (ctx.feedback_mean[i] + ctx.feedback_noise[i] * inv_sqrt_2gm * inv_dt);
        const cplx chi_a = chi(a[i], eps_p, p);
        const cplx chi_b = chi(b[i], eps_p, p);
        const cplx damp_a = ctx.options.damping == DampingForm::kLinear ? a[i] : a[i] * a[i];
        const cplx damp_b = ctx.options.damping == DampingForm::kLinear ? b[i] : b[i] * b[i];
        da[i] = eps_i - gp * damp_a + b[i] * chi_a + std::sqrt(chi_a) * (va[i] * inv_dt);
        db[i] = eps_i - gp * damp_b + a[i] * chi_b + std::sqrt(chi_b) * (vb[i] * inv_dt);
        const cplx x = a[i] + b[i];
        const cplx rate = p.gamma_m * x * (2.0 * ctx.mean_x[i] - x) + sqrt_2gm * x * (ctx.real_noise[i] * inv_dt);
        weight_rate += rate.real();
    }
    dw = weight_rate;
}

inline void advance_conditional_trajectory(std::span<cplx> a, std::span<cplx> b, double &log_weight,
                                           const ConditionalStepContext &ctx, std::span<const double> va,
                                           std::span<const double> vb, ConditionalWorkspace &ws) {
    const std::size_t n = a.size();
    const double t = ctx.t;
    const double dt = ctx.dt;
    std::copy(a.begin(), a.end(), ws.a0.begin());
    std::copy(b.begin(), b.end(), ws.b0.begin());
    auto ka = [&](int s) { return std::span<cplx>(ws.ka.data() + s * n, n); };
    auto kb = [&](int s) { return std::span<cplx>(ws.kb.data() + s * n, n); };

    conditional_rhs(ws.a0, ws.b0, t, ctx, va, vb, ka(0), kb(0), ws.kw[0]);
    if (ctx.options.scheme == ConditionalScheme::kMidpoint) {
        for (std::size_t i = 0; i < n; ++i) {
            ws.at[i] = ws.a0[i] + 0.5 * dt * ka(0)[i];
            ws.bt[i] = ws.b0[i] + 0.5 * dt * kb(0)[i];
        }
        conditional_rhs(ws.at, ws.bt, t + 0.5 * dt, ctx, va, vb, ka(1), kb(1), ws.kw[1]);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = ws.a0[i] + dt * ka(1)[i];
            b[i] = ws.b0[i] + dt * kb(1)[i];
        }
        log_weight += dt * ws.kw[1];
        return;
    }
    const double h[3] = {0.5 * dt, 0.5 * dt, dt};
    for (int s = 1; s < 4; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            ws.at[i] = ws.a0[i] + h[s - 1] * ka(s - 1)[i];
            ws.bt[i] = ws.b0[i] + h[s - 1] * kb(s - 1)[i];
        }
        conditional_rhs(ws.at, ws.bt, t + h[s - 1], ctx, va, vb, ka(s), kb(s), ws.kw[s]);
    }
    const double w6 = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = ws.a0[i] + w6 * (ka(0)[i] + 2.0 * ka(1)[i] + 2.0 * ka(2)[i] + ka(3)[i]);
        b[i] = ws.b0[i] + w6 * (kb(0)[i] + 2.0 * kb(1)[i] + 2.0 * kb(2)[i] + kb(3)[i]);
    }
    log_weight += w6 * (ws.kw[0] + 2.0 * ws.kw[1] + 2.0 * ws.kw[2] + ws.kw[3]);
}

}  // namespace detail

/// Advances states and log-weights by one Stratonovich step in place. Noise entries are unit
/// normals; they are scaled by sqrt(dt) here.
inline void advance_conditional(WeightedEnsemble &ensemble, double dt, const RampSchedule &ramp,
                                const CimParams &params, const IsingProblem &problem, const NoiseDraw &noise,
                                const ConditionalOptions &options = {}) {
    require(params.gamma_m > 0.0, "the conditional method needs gamma_m > 0: the measurement record defines "
                                  "the real noise and f = zeta/sqrt(2 gamma_m)");
    require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
    PhaseEnsemble &st = ensemble.states;
    const std::size_t n = st.n_modes;
    require(n == problem.size(), "ensemble mode count does not match problem size");
    require(ensemble.log_weights.size() == st.n_traj, "log-weight count does not match trajectory count");
    require(noise.real_noises.size() == n && noise.fictitious_alpha.size() == n * st.n_traj &&
                noise.fictitious_beta.size() == n * st.n_traj,
            "noise draw dimensions do not match ensemble");

    const std::vector<cplx> mean_x = weighted_mean_x(ensemble);
    detail::ConditionalStepContext ctx{params, problem.J(), ramp, options, st.t, dt, mean_x, noise.real_noises,
                                       std::vector<cplx>(n), std::vector<double>(n)};
    problem.J().apply(std::span<const cplx>(mean_x), std::span<cplx>(ctx.feedback_mean));
    if (options.coupling == RealNoiseCoupling::kSummedWithJ) {
        problem.J().apply(std::span<const double>(noise.real_noises), std::span<double>(ctx.feedback_noise));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            ctx.feedback_noise[i] = problem.J().row_sum(i) * noise.real_noises[i];
        }
    }
    // Everything below is converted to increments; the rhs divides by dt.
    const double sqrt_dt = std::sqrt(dt);
    std::vector<double> real_scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
        real_scaled[i] = noise.real_noises[i] * sqrt_dt;
        ctx.feedback_noise[i] *= sqrt_dt;
    }
    ctx.real_noise = real_scaled;

    const std::size_t chunks = (st.n_traj + detail::kChunk - 1) / detail::kChunk;
    std::vector<std::size_t> first_bad(chunks, std::numeric_limits<std::size_t>::max());
    parallel_for(chunks, [&](std::size_t c) {
        detail::ConditionalWorkspace ws(n);
        std::vector<double> va(n), vb(n);
        const std::size_t end = std::min(st.n_traj, (c + 1) * detail::kChunk);
        for (std::size_t k = c * detail::kChunk; k < end; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                va[i] = noise.fictitious_alpha[k * n + i] * sqrt_dt;
                vb[i] = noise.fictitious_beta[k * n + i] * sqrt_dt;
            }
            detail::advance_conditional_trajectory(st.alpha_row(k), st.beta_row(k), ensemble.log_weights[k], ctx, va,
                                                   vb, ws);
            if (first_bad[c] == std::numeric_limits<std::size_t>::max() &&
                (!st.trajectory_finite(k) || !std::isfinite(ensemble.log_weights[k]))) {
                first_bad[c] = k;
            }
        }
    });
    st.t += dt;
    for (std::size_t bad : first_bad) {
        if (bad != std::numeric_limits<std::size_t>::max()) {
            throw DivergenceError(bad, st.t);
        }
    }
}

inline WeightedEnsemble conditional_step(WeightedEnsemble ensemble, double dt, const RampSchedule &ramp,
                                         const CimParams &params, const IsingProblem &problem,
                                         const NoiseDraw &noise, const ConditionalOptions &options = {}) {
    advance_conditional(ensemble, dt, ramp, params, problem, noise, options);
    return ensemble;
}

/// One breeding replacement: trajectory dst takes the state of src.
struct BreedEvent {
    std::size_t dst;
    std::size_t src;
    double w_min;
    double w_max;
};

/// Breeding on linear weights. While min/mean < eps_thr, the lowest-weight trajectory (lowest
/// index on ties) is overwritten by the highest-weight one (lowest index on ties) and both get
/// half the maximum weight. on_event is called after each replacement's weight update.
inline std::size_t breed_weights(std::vector<double> &w, double eps_thr,
                                 const std::function<void(const BreedEvent &)> &on_event = {}) {
    require(eps_thr > 0.0 && eps_thr < 1.0, "breeding threshold must lie in (0, 1)");
    const std::size_t n = w.size();
    if (n < 2) {
        return 0;
    }
    double total = pairwise_sum(w);
    const double w_min0 = *std::min_element(w.begin(), w.end());
    if (w_min0 >= eps_thr * (total / static_cast<double>(n))) {
        return 0;
    }
    std::set<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < n; ++k) {
        order.emplace(w[k], k);
    }
    const std::size_t cap = 64 * n;
    std::size_t events = 0;
    while (true) {
        const auto lo = *order.begin();
        if (lo.first >= eps_thr * (total / static_cast<double>(n))) {
            break;
        }
        const double w_max = order.rbegin()->first;
        const auto hi = *order.lower_bound({w_max, 0});
        if (hi.second == lo.second) {
            break;
        }
        if (++events > cap) {
            throw NumericalError("breeding did not terminate after " + std::to_string(cap) + " events");
        }
        order.erase(lo);
        order.erase(hi);
        const double half = 0.5 * w_max;
        w[lo.second] = half;
        w[hi.second] = half;
        order.emplace(half, lo.second);
        order.emplace(half, hi.second);
        total -= lo.first;
        if (on_event) {
            on_event({lo.second, hi.second, lo.first, w_max});
        }
    }
    return events;
}

/// Breeds an ensemble in place using linear weights reconstructed from log-weights.
inline std::size_t breed_in_place(WeightedEnsemble &ensemble, double eps_thr) {
    double shift = 0.0;
    std::vector<double> w = detail::relative_weights(ensemble.log_weights, shift);
    PhaseEnsemble &st = ensemble.states;
    const std::size_t n = st.n_modes;
    const std::size_t events = breed_weights(w, eps_thr, [&](const BreedEvent &e) {
        std::copy_n(st.alpha.begin() + e.src * n, n, st.alpha.begin() + e.dst * n);
        std::copy_n(st.beta.begin() + e.src * n, n, st.beta.begin() + e.dst * n);
    });
    if (events > 0) {
        for (std::size_t k = 0; k < w.size(); ++k) {
            ensemble.log_weights[k] = std::log(w[k]) + shift;
        }
        ensemble.breed_count += events;
    }
    return events;
}

inline WeightedEnsemble breed(WeightedEnsemble ensemble, double eps_thr) {
    breed_in_place(ensemble, eps_thr);
    return ensemble;
}

/// Shifts log-weights so the mean linear weight is 1.
inline void normalize_in_place(WeightedEnsemble &ensemble) {
    double shift = 0.0;
    const std::vector<double> w = detail::relative_weights(ensemble.log_weights, shift);
    const double mean = pairwise_sum(w) / static_cast<double>(w.size());
    const double offset = shift + std::log(mean);
    for (double &lw : ensemble.log_weights) {
        lw -= offset;
    }
}

inline WeightedEnsemble normalize_weights(WeightedEnsemble ensemble) {
    normalize_in_place(ensemble);
    return ensemble;
}

/// Linear weight statistics relative to the mean weight.
struct WeightStats {
    double min_ratio = 1.0;
    double max_ratio = 1.0;
};

inline WeightStats weight_stats(const WeightedEnsemble &ensemble) {
    double shift = 0.0;
    const std::vector<double> w = detail::relative_weights(ensemble.log_weights, shift);
    const double mean = pairwise_sum(w) / static_cast<double>(w.size());
    const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
    return {*lo / mean, *hi / mean};
}

struct ConditionalRecord {
    double t = 0.0;
    std::vector<cplx> mean_x;
    WeightStats weights;  ///< measured before breeding
    std::size_t breed_count = 0;
};

struct ConditionalRunRecord {
    std::vector<ConditionalRecord> trace;
    SpinConfig spins;
    double energy = 0.0;
    std::vector<cplx> final_mean_x;
    std::size_t breed_count = 0;
};

/// One conditional run: per step draw noise, step, breed, normalize. Produces one spin configuration
/// from the signs of the final weighted means.
inline ConditionalRunRecord run_conditional(const IsingProblem &problem, const CimParams &params,
                                            const RampSchedule &schedule, std::size_t n_traj, std::size_t n_steps,
                                            double eps_thr, std::uint64_t seed, std::size_t record_stride = 0,
                                            const ConditionalOptions &options = {}) {
    validate_schedule_against(schedule, params);
    require(params.gamma_m > 0.0, "the conditional method needs gamma_m > 0 (f = zeta/sqrt(2 gamma_m) undefined "
                                  "and no measurement record otherwise)");
    require(eps_thr > 0.0 && eps_thr < 1.0, "breeding threshold must lie in (0, 1)");
    require(n_traj >= 1 && n_steps >= 1, "n_traj and n_steps must be positive");
    require(n_steps < std::numeric_limits<std::uint32_t>::max(), "n_steps exceeds the 32-bit step counter");

    const double dt = schedule.t_max / static_cast<double>(n_steps);
    const std::size_t stride = record_stride > 0 ? record_stride : std::max<std::size_t>(1, n_steps / 100);
    WeightedEnsemble ens = WeightedEnsemble::vacuum(problem.size(), n_traj);
    ConditionalRunRecord out;
    out.trace.push_back({0.0, weighted_mean_x(ens), weight_stats(ens), 0});
    for (std::size_t step = 0; step < n_steps; ++step) {
        const NoiseDraw noise = draw_noise(problem.size(), n_traj, seed, static_cast<std::uint32_t>(step));
        advance_conditional(ens, dt, schedule, params, problem, noise, options);
        ens.states.t = static_cast<double>(step + 1) * dt;
        const bool record = (step + 1) % stride == 0 || step + 1 == n_steps;
        WeightStats stats;
        if (record) {
            stats = weight_stats(ens);
        }
        breed_in_place(ens, eps_thr);
        normalize_in_place(ens);
        if (record) {
            out.trace.push_back({ens.states.t, weighted_mean_x(ens), stats, ens.breed_count});
        }
    }
    out.final_mean_x = weighted_mean_x(ens);
    std::vector<int> s(problem.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = out.final_mean_x[i].real() >= 0.0 ? 1 : -1;
    }
    out.spins = SpinConfig{s};
    out.energy = ising_energy(problem, out.spins);
    out.breed_count = ens.breed_count;
    return out;
}

}  // namespace cim
