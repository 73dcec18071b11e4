#pragma once

// Moment comparison between the positive-P total SDE and the density-matrix total master equation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cim/density_oracle.hpp"
#include "cim/model.hpp"
#include "cim/parallel.hpp"
#include "cim/problems.hpp"
#include "cim/sde_total.hpp"

namespace cim {

struct SampledMoments {
    double x = 0.0, x_err = 0.0;
    double x2 = 0.0, x2_err = 0.0;
    double n = 0.0, n_err = 0.0;
};

/// Positive-P estimates for mode i: <x> = <alpha + beta>, <x^2> = <(alpha + beta)^2> + 1,
/// <n> = <alpha beta>, each with the standard error of the real part.
inline SampledMoments sampled_moments(const PhaseEnsemble &state, std::size_t mode = 0) {
    const std::size_t m = state.n_traj;
    std::vector<double> xs(m), x2s(m), ns(m);
    for (std::size_t k = 0; k < m; ++k) {
        const cplx a = state.alpha[k * state.n_modes + mode];
        const cplx b = state.beta[k * state.n_modes + mode];
        xs[k] = (a + b).real();
        x2s[k] = ((a + b) * (a + b)).real() + 1.0;
        ns[k] = (a * b).real();
    }
    auto stats = [m](std::vector<double> &v, double &mean, double &err) {
        mean = pairwise_sum(v) / static_cast<double>(m);
        for (double &e : v) {
            e = (e - mean) * (e - mean);
        }
        err = m > 1 ? std::sqrt(pairwise_sum(v) / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
    };
    SampledMoments out;
    stats(xs, out.x, out.x_err);
    stats(x2s, out.x2, out.x2_err);
    stats(ns, out.n, out.n_err);
    return out;
}

struct MomentCheckpoint {
    double t = 0.0;
    QuadratureMoments oracle;
    SampledMoments sde;
};

struct MomentComparisonSetup {
    CimParams params;
    double eps_p = 0.0;
    int cutoff = 32;
    std::size_t n_traj = 100000;
    double dt = 0.005;
    double oracle_dt = 0.001;
    std::vector<double> checkpoints;
    std::uint64_t seed = 1;
};

/// Single mode, no feedback, constant pump, vacuum start.
inline std::vector<MomentCheckpoint> compare_total_moments(const MomentComparisonSetup &setup) {
    require(!setup.checkpoints.empty(), "at least one checkpoint is required");
    CimParams params = setup.params;
    params.zeta = 0.0;
    params.validate();
    const double t_end = setup.checkpoints.back();
    const RampSchedule ramp = RampSchedule::constant(t_end, setup.eps_p, 0.0);
    const IsingProblem single = IsingProblem(1, {});

    OracleModel model{params, setup.eps_p, 0.0, {0.0}};
    const OperatorSet ops = OperatorSet::build(1, setup.cutoff, model);
    const std::vector<OracleRecord> oracle =
        integrate_total(ops, DensityState::vacuum(1, setup.cutoff), setup.oracle_dt, setup.checkpoints);

    PhaseEnsemble state = PhaseEnsemble::vacuum(1, setup.n_traj);
    std::vector<MomentCheckpoint> out;
    std::uint32_t step = 0;
    for (std::size_t c = 0; c < setup.checkpoints.size(); ++c) {
        const double target = setup.checkpoints[c];
        const auto steps = static_cast<long>(std::llround((target - state.t) / setup.dt));
        const double h = steps > 0 ? (target - state.t) / static_cast<double>(steps) : setup.dt;
        for (long s = 0; s < steps; ++s) {
            advance_total(state, h, ramp, params, single, setup.seed, step++);
        }
        state.t = target;
        out.push_back({target, oracle[c].moments[0], sampled_moments(state)});
    }
    return out;
}

/// max over checkpoints and moments of |sde - oracle| / |oracle|, skipping moments whose oracle
/// value is below floor in magnitude (e.g. <x> = 0 by symmetry).
inline double max_relative_deviation(const std::vector<MomentCheckpoint> &cps, double floor = 1e-6) {
    double worst = 0.0;
    for (const MomentCheckpoint &c : cps) {
        const double pairs[3][2] = {{c.sde.x, c.oracle.x}, {c.sde.x2, c.oracle.x2}, {c.sde.n, c.oracle.n}};
        for (const auto &p : pairs) {
            if (std::abs(p[1]) >= floor) {
                worst = std::max(worst, std::abs(p[0] - p[1]) / std::abs(p[1]));
            }
        }
    }
    return worst;
}

/// True when every moment agrees within max(sigmas * standard error, rel_tol * |oracle|).
inline bool moments_agree(const std::vector<MomentCheckpoint> &cps, double sigmas = 3.0, double rel_tol = 0.02) {
    for (const MomentCheckpoint &c : cps) {
        const double rows[3][3] = {{c.sde.x, c.sde.x_err, c.oracle.x},
                                   {c.sde.x2, c.sde.x2_err, c.oracle.x2},
                                   {c.sde.n, c.sde.n_err, c.oracle.n}};
        for (const auto &r : rows) {
            if (std::abs(r[0] - r[2]) > std::max(sigmas * r[1], rel_tol * std::abs(r[2]))) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace cim
