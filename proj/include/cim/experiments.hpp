#pragma once

// Experiment drivers: pump ramps (A), pump plus feedback ramps (B), and large random graphs (C).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cim/error.hpp"
#include "cim/model.hpp"
#include "cim/parallel.hpp"
#include "cim/problems.hpp"
#include "cim/rng.hpp"
#include "cim/sde_conditional.hpp"
#include "cim/sde_total.hpp"

namespace cim {

/// s_i = +1 if Re x_i >= 0 else -1.
inline SpinConfig spins_from_x(std::span<const cplx> x) {
    std::vector<int> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        s[i] = x[i].real() >= 0.0 ? 1 : -1;
    }
    return SpinConfig{std::move(s)};
}

struct Estimate {
    double value = 0.0;
    double std_err = 0.0;
};

/// Binomial estimate of the fraction of runs that land in ground_set.
inline Estimate success_probability(std::span<const SpinConfig> runs, std::span<const SpinConfig> ground_set) {
    require(!runs.empty(), "success probability needs at least one run");
    require(!ground_set.empty(), "ground-state set is empty");
    std::vector<SpinConfig> sorted(ground_set.begin(), ground_set.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t hits = 0;
    for (const SpinConfig &s : runs) {
        hits += std::binary_search(sorted.begin(), sorted.end(), s) ? 1 : 0;
    }
    const double m = static_cast<double>(runs.size());
    const double p = static_cast<double>(hits) / m;
    return {p, std::sqrt(p * (1.0 - p) / m)};
}

/// Mean and standard error of the mean over independent samples (e.g. per-ensemble fractions).
inline Estimate sample_estimate(std::span<const double> samples) {
    require(!samples.empty(), "no samples");
    const double m = static_cast<double>(samples.size());
    const double mean = pairwise_sum(samples) / m;
    if (samples.size() == 1) {
        return {mean, 0.0};
    }
    std::vector<double> sq(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        sq[k] = (samples[k] - mean) * (samples[k] - mean);
    }
    return {mean, std::sqrt(pairwise_sum(sq) / (m - 1.0) / m)};
}

struct HistogramSpec {
    std::size_t bins = 0;  ///< 0 -> one bin per distinct energy value
    bool auto_range = true;
    double lower = 0.0;
    double upper = 0.0;

    friend bool operator==(const HistogramSpec &, const HistogramSpec &) = default;
};

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    double mass = 0.0;
};

/// Normalized histogram. Values outside an explicit range are counted in the edge bins so the
/// mass always sums to one.
inline std::vector<HistogramBin> energy_histogram(std::span<const double> energies, const HistogramSpec &spec = {}) {
    require(!energies.empty(), "energy histogram needs at least one value");
    const double m = static_cast<double>(energies.size());
    std::vector<HistogramBin> out;
    if (spec.bins == 0) {
        std::map<double, std::size_t> counts;
        for (double e : energies) {
            ++counts[e];
        }
        for (const auto &[e, c] : counts) {
            out.push_back({e, e, static_cast<double>(c) / m});
        }
        return out;
    }
    double lo = spec.lower;
    double hi = spec.upper;
    if (spec.auto_range) {
        const auto [mn, mx] = std::minmax_element(energies.begin(), energies.end());
        lo = *mn;
        hi = *mx;
    }
    require(hi >= lo, "histogram upper bound below lower bound");
    if (hi == lo) {
        return {{lo, hi, 1.0}};
    }
    const std::size_t nb = spec.bins;
    const double width = (hi - lo) / static_cast<double>(nb);
    std::vector<std::size_t> counts(nb, 0);
    for (double e : energies) {
        const double pos = std::floor((e - lo) / width);
        const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(nb - 1)));
        ++counts[b];
    }
    for (std::size_t b = 0; b < nb; ++b) {
        out.push_back({lo + width * static_cast<double>(b), b + 1 == nb ? hi : lo + width * static_cast<double>(b + 1),
                       static_cast<double>(counts[b]) / m});
    }
    return out;
}

enum class Method { kTotal, kConditional };

enum class ProblemKind { kRing, kRandom, kFile };

struct ProblemSpec {
    ProblemKind kind = ProblemKind::kRing;
    std::size_t n = 16;
    double p = 0.1;            ///< edge probability (random)
    std::uint64_t seed = 1;    ///< graph seed (random)
    std::string path;          ///< problem file (file)

    friend bool operator==(const ProblemSpec &, const ProblemSpec &) = default;
};

struct ExperimentConfig {
    std::string experiment = "a";  ///< a, b or c
    ProblemSpec problem;
    CimParams params;
    RampSchedule schedule;  ///< experiments a and b replace t_max and the zeta ramp per grid point
    Method method = Method::kTotal;
    std::size_t n_traj = 256;
    std::size_t n_steps = 1000;
    std::size_t n_runs = 1;
    double eps_thr = 1e-4;
    std::uint64_t seed = 1;
    HistogramSpec histogram;
    std::vector<double> zeta_grid;   ///< constant zeta (a) or zeta_max (b); empty -> {params.zeta}
    std::vector<double> t_max_list;  ///< empty -> {schedule.t_max}
    std::size_t record_stride = 0;

    friend bool operator==(const ExperimentConfig &, const ExperimentConfig &) = default;
};

struct GridPoint {
    double zeta = 0.0;
    double t_max = 0.0;
    Estimate success;
    std::size_t samples = 0;
    double mean_energy = 0.0;
};

struct RunSummary {
    std::string experiment;
    std::vector<GridPoint> grid;
    double ground_energy = 0.0;
    bool has_ground = false;
    std::vector<EnergyRecord> energy_trace;
    std::vector<HistogramBin> histogram;
    std::vector<double> final_energies;
    std::vector<SpinConfig> spins;  ///< conditional runs only
    double seconds = 0.0;           ///< wall time; not part of serialized outputs
};

inline IsingProblem build_problem(const ProblemSpec &spec) {
    switch (spec.kind) {
    case ProblemKind::kRing:
        return ring_afm(spec.n);
    case ProblemKind::kRandom:
        require(spec.p >= 0.0 && spec.p <= 1.0, "edge probability must lie in [0, 1]");
        return random_graph_problem(spec.n, spec.p, spec.seed);
    case ProblemKind::kFile: {
        std::ifstream in(spec.path);
        require(static_cast<bool>(in), "cannot open problem file '" + spec.path + "'");
        return read_problem(in);
    }
    }
    throw InputError("unknown problem kind");
}

namespace detail {

inline std::vector<SpinConfig> sorted_ground_set(const IsingProblem &problem, double &energy) {
    const GroundStates gs = brute_force_ground_state(problem);
    energy = gs.energy;
    std::vector<SpinConfig> set = gs.configs;
    std::sort(set.begin(), set.end());
    return set;
}

inline bool in_set(const std::vector<SpinConfig> &sorted, std::span<const int> spins) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), spins,
                               [](const SpinConfig &c, std::span<const int> s) {
                                   return std::lexicographical_compare(c.spins.begin(), c.spins.end(), s.begin(),
                                                                       s.end());
                               });
    return it != sorted.end() && std::equal(it->spins.begin(), it->spins.end(), spins.begin(), spins.end());
}

// Success fraction over all trajectories of one ensemble.
inline double trajectory_success(const PhaseEnsemble &state, const std::vector<SpinConfig> &ground) {
    std::vector<int> spins(state.n_modes);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < state.n_traj; ++k) {
        signs_from_x(state.alpha_row(k), state.beta_row(k), spins);
        hits += in_set(ground, spins) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(state.n_traj);
}

}  // namespace detail

/// Success estimate for one schedule. Total: n_runs ensembles, per-trajectory success, error from
/// the spread across ensembles (binomial over trajectories when n_runs == 1). Conditional: one
/// spin configuration per run, binomial error.
inline GridPoint evaluate_schedule(const IsingProblem &problem, const ExperimentConfig &cfg,
                                   const RampSchedule &schedule, const std::vector<SpinConfig> &ground,
                                   std::uint64_t seed, RunSummary *summary = nullptr) {
    GridPoint point;
    point.t_max = schedule.t_max;
    point.zeta = std::max(schedule.zeta_start, schedule.zeta_end);
    std::vector<double> energies;
    if (cfg.method == Method::kTotal) {
        std::vector<double> fractions;
        for (std::size_t r = 0; r < cfg.n_runs; ++r) {
            RecordingConfig rec;
            rec.stride = cfg.n_steps;
            rec.energies = false;
            const TotalRunRecord run =
                run_total(problem, cfg.params, schedule, cfg.n_traj, cfg.n_steps, derive_seed(seed, r), rec);
            fractions.push_back(detail::trajectory_success(run.final_state, ground));
            const std::vector<double> e = trajectory_energies(run.final_state, problem);
            energies.insert(energies.end(), e.begin(), e.end());
        }
        point.success = sample_estimate(fractions);
        if (cfg.n_runs == 1) {
            const double p = fractions[0];
            point.success.std_err = std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.n_traj));
        }
        point.samples = cfg.n_runs * cfg.n_traj;
    } else {
        std::vector<SpinConfig> spins;
        for (std::size_t r = 0; r < cfg.n_runs; ++r) {
            const ConditionalRunRecord run = run_conditional(problem, cfg.params, schedule, cfg.n_traj, cfg.n_steps,
                                                             cfg.eps_thr, derive_seed(seed, r), cfg.n_steps);
            spins.push_back(run.spins);
            energies.push_back(run.energy);
        }
        point.success = success_probability(spins, ground);
        point.samples = cfg.n_runs;
        if (summary != nullptr) {
            summary->spins.insert(summary->spins.end(), spins.begin(), spins.end());
        }
    }
    point.mean_energy = pairwise_sum(energies) / static_cast<double>(energies.size());
    return point;
}

namespace detail {

inline RunSummary run_grid(const ExperimentConfig &cfg, bool ramp_zeta) {
    const auto start = std::chrono::steady_clock::now();
    cfg.params.validate();
    const IsingProblem problem = build_problem(cfg.problem);
    RunSummary summary;
    summary.experiment = cfg.experiment;
    const std::vector<SpinConfig> ground = sorted_ground_set(problem, summary.ground_energy);
    summary.has_ground = true;
    const std::vector<double> zetas = cfg.zeta_grid.empty() ? std::vector<double>{cfg.params.zeta} : cfg.zeta_grid;
    const std::vector<double> times =
        cfg.t_max_list.empty() ? std::vector<double>{cfg.schedule.t_max} : cfg.t_max_list;
    std::uint64_t index = 0;
    for (double t_max : times) {
        for (double z : zetas) {
            const RampSchedule schedule{t_max, cfg.schedule.pump_start, cfg.schedule.pump_end, ramp_zeta ? 0.0 : z, z};
            summary.grid.push_back(evaluate_schedule(problem, cfg, schedule, ground, derive_seed(cfg.seed, index++),
                                                     &summary));
        }
    }
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

}  // namespace detail

/// Configured pump ramp at constant zeta, for every (t_max, zeta) pair.
inline RunSummary run_experiment_a(const ExperimentConfig &cfg) { return detail::run_grid(cfg, false); }

/// Pump and feedback ramped together; the grid values are zeta_max.
inline RunSummary run_experiment_b(const ExperimentConfig &cfg) { return detail::run_grid(cfg, true); }

/// Single total-method run on the configured schedule with the mean-energy trace and the
/// histogram of final per-trajectory energies.
inline RunSummary run_experiment_c(const ExperimentConfig &cfg) {
    require(cfg.method == Method::kTotal, "experiment c supports only the total method");
    const auto start = std::chrono::steady_clock::now();
    const IsingProblem problem = build_problem(cfg.problem);
    RunSummary summary;
    summary.experiment = cfg.experiment;
    if (problem.size() <= kBruteForceLimit) {
        summary.ground_energy = brute_force_ground_state(problem).energy;
        summary.has_ground = true;
    }
    RecordingConfig rec;
    rec.stride = cfg.record_stride;
    const TotalRunRecord run = run_total(problem, cfg.params, cfg.schedule, cfg.n_traj, cfg.n_steps, cfg.seed, rec);
    summary.energy_trace = run.energies;
    summary.final_energies = trajectory_energies(run.final_state, problem);
    summary.histogram = energy_histogram(summary.final_energies, cfg.histogram);
    GridPoint point;
    point.zeta = std::max(cfg.schedule.zeta_start, cfg.schedule.zeta_end);
    point.t_max = cfg.schedule.t_max;
    point.samples = cfg.n_traj;
    point.mean_energy = run.energies.back().mean;
    summary.grid.push_back(point);
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

inline RunSummary run_experiment(const ExperimentConfig &cfg) {
    if (cfg.experiment == "a") {
        return run_experiment_a(cfg);
    }
    if (cfg.experiment == "b") {
        return run_experiment_b(cfg);
    }
    if (cfg.experiment == "c") {
        return run_experiment_c(cfg);
    }
    throw InputError("unknown experiment '" + cfg.experiment + "' (expected a, b or c)");
}

}  // namespace cim
