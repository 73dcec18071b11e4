#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cim/experiments.hpp"
#include "cim/model.hpp"
#include "cim/rng.hpp"
#include "cim/sde_total.hpp"

namespace cim {
namespace {

CimParams rates(double zeta = 0.0) { return {1.0, 0.1, 10.0, 0.1, zeta}; }

TEST(SpinsFromX, Examples) {
    const std::vector<cplx> x = {{0.5, 3.0}, {-0.1, 0.0}, {0.0, -2.0}, {-7.0, 1.0}};
    EXPECT_EQ(spins_from_x(x), SpinConfig({1, -1, 1, -1}));
}

TEST(SpinsFromX, ScaleInvariant) {
    RandomStream r(5, 0, 0, Substream::kTest);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<cplx> x(8);
        for (cplx &v : x) {
            v = {r.normal(), r.normal()};
        }
        std::vector<cplx> scaled = x;
        const double c = 0.01 + 10.0 * r.uniform();
        for (cplx &v : scaled) {
            v *= c;
        }
        EXPECT_EQ(spins_from_x(x), spins_from_x(scaled));
    }
}

TEST(SuccessProbability, Examples) {
    const std::vector<SpinConfig> ground = {SpinConfig({1, -1, 1}), SpinConfig({-1, 1, -1})};
    const std::vector<SpinConfig> all(7, ground[1]);
    const Estimate e_all = success_probability(all, ground);
    EXPECT_EQ(e_all.value, 1.0);
    EXPECT_EQ(e_all.std_err, 0.0);

    const std::vector<SpinConfig> none(5, SpinConfig({1, 1, 1}));
    const Estimate e_none = success_probability(none, ground);
    EXPECT_EQ(e_none.value, 0.0);
    EXPECT_EQ(e_none.std_err, 0.0);

    std::vector<SpinConfig> some(12, SpinConfig({1, 1, -1}));
    some[0] = ground[0];
    some[4] = ground[1];
    some[9] = ground[0];
    const Estimate e = success_probability(some, ground);
    EXPECT_DOUBLE_EQ(e.value, 0.25);
    EXPECT_NEAR(e.std_err, std::sqrt(0.25 * 0.75 / 12.0), 1e-15);
}

TEST(SampleEstimate, MeanAndError) {
    const std::vector<double> s = {1.0, 2.0, 3.0, 4.0};
    const Estimate e = sample_estimate(s);
    EXPECT_DOUBLE_EQ(e.value, 2.5);
    // Sample variance 5/3, error sqrt(5/3/4).
    EXPECT_NEAR(e.std_err, std::sqrt(5.0 / 12.0), 1e-15);
    const std::vector<double> one = {7.0};
    EXPECT_EQ(sample_estimate(one).std_err, 0.0);
}

TEST(EnergyHistogram, EqualValuesGiveOneBin) {
    const std::vector<double> e(10, -4.0);
    const auto h = energy_histogram(e, {20, true, 0.0, 0.0});
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0].mass, 1.0);
    EXPECT_EQ(h[0].lower, -4.0);
}

TEST(EnergyHistogram, TwoClusters) {
    std::vector<double> e;
    for (int k = 0; k < 50; ++k) {
        e.push_back(-10.0 + 0.001 * k);
        e.push_back(10.0 - 0.001 * k);
    }
    const auto h = energy_histogram(e, {4, true, 0.0, 0.0});
    ASSERT_EQ(h.size(), 4u);
    EXPECT_DOUBLE_EQ(h.front().mass, 0.5);
    EXPECT_DOUBLE_EQ(h.back().mass, 0.5);
    EXPECT_EQ(h[1].mass + h[2].mass, 0.0);
}

TEST(EnergyHistogram, DistinctValuesAndMass) {
    const std::vector<double> e = {-2.0, 0.0, -2.0, 4.0, 0.0, -2.0};
    const auto h = energy_histogram(e);
    ASSERT_EQ(h.size(), 3u);
    EXPECT_EQ(h[0].lower, -2.0);
    EXPECT_DOUBLE_EQ(h[0].mass, 0.5);
    RandomStream r(9, 0, 0, Substream::kTest);
    std::vector<double> g(1000);
    for (double &v : g) {
        v = r.normal();
    }
    for (const HistogramSpec &spec : {HistogramSpec{0, true, 0, 0}, HistogramSpec{17, true, 0, 0},
                                      HistogramSpec{10, false, -1.0, 1.0}}) {
        double mass = 0.0;
        for (const HistogramBin &b : energy_histogram(g, spec)) {
            mass += b.mass;
        }
        EXPECT_NEAR(mass, 1.0, 1e-12);
    }
}

TEST(BuildProblem, Kinds) {
    ProblemSpec ring;
    ring.n = 8;
    EXPECT_EQ(build_problem(ring).size(), 8u);
    ProblemSpec random{ProblemKind::kRandom, 30, 0.2, 4, ""};
    const IsingProblem a = build_problem(random);
    const IsingProblem b = random_graph_problem(30, 0.2, 4);
    EXPECT_EQ(a.J().nonzeros(), b.J().nonzeros());
    ProblemSpec missing{ProblemKind::kFile, 0, 0.0, 0, "/nonexistent/problem.txt"};
    EXPECT_THROW(build_problem(missing), InputError);
    random.p = 1.5;
    EXPECT_THROW(build_problem(random), InputError);
}

ExperimentConfig small_ring(std::size_t n, double zeta, std::size_t n_traj) {
    ExperimentConfig cfg;
    cfg.problem.n = n;
    cfg.params = rates(zeta);
    cfg.schedule = {10.0, 0.0, 2.0 * pump_threshold(cfg.params), zeta, zeta};
    cfg.n_traj = n_traj;
    cfg.n_steps = 1000;
    cfg.seed = 42;
    return cfg;
}

TEST(ExperimentA, NoFeedbackMatchesCoinFlips) {
    // Without coupling every mode picks its sign independently: success 2 / 2^N.
    ExperimentConfig cfg = small_ring(4, 0.0, 1024);
    cfg.zeta_grid = {0.0};
    const RunSummary s = run_experiment_a(cfg);
    ASSERT_EQ(s.grid.size(), 1u);
    EXPECT_EQ(s.ground_energy, -8.0);
    const double p = 2.0 / 16.0;
    const double sigma = std::sqrt(p * (1.0 - p) / 1024.0);
    EXPECT_NEAR(s.grid[0].success.value, p, 4.0 * sigma);
    EXPECT_NEAR(s.grid[0].success.std_err, sigma, 0.2 * sigma);
}

TEST(ExperimentA, ErrorFromIndependentEnsembles) {
    ExperimentConfig cfg = small_ring(4, 0.1, 64);
    cfg.n_runs = 3;
    cfg.n_steps = 300;
    cfg.zeta_grid = {0.1};
    const RunSummary s = run_experiment_a(cfg);
    const IsingProblem ring = ring_afm(4);
    const GroundStates gs = brute_force_ground_state(ring);
    const std::uint64_t grid_seed = derive_seed(cfg.seed, 0);
    std::vector<double> fractions;
    for (std::size_t r = 0; r < cfg.n_runs; ++r) {
        RecordingConfig rec;
        rec.stride = cfg.n_steps;
        const TotalRunRecord run = run_total(ring, cfg.params, cfg.schedule, cfg.n_traj, cfg.n_steps,
                                             derive_seed(grid_seed, r), rec);
        std::size_t hits = 0;
        std::vector<int> spins(4);
        for (std::size_t k = 0; k < cfg.n_traj; ++k) {
            signs_from_x(run.final_state.alpha_row(k), run.final_state.beta_row(k), spins);
            hits += std::find(gs.configs.begin(), gs.configs.end(), SpinConfig(spins)) != gs.configs.end();
        }
        fractions.push_back(static_cast<double>(hits) / static_cast<double>(cfg.n_traj));
    }
    const double mean = std::accumulate(fractions.begin(), fractions.end(), 0.0) / 3.0;
    double var = 0.0;
    for (double f : fractions) {
        var += (f - mean) * (f - mean);
    }
    EXPECT_NEAR(s.grid[0].success.value, mean, 1e-12);
    EXPECT_NEAR(s.grid[0].success.std_err, std::sqrt(var / 2.0 / 3.0), 1e-12);
    EXPECT_EQ(s.grid[0].samples, 192u);
}

TEST(ExperimentA, GridOrderAndDeterminism) {
    ExperimentConfig cfg = small_ring(4, 0.0, 32);
    cfg.n_steps = 200;
    cfg.zeta_grid = {0.0, 0.1};
    cfg.t_max_list = {5.0, 10.0};
    const RunSummary a = run_experiment_a(cfg);
    const RunSummary b = run_experiment_a(cfg);
    ASSERT_EQ(a.grid.size(), 4u);
    EXPECT_EQ(a.grid[0].t_max, 5.0);
    EXPECT_EQ(a.grid[1].zeta, 0.1);
    EXPECT_EQ(a.grid[2].t_max, 10.0);
    for (std::size_t g = 0; g < 4; ++g) {
        EXPECT_EQ(a.grid[g].success.value, b.grid[g].success.value);
        EXPECT_EQ(a.grid[g].mean_energy, b.grid[g].mean_energy);
    }
}

TEST(ExperimentA, ConditionalMethodUsesOneReadoutPerRun) {
    ExperimentConfig cfg = small_ring(4, 0.1, 32);
    cfg.method = Method::kConditional;
    cfg.n_runs = 6;
    cfg.n_steps = 200;
    const RunSummary s = run_experiment_a(cfg);
    EXPECT_EQ(s.grid[0].samples, 6u);
    EXPECT_EQ(s.spins.size(), 6u);
    const double v = s.grid[0].success.value * 6.0;
    EXPECT_NEAR(v, std::round(v), 1e-12);
}

TEST(ExperimentB, DualRampMidpoint) {
    const CimParams p = rates();
    const double th = pump_threshold(p);
    const RampSchedule r{8.0, 0.0, 2.0 * th, 0.0, 0.3};
    EXPECT_DOUBLE_EQ(r.pump(4.0), th);
    EXPECT_DOUBLE_EQ(r.zeta(4.0), 0.15);
}

TEST(ExperimentB, ZeroFeedbackEqualsExperimentA) {
    ExperimentConfig cfg = small_ring(4, 0.0, 64);
    cfg.n_steps = 300;
    cfg.zeta_grid = {0.0};
    const RunSummary a = run_experiment_a(cfg);
    const RunSummary b = run_experiment_b(cfg);
    EXPECT_EQ(a.grid[0].success.value, b.grid[0].success.value);
    EXPECT_EQ(a.grid[0].mean_energy, b.grid[0].mean_energy);
}

TEST(ExperimentB, FeedbackRampHelpsRing) {
    ExperimentConfig cfg = small_ring(8, 0.0, 256);
    cfg.n_steps = 1500;
    cfg.schedule.t_max = 15.0;
    cfg.zeta_grid = {0.0, 0.2};
    const RunSummary s = run_experiment_b(cfg);
    const GridPoint &off = s.grid[0];
    const GridPoint &on = s.grid[1];
    EXPECT_GT(on.success.value - off.success.value,
              2.0 * std::hypot(on.success.std_err, off.success.std_err));
}

TEST(ExperimentC, EnergyDecreasesAndHistogramNormalized) {
    ExperimentConfig cfg;
    cfg.experiment = "c";
    cfg.problem = {ProblemKind::kRandom, 60, 0.2, 3, ""};
    cfg.params = rates(0.05);
    cfg.schedule = {10.0, 0.0, 3.0 * pump_threshold(cfg.params), 0.05, 0.05};
    cfg.n_traj = 64;
    cfg.n_steps = 1000;
    cfg.record_stride = 50;
    cfg.histogram.bins = 12;
    const RunSummary s = run_experiment_c(cfg);
    ASSERT_GE(s.energy_trace.size(), 3u);
    EXPECT_FALSE(s.has_ground);
    const EnergyRecord &first = s.energy_trace[1];
    const EnergyRecord &last = s.energy_trace.back();
    EXPECT_LT(last.mean, first.mean - 5.0 * std::hypot(first.std_err, last.std_err));
    double mass = 0.0;
    for (const HistogramBin &b : s.histogram) {
        mass += b.mass;
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_EQ(s.final_energies.size(), 64u);

    const RunSummary again = run_experiment_c(cfg);
    EXPECT_EQ(again.final_energies, s.final_energies);
}

TEST(ExperimentC, LowestBinNotBelowGround) {
    ExperimentConfig cfg = small_ring(16, 0.12, 128);
    cfg.experiment = "c";
    cfg.schedule.t_max = 20.0;
    cfg.n_steps = 2000;
    cfg.record_stride = 500;
    const RunSummary s = run_experiment_c(cfg);
    ASSERT_TRUE(s.has_ground);
    EXPECT_EQ(s.ground_energy, -32.0);
    ASSERT_FALSE(s.histogram.empty());
    EXPECT_GE(s.histogram.front().lower, s.ground_energy);
}

TEST(ExperimentC, RejectsConditional) {
    ExperimentConfig cfg = small_ring(4, 0.1, 8);
    cfg.experiment = "c";
    cfg.method = Method::kConditional;
    EXPECT_THROW(run_experiment(cfg), InputError);
    cfg.experiment = "z";
    EXPECT_THROW(run_experiment(cfg), InputError);
}

}  // namespace
}  // namespace cim
