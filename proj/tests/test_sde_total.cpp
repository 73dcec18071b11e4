#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cim/comparison.hpp"
#include "cim/experiments.hpp"
#include "cim/sde_total.hpp"

namespace cim {
namespace {

CimParams ring_rates(double zeta = 0.0) { return {1.0, 0.1, 10.0, 0.1, zeta}; }
CimParams desk_rates() { return {0.9, 0.1, 2.0, 0.5, 0.0}; }

PhaseEnsemble filled(std::size_t n, std::size_t m, cplx a, cplx b) {
    PhaseEnsemble s = PhaseEnsemble::vacuum(n, m);
    std::fill(s.alpha.begin(), s.alpha.end(), a);
    std::fill(s.beta.begin(), s.beta.end(), b);
    return s;
}

TEST(TotalDrift, VacuumIsFixedPoint) {
    const IsingProblem ring = ring_afm(5);
    const PhaseEnsemble vac = PhaseEnsemble::vacuum(5, 3);
    for (double zeta : {0.0, 0.3}) {
        const DriftPair d = total_drift(vac, 200.0, zeta, ring_rates(zeta), ring);
        for (std::size_t k = 0; k < d.alpha.size(); ++k) {
            EXPECT_EQ(d.alpha[k], cplx(0.0));
            EXPECT_EQ(d.beta[k], cplx(0.0));
        }
    }
}

TEST(TotalDrift, SingleModeMatchesClassicalRhs) {
    const CimParams p = ring_rates();
    const IsingProblem single(1, {});
    for (double a : {-30.0, -1.0, 0.5, 12.0, 47.0}) {
        const DriftPair d = total_drift(filled(1, 1, a, a), 180.0, 0.0, p, single);
        const std::vector<double> av = {a};
        const double classical = classical_network_rhs(av, 180.0, p, single)[0];
        EXPECT_NEAR(d.alpha[0].real(), classical, 1e-12 * std::max(1.0, std::abs(classical)));
        EXPECT_EQ(d.alpha[0].imag(), 0.0);
        EXPECT_EQ(d.alpha[0], d.beta[0]);
    }
}

TEST(TotalDrift, FeedbackUsesDenseProduct) {
    const IsingProblem ring = ring_afm(3);
    const CimParams p = ring_rates(0.25);
    PhaseEnsemble s = PhaseEnsemble::vacuum(3, 1);
    s.alpha = {cplx(1.0, 0.2), cplx(-0.5, 0.1), cplx(2.0, -1.0)};
    s.beta = {cplx(0.7, -0.3), cplx(0.4, 0.0), cplx(-1.0, 0.5)};
    const double eps = 50.0;
    const DriftPair d = total_drift(s, eps, p.zeta, p, ring);
    for (std::size_t i = 0; i < 3; ++i) {
        cplx e = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            e += p.zeta * ring.J().at(i, j) * (s.alpha[j] + s.beta[j]);
        }
        const cplx expect_a = e - p.gamma() * s.alpha[i] + s.beta[i] * chi(s.alpha[i], eps, p);
        const cplx expect_b = e - p.gamma() * s.beta[i] + s.alpha[i] * chi(s.beta[i], eps, p);
        EXPECT_NEAR(std::abs(d.alpha[i] - expect_a), 0.0, 1e-13);
        EXPECT_NEAR(std::abs(d.beta[i] - expect_b), 0.0, 1e-13);
    }
}

TEST(StratDrift, ZeroKappaMatchesTotal) {
    CimParams p = ring_rates(0.1);
    p.kappa = 0.0;
    const IsingProblem ring = ring_afm(4);
    PhaseEnsemble s = filled(4, 2, cplx(0.3, 0.1), cplx(-0.2, 0.4));
    const DriftPair a = total_drift(s, 10.0, 0.1, p, ring);
    const DriftPair b = strat_drift(s, 10.0, 0.1, p, ring);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.beta, b.beta);
}

TEST(StratDrift, ShiftsLinearDamping) {
    const CimParams p = ring_rates();
    EXPECT_NEAR(p.gamma_prime(), 1.09975, 1e-14);
    const IsingProblem single(1, {});
    const PhaseEnsemble s = filled(1, 1, 2.0, 2.0);
    const DriftPair a = total_drift(s, 100.0, 0.0, p, single);
    const DriftPair b = strat_drift(s, 100.0, 0.0, p, single);
    EXPECT_NEAR((b.alpha[0] - a.alpha[0]).real(), (p.gamma() - p.gamma_prime()) * 2.0, 1e-13);
}

TEST(TotalNoise, VanishesWithoutChiAndFeedback) {
    const IsingProblem ring = ring_afm(3);
    const PhaseEnsemble vac = PhaseEnsemble::vacuum(3, 2);
    std::vector<double> g(2 * total_noise_width(3), 1.3);
    const DriftPair n = total_noise(vac, 0.0, 0.0, ring_rates(), ring, g);
    for (std::size_t k = 0; k < n.alpha.size(); ++k) {
        EXPECT_EQ(n.alpha[k], cplx(0.0));
        EXPECT_EQ(n.beta[k], cplx(0.0));
    }
}

TEST(TotalNoise, VarianceEqualsChi) {
    const CimParams p = ring_rates();
    const IsingProblem single(1, {});
    const std::size_t m = 1000000;
    const PhaseEnsemble vac = PhaseEnsemble::vacuum(1, m);
    std::vector<double> g(m * total_noise_width(1));
    RandomStream r(3, 0, 0, Substream::kTest);
    r.fill_normal(g);
    const double eps = 60.0;
    const DriftPair n = total_noise(vac, eps, 0.0, p, single, g);
    double sq = 0.0;
    for (const cplx &v : n.alpha) {
        sq += v.real() * v.real();
    }
    const double chi0 = chi(0.0, eps, p).real();
    const double var = sq / static_cast<double>(m);
    EXPECT_NEAR(var, chi0, 3.0 * chi0 * std::sqrt(2.0 / static_cast<double>(m)));
}

double feedback_noise_correlation(const IsingProblem &problem, std::size_t m) {
    const CimParams p = ring_rates(0.2);
    const std::size_t n = problem.size();
    const PhaseEnsemble vac = PhaseEnsemble::vacuum(n, m);
    std::vector<double> g(m * total_noise_width(n));
    RandomStream r(4, static_cast<std::uint32_t>(n), 0, Substream::kTest);
    r.fill_normal(g);
    const DriftPair d = total_noise(vac, 0.0, p.zeta, p, problem, g);
    double s01 = 0.0, s00 = 0.0, s11 = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double x0 = d.alpha[k * n].real();
        const double x1 = d.alpha[k * n + 1].real();
        s01 += x0 * x1;
        s00 += x0 * x0;
        s11 += x1 * x1;
    }
    return s01 / std::sqrt(s00 * s11);
}

TEST(TotalNoise, FeedbackCorrelationFollowsJJt) {
    const std::size_t m = 200000;
    // (J J^T)_{01} / sqrt((J J^T)_{00} (J J^T)_{11}): 0 for two coupled modes, 1/2 on a 3-ring.
    const std::vector<Coupling> pair = {{0, 1, -1.0}};
    EXPECT_NEAR(feedback_noise_correlation(IsingProblem(2, pair), m), 0.0, 3.0 / std::sqrt(double(m)));
    const double r = feedback_noise_correlation(ring_afm(3), m);
    EXPECT_NEAR(r, 0.5, 3.0 * (1.0 - 0.25) / std::sqrt(double(m)));
}

TEST(StepTotal, NoiselessDecayBelowThreshold) {
    const CimParams p = ring_rates();
    const IsingProblem single(1, {});
    const RampSchedule ramp = RampSchedule::constant(10.0, 0.5 * pump_threshold(p), 0.0);
    PhaseEnsemble s = filled(1, 1, 0.1, 0.1);
    TotalOptions opts;
    opts.noise = false;
    double last = 0.2;
    for (std::uint32_t step = 0; step < 500; ++step) {
        advance_total(s, 0.01, ramp, p, single, 1, step, opts);
        const double x = std::abs(s.x(0, 0));
        ASSERT_LT(x, last);
        last = x;
    }
    // Linearized decay rate gamma - kappa eps / gamma_p.
    const double rate = p.gamma() - p.kappa * ramp.pump_end / p.gamma_p;
    EXPECT_NEAR(last, 0.2 * std::exp(-rate * 5.0), 1e-6);
}

double noiseless_endpoint(double dt, TotalScheme scheme) {
    const CimParams p = desk_rates();
    const IsingProblem single(1, {});
    const RampSchedule ramp{2.0, 0.0, 3.0 * pump_threshold(p), 0.0, 0.0};
    PhaseEnsemble s = filled(1, 1, 0.5, 0.5);
    TotalOptions opts{scheme, false};
    const auto steps = static_cast<std::uint32_t>(std::llround(2.0 / dt));
    for (std::uint32_t k = 0; k < steps; ++k) {
        advance_total(s, dt, ramp, p, single, 1, k, opts);
    }
    return s.alpha[0].real();
}

TEST(StepTotal, DeterministicOrder) {
    const double e1 = noiseless_endpoint(0.02, TotalScheme::kStratonovichRK4);
    const double e2 = noiseless_endpoint(0.01, TotalScheme::kStratonovichRK4);
    const double e3 = noiseless_endpoint(0.005, TotalScheme::kStratonovichRK4);
    const double order_rk4 = std::log2(std::abs(e1 - e2) / std::abs(e2 - e3));
    EXPECT_NEAR(order_rk4, 4.0, 0.3);

    const double f1 = noiseless_endpoint(0.002, TotalScheme::kItoEuler);
    const double f2 = noiseless_endpoint(0.001, TotalScheme::kItoEuler);
    const double f3 = noiseless_endpoint(0.0005, TotalScheme::kItoEuler);
    const double order_em = std::log2(std::abs(f1 - f2) / std::abs(f2 - f3));
    EXPECT_NEAR(order_em, 1.0, 0.1);
}

TEST(StepTotal, ClassicalReduction) {
    const CimParams p = ring_rates(0.1);
    const IsingProblem ring = ring_afm(6);
    const RampSchedule ramp{5.0, 0.0, 2.0 * pump_threshold(p), 0.1, 0.1};
    PhaseEnsemble s = PhaseEnsemble::vacuum(6, 1);
    std::vector<double> ref = {0.3, -0.1, 0.25, 0.05, -0.4, 0.2};
    for (std::size_t i = 0; i < 6; ++i) {
        s.alpha[i] = s.beta[i] = ref[i];
    }
    TotalOptions opts;
    opts.noise = false;
    const double dt = 0.01;
    // The phase-space feedback zeta J (alpha + beta) is 2 zeta J alpha on the real alpha = beta manifold.
    CimParams classical = p;
    classical.zeta = 2.0 * p.zeta;
    auto rhs = [&](const std::vector<double> &a, double t) {
        return classical_network_rhs(a, ramp.pump(t), classical, ring);
    };
    for (std::uint32_t k = 0; k < 500; ++k) {
        const double t = k * dt;
        advance_total(s, dt, ramp, p, ring, 1, k, opts);
        const auto k1 = rhs(ref, t);
        std::vector<double> tmp(6);
        for (std::size_t i = 0; i < 6; ++i) tmp[i] = ref[i] + 0.5 * dt * k1[i];
        const auto k2 = rhs(tmp, t + 0.5 * dt);
        for (std::size_t i = 0; i < 6; ++i) tmp[i] = ref[i] + 0.5 * dt * k2[i];
        const auto k3 = rhs(tmp, t + 0.5 * dt);
        for (std::size_t i = 0; i < 6; ++i) tmp[i] = ref[i] + dt * k3[i];
        const auto k4 = rhs(tmp, t + dt);
        for (std::size_t i = 0; i < 6; ++i) {
            ref[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for (std::size_t i = 0; i < 6; ++i) {
            ASSERT_EQ(s.alpha[i], s.beta[i]);
            ASSERT_EQ(s.alpha[i].imag(), 0.0);
            ASSERT_NEAR(s.alpha[i].real(), ref[i], 1e-9 * std::max(1.0, std::abs(ref[i])));
        }
    }
}

TEST(StepTotal, BitIdenticalForEqualSeeds) {
    const CimParams p = ring_rates(0.1);
    const IsingProblem ring = ring_afm(8);
    const RampSchedule ramp{1.0, 0.0, 200.0, 0.1, 0.1};
    PhaseEnsemble a = PhaseEnsemble::vacuum(8, 100);
    PhaseEnsemble b = a;
    for (std::uint32_t k = 0; k < 20; ++k) {
        advance_total(a, 0.01, ramp, p, ring, 99, k);
        b = step_total(b, 0.01, ramp, p, ring, 99, k);
    }
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.beta, b.beta);
    PhaseEnsemble c = PhaseEnsemble::vacuum(8, 100);
    for (std::uint32_t k = 0; k < 20; ++k) {
        advance_total(c, 0.01, ramp, p, ring, 100, k);
    }
    EXPECT_NE(a.alpha, c.alpha);
}

TEST(StepTotal, TrajectoriesIndependentOfEnsembleSize) {
    const CimParams p = ring_rates(0.1);
    const IsingProblem ring = ring_afm(4);
    const RampSchedule ramp{1.0, 0.0, 200.0, 0.1, 0.1};
    PhaseEnsemble small = PhaseEnsemble::vacuum(4, 10);
    PhaseEnsemble large = PhaseEnsemble::vacuum(4, 300);
    for (std::uint32_t k = 0; k < 10; ++k) {
        advance_total(small, 0.01, ramp, p, ring, 5, k);
        advance_total(large, 0.01, ramp, p, ring, 5, k);
    }
    EXPECT_TRUE(std::equal(small.alpha.begin(), small.alpha.end(), large.alpha.begin()));
}

TEST(StepTotal, DivergenceIsDiagnosed) {
    const CimParams p = ring_rates();
    const IsingProblem single(1, {});
    PhaseEnsemble s = PhaseEnsemble::vacuum(1, 4);
    s.alpha[2] = s.beta[2] = 1e120;
    try {
        advance_total(s, 0.01, RampSchedule::constant(1.0, 10.0, 0.0), p, single, 1, 0);
        FAIL() << "expected divergence";
    } catch (const DivergenceError &e) {
        EXPECT_EQ(e.exit_code(), ExitCode::kDivergence);
        EXPECT_NE(std::string(e.what()).find("trajectory 2"), std::string::npos);
    }
}

TEST(RunTotal, BelowThresholdMeanIsZero) {
    const CimParams p = ring_rates();
    const IsingProblem single(1, {});
    const RampSchedule ramp{10.0, 0.0, 0.5 * pump_threshold(p), 0.0, 0.0};
    const TotalRunRecord run = run_total(single, p, ramp, 4000, 1000, 17);
    const StepRecord &last = run.steps.back();
    EXPECT_DOUBLE_EQ(last.t, 10.0);
    EXPECT_LT(std::abs(last.mean_x[0].real()), 3.0 * last.std_err[0]);
}

TEST(RunTotal, AboveThresholdClustersNearClassicalAmplitude) {
    const CimParams p = desk_rates();
    const IsingProblem single(1, {});
    const double eps = 2.0 * pump_threshold(p);
    const double alpha_s = dpo_steady_states(p, eps)[1].alpha_s;
    const RampSchedule ramp = RampSchedule::constant(15.0, eps, 0.0);
    RecordingConfig rec;
    rec.energies = false;
    const TotalRunRecord run = run_total(single, p, ramp, 2000, 3000, 23, rec);
    std::vector<double> mags;
    for (std::size_t k = 0; k < run.final_state.n_traj; ++k) {
        mags.push_back(std::abs(run.final_state.x(k, 0).real()));
    }
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    EXPECT_NEAR(mags[mags.size() / 2], 2.0 * alpha_s, 0.1 * 2.0 * alpha_s);
}

TEST(RunTotal, ConjugationSymmetry) {
    const CimParams p = desk_rates();
    const IsingProblem single(1, {});
    const RampSchedule ramp = RampSchedule::constant(3.0, 1.2 * pump_threshold(p), 0.0);
    RecordingConfig rec;
    rec.energies = false;
    const TotalRunRecord run = run_total(single, p, ramp, 20000, 600, 29, rec);
    const PhaseEnsemble &s = run.final_state;
    const double m = static_cast<double>(s.n_traj);
    cplx ma = 0.0, mb = 0.0;
    double va = 0.0, vx = 0.0;
    for (std::size_t k = 0; k < s.n_traj; ++k) {
        ma += s.alpha[k];
        mb += s.beta[k];
    }
    ma /= m;
    mb /= m;
    for (std::size_t k = 0; k < s.n_traj; ++k) {
        va += std::norm(s.alpha[k] - ma) + std::norm(s.beta[k] - mb);
        vx += std::pow(s.x(k, 0).imag(), 2);
    }
    const double se = std::sqrt(va / m / m);
    EXPECT_LT(std::abs(mb - std::conj(ma)), 3.0 * se);
    EXPECT_LE(std::abs(run.steps.back().mean_x[0].imag()), 3.0 * std::sqrt(vx / m / m));
}

TEST(RunTotal, RecordingStride) {
    const IsingProblem ring = ring_afm(4);
    const RampSchedule ramp{1.0, 0.0, 100.0, 0.0, 0.0};
    const TotalRunRecord run = run_total(ring, ring_rates(), ramp, 8, 250, 1);
    ASSERT_EQ(run.steps.size(), 126u);  // stride 2 from n_steps / 100, plus t = 0
    EXPECT_EQ(run.steps.front().t, 0.0);
    EXPECT_EQ(run.steps.back().t, 1.0);
    EXPECT_EQ(run.energies.size(), run.steps.size());
    RecordingConfig rec;
    rec.stride = 100;
    rec.snapshot_stride = 125;
    const TotalRunRecord sparse = run_total(ring, ring_rates(), ramp, 8, 250, 1, rec);
    EXPECT_EQ(sparse.steps.size(), 4u);  // 0, 100, 200, 250
    EXPECT_EQ(sparse.snapshots.size(), 3u);
    EXPECT_EQ(sparse.final_state.alpha, run.final_state.alpha);
}

TEST(RunTotal, FeedbackNeedsMeasurement) {
    CimParams p{1.0, 0.0, 10.0, 0.1, 0.0};
    const RampSchedule ramp{1.0, 0.0, 100.0, 0.0, 0.1};
    EXPECT_THROW(run_total(ring_afm(4), p, ramp, 4, 10, 1), InputError);
}

TEST(RunTotal, RingSuccessBeatsRandomGuessing) {
    const CimParams p = ring_rates(0.12);
    const IsingProblem ring = ring_afm(16);
    const RampSchedule ramp{20.0, 0.0, 2.0 * pump_threshold(p), 0.12, 0.12};
    RecordingConfig rec;
    rec.energies = false;
    const TotalRunRecord run = run_total(ring, p, ramp, 256, 2000, 31, rec);
    const GroundStates gs = brute_force_ground_state(ring);
    std::vector<SpinConfig> finals;
    for (std::size_t k = 0; k < run.final_state.n_traj; ++k) {
        std::vector<cplx> x(16);
        for (std::size_t i = 0; i < 16; ++i) {
            x[i] = run.final_state.x(k, i);
        }
        finals.push_back(spins_from_x(x));
    }
    const Estimate e = success_probability(finals, gs.configs);
    EXPECT_GT(e.value - 3.0 * e.std_err, 2.0 / 65536.0);
}

TEST(OracleComparison, ShortBelowThresholdRun) {
    MomentComparisonSetup setup;
    setup.params = desk_rates();
    setup.eps_p = 0.5 * pump_threshold(setup.params);
    setup.cutoff = 16;
    setup.n_traj = 20000;
    setup.dt = 0.01;
    setup.checkpoints = {0.5, 1.0};
    setup.seed = 3;
    const auto cps = compare_total_moments(setup);
    ASSERT_EQ(cps.size(), 2u);
    EXPECT_TRUE(moments_agree(cps));
    EXPECT_NEAR(cps[0].oracle.x, 0.0, 1e-12);
    EXPECT_GT(cps[1].oracle.n, 0.0);
}

}  // namespace
}  // namespace cim
