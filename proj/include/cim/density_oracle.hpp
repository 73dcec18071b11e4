#pragma once

// Truncated-Fock density-matrix integrator for one or two modes.
//
// Generator of the adiabatic DPO network (hbar = 1):
//   L rho = sum_i g [(a_i^dag)^2 - a_i^2, rho] + gamma D[a_i] rho + (kappa^2 / 4 gamma_p) D[a_i^2] rho,
// g = kappa eps_p / (2 gamma_p), D[c] rho = 2 c rho c^dag - c^dag c rho - rho c^dag c.
// Measurement operators c_j = sqrt(2 gamma_m) a_j; the feedback generator driven by noise j is
// Kt_j = f sum_i J_ij (a_i^dag - a_i) with f = zeta / sqrt(2 gamma_m).

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cim/error.hpp"
#include "cim/format.hpp"
#include "cim/model.hpp"

namespace cim {

using Matrix = Eigen::MatrixXcd;

struct DensityState {
    int n_modes = 1;
    int cutoff = 1;
    Matrix rho;
    double t = 0.0;

    int dimension() const noexcept { return rho.rows(); }

    static DensityState fock(int n_modes, int cutoff, std::span<const int> occupations) {
        require(n_modes == 1 || n_modes == 2, "the density oracle supports one or two modes");
        require(cutoff >= 2, "Fock cutoff must be at least 2");
        require(static_cast<int>(occupations.size()) == n_modes, "one occupation number per mode expected");
        int index = 0;
        for (int n : occupations) {
            require(n >= 0 && n < cutoff, "occupation number outside the truncated space");
            index = index * cutoff + n;
        }
        const int dim = n_modes == 1 ? cutoff : cutoff * cutoff;
        DensityState s{n_modes, cutoff, Matrix::Zero(dim, dim), 0.0};
        s.rho(index, index) = 1.0;
        return s;
    }

    static DensityState vacuum(int n_modes, int cutoff) {
        const std::vector<int> zeros(static_cast<std::size_t>(n_modes), 0);
        return fock(n_modes, cutoff, zeros);
    }
};

/// Model for one oracle integration. J is dense, row-major n_modes x n_modes (the diagonal is
/// allowed here, so a single mode can feed back onto itself with J = [[1]]).
struct OracleModel {
    CimParams params;
    double eps_p = 0.0;
    double zeta = 0.0;
    std::vector<double> J;
};

namespace detail {

inline Matrix annihilation(int cutoff) {
    Matrix a = Matrix::Zero(cutoff, cutoff);
    for (int n = 1; n < cutoff; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

inline Matrix kron(const Matrix &x, const Matrix &y) {
    Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        }
    }
    return out;
}

}  // namespace detail

struct OperatorSet {
    int n_modes = 1;
    int cutoff = 1;
    std::vector<Matrix> a;
    std::vector<Matrix> c;   ///< sqrt(2 gamma_m) a_i
    std::vector<Matrix> K;   ///< f (a_i^dag - a_i)
    std::vector<Matrix> Kt;  ///< sum_i J_ij K_i, paired with noise j
    Matrix H_s;              ///< i g sum_i [(a_i^dag)^2 - a_i^2]
    double gamma = 0.0;
    double two_photon = 0.0;  ///< kappa^2 / (4 gamma_p)
    // Non-Hermitian part of L: L rho = -G rho - rho G^dag + jumps.
    Matrix G;
    std::vector<Matrix> a2;

    int dimension() const noexcept { return a.empty() ? 0 : static_cast<int>(a[0].rows()); }

    Matrix x(int i) const { return a[i] + a[i].adjoint(); }
    Matrix number(int i) const { return a[i].adjoint() * a[i]; }

    static OperatorSet build(int n_modes, int cutoff, const OracleModel &model) {
        require(n_modes == 1 || n_modes == 2, "the density oracle supports one or two modes");
        require(cutoff >= 2, "Fock cutoff must be at least 2");
        model.params.validate();
        require(model.eps_p >= 0.0 && std::isfinite(model.eps_p), "pump amplitude must be nonnegative");
        require(model.zeta >= 0.0 && std::isfinite(model.zeta), "zeta must be nonnegative");
        require(model.J.size() == static_cast<std::size_t>(n_modes * n_modes), "J must be n_modes x n_modes");
        require(model.zeta == 0.0 || model.params.gamma_m > 0.0, "feedback needs gamma_m > 0");

        OperatorSet ops;
        ops.n_modes = n_modes;
        ops.cutoff = cutoff;
        const Matrix a1 = detail::annihilation(cutoff);
        const Matrix id = Matrix::Identity(cutoff, cutoff);
        if (n_modes == 1) {
            ops.a.push_back(a1);
        } else {
            ops.a.push_back(detail::kron(a1, id));
            ops.a.push_back(detail::kron(id, a1));
        }
        const CimParams &p = model.params;
        const double f = p.feedback_noise_scale(model.zeta);
        const double g = p.kappa * model.eps_p / (2.0 * p.gamma_p);
        ops.gamma = p.gamma();
        ops.two_photon = p.kappa * p.kappa / (4.0 * p.gamma_p);
        const int dim = static_cast<int>(ops.a[0].rows());
        ops.H_s = Matrix::Zero(dim, dim);
        Matrix M = Matrix::Zero(dim, dim);
        for (int i = 0; i < n_modes; ++i) {
            const Matrix &ai = ops.a[i];
            const Matrix ad = ai.adjoint();
            const Matrix a2 = ai * ai;
            ops.a2.push_back(a2);
            ops.c.push_back(std::sqrt(2.0 * p.gamma_m) * ai);
            ops.K.push_back(f * (ad - ai));
            ops.H_s += cplx(0.0, g) * (ad * ad - a2);
            M += ops.gamma * (ad * ai) + ops.two_photon * (a2.adjoint() * a2);
        }
        for (int j = 0; j < n_modes; ++j) {
            Matrix kt = Matrix::Zero(dim, dim);
            for (int i = 0; i < n_modes; ++i) {
                kt += model.J[static_cast<std::size_t>(i * n_modes + j)] * ops.K[i];
            }
            ops.Kt.push_back(kt);
        }
        ops.G = M + cplx(0.0, 1.0) * ops.H_s;
        return ops;
    }

    void check(const Matrix &rho) const {
        require(rho.rows() == dimension() && rho.cols() == dimension(), "density matrix dimension mismatch");
    }
};

inline void require_same_dimension(const Matrix &x, const Matrix &rho) {
    require(x.rows() == x.cols() && rho.rows() == rho.cols() && x.rows() == rho.rows(),
            "operator and density matrix dimensions differ");
}

inline void require_unit_trace(const Matrix &rho) {
    const cplx tr = rho.trace();
    require(std::abs(tr - 1.0) <= 1e-9, "density matrix trace must be 1 (got " + format_double(tr.real()) + ")");
}

/// D[c] rho = 2 c rho c^dag - c^dag c rho - rho c^dag c.
inline Matrix lindblad_D(const Matrix &c, const Matrix &rho) {
    require_same_dimension(c, rho);
    const Matrix cd = c.adjoint();
    const Matrix cdc = cd * c;
    return 2.0 * c * rho * cd - cdc * rho - rho * cdc;
}

namespace detail {

// Tr(x y) without forming the product.
inline cplx trace_product(const Matrix &x, const Matrix &y) { return x.transpose().cwiseProduct(y).sum(); }

// T = Tr[(c + c^dag) rho], kept complex-linear in rho.
inline cplx measurement_mean(const Matrix &c, const Matrix &rho) {
    return trace_product(c, rho) + trace_product(c.adjoint(), rho);
}

// B = c rho + rho c^dag - T rho; no trace precondition.
inline Matrix innovation_unchecked(const Matrix &c, const Matrix &rho) {
    return c * rho + rho * c.adjoint() - measurement_mean(c, rho) * rho;
}

inline Matrix commutator(const Matrix &x, const Matrix &y) { return x * y - y * x; }

}  // namespace detail

/// H[c] rho = c rho + rho c^dag - Tr[c rho + rho c^dag] rho.
inline Matrix innovation_H(const Matrix &c, const Matrix &rho) {
    require_same_dimension(c, rho);
    require_unit_trace(rho);
    const Matrix cr = c * rho;
    const Matrix rcd = rho * c.adjoint();
    return cr + rcd - (cr + rcd).trace() * rho;
}

/// Closed-form measurement correction
///   C^H = <c + c^dag> H[c] rho - c rho c^dag + <c^dag c> rho - (1/2) H[c c] rho.
inline Matrix strat_correction_CH(const Matrix &c, const Matrix &rho) {
    require_same_dimension(c, rho);
    require_unit_trace(rho);
    const Matrix cd = c.adjoint();
    const cplx T = (c * rho + rho * cd).trace();
    const cplx n = (cd * c * rho).trace();
    return T * innovation_H(c, rho) - c * rho * cd + n * rho - 0.5 * innovation_H(c * c, rho);
}

struct FeedbackCorrections {
    Matrix CHK;
    Matrix CKH;
    Matrix CK;
};

/// C^HK = -1/2 [K, c rho + rho c^dag - rho T]
/// C^KH = -1/2 (c [K,rho] + [K,rho] c^dag - T [K,rho] - rho Tr([K,rho] (c + c^dag)))
/// C^K  = -1/2 [K, [K, rho]]
inline FeedbackCorrections strat_corrections_feedback(const Matrix &c, const Matrix &K, const Matrix &rho) {
    require_same_dimension(c, rho);
    require_same_dimension(K, rho);
    require_unit_trace(rho);
    const Matrix cd = c.adjoint();
    const Matrix t = c + cd;
    const cplx T = (t * rho).trace();
    const Matrix Kr = detail::commutator(K, rho);
    FeedbackCorrections out;
    out.CHK = -0.5 * detail::commutator(K, c * rho + rho * cd - rho * T);
    out.CKH = -0.5 * (c * Kr + Kr * cd - T * Kr - rho * (Kr * t).trace());
    out.CK = -0.5 * detail::commutator(K, Kr);
    return out;
}

/// Unconditional generator L rho (pump, linear loss, two-photon loss).
inline Matrix apply_L(const OperatorSet &ops, const Matrix &rho) {
    Matrix out = -ops.G * rho - rho * ops.G.adjoint();
    for (int i = 0; i < ops.n_modes; ++i) {
        out += (2.0 * ops.gamma) * ops.a[i] * rho * ops.a[i].adjoint();
        out += (2.0 * ops.two_photon) * ops.a2[i] * rho * ops.a2[i].adjoint();
    }
    return out;
}

/// Ito conditional drift: L rho + sum_j [Kt_j, c_j rho + rho c_j^dag] + 1/2 sum_j [Kt_j, [Kt_j, rho]].
inline Matrix ito_drift(const OperatorSet &ops, const Matrix &rho) {
    Matrix out = apply_L(ops, rho);
    for (int j = 0; j < ops.n_modes; ++j) {
        const Matrix &kt = ops.Kt[j];
        out += detail::commutator(kt, ops.c[j] * rho + rho * ops.c[j].adjoint());
        out += 0.5 * detail::commutator(kt, detail::commutator(kt, rho));
    }
    return out;
}

/// Noise coefficient for noise j: H[c_j] rho + [Kt_j, rho] (with T_j taken from rho itself).
inline Matrix noise_coefficient(const OperatorSet &ops, int j, const Matrix &rho) {
    return detail::innovation_unchecked(ops.c[j], rho) + detail::commutator(ops.Kt[j], rho);
}

/// Directional derivative of noise_coefficient(j, .) at rho along delta.
inline Matrix noise_coefficient_derivative(const OperatorSet &ops, int j, const Matrix &rho, const Matrix &delta) {
    const Matrix &c = ops.c[j];
    const Matrix cd = c.adjoint();
    const cplx T = detail::measurement_mean(c, rho);
    const cplx dT = detail::measurement_mean(c, delta);
    return c * delta + delta * cd - T * delta - dT * rho + detail::commutator(ops.Kt[j], delta);
}

/// Stratonovich drift with the T_j B_j part kept in the drift:
///   L rho + sum_j (-c_j rho c_j^dag + <c_j^dag c_j> rho - 1/2 H[c_j c_j] rho + T_j B_j(rho)).
inline Matrix strat_drift(const OperatorSet &ops, const Matrix &rho) {
    Matrix out = apply_L(ops, rho);
    for (int j = 0; j < ops.n_modes; ++j) {
        const Matrix &c = ops.c[j];
        const Matrix cd = c.adjoint();
        const cplx T = detail::measurement_mean(c, rho);
        const cplx n = detail::trace_product(cd * c, rho);
        out += -(c * rho * cd) + n * rho - 0.5 * detail::innovation_unchecked(c * c, rho);
        out += T * noise_coefficient(ops, j, rho);
    }
    return out;
}

/// Drift of the total (noise-averaged) master equation; identical to the Ito conditional drift.
inline Matrix total_rhs(const OperatorSet &ops, const Matrix &rho) { return ito_drift(ops, rho); }

enum class ItoScheme {
    kEulerMaruyama,
    kMilstein,  ///< one-noise Milstein correction per channel; cross-channel terms are dropped
};

namespace detail {

inline void check_trace_drift(const Matrix &rho, double t) {
    const double drift = std::abs(rho.trace() - 1.0);
    if (!(drift <= 1e-3)) {
        throw NumericalError("density-matrix trace drifted by " + format_double(drift, 3) + " at t=" +
                             format_double(t) + "; reduce the time step");
    }
}

inline void check_increments(const OperatorSet &ops, std::span<const double> dW) {
    require(dW.size() == static_cast<std::size_t>(ops.n_modes), "one Wiener increment per mode expected");
}

}  // namespace detail

/// One step of the Ito conditional master equation with Wiener increments dW (one per mode).
inline DensityState ito_conditional_step(const DensityState &state, double dt, std::span<const double> dW,
                                         const OperatorSet &ops, ItoScheme scheme = ItoScheme::kEulerMaruyama) {
    ops.check(state.rho);
    detail::check_increments(ops, dW);
    require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
    const Matrix &rho = state.rho;
    Matrix next = rho + dt * ito_drift(ops, rho);
    for (int j = 0; j < ops.n_modes; ++j) {
        const Matrix B = noise_coefficient(ops, j, rho);
        next += dW[j] * B;
        if (scheme == ItoScheme::kMilstein) {
            next += 0.5 * (dW[j] * dW[j] - dt) * noise_coefficient_derivative(ops, j, rho, B);
        }
    }
    DensityState out{state.n_modes, state.cutoff, std::move(next), state.t + dt};
    detail::check_trace_drift(out.rho, out.t);
    return out;
}

/// One midpoint step of the Stratonovich conditional master equation, sharing dW with the Ito form.
inline DensityState strat_conditional_step(const DensityState &state, double dt, std::span<const double> dW,
                                           const OperatorSet &ops) {
    ops.check(state.rho);
    detail::check_increments(ops, dW);
    require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
    auto increment = [&](const Matrix &r) {
        Matrix d = dt * strat_drift(ops, r);
        for (int j = 0; j < ops.n_modes; ++j) {
            d += dW[j] * noise_coefficient(ops, j, r);
        }
        return d;
    };
    const Matrix mid = state.rho + 0.5 * increment(state.rho);
    DensityState out{state.n_modes, state.cutoff, state.rho + increment(mid), state.t + dt};
    detail::check_trace_drift(out.rho, out.t);
    return out;
}

/// RK4 step of the total master equation.
inline DensityState total_master_step(const DensityState &state, double dt, const OperatorSet &ops) {
    ops.check(state.rho);
    require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
    const Matrix &r = state.rho;
    const Matrix k1 = total_rhs(ops, r);
    const Matrix k2 = total_rhs(ops, r + 0.5 * dt * k1);
    const Matrix k3 = total_rhs(ops, r + 0.5 * dt * k2);
    const Matrix k4 = total_rhs(ops, r + dt * k3);
    DensityState out{state.n_modes, state.cutoff, r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), state.t + dt};
    const double drift = std::abs(out.rho.trace() - 1.0);
    if (!(drift <= 1e-6)) {
        throw NumericalError("total master equation lost trace normalization (|tr - 1| = " + format_double(drift, 3) +
                             ")");
    }
    return out;
}

struct QuadratureMoments {
    double x = 0.0;
    double x2 = 0.0;
    double n = 0.0;
};

/// <x>, <x^2>, <n> of mode i with x = a + a^dag.
inline QuadratureMoments quadrature_moments(const OperatorSet &ops, const Matrix &rho, int mode = 0) {
    ops.check(rho);
    require(mode >= 0 && mode < ops.n_modes, "mode index out of range");
    const Matrix x = ops.x(mode);
    const Matrix xr = x * rho;
    return {xr.trace().real(), (x * xr).trace().real(), (ops.number(mode) * rho).trace().real()};
}

/// Standalone single-mode moments (builds the ladder operator from the matrix size).
inline QuadratureMoments quadrature_moments(const Matrix &rho) {
    require(rho.rows() == rho.cols() && rho.rows() >= 2, "single-mode density matrix expected");
    const Matrix a = detail::annihilation(static_cast<int>(rho.rows()));
    const Matrix x = a + a.adjoint();
    const Matrix xr = x * rho;
    return {xr.trace().real(), (x * xr).trace().real(), (a.adjoint() * a * rho).trace().real()};
}

inline double frobenius_distance(const Matrix &x, const Matrix &y) { return (x - y).norm(); }

/// (1/2) sum |eigenvalues(x - y)| for Hermitian arguments.
inline double trace_distance(const Matrix &x, const Matrix &y) {
    const Matrix d = x - y;
    const Matrix h = 0.5 * (d + d.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double min_eigenvalue(const Matrix &rho) {
    const Matrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double hermiticity_error(const Matrix &rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

/// Diagnostics emitted per recorded oracle step.
struct OracleRecord {
    double t = 0.0;
    std::vector<QuadratureMoments> moments;  ///< per mode
    double trace_error = 0.0;
    double positivity_margin = 0.0;  ///< minimum eigenvalue
};

inline OracleRecord make_record(const OperatorSet &ops, const DensityState &state) {
    OracleRecord rec;
    rec.t = state.t;
    for (int i = 0; i < ops.n_modes; ++i) {
        rec.moments.push_back(quadrature_moments(ops, state.rho, i));
    }
    rec.trace_error = std::abs(state.rho.trace() - 1.0);
    rec.positivity_margin = min_eigenvalue(state.rho);
    return rec;
}

/// Integrates the total master equation from vacuum, recording at each of the given times.
inline std::vector<OracleRecord> integrate_total(const OperatorSet &ops, DensityState state, double dt,
                                                 std::span<const double> checkpoints) {
    require(dt > 0.0, "time step must be positive");
    std::vector<OracleRecord> out;
    for (double target : checkpoints) {
        require(target >= state.t - 1e-12, "checkpoints must be nondecreasing");
        const auto steps = static_cast<long>(std::llround((target - state.t) / dt));
        const double h = steps > 0 ? (target - state.t) / static_cast<double>(steps) : dt;
        for (long s = 0; s < steps; ++s) {
            state = total_master_step(state, h, ops);
        }
        state.t = target;
        out.push_back(make_record(ops, state));
    }
    return out;
}

}  // namespace cim
