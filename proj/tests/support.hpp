#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

#include "cim/density_oracle.hpp"
#include "cim/rng.hpp"

namespace cim::testing {

/// Random density matrix G G^dag / tr from a complex Ginibre matrix. With support < dim only the
/// leading support x support block is populated.
inline Matrix random_density(int dim, std::uint64_t seed, std::uint32_t index, int support = -1) {
    if (support < 0) {
        support = dim;
    }
    RandomStream stream(seed, index, 0, Substream::kTest);
    Matrix g = Matrix::Zero(dim, dim);
    for (int i = 0; i < support; ++i) {
        for (int j = 0; j < support; ++j) {
            const double re = stream.normal();
            g(i, j) = cplx(re, stream.normal());
        }
    }
    Matrix rho = g * g.adjoint();
    return rho / rho.trace();
}

/// Ito-to-Stratonovich drift correction -1/2 sum_{kl} dB_ij/drho_kl B_kl for B(rho) = H[c] rho,
/// written out entry by entry with rho's entries as independent variables:
///   dB_ij/drho_kl = c_ik d_jl + d_ik cd_lj - T d_ik d_jl - (c + cd)_lk rho_ij
inline Matrix index_sum_CH(const Matrix &c, const Matrix &rho) {
    const int d = static_cast<int>(rho.rows());
    const Matrix cd = c.adjoint();
    cplx T = 0.0;
    for (int p = 0; p < d; ++p) {
        for (int q = 0; q < d; ++q) {
            T += (c(q, p) + cd(q, p)) * rho(p, q);
        }
    }
    Matrix B = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            cplx v = -T * rho(i, j);
            for (int m = 0; m < d; ++m) {
                v += c(i, m) * rho(m, j) + rho(i, m) * cd(m, j);
            }
            B(i, j) = v;
        }
    }
    Matrix out = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            cplx v = 0.0;
            for (int k = 0; k < d; ++k) {
                for (int l = 0; l < d; ++l) {
                    cplx deriv = -(c(l, k) + cd(l, k)) * rho(i, j);
                    if (j == l) {
                        deriv += c(i, k);
                    }
                    if (i == k) {
                        deriv += cd(l, j);
                        if (j == l) {
                            deriv -= T;
                        }
                    }
                    v += deriv * B(k, l);
                }
            }
            out(i, j) = -0.5 * v;
        }
    }
    return out;
}

}  // namespace cim::testing
