#pragma once

#include <vector>

#include "parlang/common.hpp"

namespace parlang {

// One consistent Brownian path per replica on the substep grid of a single
// outer step: w[m] holds W_{m h/M} (d x replicas), w[0] = 0, and w[m] is the
// exact prefix sum of the first m increments. The same grid is shared
// read-only by every Picard iteration of the outer step.
struct BrownianGrid {
  int substeps = 0;          // M
  double substep_length = 0;  // u = h / M
  int dimension = 0;
  Index replicas = 1;
  std::vector<Matrix> w;  // size M + 1, each d x replicas

  static BrownianGrid zero(int substeps, double h, int dimension,
                           Index replicas = 1);
};

BrownianGrid sample_brownian_grid(int substeps, double h, int dimension,
                                  std::uint64_t rng_seed, Index replicas = 1);

// Correlated (xi^X, xi^P) driving pairs for the exponential Euler ULMC
// substeps: xi_x[m], xi_p[m] are d x replicas, m = 0..M-1, pairs at distinct
// m independent.
struct UlmcNoiseGrid {
  int substeps = 0;
  double gamma = 0;
  double substep_length = 0;
  int dimension = 0;
  Index replicas = 1;
  std::vector<Matrix> xi_x;  // size M
  std::vector<Matrix> xi_p;  // size M

  static UlmcNoiseGrid zero(int substeps, double gamma, double h,
                            int dimension, Index replicas = 1);
};

// Covariance of one (xi^X, xi^P) coordinate pair over a substep of length u:
//   Sigma_XX = (2/gamma) [u - (2/gamma)(1 - e^{-gamma u})
//                           + (1/(2 gamma))(1 - e^{-2 gamma u})]
//   Sigma_XP = (1/gamma) (1 - e^{-gamma u})^2
//   Sigma_PP = 1 - e^{-2 gamma u}
// Evaluated in expm1/series form: the bracket in Sigma_XX is
// O((gamma u)^3) and cancels catastrophically for small gamma u if computed
// naively.
Eigen::Matrix2d ulmc_noise_covariance(double gamma, double u);

// Lower-triangular Cholesky factor of ulmc_noise_covariance. Throws
// InternalPrecisionError if the matrix is numerically indefinite.
Eigen::Matrix2d ulmc_noise_cholesky(double gamma, double u);

UlmcNoiseGrid sample_ulmc_noise_grid(int substeps, double gamma, double h,
                                     int dimension, std::uint64_t rng_seed,
                                     Index replicas = 1);

}  // namespace parlang
