#include "parlang/noise.hpp"

#include <cmath>

namespace parlang {

namespace {
void check_grid_args(int substeps, double h, int dimension) {
  if (substeps < 1) throw InvalidParameterError("substeps must be >= 1");
  if (h <= 0) throw InvalidParameterError("outer step h must be > 0");
  if (dimension < 1) throw InvalidParameterError("dimension must be >= 1");
}
}  // namespace

BrownianGrid BrownianGrid::zero(int substeps, double h, int dimension,
                                Index replicas) {
  check_grid_args(substeps, h, dimension);
  BrownianGrid g;
  g.substeps = substeps;
  g.substep_length = h / substeps;
  g.dimension = dimension;
  g.replicas = replicas;
  g.w.assign(substeps + 1, Matrix::Zero(dimension, replicas));
  return g;
}

BrownianGrid sample_brownian_grid(int substeps, double h, int dimension,
                                  std::uint64_t rng_seed, Index replicas) {
  BrownianGrid g = BrownianGrid::zero(substeps, h, dimension, replicas);
  const double scale = std::sqrt(g.substep_length);
  Matrix increment(dimension, replicas);
  for (int m = 0; m < substeps; ++m) {
    fill_standard_normal(increment, derive_seed(rng_seed, 0xb401, m));
    g.w[m + 1] = g.w[m] + scale * increment;
  }
  return g;
}

Eigen::Matrix2d ulmc_noise_covariance(double gamma, double u) {
  if (gamma <= 0 || u <= 0)
    throw InvalidParameterError("gamma and u must be > 0");
  const double t = gamma * u;
  const double a = -std::expm1(-t);   // 1 - e^{-t}
  const double b = -std::expm1(-2 * t);  // 1 - e^{-2t}
  // g(t) = t - 2(1 - e^{-t}) + (1 - e^{-2t})/2 = t^3/3 - t^4/4 + ...
  double g;
  if (t < 0.05) {
    const double t3 = t * t * t;
    g = t3 * (1.0 / 3.0 + t * (-1.0 / 4.0 + t * (7.0 / 60.0 - t / 24.0)));
  } else {
    g = t - 2.0 * a + 0.5 * b;
  }
  Eigen::Matrix2d sigma;
  sigma(0, 0) = 2.0 * g / (gamma * gamma);
  sigma(0, 1) = sigma(1, 0) = a * a / gamma;
  sigma(1, 1) = b;
  return sigma;
}

Eigen::Matrix2d ulmc_noise_cholesky(double gamma, double u) {
  const Eigen::Matrix2d sigma = ulmc_noise_covariance(gamma, u);
  const double l11 = std::sqrt(sigma(0, 0));
  if (!(l11 > 0))
    throw InternalPrecisionError("ULMC noise covariance degenerate");
  const double l21 = sigma(1, 0) / l11;
  const double rem = sigma(1, 1) - l21 * l21;
  if (rem < 0)
    throw InternalPrecisionError("ULMC noise covariance numerically indefinite");
  Eigen::Matrix2d l = Eigen::Matrix2d::Zero();
  l(0, 0) = l11;
  l(1, 0) = l21;
  l(1, 1) = std::sqrt(rem);
  return l;
}

UlmcNoiseGrid UlmcNoiseGrid::zero(int substeps, double gamma, double h,
                                  int dimension, Index replicas) {
  check_grid_args(substeps, h, dimension);
  if (gamma <= 0) throw InvalidParameterError("gamma must be > 0");
  UlmcNoiseGrid g;
  g.substeps = substeps;
  g.gamma = gamma;
  g.substep_length = h / substeps;
  g.dimension = dimension;
  g.replicas = replicas;
  g.xi_x.assign(substeps, Matrix::Zero(dimension, replicas));
  g.xi_p.assign(substeps, Matrix::Zero(dimension, replicas));
  return g;
}

UlmcNoiseGrid sample_ulmc_noise_grid(int substeps, double gamma, double h,
                                     int dimension, std::uint64_t rng_seed,
                                     Index replicas) {
  UlmcNoiseGrid g = UlmcNoiseGrid::zero(substeps, gamma, h, dimension, replicas);
  const Eigen::Matrix2d l = ulmc_noise_cholesky(gamma, g.substep_length);
  Matrix z1(dimension, replicas), z2(dimension, replicas);
  for (int m = 0; m < substeps; ++m) {
    fill_standard_normal(z1, derive_seed(rng_seed, 0x783149, m, 1));
    fill_standard_normal(z2, derive_seed(rng_seed, 0x783149, m, 2));
    g.xi_x[m] = l(0, 0) * z1;
    g.xi_p[m] = l(1, 0) * z1 + l(1, 1) * z2;
  }
  return g;
}

}  // namespace parlang
