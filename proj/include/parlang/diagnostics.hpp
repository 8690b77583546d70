#pragma once

#include <vector>

#include "parlang/common.hpp"

namespace parlang {

struct GaussianFit {
  Vector mean;
  Matrix covariance;  // symmetric PSD (eigenvalues clipped at 0)
  Index sample_count = 0;
};

// Unbiased mean and (n-1)-denominator covariance of column samples.
GaussianFit empirical_gaussian_fit(const Matrix& samples);

GaussianFit gaussian_fit_from_moments(const Vector& mean,
                                      const Matrix& covariance,
                                      Index sample_count = 0);

// KL(fit1 || fit2), standard Gaussian closed form.
double gaussian_kl(const GaussianFit& fit1, const GaussianFit& fit2);

// Bures-Wasserstein W2 distance between the two Gaussians.
double gaussian_w2(const GaussianFit& fit1, const GaussianFit& fit2);

// TV <= sqrt(KL / 2), capped at 1.
double pinsker_tv_bound(double kl);

// W2 <= sqrt(2 KL / alpha) under an LSI with constant alpha.
double talagrand_w2_bound(double kl, double alpha);

// (1/2) sum |p_i - q_i| for normalized probability vectors.
double discrete_tv(const Vector& p, const Vector& q);

struct ResidualReport {
  std::vector<double> ratios;     // consecutive residual ratios
  double max_ratio_after_2 = 0;   // max ratio at indices k >= 2
  double floor = 1e-24;           // ratios below this residual are skipped
};

ResidualReport residual_ratio_report(const std::vector<double>& residuals,
                                     double floor = 1e-24);

}  // namespace parlang
