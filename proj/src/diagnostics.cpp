#include "parlang/diagnostics.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace parlang {

namespace {

// Symmetrize and clip tiny negative eigenvalues (finite-sample artifacts).
Matrix sanitize_covariance(const Matrix& cov) {
  Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  Vector evals = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
}

Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  Vector evals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

GaussianFit empirical_gaussian_fit(const Matrix& samples) {
  const Index d = samples.rows();
  const Index n = samples.cols();
  if (n < d + 1)
    throw InvalidParameterError("need at least d+1 samples for a Gaussian fit");
  GaussianFit fit;
  fit.mean = samples.rowwise().mean();
  Matrix centered = samples.colwise() - fit.mean;
  fit.covariance =
      sanitize_covariance((centered * centered.transpose()) / double(n - 1));
  fit.sample_count = n;
  return fit;
}

GaussianFit gaussian_fit_from_moments(const Vector& mean,
                                      const Matrix& covariance,
                                      Index sample_count) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw InvalidParameterError("covariance shape mismatch");
  return GaussianFit{mean, sanitize_covariance(covariance), sample_count};
}

double gaussian_kl(const GaussianFit& fit1, const GaussianFit& fit2) {
  const Index d = fit1.mean.size();
  if (fit2.mean.size() != d) throw InvalidParameterError("dimension mismatch");
  Eigen::LLT<Matrix> llt2(fit2.covariance);
  Eigen::LLT<Matrix> llt1(fit1.covariance);
  if (llt2.info() != Eigen::Success || llt1.info() != Eigen::Success)
    throw InvalidParameterError("singular covariance in Gaussian KL");
  const Matrix solved = llt2.solve(fit1.covariance);
  const Vector dm = fit2.mean - fit1.mean;
  double logdet1 = 0, logdet2 = 0;
  for (Index i = 0; i < d; ++i) {
    logdet1 += 2.0 * std::log(llt1.matrixL()(i, i));
    logdet2 += 2.0 * std::log(llt2.matrixL()(i, i));
  }
  const double kl = 0.5 * (solved.trace() + dm.dot(llt2.solve(dm)) - d +
                           logdet2 - logdet1);
  return std::max(kl, 0.0);
}

double gaussian_w2(const GaussianFit& fit1, const GaussianFit& fit2) {
  if (fit2.mean.size() != fit1.mean.size())
    throw InvalidParameterError("dimension mismatch");
  const Matrix root2 = psd_sqrt(fit2.covariance);
  const Matrix cross = psd_sqrt(root2 * fit1.covariance * root2);
  const double w2sq = (fit1.mean - fit2.mean).squaredNorm() +
                      fit1.covariance.trace() + fit2.covariance.trace() -
                      2.0 * cross.trace();
  return std::sqrt(std::max(w2sq, 0.0));
}

double pinsker_tv_bound(double kl) {
  if (kl < 0) throw InvalidParameterError("KL must be >= 0");
  return std::min(std::sqrt(kl / 2.0), 1.0);
}

double talagrand_w2_bound(double kl, double alpha) {
  if (kl < 0) throw InvalidParameterError("KL must be >= 0");
  if (alpha <= 0) throw InvalidParameterError("alpha must be > 0");
  return std::sqrt(2.0 * kl / alpha);
}

double discrete_tv(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw InvalidParameterError("length mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

ResidualReport residual_ratio_report(const std::vector<double>& residuals,
                                     double floor) {
  ResidualReport report;
  report.floor = floor;
  report.max_ratio_after_2 = 0.0;
  for (std::size_t j = 0; j + 1 < residuals.size(); ++j) {
    const double prev = residuals[j];
    const double next = residuals[j + 1];
    const double ratio = prev > 0 ? next / prev : 0.0;
    report.ratios.push_back(ratio);
    // ratios[j] compares iterates k = j+2 and k = j+1; the decay claim
    // applies from k = 3 on, and only until the floating-point floor.
    if (j >= 1 && prev > floor && next > floor)
      report.max_ratio_after_2 = std::max(report.max_ratio_after_2, ratio);
  }
  return report;
}

}  // namespace parlang
