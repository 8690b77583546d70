#include "parlang/ulmc.hpp"

#include <cmath>

namespace parlang {

namespace {

constexpr double kComplianceSlack = 1e-12;

struct SubstepCoefficients {
  double decay;      // e^{-gamma u}
  double p_gain;     // (1 - e^{-gamma u}) / gamma
  double score_x;    // (u - p_gain) / gamma
  double score_p;    // p_gain

  SubstepCoefficients(double gamma, double u) {
    const double a = -std::expm1(-gamma * u);
    decay = 1.0 - a;
    p_gain = a / gamma;
    score_x = (u - p_gain) / gamma;
    score_p = p_gain;
  }
};

std::vector<double> picard_ulmc_impl(Matrix& grid_x, Matrix& grid_p,
                                     Matrix& scores, const Matrix& x_start,
                                     const Matrix& p_start,
                                     const ScoreOracle& oracle, double h,
                                     int M, int K, double gamma,
                                     const UlmcNoiseGrid& noise) {
  const Index r = x_start.cols();
  const double u = h / M;
  const SubstepCoefficients c(gamma, u);
  Matrix tmp_x(x_start.rows(), r);
  std::vector<double> residuals;
  residuals.reserve(K);
  for (int k = 0; k < K; ++k) {
    oracle.evaluate_into(grid_x.leftCols(M * r), scores, M);
    double worst = 0.0;
    grid_p.leftCols(r) = p_start;
    for (int m = 0; m < M; ++m) {
      auto x_m = grid_x.middleCols(static_cast<Index>(m) * r, r);
      auto p_m = grid_p.middleCols(static_cast<Index>(m) * r, r);
      auto s_m = scores.middleCols(static_cast<Index>(m) * r, r);
      tmp_x = x_m + c.p_gain * p_m - c.score_x * s_m + noise.xi_x[m];
      grid_p.middleCols(static_cast<Index>(m + 1) * r, r) =
          c.decay * p_m - c.score_p * s_m + noise.xi_p[m];
      auto x_next = grid_x.middleCols(static_cast<Index>(m + 1) * r, r);
      worst = std::max(worst, (tmp_x - x_next).squaredNorm() / r);
      x_next = tmp_x;
    }
    residuals.push_back(worst);
  }
  return residuals;
}

}  // namespace

UlmcSchedule plan_ulmc_params(double alpha, double beta, int d, double epsilon,
                              const UlmcPlannerConstants& constants) {
  if (alpha <= 0 || beta < alpha)
    throw InvalidParameterError("need beta >= alpha > 0");
  if (epsilon <= 0 || epsilon >= 1)
    throw InvalidParameterError("epsilon must lie in (0, 1)");
  if (d < 1) throw InvalidParameterError("dimension must be >= 1");

  const double kappa = beta / alpha;
  const double eps2 = epsilon * epsilon;
  UlmcSchedule s;
  s.constants = constants;
  s.epsilon = epsilon;
  s.h = constants.c_h / std::sqrt(beta);
  s.gamma = std::sqrt(8.0 * beta);
  s.delta = constants.c_delta * std::sqrt(alpha) * epsilon /
            std::sqrt(std::log(d + 2.0));
  s.substeps = static_cast<int>(
      std::ceil(constants.c_M * std::sqrt(kappa * d) *
                std::log(kappa * d / eps2 + M_E) / epsilon));
  s.picard_depth = static_cast<int>(
      std::ceil(constants.c_K * std::log(kappa * d / eps2 + M_E)));
  s.outer_steps = static_cast<int>(
      std::ceil(constants.c_N * kappa * std::log(d / eps2 + M_E) *
                std::log(d + 2.0)));
  return s;
}

bool ulmc_schedule_compliant(const UlmcSchedule& s, double beta) {
  return s.h > 0 && s.substeps >= 1 && s.picard_depth >= 1 &&
         s.outer_steps >= 1 && s.gamma > 0 &&
         std::sqrt(beta) * s.h <= 0.1 + kComplianceSlack;
}

PhaseRun run_sequential_ulmc(const Matrix& x0, const Matrix& p0,
                             const ScoreOracle& oracle, double gamma,
                             double step, int steps,
                             const UlmcNoiseGrid* noise,
                             std::uint64_t rng_seed, bool record_path) {
  if (gamma <= 0 || step <= 0)
    throw InvalidParameterError("gamma and step must be > 0");
  if (x0.rows() != p0.rows() || x0.cols() != p0.cols())
    throw InvalidParameterError("position/momentum shape mismatch");
  const Index d = x0.rows();
  const Index r = x0.cols();
  if (noise) {
    if (std::abs(noise->substep_length - step) > 1e-15 ||
        std::abs(noise->gamma - gamma) > 1e-15 || noise->substeps < steps ||
        noise->dimension != d || noise->replicas != r)
      throw InvalidParameterError("noise grid incompatible with requested run");
  }

  const SubstepCoefficients c(gamma, step);
  Eigen::Matrix2d chol;
  if (!noise) chol = ulmc_noise_cholesky(gamma, step);

  PhaseRun run;
  run.x = x0;
  run.p = p0;
  if (record_path) {
    run.x_path.push_back(x0);
    run.p_path.push_back(p0);
  }
  Matrix s(d, r), xi_x(d, r), xi_p(d, r), z1(d, r), z2(d, r), new_x(d, r);
  for (int n = 0; n < steps; ++n) {
    oracle.evaluate_into(run.x, s, 1);
    if (noise) {
      xi_x = noise->xi_x[n];
      xi_p = noise->xi_p[n];
    } else {
      fill_standard_normal(z1, derive_seed(rng_seed, 0x51, n, 1));
      fill_standard_normal(z2, derive_seed(rng_seed, 0x51, n, 2));
      xi_x = chol(0, 0) * z1;
      xi_p = chol(1, 0) * z1 + chol(1, 1) * z2;
    }
    new_x = run.x + c.p_gain * run.p - c.score_x * s + xi_x;
    run.p = c.decay * run.p - c.score_p * s + xi_p;
    run.x = new_x;
    if (record_path) {
      run.x_path.push_back(run.x);
      run.p_path.push_back(run.p);
    }
  }
  return run;
}

UlmcPicardRun picard_inner_ulmc(const Matrix& x_start, const Matrix& p_start,
                                const ScoreOracle& oracle, double h,
                                int substeps, int picard_depth, double gamma,
                                const UlmcNoiseGrid& noise) {
  if (h <= 0 || substeps < 1 || picard_depth < 1 || gamma <= 0)
    throw InvalidParameterError("invalid Picard parameters");
  const Index d = x_start.rows();
  const Index r = x_start.cols();
  if (noise.substeps != substeps || noise.dimension != d ||
      noise.replicas != r ||
      std::abs(noise.substep_length - h / substeps) > 1e-15)
    throw InvalidParameterError("noise grid incompatible with Picard step");

  Matrix grid_x(d, static_cast<Index>(substeps + 1) * r);
  Matrix grid_p(d, static_cast<Index>(substeps + 1) * r);
  for (int m = 0; m <= substeps; ++m) {
    grid_x.middleCols(static_cast<Index>(m) * r, r) = x_start;
    grid_p.middleCols(static_cast<Index>(m) * r, r) = p_start;
  }
  Matrix scores(d, static_cast<Index>(substeps) * r);

  UlmcPicardRun run;
  run.residuals =
      picard_ulmc_impl(grid_x, grid_p, scores, x_start, p_start, oracle, h,
                       substeps, picard_depth, gamma, noise);
  run.x_grid.reserve(substeps + 1);
  run.p_grid.reserve(substeps + 1);
  for (int m = 0; m <= substeps; ++m) {
    run.x_grid.push_back(grid_x.middleCols(static_cast<Index>(m) * r, r));
    run.p_grid.push_back(grid_p.middleCols(static_cast<Index>(m) * r, r));
  }
  return run;
}

ParallelRunResult run_parallel_ulmc(const TargetModel& target,
                                    const ScoreOracle& oracle,
                                    const UlmcSchedule& schedule,
                                    Index n_samples, std::uint64_t rng_seed,
                                    bool acknowledge_override) {
  if (!ulmc_schedule_compliant(schedule, target.beta) && !acknowledge_override)
    throw ScheduleViolationError(
        "schedule violates planner invariants; pass the override flag to run "
        "anyway");
  if (n_samples < 1) throw InvalidParameterError("need at least one replica");

  const Index d = target.dimension;
  const Index r = n_samples;
  const int M = schedule.substeps;

  Matrix x(d, r), p(d, r);
  fill_standard_normal(x, derive_seed(rng_seed, 0xa11));
  x *= std::sqrt(1.0 / target.beta);
  x.colwise() += target.minimizer;
  fill_standard_normal(p, derive_seed(rng_seed, 0xa12));

  Matrix grid_x(d, static_cast<Index>(M + 1) * r);
  Matrix grid_p(d, static_cast<Index>(M + 1) * r);
  Matrix scores(d, static_cast<Index>(M) * r);

  ParallelRunResult result;
  result.residuals.reserve(schedule.outer_steps);
  for (int n = 0; n < schedule.outer_steps; ++n) {
    const UlmcNoiseGrid noise = sample_ulmc_noise_grid(
        M, schedule.gamma, schedule.h, static_cast<int>(d),
        derive_seed(rng_seed, 0xc4, n), r);
    for (int m = 0; m <= M; ++m) {
      grid_x.middleCols(static_cast<Index>(m) * r, r) = x;
      grid_p.middleCols(static_cast<Index>(m) * r, r) = p;
    }
    result.residuals.push_back(
        picard_ulmc_impl(grid_x, grid_p, scores, x, p, oracle, schedule.h, M,
                         schedule.picard_depth, schedule.gamma, noise));
    x = grid_x.rightCols(r);
    p = grid_p.rightCols(r);
  }
  result.samples = std::move(x);
  return result;
}

}  // namespace parlang
