#include "parlang/lmc.hpp"

#include <cmath>

namespace parlang {

namespace {

constexpr double kComplianceSlack = 1e-12;

// Shared Picard engine. `grid` is the contiguous trajectory, block m of
// width R holding X_m; `scores` is a d x (M R) scratch buffer. Returns the
// residual curve and leaves the final iterate in `grid`.
std::vector<double> picard_lmc_impl(Matrix& grid, Matrix& scores,
                                    const Matrix& x_start,
                                    const ScoreOracle& oracle, double h, int M,
                                    int K, const BrownianGrid& noise) {
  const Index d = x_start.rows();
  const Index r = x_start.cols();
  const double u = h / M;
  const double sqrt2 = std::sqrt(2.0);
  Matrix acc(d, r), tmp(d, r);
  std::vector<double> residuals;
  residuals.reserve(K);
  for (int k = 0; k < K; ++k) {
    // One adaptive round: scores at grid points 0..M-1 in a single batch.
    oracle.evaluate_into(grid.leftCols(M * r), scores, M);
    acc.setZero();
    double worst = 0.0;
    for (int m = 0; m <= M; ++m) {
      tmp = x_start - u * acc + sqrt2 * noise.w[m];
      auto block = grid.middleCols(static_cast<Index>(m) * r, r);
      worst = std::max(worst, (tmp - block).squaredNorm() / r);
      block = tmp;
      if (m < M) acc += scores.middleCols(static_cast<Index>(m) * r, r);
    }
    residuals.push_back(worst);
  }
  return residuals;
}

void check_noise_compatible(const BrownianGrid& noise, double step, int steps,
                            Index d, Index r) {
  if (std::abs(noise.substep_length - step) > 1e-15 * std::max(1.0, step) ||
      noise.substeps < steps || noise.dimension != d || noise.replicas != r)
    throw InvalidParameterError("noise grid incompatible with requested run");
}

}  // namespace

GridSchedule plan_lmc_params(double alpha, double beta, int d, double epsilon,
                             std::optional<double> kl0) {
  if (alpha <= 0 || beta < alpha)
    throw InvalidParameterError("need beta >= alpha > 0");
  if (epsilon <= 0 || epsilon >= 1)
    throw InvalidParameterError("epsilon must lie in (0, 1)");
  if (d < 1) throw InvalidParameterError("dimension must be >= 1");
  if (kl0 && *kl0 < 0) throw InvalidParameterError("kl0 must be >= 0");

  const double kappa = beta / alpha;
  const double eps2 = epsilon * epsilon;
  GridSchedule s;
  s.h = 1.0 / (10.0 * beta);
  s.delta = 2.0 * std::sqrt(alpha) * epsilon;
  s.epsilon = epsilon;
  s.substeps = static_cast<int>(
      std::ceil(7.0 * std::max(kappa * d / eps2, kappa * kappa)));
  s.picard_depth = static_cast<int>(std::ceil(3.0 * std::log(s.substeps)));
  s.picard_depth = std::max(s.picard_depth, 1);
  double n_real;
  if (kl0) {
    n_real = std::log(2.0 * *kl0 / eps2) / (alpha * s.h);
  } else {
    n_real = 10.0 * kappa *
             std::log(std::max(d * std::log(kappa), M_E) / eps2);
  }
  s.outer_steps = std::max(1, static_cast<int>(std::ceil(n_real)));
  return s;
}

bool lmc_schedule_compliant(const GridSchedule& s, double beta) {
  return s.h > 0 && s.substeps >= 1 && s.picard_depth >= 1 &&
         s.outer_steps >= 1 && beta * s.h <= 0.1 + kComplianceSlack;
}

SequentialRun run_sequential_lmc(const Matrix& x0, const ScoreOracle& oracle,
                                 double step, int steps,
                                 const BrownianGrid* noise,
                                 std::uint64_t rng_seed, bool record_path) {
  if (step < 0) throw InvalidParameterError("step must be >= 0");
  if (steps < 0) throw InvalidParameterError("steps must be >= 0");
  const Index d = x0.rows();
  const Index r = x0.cols();
  if (noise) check_noise_compatible(*noise, step, steps, d, r);

  SequentialRun run;
  run.endpoint = x0;
  if (record_path) run.path.push_back(x0);
  Matrix s(d, r), dw(d, r);
  const double sqrt2 = std::sqrt(2.0);
  const double fresh_scale = std::sqrt(step);
  for (int n = 0; n < steps; ++n) {
    oracle.evaluate_into(run.endpoint, s, 1);
    if (noise) {
      dw = noise->w[n + 1] - noise->w[n];
    } else {
      fill_standard_normal(dw, derive_seed(rng_seed, 0x1a7c, n));
      dw *= fresh_scale;
    }
    run.endpoint += -step * s + sqrt2 * dw;
    if (record_path) run.path.push_back(run.endpoint);
  }
  return run;
}

PicardRun picard_inner_lmc(const Matrix& x_start, const ScoreOracle& oracle,
                           double h, int substeps, int picard_depth,
                           const BrownianGrid& noise) {
  if (h <= 0 || substeps < 1 || picard_depth < 1)
    throw InvalidParameterError("invalid Picard parameters");
  const Index d = x_start.rows();
  const Index r = x_start.cols();
  if (noise.substeps != substeps || noise.dimension != d ||
      noise.replicas != r ||
      std::abs(noise.substep_length - h / substeps) > 1e-15)
    throw InvalidParameterError("noise grid incompatible with Picard step");

  Matrix grid(d, static_cast<Index>(substeps + 1) * r);
  for (int m = 0; m <= substeps; ++m)
    grid.middleCols(static_cast<Index>(m) * r, r) = x_start;
  Matrix scores(d, static_cast<Index>(substeps) * r);

  PicardRun run;
  run.residuals = picard_lmc_impl(grid, scores, x_start, oracle, h, substeps,
                                  picard_depth, noise);
  run.grid.reserve(substeps + 1);
  for (int m = 0; m <= substeps; ++m)
    run.grid.push_back(grid.middleCols(static_cast<Index>(m) * r, r));
  return run;
}

GaussianInit default_lmc_init(const TargetModel& target) {
  return GaussianInit{target.minimizer, 1.0 / target.beta};
}

ParallelRunResult run_parallel_lmc(const TargetModel& target,
                                   const ScoreOracle& oracle,
                                   const GridSchedule& schedule,
                                   const GaussianInit& init, Index n_samples,
                                   std::uint64_t rng_seed,
                                   bool acknowledge_override) {
  if (!lmc_schedule_compliant(schedule, target.beta) && !acknowledge_override)
    throw ScheduleViolationError(
        "schedule violates planner invariants; pass the override flag to run "
        "anyway");
  if (n_samples < 1) throw InvalidParameterError("need at least one replica");

  const Index d = target.dimension;
  const Index r = n_samples;
  const int M = schedule.substeps;

  Matrix x(d, r);
  fill_standard_normal(x, derive_seed(rng_seed, 0x1417));
  x *= std::sqrt(init.variance);
  x.colwise() += init.mean;

  Matrix grid(d, static_cast<Index>(M + 1) * r);
  Matrix scores(d, static_cast<Index>(M) * r);

  ParallelRunResult result;
  result.residuals.reserve(schedule.outer_steps);
  for (int n = 0; n < schedule.outer_steps; ++n) {
    const BrownianGrid noise = sample_brownian_grid(
        M, schedule.h, static_cast<int>(d), derive_seed(rng_seed, 0xb2, n), r);
    for (int m = 0; m <= M; ++m)
      grid.middleCols(static_cast<Index>(m) * r, r) = x;
    result.residuals.push_back(picard_lmc_impl(
        grid, scores, x, oracle, schedule.h, M, schedule.picard_depth, noise));
    x = grid.rightCols(r);
  }
  result.samples = std::move(x);
  return result;
}

}  // namespace parlang
