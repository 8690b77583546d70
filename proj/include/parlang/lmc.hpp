#pragma once

#include <optional>
#include <vector>

#include "parlang/common.hpp"
#include "parlang/noise.hpp"
#include "parlang/score.hpp"

namespace parlang {

// Full parameter bundle for one parallel LMC run.
struct GridSchedule {
  double h = 0;       // outer step
  int substeps = 0;   // M, parallel score queries per round
  int picard_depth = 0;  // K
  int outer_steps = 0;   // N
  double delta = 0;   // score accuracy budget
  double epsilon = 0; // target accuracy
};

// Planner from the explicit parameter display:
//   h = 1/(10 beta), delta = 2 sqrt(alpha) epsilon,
//   M = ceil(7 max{kappa d / eps^2, kappa^2}), K = ceil(3 ln M),
//   N = ceil(10 kappa ln(max{d ln kappa, e} / eps^2))          (default init)
//   N = ceil((1/(alpha h)) ln(2 kl0 / eps^2))                  (explicit kl0)
// Natural logarithms throughout; ceilings applied to every formula.
GridSchedule plan_lmc_params(double alpha, double beta, int d, double epsilon,
                             std::optional<double> kl0 = std::nullopt);

// Checks schedule invariants (beta h <= 1/10 and positive counts) against a
// target; run_parallel_lmc enforces this unless the caller overrides.
bool lmc_schedule_compliant(const GridSchedule& s, double beta);

struct SequentialRun {
  Matrix endpoint;            // d x replicas
  std::vector<Matrix> path;   // filled only when record_path is set
};

// Plain LMC reference: X_{n+1} = X_n - step s(X_n) + sqrt(2) dB_n.
// When `noise` is provided its substep length must equal `step` and it must
// carry at least `steps` increments; otherwise fresh noise is drawn from
// `rng_seed`. Ledger: `steps` rounds, `steps` evaluations (per grid point).
SequentialRun run_sequential_lmc(const Matrix& x0, const ScoreOracle& oracle,
                                 double step, int steps,
                                 const BrownianGrid* noise = nullptr,
                                 std::uint64_t rng_seed = 0,
                                 bool record_path = false);

struct PicardRun {
  std::vector<Matrix> grid;       // M + 1 entries, d x replicas
  std::vector<double> residuals;  // K entries: max_m mean_r ||dX_m||^2
};

// One outer step of parallelized LMC. Each of the K Picard iterations
// evaluates the oracle at grid points 0..M-1 as one batch (one round, M
// logical evaluations), then rebuilds the grid by a fixed-order prefix sum:
//   X^{(k+1)}_m = x_start - (h/M) sum_{m'<m} s(X^{(k)}_{m'}) + sqrt(2) W_m.
PicardRun picard_inner_lmc(const Matrix& x_start, const ScoreOracle& oracle,
                           double h, int substeps, int picard_depth,
                           const BrownianGrid& noise);

struct GaussianInit {
  Vector mean;
  double variance = 1.0;
};

struct ParallelRunResult {
  Matrix samples;  // d x replicas (positions)
  std::vector<std::vector<double>> residuals;  // per outer step
};

// N outer steps of picard_inner_lmc over independent replicated chains with
// fresh noise per step. Ledger: exactly N K rounds and N K M evaluations,
// independent of the replica count.
ParallelRunResult run_parallel_lmc(const TargetModel& target,
                                   const ScoreOracle& oracle,
                                   const GridSchedule& schedule,
                                   const GaussianInit& init, Index n_samples,
                                   std::uint64_t rng_seed,
                                   bool acknowledge_override = false);

// Default initialization N(x*, beta^{-1} I).
GaussianInit default_lmc_init(const TargetModel& target);

}  // namespace parlang
