#include <doctest.h>

#include <cmath>

#include "parlang/diagnostics.hpp"
#include "parlang/lmc.hpp"

using namespace parlang;

namespace {

ScoreOracle quadratic_1d_oracle(LedgerPtr ledger = nullptr) {
  // V(x) = x^2/2
  return ScoreOracle(
      [](Eigen::Ref<const Matrix> x, Matrix& out) { out = x; }, 0.0,
      std::move(ledger));
}

}  // namespace

TEST_SUITE("lmc") {

TEST_CASE("planner reproduces the worked parameter set") {
  GridSchedule s = plan_lmc_params(1.0, 4.0, 10, 0.3);
  CHECK(s.h == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(s.delta == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(s.substeps == 3112);
  CHECK(s.picard_depth == 25);
  CHECK(s.outer_steps == 202);
  CHECK(lmc_schedule_compliant(s, 4.0));
}

TEST_CASE("planner guards and errors") {
  GridSchedule unit = plan_lmc_params(1.0, 1.0, 5, 0.5);
  CHECK(unit.outer_steps >= 1);  // max{., e} guard at kappa = 1

  CHECK_THROWS_AS(plan_lmc_params(0.0, 1.0, 5, 0.5), InvalidParameterError);
  CHECK_THROWS_AS(plan_lmc_params(1.0, 1.0, 5, 1.0), InvalidParameterError);
  CHECK_THROWS_AS(plan_lmc_params(2.0, 1.0, 5, 0.5), InvalidParameterError);
}

TEST_CASE("planner M scales by 4 when epsilon halves") {
  // regime where kappa d / eps^2 dominates kappa^2
  const double alpha = 1, beta = 2;
  const int d = 50;
  auto raw = [&](double eps) {
    return 7.0 * std::max(beta / alpha * d / (eps * eps),
                          std::pow(beta / alpha, 2));
  };
  CHECK(plan_lmc_params(alpha, beta, d, 0.2).substeps ==
        Index(std::ceil(raw(0.2))));
  CHECK(plan_lmc_params(alpha, beta, d, 0.1).substeps ==
        Index(std::ceil(raw(0.1))));
  CHECK(raw(0.1) == doctest::Approx(4 * raw(0.2)));
}

TEST_CASE("planner with explicit initialization kl") {
  GridSchedule s = plan_lmc_params(1.0, 4.0, 10, 0.3, 5.0);
  const double h = 0.025;
  CHECK(s.outer_steps ==
        int(std::ceil(std::log(2 * 5.0 / 0.09) / (1.0 * h))));
}

TEST_CASE("sequential reference matches hand iteration") {
  ScoreOracle oracle = quadratic_1d_oracle();
  BrownianGrid zero = BrownianGrid::zero(2, 0.1, 1);
  Matrix x0 = Matrix::Constant(1, 1, 1.0);
  SequentialRun run = run_sequential_lmc(x0, oracle, 0.05, 2, &zero);
  CHECK(run.endpoint(0, 0) == doctest::Approx(0.9025).epsilon(1e-14));

  BrownianGrid still;  // degenerate step-0 grid, built by hand
  still.substeps = 5;
  still.substep_length = 0.0;
  still.dimension = 1;
  still.w.assign(6, Matrix::Zero(1, 1));
  SequentialRun frozen = run_sequential_lmc(x0, oracle, 0.0, 5, &still);
  CHECK(frozen.endpoint(0, 0) == 1.0);
}

TEST_CASE("sequential reference rejects mismatched noise") {
  ScoreOracle oracle = quadratic_1d_oracle();
  BrownianGrid grid = BrownianGrid::zero(2, 0.1, 1);  // substep 0.05
  Matrix x0 = Matrix::Constant(1, 1, 1.0);
  CHECK_THROWS_AS(run_sequential_lmc(x0, oracle, 0.01, 2, &grid),
                  InvalidParameterError);
  CHECK_THROWS_AS(run_sequential_lmc(x0, oracle, 0.05, 9, &grid),
                  InvalidParameterError);
}

TEST_CASE("sequential chains stay centered on a symmetric target") {
  const Index reps = 20000;
  ScoreOracle oracle = quadratic_1d_oracle();
  Matrix x0 = Matrix::Zero(1, reps);
  SequentialRun run = run_sequential_lmc(x0, oracle, 0.01, 500, nullptr, 5);
  const double mean = run.endpoint.row(0).mean();
  CHECK(std::abs(mean) < 3.0 / std::sqrt(double(reps)));
}

TEST_CASE("picard iterates match the hand-computed grid") {
  ScoreOracle oracle = quadratic_1d_oracle();
  BrownianGrid zero = BrownianGrid::zero(2, 0.1, 1);
  Matrix x0 = Matrix::Constant(1, 1, 1.0);

  PicardRun one = picard_inner_lmc(x0, oracle, 0.1, 2, 1, zero);
  CHECK(one.grid[0](0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(one.grid[1](0, 0) == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(one.grid[2](0, 0) == doctest::Approx(0.90).epsilon(1e-14));

  PicardRun two = picard_inner_lmc(x0, oracle, 0.1, 2, 2, zero);
  CHECK(two.grid[1](0, 0) == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(two.grid[2](0, 0) == doctest::Approx(0.9025).epsilon(1e-14));
  CHECK(two.residuals.size() == 2);
}

TEST_CASE("picard fixed point equals the sequential endpoint") {
  ScoreOracle oracle = quadratic_1d_oracle();
  const int M = 8;
  const double h = 0.1;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    BrownianGrid noise = sample_brownian_grid(M, h, 1, seed, 4);
    Matrix x0 = Matrix::Random(1, 4);
    PicardRun par = picard_inner_lmc(x0, oracle, h, M, M + 1, noise);
    SequentialRun seq = run_sequential_lmc(x0, oracle, h / M, M, &noise);
    CHECK((par.grid[M] - seq.endpoint).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("single substep stabilizes after the first iteration") {
  ScoreOracle oracle = quadratic_1d_oracle();
  BrownianGrid noise = sample_brownian_grid(1, 0.05, 1, 13);
  Matrix x0 = Matrix::Constant(1, 1, 0.7);
  PicardRun run = picard_inner_lmc(x0, oracle, 0.05, 1, 4, noise);
  for (std::size_t k = 1; k < run.residuals.size(); ++k)
    CHECK(run.residuals[k] == 0.0);
}

TEST_CASE("residual decay under beta h = 1/10") {
  Vector prec(2);
  prec << 1, 4;
  TargetModel target = make_gaussian_target(Vector::Zero(2), prec);
  ScoreOracle oracle = exact_score_oracle(target, nullptr);
  const double h = 0.025;  // beta h = 0.1
  const int M = 16, K = 8;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    BrownianGrid noise = sample_brownian_grid(M, h, 2, seed);
    Matrix x0 = Matrix::Random(2, 1) * 2.0;
    PicardRun run = picard_inner_lmc(x0, oracle, h, M, K, noise);
    ResidualReport report = residual_ratio_report(run.residuals);
    CHECK(report.max_ratio_after_2 <= 0.1);
  }
}

TEST_CASE("parallel run ledger and schedule enforcement") {
  Vector prec(2);
  prec << 1, 4;
  TargetModel target = make_gaussian_target(Vector::Zero(2), prec);
  auto ledger = std::make_shared<QueryLedger>();
  ScoreOracle oracle = exact_score_oracle(target, ledger);

  GridSchedule s;
  s.h = 0.025;
  s.substeps = 6;
  s.picard_depth = 4;
  s.outer_steps = 5;
  s.epsilon = 0.3;
  ParallelRunResult run = run_parallel_lmc(target, oracle, s,
                                           default_lmc_init(target), 32, 9,
                                           /*acknowledge_override=*/true);
  CHECK(ledger->rounds() == 5 * 4);
  CHECK(ledger->evaluations() == 5 * 4 * 6);
  CHECK(run.samples.cols() == 32);
  CHECK(run.residuals.size() == 5);

  GridSchedule bad = s;
  bad.h = 0.5;  // beta h = 2 violates the compliance bound
  CHECK_THROWS_AS(run_parallel_lmc(target, oracle, bad,
                                   default_lmc_init(target), 8, 9, false),
                  ScheduleViolationError);
  CHECK_NOTHROW(run_parallel_lmc(target, oracle, bad,
                                 default_lmc_init(target), 8, 9, true));
}

TEST_CASE("results are bit-identical across worker counts") {
  Vector prec(2);
  prec << 1, 4;
  TargetModel target = make_gaussian_target(Vector::Zero(2), prec);
  ScoreOracle oracle = exact_score_oracle(target, nullptr);
  GridSchedule s;
  s.h = 0.025;
  s.substeps = 8;
  s.picard_depth = 4;
  s.outer_steps = 6;
  s.epsilon = 0.3;

  set_num_threads(1);
  Matrix one = run_parallel_lmc(target, oracle, s, default_lmc_init(target),
                                4096, 123, true)
                   .samples;
  set_num_threads(4);
  Matrix four = run_parallel_lmc(target, oracle, s, default_lmc_init(target),
                                 4096, 123, true)
                    .samples;
  set_num_threads(1);
  CHECK((one - four).norm() == 0.0);
}

}  // TEST_SUITE
