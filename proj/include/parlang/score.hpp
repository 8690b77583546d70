#pragma once

#include <functional>
#include <vector>

#include "parlang/common.hpp"

namespace parlang {

// A continuous target pi ~ exp(-V) with known regularity constants.
// `score_batch` evaluates grad V columnwise: out.col(j) = grad V(x.col(j)).
struct TargetModel {
  int dimension = 0;
  double alpha = 0.0;  // LSI / strong-convexity constant
  double beta = 0.0;   // smoothness
  Vector minimizer;
  std::function<double(const Vector&)> potential;
  std::function<void(Eigen::Ref<const Matrix>, Matrix&)> score_batch;

  double condition_number() const { return beta / alpha; }

  Vector score(const Vector& x) const {
    Matrix out(x.size(), 1);
    score_batch(x, out);
    return out.col(0);
  }
};

// Product-form Gaussian target: V(x) = sum_i lambda_i (x_i - m_i)^2 / 2.
TargetModel make_gaussian_target(const Vector& mean,
                                 const Vector& diag_precision);

// Uniform mixture of Gaussians N(c_i, scale^2 I) with all ||c_i|| <= R.
// alpha is a conservative Holley--Stroock-style estimate exp(-4 (R/scale)^2)
// / scale^2; beta = (1 + (R/scale)^2) / scale^2. Both err on the safe side:
// schedules planned from them are longer than necessary, never too short.
TargetModel make_gaussian_mixture_target(const std::vector<Vector>& centers,
                                         double radius_bound,
                                         double noise_scale = 1.0);

// A delta-accurate score oracle: ||evaluate(x) - grad V(x)|| <= delta for
// every x. Batch evaluation is the primary interface; a batch of B points is
// one adaptive round and B evaluations in the ledger.
class ScoreOracle {
 public:
  using EvalFn = std::function<void(Eigen::Ref<const Matrix>, Matrix&)>;

  ScoreOracle(EvalFn eval, double delta, LedgerPtr ledger)
      : eval_(std::move(eval)), delta_(delta), ledger_(std::move(ledger)) {
    if (delta < 0) throw InvalidParameterError("delta must be >= 0");
  }

  Matrix evaluate(Eigen::Ref<const Matrix> points) const {
    Matrix out(points.rows(), points.cols());
    evaluate_into(points, out, points.cols());
    return out;
  }

  // Same batch semantics, but with an explicit logical evaluation count:
  // replicated chains query replicas x grid-points columns while the
  // adaptive-complexity model charges only the grid points.
  void evaluate_into(Eigen::Ref<const Matrix> points, Matrix& out,
                     std::int64_t logical_evaluations) const {
    if (ledger_) ledger_->record(1, logical_evaluations);
    eval_(points, out);
  }

  double delta() const { return delta_; }
  const LedgerPtr& ledger() const { return ledger_; }
  const EvalFn& raw_eval() const { return eval_; }

 private:
  EvalFn eval_;
  double delta_;
  LedgerPtr ledger_;
};

// Exact score oracle of a target (delta = 0).
ScoreOracle exact_score_oracle(const TargetModel& target, LedgerPtr ledger);

// Wraps an oracle so every output is displaced by a vector of norm exactly
// `delta` whose direction is a seeded deterministic function of the query
// point. Repeated calls at the same point agree bit for bit.
ScoreOracle perturb_score(const ScoreOracle& oracle, double delta,
                          std::uint64_t seed);

}  // namespace parlang
