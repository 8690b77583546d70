#include "parlang/score.hpp"

#include <cmath>
#include <cstring>

namespace parlang {

namespace {
constexpr Index kScoreBlockColumns = 1024;

std::uint64_t hash_column(const double* data, Index n, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Index i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof(bits));
    h = splitmix64(h ^ bits);
  }
  return h;
}
}  // namespace

TargetModel make_gaussian_target(const Vector& mean,
                                 const Vector& diag_precision) {
  if (mean.size() != diag_precision.size())
    throw InvalidParameterError("mean and precision dimensions differ");
  if (mean.size() == 0) throw InvalidParameterError("empty target");
  if ((diag_precision.array() <= 0.0).any())
    throw InvalidParameterError("precisions must be positive");

  TargetModel t;
  t.dimension = static_cast<int>(mean.size());
  t.alpha = diag_precision.minCoeff();
  t.beta = diag_precision.maxCoeff();
  t.minimizer = mean;
  t.potential = [mean, diag_precision](const Vector& x) {
    return 0.5 * (diag_precision.array() * (x - mean).array().square()).sum();
  };
  t.score_batch = [mean, diag_precision](Eigen::Ref<const Matrix> x, Matrix& out) {
    parallel_for(x.cols(), kScoreBlockColumns, [&](Index begin, Index end) {
      out.middleCols(begin, end - begin) =
          diag_precision.asDiagonal() *
          (x.middleCols(begin, end - begin).colwise() - mean);
    });
  };
  return t;
}

TargetModel make_gaussian_mixture_target(const std::vector<Vector>& centers,
                                         double radius_bound,
                                         double noise_scale) {
  if (centers.size() < 2)
    throw InvalidParameterError("mixture needs at least two centers");
  if (noise_scale <= 0) throw InvalidParameterError("noise scale must be > 0");
  const Index d = centers.front().size();
  for (const auto& c : centers) {
    if (c.size() != d) throw InvalidParameterError("center dimension mismatch");
    if (c.norm() > radius_bound + 1e-12)
      throw InvalidParameterError("center norm exceeds radius bound");
  }
  const double var = noise_scale * noise_scale;
  const double r2 = (radius_bound * radius_bound) / var;
  Matrix C(d, static_cast<Index>(centers.size()));
  for (Index i = 0; i < C.cols(); ++i) C.col(i) = centers[i];

  TargetModel t;
  t.dimension = static_cast<int>(d);
  t.alpha = std::exp(-4.0 * r2) / var;
  t.beta = (1.0 + r2) / var;
  t.minimizer = Vector::Zero(d);  // symmetric built-ins only; advisory
  t.potential = [C, var, d](const Vector& x) {
    Eigen::ArrayXd energies =
        -(C.colwise() - x).colwise().squaredNorm().transpose().array() /
        (2.0 * var);
    const double emax = energies.maxCoeff();
    const double lse = emax + std::log((energies - emax).exp().sum());
    return -lse + std::log(static_cast<double>(C.cols())) +
           0.5 * d * std::log(2.0 * M_PI * var);
  };
  t.score_batch = [C, var](Eigen::Ref<const Matrix> x, Matrix& out) {
    parallel_for(x.cols(), kScoreBlockColumns, [&](Index begin, Index end) {
      Eigen::ArrayXd energies(C.cols());
      for (Index j = begin; j < end; ++j) {
        energies = -(C.colwise() - x.col(j))
                        .colwise()
                        .squaredNorm()
                        .transpose()
                        .array() /
                   (2.0 * var);
        const Eigen::ArrayXd w =
            (energies - energies.maxCoeff()).exp() /
            (energies - energies.maxCoeff()).exp().sum();
        out.col(j) = (x.col(j) - C * w.matrix()) / var;
      }
    });
  };
  return t;
}

ScoreOracle exact_score_oracle(const TargetModel& target, LedgerPtr ledger) {
  return ScoreOracle(target.score_batch, 0.0, std::move(ledger));
}

ScoreOracle perturb_score(const ScoreOracle& oracle, double delta,
                          std::uint64_t seed) {
  if (delta < 0) throw InvalidParameterError("delta must be >= 0");
  if (delta == 0.0)
    return ScoreOracle(oracle.raw_eval(), oracle.delta(), oracle.ledger());
  ScoreOracle::EvalFn base = oracle.raw_eval();
  auto eval = [base, delta, seed](Eigen::Ref<const Matrix> x, Matrix& out) {
    base(x, out);
    const Index d = x.rows();
    parallel_for(x.cols(), kScoreBlockColumns, [&](Index begin, Index end) {
      Vector dir(d);
      for (Index j = begin; j < end; ++j) {
        // cheap counter-based gaussian stream keyed on the query point
        std::uint64_t state = hash_column(x.col(j).data(), d, seed);
        auto uniform = [&state] {
          state = splitmix64(state);
          return (state >> 11) * 0x1.0p-53 + 0x1.0p-54;  // in (0, 1)
        };
        for (Index r = 0; r < d; r += 2) {
          const double radius = std::sqrt(-2.0 * std::log(uniform()));
          const double angle = 2.0 * M_PI * uniform();
          dir(r) = radius * std::cos(angle);
          if (r + 1 < d) dir(r + 1) = radius * std::sin(angle);
        }
        const double norm = dir.norm();
        if (norm == 0.0) {
          dir.setZero();
          dir(0) = 1.0;
        } else {
          dir /= norm;
        }
        out.col(j) += delta * dir;
      }
    });
  };
  return ScoreOracle(std::move(eval), oracle.delta() + delta, oracle.ledger());
}

}  // namespace parlang
