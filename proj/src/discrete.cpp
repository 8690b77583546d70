#include "parlang/discrete.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace parlang {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr Index kOracleBlockColumns = 4096;

void check_enum_size(int n) {
  if (n < 1 || n > kMaxEnumerationBits)
    throw InvalidParameterError("enumeration supports 1 <= n <= 20");
}

double log_sum_exp(const Vector& v) {
  const double vmax = v.maxCoeff();
  if (!std::isfinite(vmax)) return vmax;
  return vmax + std::log((v.array() - vmax).exp().sum());
}

// -1, 0, +1 classification of a tilt entry under the magnitude cap.
int tilt_branch(double w) {
  if (w >= kTiltMagnitudeCap) return 1;
  if (w <= -kTiltMagnitudeCap) return -1;
  return 0;
}

// Matrix of atom signs, column index = atom, row = coordinate.
Matrix sign_matrix(int n) {
  const Index atoms = Index(1) << n;
  Matrix s(n, atoms);
  for (Index a = 0; a < atoms; ++a)
    for (int i = 0; i < n; ++i) s(i, a) = (a >> i) & 1 ? 1.0 : -1.0;
  return s;
}

std::uint64_t hash_tilt(const double* data, Index n, std::uint64_t seed,
                        Index subst_index = -1, double subst_value = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Index i = 0; i < n; ++i) {
    const double v = i == subst_index ? subst_value : data[i];
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h = splitmix64(h ^ bits);
  }
  return h;
}

double signed_eps(std::uint64_t hash, double eps) {
  return (hash & 1) ? eps : -eps;
}

}  // namespace

// ---------------------------------------------------------------------------
// HypercubeDistribution

HypercubeDistribution HypercubeDistribution::from_log_weights(
    int n, Vector log_weights) {
  check_enum_size(n);
  if (log_weights.size() != (Index(1) << n))
    throw InvalidParameterError("log-weight table has wrong size");
  const double total = log_sum_exp(log_weights);
  if (!std::isfinite(total))
    throw InvalidParameterError("distribution has no mass");
  HypercubeDistribution mu;
  mu.n = n;
  mu.log_weights = log_weights.array() - total;
  return mu;
}

HypercubeDistribution HypercubeDistribution::uniform(int n) {
  check_enum_size(n);
  return from_log_weights(n, Vector::Zero(Index(1) << n));
}

HypercubeDistribution HypercubeDistribution::product(
    const Vector& marginal_plus) {
  const int n = static_cast<int>(marginal_plus.size());
  check_enum_size(n);
  if ((marginal_plus.array() <= 0.0).any() ||
      (marginal_plus.array() >= 1.0).any())
    throw InvalidParameterError("product marginals must lie in (0, 1)");
  Vector lw(Index(1) << n);
  for (Index a = 0; a < lw.size(); ++a) {
    double acc = 0;
    for (int i = 0; i < n; ++i)
      acc += std::log((a >> i) & 1 ? marginal_plus(i) : 1 - marginal_plus(i));
    lw(a) = acc;
  }
  return from_log_weights(n, lw);
}

HypercubeDistribution HypercubeDistribution::point_mass(
    const std::vector<int>& signs) {
  const int n = static_cast<int>(signs.size());
  check_enum_size(n);
  Index idx = 0;
  for (int i = 0; i < n; ++i) {
    if (signs[i] != 1 && signs[i] != -1)
      throw InvalidParameterError("point-mass signs must be +-1");
    if (signs[i] == 1) idx |= Index(1) << i;
  }
  Vector lw = Vector::Constant(Index(1) << n, kNegInf);
  lw(idx) = 0.0;
  return from_log_weights(n, lw);
}

HypercubeDistribution HypercubeDistribution::from_table(std::istream& in) {
  std::string line;
  int n = -1;
  Vector lw;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string signs;
    double value;
    if (!(row >> signs)) continue;  // blank line
    if (signs[0] == '#') continue;
    if (!(row >> value))
      throw InvalidParameterError("table row missing log-weight: " + line);
    if (n < 0) {
      n = static_cast<int>(signs.size());
      check_enum_size(n);
      lw = Vector::Constant(Index(1) << n, kNegInf);
    }
    if (static_cast<int>(signs.size()) != n)
      throw InvalidParameterError("inconsistent sign-string length: " + line);
    Index idx = 0;
    for (int i = 0; i < n; ++i) {
      if (signs[i] == '+')
        idx |= Index(1) << i;
      else if (signs[i] != '-')
        throw InvalidParameterError("sign strings use '+' and '-' only");
    }
    lw(idx) = value;
  }
  if (n < 0) throw InvalidParameterError("empty distribution table");
  return from_log_weights(n, lw);
}

Vector HypercubeDistribution::probabilities() const {
  return log_weights.array().exp();
}

Vector HypercubeDistribution::atom(Index index) const {
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = (index >> i) & 1 ? 1.0 : -1.0;
  return x;
}

Vector HypercubeDistribution::mean() const {
  return sign_matrix(n) * probabilities();
}

Matrix HypercubeDistribution::covariance() const {
  const Matrix s = sign_matrix(n);
  const Vector p = probabilities();
  const Vector m = s * p;
  return s * p.asDiagonal() * s.transpose() - m * m.transpose();
}

HypercubeDistribution HypercubeDistribution::tilt(const Vector& w) const {
  if (w.size() != n) throw InvalidParameterError("tilt dimension mismatch");
  Vector lw = log_weights + sign_matrix(n).transpose() * w;
  return from_log_weights(n, std::move(lw));
}

// ---------------------------------------------------------------------------
// Log-Laplace transforms

double log_laplace_enum(const HypercubeDistribution& mu, const Vector& w) {
  if (w.size() != mu.n) throw InvalidParameterError("tilt dimension mismatch");
  const Index atoms = Index(1) << mu.n;
  Vector terms = Vector::Constant(atoms, kNegInf);
  for (Index a = 0; a < atoms; ++a) {
    if (mu.log_weights(a) == kNegInf) continue;
    double t = mu.log_weights(a);
    bool excluded = false;
    for (int i = 0; i < mu.n; ++i) {
      const double x = (a >> i) & 1 ? 1.0 : -1.0;
      const int branch = tilt_branch(w(i));
      if (branch != 0) {
        if ((branch > 0) != (x > 0)) {
          excluded = true;
          break;
        }
      } else {
        t += w(i) * x;
      }
    }
    if (!excluded) terms(a) = t;
  }
  return log_sum_exp(terms);
}

LaplaceOracle make_product_oracle(const Vector& p, LedgerPtr ledger) {
  const int n = static_cast<int>(p.size());
  if (n < 1) throw InvalidParameterError("empty product distribution");
  if ((p.array() <= 0.0).any() || (p.array() >= 1.0).any())
    throw InvalidParameterError(
        "product marginals must lie strictly inside (0, 1); use an "
        "enumeration table for boundary atoms");
  const Vector log_p = p.array().log();
  const Vector log_q = (1.0 - p.array()).log();

  // log(p e^w + q e^{-w}) in overflow-safe form; +-inf (or capped) entries
  // collapse to the selected branch.
  auto entry = [log_p, log_q](int i, double w) {
    const int branch = tilt_branch(w);
    if (branch > 0) return log_p(i);
    if (branch < 0) return log_q(i);
    const double aw = std::abs(w);
    const double lead = w >= 0 ? log_p(i) : log_q(i);
    const double tail = w >= 0 ? log_q(i) : log_p(i);
    return aw + lead + std::log1p(std::exp(tail - lead - 2.0 * aw));
  };

  auto query = [entry, n](const Vector& w) {
    if (w.size() != n) throw InvalidParameterError("tilt dimension mismatch");
    double acc = 0;
    for (int i = 0; i < n; ++i) acc += entry(i, w(i));
    return acc;
  };
  auto all_plus = [entry, log_p, n](const Matrix& z, Eigen::RowVectorXd& l,
                                    Matrix& l_plus) {
    l.resize(z.cols());
    l_plus.resize(n, z.cols());
    parallel_for(z.cols(), kOracleBlockColumns, [&](Index begin, Index end) {
      for (Index r = begin; r < end; ++r) {
        double acc = 0;
        for (int i = 0; i < n; ++i) {
          l_plus(i, r) = entry(i, z(i, r));  // stash entries, fix up below
          acc += l_plus(i, r);
        }
        l(r) = acc;
        for (int i = 0; i < n; ++i)
          l_plus(i, r) = acc - l_plus(i, r) + log_p(i);
      }
    });
  };
  return LaplaceOracle(std::move(query), std::move(all_plus), 0.0,
                       std::move(ledger));
}

LaplaceOracle make_enum_oracle(const HypercubeDistribution& mu,
                               LedgerPtr ledger) {
  check_enum_size(mu.n);
  const int n = mu.n;
  const Matrix signs = sign_matrix(n);
  const Vector log_w = mu.log_weights;
  auto query = [mu](const Vector& w) { return log_laplace_enum(mu, w); };

  // 0/1 selector of positive-sign atoms per coordinate, for the plus sums
  Matrix plus_mask = 0.5 * (signs.array() + 1.0);

  auto all_plus = [mu, signs, log_w, plus_mask, n](const Matrix& z,
                                                   Eigen::RowVectorXd& l,
                                                   Matrix& l_plus) {
    l.resize(z.cols());
    l_plus.resize(n, z.cols());
    parallel_for(z.cols(), kOracleBlockColumns, [&](Index begin, Index end) {
      const Index cols = end - begin;
      auto zb = z.middleCols(begin, cols);
      // columnwise log-sum-exp over atoms, vectorized across the block
      Matrix b = signs.transpose() * zb;
      b.colwise() += log_w;
      Eigen::RowVectorXd bmax = b.colwise().maxCoeff();
      b.rowwise() -= bmax;
      Matrix e = b.array().exp();
      l.segment(begin, cols) =
          bmax + e.colwise().sum().array().log().matrix();
      // log(0) = -inf is exactly the empty-restriction sentinel
      l_plus.middleCols(begin, cols) =
          ((plus_mask * e).array().log().matrix().rowwise() + bmax) - zb;

      // rare extended columns fall back to the scalar enumeration
      for (Index r = begin; r < end; ++r) {
        bool finite = true;
        for (int i = 0; i < n; ++i)
          if (tilt_branch(z(i, r)) != 0) finite = false;
        if (!finite) {
          const Vector zr = z.col(r);
          l(r) = log_laplace_enum(mu, zr);
          Vector zp = zr;
          for (int i = 0; i < n; ++i) {
            zp(i) = std::numeric_limits<double>::infinity();
            l_plus(i, r) = log_laplace_enum(mu, zp);
            zp(i) = zr(i);
          }
        }
      }
    });
  };
  return LaplaceOracle(std::move(query), std::move(all_plus), 0.0,
                       std::move(ledger));
}

LaplaceOracle approximate_wrapper(const LaplaceOracle& oracle, double eps,
                                  std::uint64_t seed) {
  if (eps < 0) throw InvalidParameterError("eps must be >= 0");
  if (eps == 0.0)
    return LaplaceOracle(oracle.raw_query(), oracle.raw_all_plus(),
                         oracle.eps(), oracle.ledger());
  auto base_query = oracle.raw_query();
  auto base_all_plus = oracle.raw_all_plus();
  auto query = [base_query, eps, seed](const Vector& w) {
    return base_query(w) +
           signed_eps(hash_tilt(w.data(), w.size(), seed), eps);
  };
  auto all_plus = [base_all_plus, eps, seed](const Matrix& z,
                                             Eigen::RowVectorXd& l,
                                             Matrix& l_plus) {
    base_all_plus(z, l, l_plus);
    const Index n = z.rows();
    const double inf = std::numeric_limits<double>::infinity();
    parallel_for(z.cols(), kOracleBlockColumns, [&](Index begin, Index end) {
      for (Index r = begin; r < end; ++r) {
        l(r) += signed_eps(hash_tilt(z.col(r).data(), n, seed), eps);
        for (Index i = 0; i < n; ++i)
          l_plus(i, r) +=
              signed_eps(hash_tilt(z.col(r).data(), n, seed, i, inf), eps);
      }
    });
  };
  return LaplaceOracle(std::move(query), std::move(all_plus),
                       oracle.eps() + eps, oracle.ledger());
}

// ---------------------------------------------------------------------------
// Tilted means and scores

Matrix tilted_mean_batch(const LaplaceOracle& oracle, const Matrix& z,
                         std::int64_t logical_points) {
  const Index n = z.rows();
  Eigen::RowVectorXd l;
  Matrix l_plus;
  const std::int64_t points =
      logical_points >= 0 ? logical_points : z.cols();
  oracle.query_all_plus(z, l, l_plus, (n + 1) * points);
  Matrix mean(n, z.cols());
  parallel_for(z.cols(), kOracleBlockColumns, [&](Index begin, Index end) {
    const Index cols = end - begin;
    // -inf at l_plus exponentiates to 0 and lands exactly on the -1 clamp
    mean.middleCols(begin, cols) =
        (2.0 * ((z.middleCols(begin, cols) + l_plus.middleCols(begin, cols))
                    .rowwise() -
                l.segment(begin, cols))
                   .array()
                   .exp() -
         1.0)
            .cwiseMin(1.0)
            .cwiseMax(-1.0);
  });
  return mean;
}

Vector tilted_mean_from_laplace(const LaplaceOracle& oracle, const Vector& z) {
  return tilted_mean_batch(oracle, z, 1).col(0);
}

Vector convolved_score(const LaplaceOracle& oracle, const Vector& w, double c,
                       const Vector& y) {
  if (c <= 0) throw InvalidParameterError("convolution scale c must be > 0");
  const Vector z = y / c + w;
  return (y - tilted_mean_from_laplace(oracle, z)) / c;
}

TiltCovarianceReport verify_tilt_covariance_bound(
    const HypercubeDistribution& mu, double c,
    const std::vector<Vector>& tilt_grid) {
  TiltCovarianceReport report;
  for (const auto& w : tilt_grid) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(mu.tilt(w).covariance());
    const double lam = es.eigenvalues().maxCoeff();
    report.per_tilt_max.push_back(lam);
    report.max_eigenvalue = std::max(report.max_eigenvalue, lam);
  }
  report.passes = report.max_eigenvalue <= c / 2.0 + 1e-10;
  return report;
}

// ---------------------------------------------------------------------------
// Localization loop

int localization_steps(int n, const LocalizationConfig& config) {
  if (config.c <= 0 || config.epsilon <= 0 || config.t_constant <= 0)
    throw InvalidParameterError("invalid localization parameters");
  return static_cast<int>(std::ceil(
      config.t_constant * config.c * std::log(n / config.epsilon + M_E)));
}

double localization_inner_accuracy(int n, const LocalizationConfig& config) {
  return config.epsilon / (2.0 * localization_steps(n, config));
}

LocalizationResult run_localization_sampler(const LaplaceOracle& oracle, int n,
                                            const LocalizationConfig& config,
                                            Index runs,
                                            std::uint64_t rng_seed) {
  if (n < 1) throw InvalidParameterError("dimension must be >= 1");
  if (runs < 1) throw InvalidParameterError("need at least one run");
  const double c = config.c;
  const int steps = localization_steps(n, config);
  const double eta = localization_inner_accuracy(n, config);
  const double alpha = 1.0 / (2.0 * c);
  const double beta = 1.0 / c;
  const double kl0 = n / (2.0 * c);

  // Per-run external field; the inner sampler sees a per-replica target.
  Matrix field = Matrix::Zero(n, runs);

  TargetModel convolved;
  convolved.dimension = n;
  convolved.alpha = alpha;
  convolved.beta = beta;
  convolved.minimizer = Vector::Zero(n);
  struct Buffers {
    Matrix z, l_plus;
    Eigen::RowVectorXd l;
  };
  auto buf = std::make_shared<Buffers>();
  convolved.score_batch = [&field, &oracle, buf, c, runs, n](
                              Eigen::Ref<const Matrix> x, Matrix& out) {
    const Index cols = x.cols();
    if (cols % runs != 0)
      throw InvalidParameterError("batch is not replica-aligned");
    const Index points = cols / runs;
    buf->z.resize(x.rows(), cols);
    for (Index m = 0; m < points; ++m)
      buf->z.middleCols(m * runs, runs) =
          x.middleCols(m * runs, runs) / c + field;
    oracle.query_all_plus(buf->z, buf->l, buf->l_plus, (n + 1) * points);
    parallel_for(cols, kOracleBlockColumns, [&](Index begin, Index bend) {
      const Index width = bend - begin;
      // score = (y - clamped tilted mean) / c, all in one fused expression
      out.middleCols(begin, width) =
          (x.middleCols(begin, width) -
           (2.0 *
                ((buf->z.middleCols(begin, width) +
                  buf->l_plus.middleCols(begin, width))
                     .rowwise() -
                 buf->l.segment(begin, width))
                    .array()
                    .exp() -
            1.0)
               .cwiseMin(1.0)
               .cwiseMax(-1.0)
               .matrix()) /
          c;
    });
  };

  const double delta_budget =
      config.epsilon;  // advisory; exactness comes from the oracle eps
  ScoreOracle inner_oracle(convolved.score_batch, delta_budget, nullptr);

  LocalizationResult result;
  result.steps = steps;
  result.inner_accuracy = eta;

  GridSchedule lmc_schedule;
  UlmcSchedule ulmc_schedule;
  bool ack = config.acknowledge_override;
  if (config.use_ulmc) {
    ulmc_schedule = config.ulmc_override
                        ? *config.ulmc_override
                        : plan_ulmc_params(alpha, beta, n, eta);
  } else {
    lmc_schedule = config.lmc_override
                       ? *config.lmc_override
                       : plan_lmc_params(alpha, beta, n, eta, kl0);
  }
  if (!config.lmc_override && !config.ulmc_override) ack = false;

  const GaussianInit init{Vector::Zero(n), c};
  for (int i = 0; i < steps; ++i) {
    const std::uint64_t step_seed = derive_seed(rng_seed, 0x10c, i);
    Matrix x;
    if (config.use_ulmc) {
      x = run_parallel_ulmc(convolved, inner_oracle, ulmc_schedule, runs,
                            step_seed, ack)
              .samples;
    } else {
      x = run_parallel_lmc(convolved, inner_oracle, lmc_schedule, init, runs,
                           step_seed, ack)
              .samples;
    }
    field += x / c;
  }

  result.field = field;
  // sign(0) = +1: fixed tie-break for reproducibility.
  result.signs = field.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
  return result;
}

}  // namespace parlang
